#include "wsgat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "wsgat/errors.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::spectral {

Matrix SymmetricSparse::multiply(const Matrix& x) const {
    if (x.rows() != n) throw ShapeError("SymmetricSparse::multiply: row mismatch");
    const std::size_t k = x.cols();
    Matrix out(n, k);
    for (std::size_t r = 0; r < n; ++r) {
        double* dst = out.row(r).data();
        for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) {
            const double v = values[p];
            const double* src = x.row(cols[p]).data();
            for (std::size_t c = 0; c < k; ++c) dst[c] += v * src[c];
        }
    }
    return out;
}

Matrix SymmetricSparse::to_dense() const {
    Matrix d(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) d(r, cols[p]) += values[p];
    return d;
}

SymmetricSparse signed_adjacency(const graph::SignedWeightedGraph& g) {
    std::vector<std::map<std::uint32_t, double>> rows(g.num_nodes());
    for (const auto& e : g.edges()) {
        const double s = e.weight > 0 ? 0.5 : -0.5;
        rows[e.src][e.dst] += s;
        rows[e.dst][e.src] += s;
    }
    SymmetricSparse s;
    s.n = g.num_nodes();
    s.offsets.assign(s.n + 1, 0);
    for (std::size_t r = 0; r < s.n; ++r) {
        for (const auto& [c, v] : rows[r]) {
            if (v == 0.0) continue;  // opposite-sign reciprocal arcs cancel
            s.cols.push_back(c);
            s.values.push_back(v);
        }
        s.offsets[r + 1] = s.cols.size();
    }
    return s;
}

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += a[r] * b[r];
    return s;
}

/// Modified Gram-Schmidt, two passes, on a transposed copy so every column
/// is contiguous. Columns that collapse numerically are replaced by fresh
/// random directions.
void orthonormalize(Matrix& q, Rng& rng) {
    const std::size_t n = q.rows();
    const std::size_t k = q.cols();
    Matrix t(k, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) t(c, r) = q(r, c);
    for (std::size_t c = 0; c < k; ++c) {
        double* col = t.row(c).data();
        for (int attempt = 0; attempt < 8; ++attempt) {
            const double before = std::sqrt(dot(col, col, n));
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t p = 0; p < c; ++p) {
                    const double* prev = t.row(p).data();
                    const double d = dot(prev, col, n);
                    for (std::size_t r = 0; r < n; ++r) col[r] -= d * prev[r];
                }
            const double norm = std::sqrt(dot(col, col, n));
            if (norm > 1e-10 * std::max(before, 1e-300) && norm > 1e-300) {
                for (std::size_t r = 0; r < n; ++r) col[r] /= norm;
                break;
            }
            for (std::size_t r = 0; r < n; ++r) col[r] = rng.normal();
        }
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) q(r, c) = t(c, r);
}

Matrix multiply_small(const Matrix& a, const Matrix& v) { return autodiff::matmul(a, v); }

// T_m(S / a) q by the three-term recurrence, given sq = S q. Entries of the
// spectrum inside [-a, a] stay bounded by 1; larger |lambda| grow like
// cosh(m acosh(|lambda| / a)). Both terms are rescaled together, which
// leaves the span unchanged and keeps magnitudes finite.
Matrix chebyshev_filter(const SymmetricSparse& s, Matrix prev, const Matrix& sq, double a,
                        std::size_t degree) {
    Matrix cur = sq;
    for (double& v : cur.values()) v /= a;
    for (std::size_t k = 1; k < degree; ++k) {
        Matrix next = s.multiply(cur);
        const auto nv = next.values();
        const auto pv = prev.values();
        double peak = 0.0;
        for (std::size_t i = 0; i < nv.size(); ++i) {
            nv[i] = 2.0 * nv[i] / a - pv[i];
            peak = std::max(peak, std::abs(nv[i]));
        }
        prev = std::move(cur);
        cur = std::move(next);
        if (peak > 1e100) {
            for (double& v : prev.values()) v /= peak;
            for (double& v : cur.values()) v /= peak;
        }
    }
    return cur;
}

std::string format_residual(double r) {
    std::ostringstream out;
    out << std::setprecision(3) << r;
    return out.str();
}

}  // namespace

std::vector<double> jacobi_eigen(Matrix a, Matrix& vectors) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ShapeError("jacobi_eigen: matrix must be square");
    vectors = Matrix::identity(n);
    double total = 0.0;
    for (double v : a.values()) total += v * v;
    const double threshold = 1e-30 * std::max(total, 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off <= threshold) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p);
                    const double vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

SpectralEmbedding top_eigenpairs(const SymmetricSparse& s, const SpectralOptions& options) {
    const std::size_t n = s.n;
    const std::size_t d = options.dim;
    if (d == 0 || d > n)
        throw Error("spectral embedding dimension " + std::to_string(d) + " must lie in [1, " +
                    std::to_string(n) + "]");
    const std::size_t extra = options.oversample == 0 ? std::max<std::size_t>(8, d) : options.oversample;
    const std::size_t p = std::min(n, d + extra);

    Rng rng(options.seed);
    Matrix q(n, p);
    for (double& v : q.values()) v = rng.normal();
    orthonormalize(q, rng);

    std::vector<double> lambda(p, 0.0);
    Matrix y = s.multiply(q);
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    double scale = 0.0;
    for (iter = 1; iter <= options.max_iters; ++iter) {
        // Rayleigh-Ritz on span(q): T = q^T S q.
        Matrix t(p, p);
        autodiff::matmul_add_tn(q, y, t);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) {
                const double avg = 0.5 * (t(i, j) + t(j, i));
                t(i, j) = t(j, i) = avg;
            }
        Matrix v;
        std::vector<double> eig = jacobi_eigen(t, v);
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Descending |lambda|; among magnitudes equal to rounding, positive first.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ma = std::abs(eig[a]);
            const double mb = std::abs(eig[b]);
            if (std::abs(ma - mb) <= 1e-10 * std::max(ma, mb)) return eig[a] > eig[b];
            return ma > mb;
        });
        Matrix vs(p, p);
        for (std::size_t c = 0; c < p; ++c) {
            lambda[c] = eig[order[c]];
            for (std::size_t r = 0; r < p; ++r) vs(r, c) = v(r, order[c]);
        }
        q = multiply_small(q, vs);
        y = multiply_small(y, vs);

        scale = std::max(std::abs(lambda[0]), 1e-300);
        residual = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double r2 = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double diff = y(r, c) - lambda[c] * q(r, c);
                r2 += diff * diff;
            }
            // Near-zero eigenvalues are judged on the absolute residual.
            const double denom = std::abs(lambda[c]) > 1e-12 * scale ? std::abs(lambda[c]) : scale;
            residual = std::max(residual, std::sqrt(r2) / denom);
        }
        if (residual < options.tolerance) break;

        // Damp everything no larger than the weakest Ritz value in the block.
        const double floor = std::abs(lambda[p - 1]);
        if (options.filter_degree > 1 && floor > 1e-12 * scale)
            q = chebyshev_filter(s, std::move(q), y, floor, options.filter_degree);
        else
            q = y;
        orthonormalize(q, rng);
        y = s.multiply(q);
    }
    if (!(residual < options.tolerance))
        throw ConvergenceError("signed spectral embedding did not converge in " +
                                   std::to_string(options.max_iters) +
                                   " iterations (residual " + format_residual(residual) + ")",
                               residual);

    SpectralEmbedding out;
    out.iterations = std::min(iter, options.max_iters);
    out.max_residual = residual;
    out.vectors = Matrix(n, d);
    out.eigenvalues.assign(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t c = 0; c < d; ++c) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < n; ++r)
            if (std::abs(q(r, c)) > std::abs(q(arg, c))) arg = r;
        const double flip = q(arg, c) < 0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = flip * q(r, c);
    }
    return out;
}

SpectralEmbedding signed_spectral_embedding(const graph::SignedWeightedGraph& g,
                                            const SpectralOptions& options) {
    return top_eigenpairs(signed_adjacency(g), options);
}

FallbackKind parse_fallback_kind(const std::string& name) {
    if (name == "degree_onehot_log") return FallbackKind::degree_onehot_log;
    if (name == "random_normal") return FallbackKind::random_normal;
    throw ConfigError("unknown feature kind '" + name + "'");
}

Matrix fallback_features(const graph::SignedWeightedGraph& g, FallbackKind kind, std::size_t d,
                         std::uint64_t seed) {
    if (d == 0) throw ConfigError("feature dimension must be >= 1");
    const std::size_t n = g.num_nodes();
    Matrix x(n, d);
    if (kind == FallbackKind::random_normal) {
        Rng rng(seed);
        for (double& v : x.values()) v = rng.normal();
        return x;
    }
    for (std::size_t u = 0; u < n; ++u) {
        const auto id = static_cast<graph::NodeId>(u);
        double w_in = 0.0;
        double w_out = 0.0;
        const auto& in = g.csr_in();
        const auto& out = g.csr_out();
        for (std::size_t k = in.offsets[u]; k < in.offsets[u + 1]; ++k) w_in += in.weights[k];
        for (std::size_t k = out.offsets[u]; k < out.offsets[u + 1]; ++k) w_out += out.weights[k];
        const double row[4] = {std::log1p(static_cast<double>(in.degree(id))),
                               std::log1p(static_cast<double>(out.degree(id))), w_in, w_out};
        for (std::size_t c = 0; c < std::min<std::size_t>(4, d); ++c) x(u, c) = row[c];
    }
    return x;
}

}  // namespace wsgat::spectral
