#include "wsgat/autodiff/matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "wsgat/errors.hpp"

namespace wsgat::autodiff {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Matrix(n, 1, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    // v - v is +0 for finite v and NaN otherwise; OR-ing the bits vectorizes.
    std::uint64_t bad = 0;
    for (double v : data_) bad |= std::bit_cast<std::uint64_t>(v - v);
    return bad == 0;
}

std::string Matrix::shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

namespace {

// Register tile: four rows of c by two 4-wide vectors, held in accumulators
// for the whole reduction. Lanes perform plain IEEE multiplies and adds (no
// FMA), so each entry sees the same operations as the scalar loops.
using V4 = double __attribute__((vector_size(32)));
constexpr std::size_t kTile = 8;

inline V4 load4(const double* p) {
    V4 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline void store4(double* p, V4 v) { std::memcpy(p, &v, sizeof v); }
inline V4 splat(double x) { return V4{x, x, x, x}; }

// c(i, :) += sum_k a(i, k) * b(k, :). Every output entry starts from its
// current value and accumulates over k in increasing order, so the result
// does not depend on tiling or on which rows share a tile.
// AVX2 without FMA performs the same IEEE multiplies and adds as the
// baseline build, so both clones give bit-identical results.
__attribute__((target_clones("avx2", "default")))
void gemm_rows(const double* a, std::size_t a_stride, std::size_t rows, std::size_t inner,
               const double* b, std::size_t n, double* c) {
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
        const double* a0 = a + i * a_stride;
        const double* a1 = a0 + a_stride;
        const double* a2 = a1 + a_stride;
        const double* a3 = a2 + a_stride;
        double* c0 = c + i * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        std::size_t j0 = 0;
        for (; j0 + kTile <= n; j0 += kTile) {
            V4 t0l = load4(c0 + j0), t0h = load4(c0 + j0 + 4);
            V4 t1l = load4(c1 + j0), t1h = load4(c1 + j0 + 4);
            V4 t2l = load4(c2 + j0), t2h = load4(c2 + j0 + 4);
            V4 t3l = load4(c3 + j0), t3h = load4(c3 + j0 + 4);
            for (std::size_t k = 0; k < inner; ++k) {
                const double* br = b + k * n + j0;
                const V4 bl = load4(br), bh = load4(br + 4);
                const V4 s0 = splat(a0[k]), s1 = splat(a1[k]), s2 = splat(a2[k]), s3 = splat(a3[k]);
                t0l += s0 * bl;
                t0h += s0 * bh;
                t1l += s1 * bl;
                t1h += s1 * bh;
                t2l += s2 * bl;
                t2h += s2 * bh;
                t3l += s3 * bl;
                t3h += s3 * bh;
            }
            store4(c0 + j0, t0l), store4(c0 + j0 + 4, t0h);
            store4(c1 + j0, t1l), store4(c1 + j0 + 4, t1h);
            store4(c2 + j0, t2l), store4(c2 + j0 + 4, t2h);
            store4(c3 + j0, t3l), store4(c3 + j0 + 4, t3h);
        }
        for (std::size_t k = 0; k < inner && j0 < n; ++k) {
            const double s0 = a0[k], s1 = a1[k], s2 = a2[k], s3 = a3[k];
            const double* br = b + k * n;
            for (std::size_t j = j0; j < n; ++j) {
                c0[j] += s0 * br[j];
                c1[j] += s1 * br[j];
                c2[j] += s2 * br[j];
                c3[j] += s3 * br[j];
            }
        }
    }
    for (; i < rows; ++i) {
        const double* ar = a + i * a_stride;
        double* __restrict cr = c + i * n;
        for (std::size_t k = 0; k < inner; ++k) {
            const double s = ar[k];
            const double* __restrict br = b + k * n;
            for (std::size_t j = 0; j < n; ++j) cr[j] += s * br[j];
        }
    }
}

// c(k, :) += sum_i a(i, k) * b(i, :), i ascending per output entry. Rows
// are consumed in chunks small enough to stay cached across all tiles;
// chunks run in order, so chunking does not change any entry's sum.
constexpr std::size_t kRowChunk = 64;

__attribute__((target_clones("avx2", "default")))
void gemm_tn(const double* a, std::size_t rows, std::size_t m, const double* b, std::size_t n,
             double* c) {
    for (std::size_t i_lo = 0; i_lo < rows; i_lo += kRowChunk) {
        const std::size_t i_hi = std::min(rows, i_lo + kRowChunk);
        std::size_t k = 0;
        for (; k + 4 <= m; k += 4) {
            double* c0 = c + k * n;
            double* c1 = c0 + n;
            double* c2 = c1 + n;
            double* c3 = c2 + n;
            std::size_t j0 = 0;
            for (; j0 + kTile <= n; j0 += kTile) {
                V4 t0l = load4(c0 + j0), t0h = load4(c0 + j0 + 4);
                V4 t1l = load4(c1 + j0), t1h = load4(c1 + j0 + 4);
                V4 t2l = load4(c2 + j0), t2h = load4(c2 + j0 + 4);
                V4 t3l = load4(c3 + j0), t3h = load4(c3 + j0 + 4);
                for (std::size_t i = i_lo; i < i_hi; ++i) {
                    const double* ai = a + i * m + k;
                    const double* bi = b + i * n + j0;
                    const V4 bl = load4(bi), bh = load4(bi + 4);
                    const V4 s0 = splat(ai[0]), s1 = splat(ai[1]), s2 = splat(ai[2]), s3 = splat(ai[3]);
                    t0l += s0 * bl;
                    t0h += s0 * bh;
                    t1l += s1 * bl;
                    t1h += s1 * bh;
                    t2l += s2 * bl;
                    t2h += s2 * bh;
                    t3l += s3 * bl;
                    t3h += s3 * bh;
                }
                store4(c0 + j0, t0l), store4(c0 + j0 + 4, t0h);
                store4(c1 + j0, t1l), store4(c1 + j0 + 4, t1h);
                store4(c2 + j0, t2l), store4(c2 + j0 + 4, t2h);
                store4(c3 + j0, t3l), store4(c3 + j0 + 4, t3h);
            }
            for (std::size_t i = i_lo; i < i_hi && j0 < n; ++i) {
                const double* ai = a + i * m + k;
                const double s0 = ai[0], s1 = ai[1], s2 = ai[2], s3 = ai[3];
                const double* bi = b + i * n;
                for (std::size_t j = j0; j < n; ++j) {
                    c0[j] += s0 * bi[j];
                    c1[j] += s1 * bi[j];
                    c2[j] += s2 * bi[j];
                    c3[j] += s3 * bi[j];
                }
            }
        }
        for (; k < m; ++k) {
            double* __restrict ck = c + k * n;
            for (std::size_t i = i_lo; i < i_hi; ++i) {
                const double s = a[i * m + k];
                const double* __restrict bi = b + i * n;
                for (std::size_t j = 0; j < n; ++j) ck[j] += s * bi[j];
            }
        }
    }
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ " + a.shape_string() + " * " +
                         b.shape_string());
    Matrix c(a.rows(), b.cols());
    if (c.empty() || a.cols() == 0) return c;
    gemm_rows(a.values().data(), a.cols(), a.rows(), a.cols(), b.values().data(), b.cols(),
              c.values().data());
    return c;
}

void matmul_add_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    // c += a * b^T
    if (c.empty() || a.cols() == 0) return;
    const Matrix bt = transpose(b);
    gemm_rows(a.values().data(), a.cols(), a.rows(), a.cols(), bt.values().data(), bt.cols(),
              c.values().data());
}

void matmul_add_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    // c += a^T * b
    if (c.empty() || a.rows() == 0) return;
    gemm_tn(a.values().data(), a.rows(), a.cols(), b.values().data(), b.cols(), c.values().data());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace wsgat::autodiff
