#include "wsgat/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsgat/errors.hpp"

namespace wsgat::autodiff {

namespace {

enum class Broadcast { same, scalar, row };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
    if (a.same_shape(b)) return Broadcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
    throw ShapeError(std::string(op) + ": cannot broadcast " + b.shape_string() + " onto " +
                     a.shape_string());
}

inline double bval(const Matrix& b, Broadcast k, std::size_t r, std::size_t c) {
    switch (k) {
        case Broadcast::same: return b(r, c);
        case Broadcast::scalar: return b[0];
        case Broadcast::row: return b[c];
    }
    return 0.0;
}

/// Reduces a full-shape gradient onto b's broadcast shape.
Matrix reduce_to(const Matrix& g, Broadcast k, const Matrix& b) {
    if (k == Broadcast::same) return g;
    Matrix out(b.rows(), b.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) out[k == Broadcast::scalar ? 0 : c] += g(r, c);
    return out;
}

Tape& tape_of(const Var& v) {
    if (!v.valid()) throw TapeError("operation on an unbound Var");
    return v.tape();
}

template <class F, class D>
Var unary(const char* op, const Var& x, F f, D df) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    Matrix out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    const Var in[] = {x};
    return t.record(op, std::move(out), in, [x, df](Tape& tp, const Matrix& g) {
        if (!x.requires_grad()) return;
        const Matrix& xv = x.value();
        Matrix& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * df(xv[i]);
    });
}

/// Unary op whose derivative is expressed through the output value.
template <class F, class D>
Var unary_by_output(const char* op, const Var& x, F f, D df_from_y) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    Matrix out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    Matrix y = out;
    const Var in[] = {x};
    return t.record(op, std::move(out), in, [x, y = std::move(y), df_from_y](Tape& tp, const Matrix& g) {
        if (!x.requires_grad()) return;
        Matrix& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * df_from_y(y[i]);
    });
}

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

Var matmul(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    Matrix out = autodiff::matmul(a.value(), b.value());
    const Var in[] = {a, b};
    return t.record("matmul", std::move(out), in, [a, b](Tape& tp, const Matrix& g) {
        if (a.requires_grad()) matmul_add_nt(g, b.value(), tp.grad_buffer(a));
        if (b.requires_grad()) matmul_add_tn(a.value(), g, tp.grad_buffer(b));
    });
}

Var add(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const Broadcast k = broadcast_kind("add", av, bv);
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) + bval(bv, k, r, c);
    const Var in[] = {a, b};
    return t.record("add", std::move(out), in, [a, b, k](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        if (b.requires_grad()) tp.accumulate(b, reduce_to(g, k, b.value()));
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const Broadcast k = broadcast_kind("sub", av, bv);
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - bval(bv, k, r, c);
    const Var in[] = {a, b};
    return t.record("sub", std::move(out), in, [a, b, k](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        if (b.requires_grad()) {
            Matrix gb = reduce_to(g, k, b.value());
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = -gb[i];
            tp.accumulate(b, gb);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const Broadcast k = broadcast_kind("mul", av, bv);
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * bval(bv, k, r, c);
    const Var in[] = {a, b};
    return t.record("mul", std::move(out), in, [a, b, k](Tape& tp, const Matrix& g) {
        const Matrix& av = a.value();
        const Matrix& bv = b.value();
        if (a.requires_grad()) {
            Matrix& ga = tp.grad_buffer(a);
            for (std::size_t r = 0; r < av.rows(); ++r)
                for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += g(r, c) * bval(bv, k, r, c);
        }
        if (b.requires_grad()) {
            Matrix full(av.rows(), av.cols());
            for (std::size_t i = 0; i < full.size(); ++i) full[i] = g[i] * av[i];
            tp.accumulate(b, reduce_to(full, k, bv));
        }
    });
}

Var scale(const Var& a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; },
                 [factor](double) { return factor; });
}

Var scale_rows(const Var& a, const Var& s) {
    Tape& t = tape_of(a);
    const Matrix& av = a.value();
    const Matrix& sv = s.value();
    if (sv.rows() != av.rows() || sv.cols() != 1)
        throw ShapeError("scale_rows: scale " + sv.shape_string() + " does not fit " +
                         av.shape_string());
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * sv[r];
    const Var in[] = {a, s};
    return t.record("scale_rows", std::move(out), in, [a, s](Tape& tp, const Matrix& g) {
        const Matrix& av = a.value();
        const Matrix& sv = s.value();
        if (a.requires_grad()) {
            Matrix& ga = tp.grad_buffer(a);
            for (std::size_t r = 0; r < av.rows(); ++r)
                for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += g(r, c) * sv[r];
        }
        if (s.requires_grad()) {
            Matrix& gs = tp.grad_buffer(s);
            for (std::size_t r = 0; r < av.rows(); ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < av.cols(); ++c) acc += g(r, c) * av(r, c);
                gs[r] += acc;
            }
        }
    });
}

Var concat(std::span<const Var> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
    Tape& t = tape_of(parts.front());
    std::vector<Var> kept;
    for (const Var& p : parts)
        if (p.value().size() != 0) kept.push_back(p);
    if (kept.empty()) kept.push_back(parts.front());

    std::size_t rows = 0;
    std::size_t cols = 0;
    for (const Var& p : kept) {
        const Matrix& v = p.value();
        if (axis == 0) {
            if (rows != 0 && cols != v.cols())
                throw ShapeError("concat(axis=0): column mismatch " + v.shape_string());
            cols = v.cols();
            rows += v.rows();
        } else {
            if (cols != 0 && rows != v.rows())
                throw ShapeError("concat(axis=1): row mismatch " + v.shape_string());
            rows = v.rows();
            cols += v.cols();
        }
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : kept) {
        const Matrix& v = p.value();
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) {
                if (axis == 0)
                    out(offset + r, c) = v(r, c);
                else
                    out(r, offset + c) = v(r, c);
            }
        offset += axis == 0 ? v.rows() : v.cols();
    }
    return t.record("concat", std::move(out), kept, [kept, axis](Tape& tp, const Matrix& g) {
        std::size_t offset = 0;
        for (const Var& p : kept) {
            const Matrix& v = p.value();
            if (p.requires_grad()) {
                Matrix& gp = tp.grad_buffer(p);
                for (std::size_t r = 0; r < v.rows(); ++r)
                    for (std::size_t c = 0; c < v.cols(); ++c)
                        gp(r, c) += axis == 0 ? g(offset + r, c) : g(r, offset + c);
            }
            offset += axis == 0 ? v.rows() : v.cols();
        }
    });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    if (begin > end || end > xv.rows())
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + xv.shape_string());
    Matrix out(end - begin, xv.cols());
    std::copy(xv.values().begin() + begin * xv.cols(), xv.values().begin() + end * xv.cols(),
              out.values().begin());
    const Var in[] = {x};
    return t.record("slice_rows", std::move(out), in, [x, begin](Tape& tp, const Matrix& g) {
        Matrix& gx = tp.grad_buffer(x);
        const std::size_t offset = begin * gx.cols();
        for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
    });
}

Var gather_rows(const Var& x, std::span<const std::uint32_t> index) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    const std::size_t cols = xv.cols();
    Matrix out(index.size(), cols);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= xv.rows())
            throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range " +
                             xv.shape_string());
        std::copy_n(xv.row(index[r]).data(), cols, out.row(r).data());
    }
    std::vector<std::uint32_t> idx(index.begin(), index.end());
    const Var in[] = {x};
    return t.record("gather_rows", std::move(out), in,
                    [x, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                        Matrix& gx = tp.grad_buffer(x);
                        const std::size_t cols = g.cols();
                        for (std::size_t r = 0; r < idx.size(); ++r) {
                            double* dst = gx.row(idx[r]).data();
                            const double* src = g.row(r).data();
                            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                        }
                    });
}

Var scatter_add_rows(const Var& x, std::span<const std::uint32_t> index, std::size_t num_rows) {
    Tape& t = tape_of(x);
    const Matrix& xv = x.value();
    if (index.size() != xv.rows())
        throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                         xv.shape_string());
    const std::size_t cols = xv.cols();
    Matrix out(num_rows, cols);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= num_rows) throw ShapeError("scatter_add_rows: index out of range");
        double* dst = out.row(index[r]).data();
        const double* src = xv.row(r).data();
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
    std::vector<std::uint32_t> idx(index.begin(), index.end());
    const Var in[] = {x};
    return t.record("scatter_add_rows", std::move(out), in,
                    [x, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                        Matrix& gx = tp.grad_buffer(x);
                        const std::size_t cols = g.cols();
                        for (std::size_t r = 0; r < idx.size(); ++r) {
                            const double* src = g.row(idx[r]).data();
                            double* dst = gx.row(r).data();
                            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                        }
                    });
}

Var leaky_relu(const Var& x, double slope) {
    tape_of(x).note_kinks(x.value().values());
    return unary("leaky_relu", x, [slope](double v) { return v > 0 ? v : slope * v; },
                 [slope](double v) { return v > 0 ? 1.0 : slope; });
}

Var relu(const Var& x) {
    tape_of(x).note_kinks(x.value().values());
    return unary("relu", x, [](double v) { return v > 0 ? v : 0.0; },
                 [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var elu(const Var& x, double alpha) {
    return unary("elu", x, [alpha](double v) { return v > 0 ? v : alpha * std::expm1(v); },
                 [alpha](double v) { return v > 0 ? 1.0 : alpha * std::exp(v); });
}

Var tanh(const Var& x) {
    return unary_by_output("tanh", x, [](double v) { return std::tanh(v); },
                           [](double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
    return unary_by_output("sigmoid", x, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
    return unary_by_output("exp", x, [](double v) { return std::exp(v); },
                           [](double y) { return y; });
}

Var abs(const Var& x) {
    tape_of(x).note_kinks(x.value().values());
    return unary("abs", x, [](double v) { return std::abs(v); }, sgn);
}

Var sign(const Var& x) {
    tape_of(x).note_kinks(x.value().values());
    return unary("sign", x, sgn, [](double) { return 0.0; });
}

Var square(const Var& x) {
    return unary("square", x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var identity(const Var& x) {
    return unary("identity", x, [](double v) { return v; }, [](double) { return 1.0; });
}

Var sum(const Var& x) {
    Tape& t = tape_of(x);
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const Var in[] = {x};
    return t.record("sum", Matrix::scalar(s), in, [x](Tape& tp, const Matrix& g) {
        Matrix& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
    });
}

Var mean(const Var& x) {
    Tape& t = tape_of(x);
    const std::size_t n = x.value().size();
    if (n == 0) throw ShapeError("mean of an empty tensor");
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const Var in[] = {x};
    return t.record("mean", Matrix::scalar(s / static_cast<double>(n)), in,
                    [x, n](Tape& tp, const Matrix& g) {
                        Matrix& gx = tp.grad_buffer(x);
                        const double share = g[0] / static_cast<double>(n);
                        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += share;
                    });
}

Var segment_signed_softmax(const Var& logits, std::span<const std::uint32_t> segment,
                           std::size_t num_segments) {
    Tape& t = tape_of(logits);
    const Matrix& ev = logits.value();
    if (ev.cols() != 1 || ev.rows() != segment.size())
        throw ShapeError("segment_signed_softmax: logits " + ev.shape_string() + " vs " +
                         std::to_string(segment.size()) + " segment ids");
    t.note_kinks(ev.values());
    const std::size_t n = ev.rows();
    std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j) {
        if (segment[j] >= num_segments)
            throw ShapeError("segment_signed_softmax: segment id out of range");
        seg_max[segment[j]] = std::max(seg_max[segment[j]], std::abs(ev[j]));
    }
    Matrix prob(n, 1);
    std::vector<double> seg_sum(num_segments, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        prob[j] = std::exp(std::abs(ev[j]) - seg_max[segment[j]]);
        seg_sum[segment[j]] += prob[j];
    }
    Matrix out(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
        prob[j] /= seg_sum[segment[j]];
        out[j] = sgn(ev[j]) * prob[j];
    }
    std::vector<std::uint32_t> seg(segment.begin(), segment.end());
    const Var in[] = {logits};
    return t.record(
        "segment_signed_softmax", std::move(out), in,
        [logits, seg = std::move(seg), prob = std::move(prob), num_segments](Tape& tp,
                                                                             const Matrix& g) {
            const Matrix& ev = logits.value();
            const std::size_t n = ev.rows();
            // dL/dp_j = s_j * dL/dalpha_j
            std::vector<double> dot(num_segments, 0.0);
            for (std::size_t j = 0; j < n; ++j) dot[seg[j]] += prob[j] * sgn(ev[j]) * g[j];
            Matrix& ge = tp.grad_buffer(logits);
            for (std::size_t j = 0; j < n; ++j) {
                const double s = sgn(ev[j]);
                const double d_abs = prob[j] * (s * g[j] - dot[seg[j]]);
                ge[j] += s * d_abs;
            }
        });
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::uint32_t> labels) {
    Tape& t = tape_of(logits);
    const Matrix& lv = logits.value();
    if (lv.rows() != labels.size() || lv.rows() == 0)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + lv.shape_string());
    const std::size_t n = lv.rows();
    const std::size_t classes = lv.cols();
    Matrix probs(n, classes);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] >= classes) throw ShapeError("softmax_cross_entropy: label out of range");
        const auto row = lv.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            probs(r, c) = std::exp(row[c] - m);
            z += probs(r, c);
        }
        for (std::size_t c = 0; c < classes; ++c) probs(r, c) /= z;
        loss += (m + std::log(z)) - row[labels[r]];
    }
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    const Var in[] = {logits};
    return t.record("softmax_cross_entropy", Matrix::scalar(loss / static_cast<double>(n)), in,
                    [logits, lab = std::move(lab), probs = std::move(probs)](Tape& tp,
                                                                             const Matrix& g) {
                        Matrix& gl = tp.grad_buffer(logits);
                        const double share = g[0] / static_cast<double>(probs.rows());
                        for (std::size_t r = 0; r < probs.rows(); ++r)
                            for (std::size_t c = 0; c < probs.cols(); ++c)
                                gl(r, c) += share * (probs(r, c) - (c == lab[r] ? 1.0 : 0.0));
                    });
}

Var bce_with_logits(const Var& logits, std::span<const double> targets) {
    Tape& t = tape_of(logits);
    const Matrix& lv = logits.value();
    if (lv.cols() != 1 || lv.rows() != targets.size() || lv.rows() == 0)
        throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) +
                         " targets for logits " + lv.shape_string());
    const std::size_t n = lv.rows();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lv[i];
        loss += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
    }
    std::vector<double> tg(targets.begin(), targets.end());
    const Var in[] = {logits};
    return t.record("bce_with_logits", Matrix::scalar(loss / static_cast<double>(n)), in,
                    [logits, tg = std::move(tg)](Tape& tp, const Matrix& g) {
                        const Matrix& lv = logits.value();
                        Matrix& gl = tp.grad_buffer(logits);
                        const double share = g[0] / static_cast<double>(tg.size());
                        for (std::size_t i = 0; i < tg.size(); ++i)
                            gl[i] += share * (stable_sigmoid(lv[i]) - tg[i]);
                    });
}

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

Var apply(Activation act, const Var& x, double leaky_slope) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return relu(x);
        case Activation::leaky_relu: return leaky_relu(x, leaky_slope);
        case Activation::elu: return elu(x);
        case Activation::tanh: return tanh(x);
        case Activation::sigmoid: return sigmoid(x);
    }
    return x;
}

double apply_scalar(Activation act, double x, double leaky_slope) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0 ? x : 0.0;
        case Activation::leaky_relu: return x > 0 ? x : leaky_slope * x;
        case Activation::elu: return x > 0 ? x : std::expm1(x);
        case Activation::tanh: return std::tanh(x);
        case Activation::sigmoid: return stable_sigmoid(x);
    }
    return x;
}

Activation parse_activation(const std::string& name) {
    if (name == "identity" || name == "none") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "elu") return Activation::elu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    throw Error("unknown activation '" + name + "'");
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::elu: return "elu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

}  // namespace wsgat::autodiff
