#include "verify/dense_reference.hpp"

#include <cmath>
#include <vector>

#include "wsgat/autodiff/ops.hpp"
#include "wsgat/errors.hpp"

namespace wsgat::verify {

namespace {

using autodiff::apply_scalar;

double mlp_scalar(const nn::Mlp& mlp, const std::vector<double>& input) {
    std::vector<double> act = input;
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        const Matrix& w = mlp.weights[l].value;
        const Matrix& b = mlp.biases[l].value;
        std::vector<double> next(w.cols());
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double s = b[c];
            for (std::size_t r = 0; r < w.rows(); ++r) s += act[r] * w(r, c);
            const bool last = l + 1 == mlp.weights.size();
            next[c] = apply_scalar(last ? mlp.output_activation : mlp.hidden_activation, s,
                                   mlp.leaky_slope);
        }
        act = std::move(next);
    }
    return act.at(0);
}

/// weight(i, j) of arc j -> i; present(i, j) marks arcs and self-loops.
struct DenseGraph {
    Matrix weight;
    Matrix present;
};

DenseGraph densify(const graph::SignedWeightedGraph& g, double self_loop_weight) {
    const std::size_t n = g.num_nodes();
    DenseGraph d{Matrix(n, n), Matrix(n, n)};
    for (const auto& e : g.edges()) {
        d.weight(e.dst, e.src) = e.weight;
        d.present(e.dst, e.src) = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        d.weight(i, i) = self_loop_weight;
        d.present(i, i) = 1.0;
    }
    return d;
}

}  // namespace

Matrix dense_attention(const nn::WsGatLayer& layer, std::size_t head, const Matrix& h,
                       const graph::SignedWeightedGraph& g) {
    const std::size_t n = g.num_nodes();
    const std::size_t f = h.cols();
    if (h.rows() != n) throw ShapeError("dense_attention: wrong row count");
    const DenseGraph d = densify(g, layer.config().self_loop_weight);
    const nn::Mlp& mlp = layer.head(head).attention;
    Matrix logits(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (d.present(i, j) == 0.0) continue;
            std::vector<double> in(2 * f + 1);
            for (std::size_t c = 0; c < f; ++c) {
                in[c] = h(i, c);
                in[f + c] = h(j, c);
            }
            in[2 * f] = d.weight(i, j);
            logits(i, j) = mlp_scalar(mlp, in);
        }
    Matrix alpha(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (d.present(i, j) != 0.0) m = std::max(m, std::abs(logits(i, j)));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (d.present(i, j) != 0.0) z += std::exp(std::abs(logits(i, j)) - m);
        for (std::size_t j = 0; j < n; ++j) {
            if (d.present(i, j) == 0.0) continue;
            const double e = logits(i, j);
            const double s = e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0);
            alpha(i, j) = s * std::exp(std::abs(e) - m) / z;
        }
    }
    return alpha;
}

Matrix dense_layer_forward(const nn::WsGatLayer& layer, const Matrix& h,
                           const graph::SignedWeightedGraph& g) {
    const auto& cfg = layer.config();
    const std::size_t n = g.num_nodes();
    const std::size_t width = layer.head_width();
    const std::size_t heads = layer.num_heads();
    std::vector<Matrix> outs;
    for (std::size_t k = 0; k < heads; ++k) {
        Matrix msg = h;
        if (cfg.projection) {
            const Matrix& p = layer.head(k).projection.value;
            msg = Matrix(n, width);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < width; ++c) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < h.cols(); ++q) s += h(r, q) * p(q, c);
                    msg(r, c) = s;
                }
        }
        const Matrix alpha = dense_attention(layer, k, h, g);
        Matrix out(n, width);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < width; ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += alpha(i, j) * msg(j, c);
                out(i, c) = autodiff::apply_scalar(cfg.activation, s);
            }
        outs.push_back(std::move(out));
    }
    if (heads == 1) return outs.front();
    if (cfg.merge == nn::HeadMerge::concat) {
        Matrix out(n, width * heads);
        for (std::size_t k = 0; k < heads; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < width; ++c) out(i, k * width + c) = outs[k](i, c);
        return out;
    }
    Matrix out(n, width);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < width; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < heads; ++k) s += outs[k](i, c);
            out(i, c) = s / static_cast<double>(heads);
        }
    return out;
}

Matrix dense_model_forward(std::span<const nn::WsGatLayer> layers, const Matrix& x,
                           const graph::SignedWeightedGraph& g) {
    Matrix h = x;
    for (const auto& layer : layers) h = dense_layer_forward(layer, h, g);
    return h;
}

graph::SignedWeightedGraph random_signed_graph(std::size_t n, double density,
                                               double negative_fraction, Rng& rng) {
    std::vector<graph::Edge> edges;
    for (std::uint32_t u = 0; u < n; ++u)
        for (std::uint32_t v = 0; v < n; ++v) {
            if (u == v || rng.uniform01() >= density) continue;
            double w = rng.uniform(0.1, 1.0);
            if (rng.uniform01() < negative_fraction) w = -w;
            edges.push_back({u, v, w});
        }
    return graph::SignedWeightedGraph(n, std::move(edges));
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
}

}  // namespace wsgat::verify
