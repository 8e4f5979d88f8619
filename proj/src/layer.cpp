#include "wsgat/layer.hpp"

#include <cmath>

#include "wsgat/errors.hpp"

namespace wsgat::nn {

namespace ad = wsgat::autodiff;

namespace {

Matrix glorot(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    return w;
}

}  // namespace

Mlp Mlp::make(std::span<const std::size_t> sizes, Activation hidden, Activation output, Rng& rng,
              const std::string& name) {
    if (sizes.size() < 2) throw ConfigError("MLP needs at least an input and an output width");
    Mlp mlp;
    mlp.hidden_activation = hidden;
    mlp.output_activation = output;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] == 0 || sizes[l + 1] == 0) throw ConfigError("MLP layer width must be > 0");
        mlp.weights.emplace_back(name + ".W" + std::to_string(l), glorot(sizes[l], sizes[l + 1], rng));
        mlp.biases.emplace_back(name + ".b" + std::to_string(l), Matrix(1, sizes[l + 1]));
    }
    return mlp;
}

Var Mlp::forward(Tape& tape, const Var& x) {
    if (x.cols() != in_width())
        throw ShapeError("MLP input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(in_width()));
    Var pre = ad::add(ad::matmul(x, tape.param(weights[0])), tape.param(biases[0]));
    return forward_from_first_preactivation(tape, pre);
}

Var Mlp::forward_from_first_preactivation(Tape& tape, const Var& pre) {
    Var h = pre;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (l > 0) h = ad::add(ad::matmul(h, tape.param(weights[l])), tape.param(biases[l]));
        const bool last = l + 1 == weights.size();
        h = ad::apply(last ? output_activation : hidden_activation, h, leaky_slope);
    }
    return h;
}

void Mlp::collect(std::vector<Parameter*>& out) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
}

HeadMerge parse_head_merge(const std::string& name) {
    if (name == "concat") return HeadMerge::concat;
    if (name == "mean") return HeadMerge::mean;
    throw ConfigError("unknown head_merge '" + name + "' (expected concat or mean)");
}

std::string to_string(HeadMerge merge) { return merge == HeadMerge::concat ? "concat" : "mean"; }

AttentionIndex AttentionIndex::build(const graph::SignedWeightedGraph& g) {
    AttentionIndex idx;
    idx.num_nodes = g.num_nodes();
    idx.num_edges = g.num_edges();
    const std::size_t total = g.num_edges() + g.num_nodes();
    idx.src.reserve(total);
    idx.dst.reserve(total);
    idx.edge_weight.reserve(g.num_edges());
    // Message direction: node i attends over its in-neighbours (j -> i).
    for (const auto& e : g.edges()) {
        idx.src.push_back(e.src);
        idx.dst.push_back(e.dst);
        idx.edge_weight.push_back(e.weight);
    }
    for (std::uint32_t i = 0; i < g.num_nodes(); ++i) {
        idx.src.push_back(i);
        idx.dst.push_back(i);
    }
    return idx;
}

Matrix AttentionIndex::weight_column(double self_loop_weight) const {
    Matrix w(size(), 1);
    for (std::size_t k = 0; k < num_edges; ++k) w[k] = edge_weight[k];
    for (std::size_t k = num_edges; k < size(); ++k) w[k] = self_loop_weight;
    return w;
}

WsGatLayer::WsGatLayer(const LayerConfig& config, Rng& rng, const std::string& name)
    : config_(config) {
    if (config_.in_features == 0) throw ConfigError("layer in_features must be > 0");
    if (config_.heads == 0) throw ConfigError("layer needs at least one head");
    if (config_.projection && config_.out_features == 0)
        throw ConfigError("layer out_features must be > 0");
    if (config_.attention_output_activation != Activation::tanh &&
        config_.attention_output_activation != Activation::identity)
        throw ConfigError("attention MLP output activation must be zero-centred");
    std::vector<std::size_t> sizes;
    sizes.push_back(2 * config_.in_features + 1);
    sizes.insert(sizes.end(), config_.attention_hidden.begin(), config_.attention_hidden.end());
    sizes.push_back(1);
    for (std::size_t h = 0; h < config_.heads; ++h) {
        const std::string prefix = name + ".head" + std::to_string(h);
        AttentionHead head;
        head.attention = Mlp::make(sizes, config_.attention_hidden_activation,
                                   config_.attention_output_activation, rng, prefix + ".att");
        if (config_.projection)
            head.projection =
                Parameter(prefix + ".proj", glorot(config_.in_features, config_.out_features, rng));
        heads_.push_back(std::move(head));
    }
}

std::size_t WsGatLayer::head_width() const noexcept {
    return config_.projection ? config_.out_features : config_.in_features;
}

std::size_t WsGatLayer::output_width() const noexcept {
    return config_.merge == HeadMerge::concat ? head_width() * heads_.size() : head_width();
}

void WsGatLayer::collect(std::vector<Parameter*>& out) {
    for (auto& head : heads_) {
        head.attention.collect(out);
        if (config_.projection) out.push_back(&head.projection);
    }
}

Var attention_logits(WsGatLayer& layer, std::size_t head, Tape& tape, const Var& h,
                     const AttentionIndex& index) {
    const std::size_t f = layer.config().in_features;
    if (h.cols() != f || h.rows() != index.num_nodes)
        throw ShapeError("attention_logits: embeddings " + h.value().shape_string() +
                         " do not match layer width " + std::to_string(f) + " / " +
                         std::to_string(index.num_nodes) + " nodes");
    Mlp& mlp = layer.head(head).attention;
    Var w = tape.constant(index.weight_column(layer.config().self_loop_weight));

    if (layer.config().attention_input == AttentionInput::concat) {
        const Var parts[] = {ad::gather_rows(h, index.dst), ad::gather_rows(h, index.src), w};
        return mlp.forward(tape, ad::concat(parts, 1));
    }
    // First weight rows: [0, F) for h_i, [F, 2F) for h_j, row 2F for w_ij.
    Var w0 = tape.param(mlp.weights[0]);
    Var target_part = ad::matmul(h, ad::slice_rows(w0, 0, f));
    Var source_part = ad::matmul(h, ad::slice_rows(w0, f, 2 * f));
    Var weight_part = ad::matmul(w, ad::slice_rows(w0, 2 * f, 2 * f + 1));
    Var pre = ad::add(ad::gather_rows(target_part, index.dst), ad::gather_rows(source_part, index.src));
    pre = ad::add(ad::add(pre, weight_part), tape.param(mlp.biases[0]));
    return mlp.forward_from_first_preactivation(tape, pre);
}

Var attention_coefficients(const Var& logits, const AttentionIndex& index) {
    return ad::segment_signed_softmax(logits, index.dst, index.num_nodes);
}

Var layer_forward(WsGatLayer& layer, Tape& tape, const Var& h, const AttentionIndex& index) {
    const auto& cfg = layer.config();
    std::vector<Var> outputs;
    outputs.reserve(layer.num_heads());
    for (std::size_t k = 0; k < layer.num_heads(); ++k) {
        Var alpha = attention_coefficients(attention_logits(layer, k, tape, h, index), index);
        Var messages = cfg.projection ? ad::matmul(h, tape.param(layer.head(k).projection)) : h;
        Var weighted = ad::scale_rows(ad::gather_rows(messages, index.src), alpha);
        Var aggregated = ad::scatter_add_rows(weighted, index.dst, index.num_nodes);
        outputs.push_back(ad::apply(cfg.activation, aggregated));
    }
    if (outputs.size() == 1) return outputs.front();
    if (cfg.merge == HeadMerge::concat) return ad::concat(outputs, 1);
    Var total = outputs.front();
    for (std::size_t k = 1; k < outputs.size(); ++k) total = ad::add(total, outputs[k]);
    return ad::scale(total, 1.0 / static_cast<double>(outputs.size()));
}

Var model_forward(std::span<WsGatLayer> layers, Tape& tape, const Var& x,
                  const AttentionIndex& index) {
    Var h = x;
    for (WsGatLayer& layer : layers) h = layer_forward(layer, tape, h, index);
    return h;
}

std::vector<WsGatLayer> make_stack(const StackConfig& config, std::size_t in_features, Rng& rng) {
    std::vector<WsGatLayer> layers;
    std::size_t width = in_features;
    for (std::size_t l = 0; l < config.layers; ++l) {
        LayerConfig lc;
        lc.in_features = width;
        lc.out_features = config.hidden;
        lc.heads = config.heads;
        lc.attention_hidden = config.attention_hidden;
        lc.activation = config.activation;
        lc.merge = l + 1 == config.layers ? HeadMerge::mean : config.hidden_merge;
        lc.projection = config.projection;
        lc.self_loop_weight = config.self_loop_weight;
        lc.attention_input = config.attention_input;
        layers.emplace_back(lc, rng, "gat" + std::to_string(l));
        width = layers.back().output_width();
    }
    return layers;
}

std::size_t stack_output_width(std::span<const WsGatLayer> layers, std::size_t in_features) {
    return layers.empty() ? in_features : layers.back().output_width();
}

}  // namespace wsgat::nn
