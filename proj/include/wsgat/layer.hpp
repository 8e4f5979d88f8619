#ifndef WSGAT_LAYER_HPP
#define WSGAT_LAYER_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsgat/autodiff/ops.hpp"
#include "wsgat/autodiff/tape.hpp"
#include "wsgat/graph.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::nn {

using autodiff::Activation;
using autodiff::Matrix;
using autodiff::Parameter;
using autodiff::Tape;
using autodiff::Var;

/// Fully connected stack: x -> act(x W_0 + b_0) -> ... -> out_act(x W_L + b_L).
struct Mlp {
    std::vector<Parameter> weights;  // weights[l] is in_l x out_l
    std::vector<Parameter> biases;   // biases[l] is 1 x out_l
    Activation hidden_activation = Activation::leaky_relu;
    Activation output_activation = Activation::identity;
    double leaky_slope = 0.2;

    /// sizes = {in, hidden..., out}; Glorot-uniform weights, zero biases.
    static Mlp make(std::span<const std::size_t> sizes, Activation hidden, Activation output,
                    Rng& rng, const std::string& name);

    std::size_t in_width() const { return weights.front().value.rows(); }
    std::size_t out_width() const { return weights.back().value.cols(); }
    std::size_t num_layers() const { return weights.size(); }

    Var forward(Tape& tape, const Var& x);
    /// Same as forward() but the first layer's pre-activation is supplied
    /// by the caller (used by the factored attention input).
    Var forward_from_first_preactivation(Tape& tape, const Var& pre);

    void collect(std::vector<Parameter*>& out);
};

enum class HeadMerge { concat, mean };

HeadMerge parse_head_merge(const std::string& name);
std::string to_string(HeadMerge merge);

/// How the attention MLP's input (h_i || h_j || w_ij) is fed to its first
/// layer. `concat` materializes the (E+N) x (2F+1) matrix; `factored`
/// multiplies the three row blocks of the first weight separately and
/// gathers per edge, which is the same linear map with far less memory.
enum class AttentionInput { concat, factored };

struct LayerConfig {
    std::size_t in_features = 0;
    std::size_t out_features = 0;  // per head; ignored without projection
    std::size_t heads = 1;
    std::vector<std::size_t> attention_hidden = {32};
    Activation attention_hidden_activation = Activation::leaky_relu;
    /// Must be zero-centred so logits can be negative.
    Activation attention_output_activation = Activation::tanh;
    Activation activation = Activation::elu;
    HeadMerge merge = HeadMerge::concat;
    bool projection = true;
    double self_loop_weight = 1.0;
    AttentionInput attention_input = AttentionInput::factored;
};

struct AttentionHead {
    Mlp attention;          // (2F+1) -> ... -> 1
    Parameter projection;   // F x F_out; empty without projection
};

/// Edge arrays for attention: the graph's E arcs j -> i in edge-list order
/// followed by one self-loop per node. Entry k aggregates into dst[k]
/// from src[k].
struct AttentionIndex {
    std::size_t num_nodes = 0;
    std::size_t num_edges = 0;  // without self-loops
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;
    std::vector<double> edge_weight;  // length num_edges

    static AttentionIndex build(const graph::SignedWeightedGraph& g);
    std::size_t size() const noexcept { return src.size(); }
    /// (E+N) x 1 column of w_ij with self-loops set to `self_loop_weight`.
    Matrix weight_column(double self_loop_weight) const;
};

class WsGatLayer {
public:
    WsGatLayer() = default;
    WsGatLayer(const LayerConfig& config, Rng& rng, const std::string& name);

    const LayerConfig& config() const noexcept { return config_; }
    std::size_t head_width() const noexcept;
    std::size_t output_width() const noexcept;
    std::size_t num_heads() const noexcept { return heads_.size(); }
    AttentionHead& head(std::size_t h) { return heads_.at(h); }
    const AttentionHead& head(std::size_t h) const { return heads_.at(h); }

    void collect(std::vector<Parameter*>& out);

private:
    LayerConfig config_;
    std::vector<AttentionHead> heads_;
};

/// One logit per entry of `index`: e_ij = MLP(h_i || h_j || w_ij).
Var attention_logits(WsGatLayer& layer, std::size_t head, Tape& tape, const Var& h,
                     const AttentionIndex& index);

/// Signed softmax of the logits over each destination node's incoming
/// entries (in-edges plus self-loop).
Var attention_coefficients(const Var& logits, const AttentionIndex& index);

/// h'_i = f(sum_j alpha_ij W h_j) per head, heads merged per config.
Var layer_forward(WsGatLayer& layer, Tape& tape, const Var& h, const AttentionIndex& index);

/// Sequential application; zero layers returns x.
Var model_forward(std::span<WsGatLayer> layers, Tape& tape, const Var& x,
                  const AttentionIndex& index);

struct StackConfig {
    std::size_t layers = 2;
    std::size_t hidden = 64;
    std::size_t heads = 1;
    HeadMerge hidden_merge = HeadMerge::concat;
    std::vector<std::size_t> attention_hidden = {32};
    Activation activation = Activation::elu;
    bool projection = true;
    double self_loop_weight = 1.0;
    AttentionInput attention_input = AttentionInput::factored;
};

/// Hidden layers merge heads with `hidden_merge`, the last layer averages.
std::vector<WsGatLayer> make_stack(const StackConfig& config, std::size_t in_features, Rng& rng);

std::size_t stack_output_width(std::span<const WsGatLayer> layers, std::size_t in_features);

}  // namespace wsgat::nn

#endif  // WSGAT_LAYER_HPP
