#include <doctest.h>

#include <cmath>
#include <set>

#include "verify/dense_reference.hpp"
#include "verify/suites.hpp"
#include "wsgat/autodiff/ops.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/layer.hpp"

using namespace wsgat;
using namespace wsgat::nn;
using graph::SignedWeightedGraph;

namespace {

LayerConfig linear_attention(std::size_t in, std::size_t out) {
    LayerConfig c;
    c.in_features = in;
    c.out_features = out;
    c.attention_hidden = {};
    c.activation = Activation::identity;
    return c;
}

Matrix forward_value(WsGatLayer& layer, const Matrix& x, const SignedWeightedGraph& g) {
    Tape t;
    const auto index = AttentionIndex::build(g);
    return layer_forward(layer, t, t.constant(x), index).value();
}

Matrix logits_value(WsGatLayer& layer, const Matrix& x, const SignedWeightedGraph& g) {
    Tape t;
    const auto index = AttentionIndex::build(g);
    return attention_logits(layer, 0, t, t.constant(x), index).value();
}

}  // namespace

TEST_CASE("layer shape invariants") {
    Rng rng(1);
    LayerConfig c;
    c.in_features = 5;
    c.out_features = 3;
    c.heads = 4;
    c.attention_hidden = {7, 2};
    const WsGatLayer concat(c, rng, "l");
    CHECK(concat.output_width() == 12);
    CHECK(concat.head(0).attention.in_width() == 11);
    CHECK(concat.head(0).attention.out_width() == 1);
    CHECK(concat.head(3).attention.num_layers() == 3);
    c.merge = HeadMerge::mean;
    CHECK(WsGatLayer(c, rng, "l").output_width() == 3);
    c.projection = false;
    CHECK(WsGatLayer(c, rng, "l").output_width() == 5);
    c.attention_output_activation = Activation::sigmoid;
    CHECK_THROWS_AS(WsGatLayer(c, rng, "l"), ConfigError);
}

TEST_CASE("constant attention MLP gives tanh(bias) for every logit") {
    Rng rng(2);
    WsGatLayer layer(linear_attention(3, 2), rng, "l");
    auto& mlp = layer.head(0).attention;
    mlp.weights[0].value.fill(0.0);
    mlp.biases[0].value.fill(0.3);
    const auto g = verify::random_signed_graph(5, 0.4, 0.3, rng);
    const Matrix e = logits_value(layer, verify::random_matrix(5, 3, rng), g);
    CHECK(e.rows() == g.num_edges() + 5);
    for (double v : e.values()) CHECK(v == std::tanh(0.3));
}

TEST_CASE("2-node graph logit matches a hand computation") {
    Rng rng(3);
    for (auto input : {AttentionInput::factored, AttentionInput::concat}) {
        LayerConfig c = linear_attention(2, 2);
        c.attention_input = input;
        WsGatLayer layer(c, rng, "l");
        auto& mlp = layer.head(0).attention;
        // Rows: h_i (2), h_j (2), w_ij (1).
        mlp.weights[0].value = Matrix::column({0.1, -0.2, 0.3, 0.4, -0.5});
        mlp.biases[0].value = Matrix::scalar(0.05);
        const SignedWeightedGraph g(2, {{0, 1, -0.6}});
        const Matrix x = Matrix::from_rows({{1.0, 2.0}, {-1.0, 0.5}});
        const Matrix e = logits_value(layer, x, g);
        // Arc 0 -> 1: i = 1, j = 0.
        const double edge = 0.1 * -1.0 - 0.2 * 0.5 + 0.3 * 1.0 + 0.4 * 2.0 - 0.5 * -0.6 + 0.05;
        const double self0 = 0.1 * 1.0 - 0.2 * 2.0 + 0.3 * 1.0 + 0.4 * 2.0 - 0.5 + 0.05;
        const double self1 = 0.1 * -1.0 - 0.2 * 0.5 + 0.3 * -1.0 + 0.4 * 0.5 - 0.5 + 0.05;
        CHECK(std::abs(e[0] - std::tanh(edge)) < 1e-15);
        CHECK(std::abs(e[1] - std::tanh(self0)) < 1e-15);
        CHECK(std::abs(e[2] - std::tanh(self1)) < 1e-15);
    }
}

TEST_CASE("isolated node attends only to itself with alpha = +-1") {
    Rng rng(4);
    WsGatLayer layer(linear_attention(2, 2), rng, "l");
    const SignedWeightedGraph g(3, {{0, 1, 0.5}});
    const Matrix x = verify::random_matrix(3, 2, rng);
    const Matrix alpha = verify::dense_attention(layer, 0, x, g);
    CHECK(std::abs(alpha(2, 2)) == 1.0);
    CHECK(alpha(2, 0) == 0.0);
    CHECK(alpha(2, 1) == 0.0);
}

TEST_CASE("all-positive logits reduce to the ordinary softmax") {
    Rng rng(5);
    WsGatLayer layer(linear_attention(2, 2), rng, "l");
    auto& mlp = layer.head(0).attention;
    mlp.weights[0].value = Matrix::column({0.2, 0.1, 0.3, -0.2, 0.4});
    mlp.biases[0].value = Matrix::scalar(2.0);
    const SignedWeightedGraph g(3, {{0, 2, 0.5}, {1, 2, 0.9}});
    const Matrix x = Matrix::from_rows({{0.1, 0.2}, {0.3, -0.1}, {0.5, 0.4}});
    const auto index = AttentionIndex::build(g);
    Tape t;
    const Var e = attention_logits(layer, 0, t, t.constant(x), index);
    const Matrix a = attention_coefficients(e, index).value();
    double z = 0;
    for (std::size_t k = 0; k < index.size(); ++k)
        if (index.dst[k] == 2) {
            REQUIRE(e.value()[k] > 0);
            z += std::exp(e.value()[k]);
        }
    for (std::size_t k = 0; k < index.size(); ++k)
        if (index.dst[k] == 2) CHECK(std::abs(a[k] - std::exp(e.value()[k]) / z) < 1e-15);
}

TEST_CASE("two in-edges with opposite logits of equal magnitude") {
    const std::uint32_t seg[] = {0, 0, 0};
    Tape t;
    // Two arcs with logits +-0.7 and a self-loop with logit 0.2.
    const Matrix a =
        autodiff::segment_signed_softmax(t.constant(Matrix::column({0.7, -0.7, 0.2})), seg, 1).value();
    const double z = 2 * std::exp(0.7) + std::exp(0.2);
    CHECK(std::abs(a[0] - std::exp(0.7) / z) < 1e-15);
    CHECK(a[1] == -a[0]);
    CHECK(std::abs(a[2] - std::exp(0.2) / z) < 1e-15);
}

TEST_CASE("single node with W_out = I and identity f returns +-h") {
    Rng rng(6);
    WsGatLayer layer(linear_attention(3, 3), rng, "l");
    layer.head(0).projection.value = Matrix::identity(3);
    const SignedWeightedGraph g(1, {});
    const Matrix x = Matrix::from_rows({{0.4, -1.2, 2.0}});
    const Matrix e = logits_value(layer, x, g);
    const Matrix out = forward_value(layer, x, g);
    const double s = e[0] > 0 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(0, c) == s * x(0, c));
}

TEST_CASE("random 6-node graph with 2 heads matches the dense reference") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        LayerConfig c;
        c.in_features = 4;
        c.out_features = 3;
        c.heads = 2;
        c.merge = trial % 2 ? HeadMerge::mean : HeadMerge::concat;
        WsGatLayer layer(c, rng, "l");
        const auto g = verify::random_signed_graph(6, 0.5, 0.4, rng);
        const Matrix x = verify::random_matrix(6, 4, rng);
        CHECK(autodiff::max_abs_diff(forward_value(layer, x, g), verify::dense_layer_forward(layer, x, g)) <
              1e-10);
    }
}

TEST_CASE("removing an arc only changes rows reachable from its target") {
    Rng rng(8);
    StackConfig sc;
    sc.layers = 2;
    sc.hidden = 3;
    sc.attention_hidden = {4};
    auto layers = make_stack(sc, 3, rng);
    const auto g = verify::random_signed_graph(9, 0.25, 0.4, rng);
    REQUIRE(g.num_edges() > 0);
    const Matrix x = verify::random_matrix(9, 3, rng);
    const graph::Edge removed = g.edges()[0];
    std::vector<graph::Edge> rest(g.edges().begin() + 1, g.edges().end());
    const auto ablated = g.with_edges(rest);

    const Matrix full = verify::dense_model_forward(layers, x, g);
    const Matrix cut = verify::dense_model_forward(layers, x, ablated);
    // Two layers: the target, plus its out-neighbours in the ablated graph.
    std::set<graph::NodeId> reach = {removed.dst};
    for (const auto& e : rest)
        if (e.src == removed.dst) reach.insert(e.dst);
    bool changed = false;
    for (graph::NodeId v = 0; v < 9; ++v)
        for (std::size_t c = 0; c < full.cols(); ++c) {
            if (reach.count(v) == 0)
                CHECK(full(v, c) == cut(v, c));
            else
                changed = changed || full(v, c) != cut(v, c);
        }
    CHECK(changed);
}

TEST_CASE("model_forward composes layers; zero layers return X") {
    Rng rng(9);
    const auto g = verify::random_signed_graph(8, 0.3, 0.3, rng);
    const auto index = AttentionIndex::build(g);
    const Matrix x = verify::random_matrix(8, 4, rng);

    StackConfig none;
    none.layers = 0;
    auto empty = make_stack(none, 4, rng);
    Tape t0;
    CHECK(model_forward(empty, t0, t0.constant(x), index).value() == x);
    CHECK(stack_output_width(empty, 4) == 4);

    StackConfig two;
    two.hidden = 5;
    two.heads = 2;
    auto layers = make_stack(two, 4, rng);
    CHECK(layers[0].config().merge == HeadMerge::concat);
    CHECK(layers[1].config().merge == HeadMerge::mean);
    CHECK(layers[1].config().in_features == 10);
    Tape t1;
    const Matrix stacked = model_forward(layers, t1, t1.constant(x), index).value();
    Tape t2;
    const Var h1 = layer_forward(layers[0], t2, t2.constant(x), index);
    CHECK(layer_forward(layers[1], t2, h1, index).value() == stacked);
}

TEST_CASE("feature width mismatch is a shape error") {
    Rng rng(10);
    WsGatLayer layer(linear_attention(3, 2), rng, "l");
    const auto g = verify::random_signed_graph(4, 0.5, 0.2, rng);
    CHECK_THROWS_AS(logits_value(layer, Matrix(4, 2), g), ShapeError);
    CHECK_THROWS_AS(logits_value(layer, Matrix(5, 3), g), ShapeError);
}

TEST_CASE("factored and concatenated attention inputs agree") {
    LayerConfig c;
    c.in_features = 4;
    c.out_features = 2;
    Rng init_a(11), init_b(11), rng(12);
    WsGatLayer factored(c, init_a, "l");
    c.attention_input = AttentionInput::concat;
    WsGatLayer concat(c, init_b, "l");
    const auto g = verify::random_signed_graph(10, 0.3, 0.4, rng);
    const Matrix x = verify::random_matrix(10, 4, rng);
    CHECK(autodiff::max_abs_diff(logits_value(factored, x, g), logits_value(concat, x, g)) < 1e-12);
}

TEST_CASE("oracle suite properties pass") {
    for (const auto& r : verify::run_suite("oracle")) {
        INFO(r.module << "/" << r.property << " observed " << r.observed << " " << r.detail);
        CHECK(r.passed);
    }
}
