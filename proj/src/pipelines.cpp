#include "wsgat/pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <span>

#include "wsgat/autodiff/adam.hpp"
#include "wsgat/autodiff/ops.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/metrics.hpp"
#include "wsgat/rng.hpp"
#include "wsgat/spectral.hpp"

namespace wsgat::pipeline {

namespace ad = wsgat::autodiff;
using graph::Edge;
using graph::NodePair;
using graph::SignedWeightedGraph;

Task parse_task(const std::string& name) {
    if (name == "sign") return Task::sign;
    if (name == "weight") return Task::weight;
    if (name == "signed-weight" || name == "signed_weight") return Task::signed_weight;
    throw ConfigError("unknown task '" + name + "' (expected sign, weight or signed-weight)");
}

std::string to_string(Task task) {
    switch (task) {
        case Task::sign: return "sign";
        case Task::weight: return "weight";
        case Task::signed_weight: return "signed-weight";
    }
    return "sign";
}

std::vector<Parameter*> TaskModel::parameters() {
    std::vector<Parameter*> params;
    for (auto& layer : layers) layer.collect(params);
    if (task == Task::sign) {
        sign_head.collect(params);
    } else {
        existence_head.collect(params);
        weight_head.collect(params);
    }
    return params;
}

std::vector<ad::NamedArray> TaskModel::checkpoint_arrays() {
    std::vector<ad::NamedArray> arrays;
    for (Parameter* p : parameters()) arrays.push_back({p->name, p->value});
    return arrays;
}

void TaskModel::load_arrays(const std::vector<ad::NamedArray>& arrays) {
    auto params = parameters();
    if (arrays.size() != params.size())
        throw CheckpointError("checkpoint has " + std::to_string(arrays.size()) +
                              " arrays, model expects " + std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (arrays[k].name != params[k]->name || !arrays[k].value.same_shape(params[k]->value))
            throw CheckpointError("checkpoint array '" + arrays[k].name +
                                  "' does not match parameter '" + params[k]->name + "'");
        params[k]->value = arrays[k].value;
    }
}

namespace {

/// Row r = z(src_r) || z(dst_r).
// Head applied to [z_src || z_dst] for the first `count` pairs. The first
// layer is split by input half, so the products run over nodes rather than
// pairs; the result equals forward() on the concatenated rows.
ad::Var pair_head(nn::Mlp& head, ad::Tape& tape, const ad::Var& z, const PairBatch& pairs,
                  std::size_t count) {
    const std::size_t emb = z.cols();
    if (head.in_width() != 2 * emb)
        throw ShapeError("pair head expects " + std::to_string(head.in_width()) +
                         " input columns, embeddings give " + std::to_string(2 * emb));
    const auto src = std::span<const std::uint32_t>(pairs.src).first(count);
    const auto dst = std::span<const std::uint32_t>(pairs.dst).first(count);
    ad::Var w0 = tape.param(head.weights[0]);
    ad::Var pre = ad::add(ad::gather_rows(ad::matmul(z, ad::slice_rows(w0, 0, emb)), src),
                          ad::gather_rows(ad::matmul(z, ad::slice_rows(w0, emb, 2 * emb)), dst));
    pre = ad::add(pre, tape.param(head.biases[0]));
    return head.forward_from_first_preactivation(tape, pre);
}

std::vector<std::size_t> head_sizes(std::size_t in, const RunConfig& cfg, std::size_t out) {
    // head_layers linear maps: in -> hidden -> ... -> out.
    std::vector<std::size_t> sizes{in};
    for (std::size_t l = 0; l + 1 < cfg.head_layers; ++l) sizes.push_back(cfg.head_hidden);
    sizes.push_back(out);
    return sizes;
}
}  // namespace

ad::Var embed(TaskModel& model, ad::Tape& tape) {
    ad::Var x = tape.constant(model.features);
    return nn::model_forward(model.layers, tape, x, model.index);
}

Examples make_examples(const std::vector<Edge>& positives, const std::vector<NodePair>& negatives) {
    Examples ex;
    ex.num_positive = positives.size();
    ex.weights = ad::Matrix(positives.size(), 1);
    for (std::size_t k = 0; k < positives.size(); ++k) {
        const Edge& e = positives[k];
        ex.pairs.push(e.src, e.dst);
        ex.sign_labels.push_back(e.weight > 0 ? kPositive : kNegative);
        ex.exists.push_back(1.0);
        ex.weights[k] = e.weight;
    }
    for (const NodePair& p : negatives) {
        ex.pairs.push(p.src, p.dst);
        ex.sign_labels.push_back(kNonExistent);
        ex.exists.push_back(0.0);
    }
    return ex;
}

ad::Var task_loss(TaskModel& model, ad::Tape& tape, const ad::Var& z, const Examples& ex,
                  double lambda_weight) {
    const std::size_t n = ex.pairs.size();
    if (model.task == Task::sign)
        return ad::softmax_cross_entropy(pair_head(model.sign_head, tape, z, ex.pairs, n), ex.sign_labels);
    ad::Var existence =
        ad::bce_with_logits(pair_head(model.existence_head, tape, z, ex.pairs, n), ex.exists);
    if (ex.num_positive == 0) return existence;
    ad::Var predicted = pair_head(model.weight_head, tape, z, ex.pairs, ex.num_positive);
    ad::Var regression = ad::mse(predicted, tape.constant(ex.weights));
    return ad::add(existence, ad::scale(regression, lambda_weight));
}

TaskModel build_model(Task task, SignedWeightedGraph message_graph, Matrix features,
                      const RunConfig& cfg, Rng& rng) {
    TaskModel model;
    model.task = task;
    model.message_graph = std::move(message_graph);
    model.index = nn::AttentionIndex::build(model.message_graph);
    model.features = std::move(features);
    if (model.features.rows() != model.message_graph.num_nodes())
        throw ShapeError("features have " + std::to_string(model.features.rows()) + " rows for " +
                         std::to_string(model.message_graph.num_nodes()) + " nodes");

    nn::StackConfig stack;
    stack.layers = cfg.layers;
    stack.hidden = cfg.hidden;
    stack.heads = cfg.heads;
    stack.hidden_merge = nn::parse_head_merge(cfg.head_merge);
    stack.attention_hidden = cfg.attention_hidden;
    stack.activation = ad::parse_activation(cfg.activation);
    stack.projection = cfg.projection;
    stack.self_loop_weight = cfg.self_loop_weight;
    stack.attention_input =
        cfg.attention_input == "concat" ? nn::AttentionInput::concat : nn::AttentionInput::factored;
    model.layers = nn::make_stack(stack, model.features.cols(), rng);
    const std::size_t emb = nn::stack_output_width(model.layers, model.features.cols());
    if (task == Task::sign) {
        model.sign_head = nn::Mlp::make(head_sizes(2 * emb, cfg, 3), ad::Activation::elu,
                                        ad::Activation::identity, rng, "sign_head");
    } else {
        model.existence_head = nn::Mlp::make(head_sizes(2 * emb, cfg, 1), ad::Activation::elu,
                                             ad::Activation::identity, rng, "exist_head");
        model.weight_head = nn::Mlp::make(
            head_sizes(2 * emb, cfg, 1), ad::Activation::elu,
            task == Task::signed_weight ? ad::Activation::tanh : ad::Activation::identity, rng,
            "weight_head");
    }
    return model;
}

namespace {

Matrix input_features(Task task, const SignedWeightedGraph& message_graph, const RunConfig& cfg,
                      std::uint64_t seed) {
    std::string kind = cfg.features;
    if (kind == "auto") kind = task == Task::sign ? "sse" : "degree_onehot_log";
    if (kind == "sse") {
        spectral::SpectralOptions opts;
        opts.dim = std::min(cfg.sse_dim, message_graph.num_nodes());
        opts.max_iters = cfg.sse_iters;
        opts.tolerance = cfg.sse_tol;
        opts.seed = seed;
        Matrix x = spectral::signed_spectral_embedding(message_graph, opts).vectors;
        // Unit-norm columns have entries of order 1/sqrt(N); rescale to unit RMS.
        const double s = std::sqrt(static_cast<double>(message_graph.num_nodes()));
        for (double& v : x.values()) v *= s;
        return x;
    }
    return spectral::fallback_features(message_graph, spectral::parse_fallback_kind(kind),
                                       cfg.feature_dim, seed);
}

void check_preconditions(Task task, const SignedWeightedGraph& g) {
    if (g.num_edges() == 0) throw EmptyGraphError("graph has no edges");
    if (task == Task::sign && (g.num_positive() == 0 || g.num_negative() == 0))
        throw DegenerateTaskError(
            "sign prediction needs both positive and negative links (graph has " +
            std::to_string(g.num_positive()) + " positive, " + std::to_string(g.num_negative()) +
            " negative)");
    if (task == Task::signed_weight && g.num_negative() == 0)
        throw DegenerateTaskError("signed weight prediction needs negative links");
}

void assert_test_hygiene(const graph::EdgeSplit& split, const Examples& fit, const Examples& val) {
    graph::PairSet test;
    for (const Edge& e : split.test_pos) test.insert(e.src, e.dst);
    test.insert_all(split.test_neg);
    for (const Examples* ex : {&fit, &val})
        for (std::size_t k = 0; k < ex->pairs.size(); ++k)
            if (test.contains(ex->pairs.src[k], ex->pairs.dst[k]))
                throw Error("test hygiene violated: pair " + std::to_string(ex->pairs.src[k]) +
                            "->" + std::to_string(ex->pairs.dst[k]) +
                            " is both a training and a test example");
}

TrainResult run_training(Task task, const SignedWeightedGraph& input, const RunConfig& cfg,
                         const TrainOptions& options) {
    cfg.validate();
    check_preconditions(task, input);
    const auto started = std::chrono::steady_clock::now();

    const SignedWeightedGraph g = graph::normalize_weights(
        input, task == Task::weight ? graph::WeightNormalization::unit_abs
                                    : graph::WeightNormalization::signed_unit);
    Rng rng(options.seed);
    const std::uint64_t split_seed = rng.next_u64();
    const std::uint64_t feature_seed = rng.next_u64();
    Rng val_rng = rng.fork(2);
    Rng init_rng = rng.fork(3);

    TrainResult result;
    result.split = graph::split_edges(g, cfg.train_fraction, split_seed);
    const graph::EdgeSplit& split = result.split;

    // Hold out a validation slice of the training links (and as many of the
    // training negatives) for early stopping; it is removed from the
    // message-passing graph as well.
    std::vector<Edge> train_edges(split.train_graph.edges().begin(), split.train_graph.edges().end());
    for (std::size_t i = train_edges.size(); i > 1; --i)
        std::swap(train_edges[i - 1], train_edges[val_rng.uniform_index(i)]);
    const auto num_val = static_cast<std::size_t>(
        std::floor(cfg.val_fraction * static_cast<double>(train_edges.size())));
    std::vector<Edge> val_edges(train_edges.end() - static_cast<std::ptrdiff_t>(num_val), train_edges.end());
    train_edges.resize(train_edges.size() - num_val);
    if (train_edges.empty()) throw Error("no training links left after the validation split");

    const std::vector<NodePair> fit_neg(split.train_neg.begin(),
                                        split.train_neg.begin() + static_cast<std::ptrdiff_t>(train_edges.size()));
    const std::vector<NodePair> val_neg(split.train_neg.begin() + static_cast<std::ptrdiff_t>(train_edges.size()),
                                        split.train_neg.end());
    const Examples fit = make_examples(train_edges, fit_neg);
    const Examples val = make_examples(val_edges, val_neg);
    assert_test_hygiene(split, fit, val);
    if (fit.num_positive * 2 != fit.pairs.size())
        throw Error("training batch is not balanced between existing and non-existing links");

    SignedWeightedGraph message_graph = split.train_graph.with_edges(train_edges);
    Matrix features = input_features(task, message_graph, cfg, feature_seed);
    result.model = build_model(task, std::move(message_graph), std::move(features), cfg, init_rng);
    TaskModel& model = result.model;

    std::vector<Parameter*> params = model.parameters();
    ad::AdamState adam;
    ad::AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;

    const bool validate = val.pairs.size() > 0;
    std::vector<Matrix> best(params.size());
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::size_t epoch = 0;
    for (epoch = 1; epoch <= cfg.epochs; ++epoch) {
        ad::Tape tape;
        ad::Var z = embed(model, tape);
        ad::Var loss = task_loss(model, tape, z, fit, cfg.lambda_weight);
        result.train_loss.push_back(loss.value()[0]);
        if (validate) {
            const double v = task_loss(model, tape, z, val, cfg.lambda_weight).value()[0];
            result.val_loss.push_back(v);
            if (v < best_val) {
                best_val = v;
                best_epoch = epoch;
                since_best = 0;
                for (std::size_t k = 0; k < params.size(); ++k) best[k] = params[k]->value;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        } else {
            best_epoch = epoch;
        }
        tape.backward(loss);
        ad::adam_step(params, adam, adam_cfg);
        for (Parameter* p : params) p->zero_grad();
    }
    const std::size_t epochs_run = std::min(epoch, cfg.epochs);
    if (validate && best_epoch > 0)
        for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];

    result.report = evaluate(model, split, task);
    result.report.dataset = options.dataset;
    result.report.seed = options.seed;
    result.report.config_digest = cfg.digest();
    result.report.epochs_run = epochs_run;
    result.report.best_epoch = best_epoch;
    result.report.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace

PairScores score_pairs(TaskModel& model, const std::vector<NodePair>& pairs) {
    PairScores out;
    if (pairs.empty()) return out;
    PairBatch batch;
    for (const NodePair& p : pairs) batch.push(p.src, p.dst);
    ad::Tape tape;
    const ad::Var z = embed(model, tape);
    const std::size_t n = batch.size();
    if (model.task == Task::sign) {
        const Matrix logits = pair_head(model.sign_head, tape, z, batch, n).value();
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            // P(+) / (P(+) + P(-)) = sigmoid(l_+ - l_-).
            const double diff = logits(r, kPositive) - logits(r, kNegative);
            out.positive_score.push_back(1.0 / (1.0 + std::exp(-diff)));
            out.sign_argmax.push_back(diff > 0 ? kPositive : kNegative);
        }
        return out;
    }
    // Copies: recording the second head may reallocate the tape.
    const Matrix ex = pair_head(model.existence_head, tape, z, batch, n).value();
    const Matrix w = pair_head(model.weight_head, tape, z, batch, n).value();
    for (std::size_t r = 0; r < ex.rows(); ++r) {
        out.positive_score.push_back(1.0 / (1.0 + std::exp(-ex[r])));
        out.weight.push_back(w[r]);
    }
    return out;
}

EvalReport evaluate(TaskModel& model, const graph::EdgeSplit& split, Task task) {
    if (model.task != task)
        throw ConfigError("evaluate: model was trained for task '" + to_string(model.task) +
                          "', not '" + to_string(task) + "'");
    EvalReport report;
    report.task = to_string(task);
    std::vector<NodePair> pairs;
    for (const Edge& e : split.test_pos) pairs.push_back({e.src, e.dst});
    if (task == Task::sign) {
        const PairScores s = score_pairs(model, pairs);
        std::vector<std::uint8_t> labels;
        std::vector<std::uint8_t> predicted;
        for (std::size_t k = 0; k < split.test_pos.size(); ++k) {
            labels.push_back(split.test_pos[k].weight > 0);
            predicted.push_back(s.sign_argmax[k] == kPositive);
        }
        report.test_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        report.test_negative = labels.size() - report.test_positive;
        report.auc = metrics::roc_auc(s.positive_score, labels);
        report.f1 = metrics::f1_score(predicted, labels);
        return report;
    }
    pairs.insert(pairs.end(), split.test_neg.begin(), split.test_neg.end());
    const PairScores s = score_pairs(model, pairs);
    std::vector<std::uint8_t> labels(pairs.size(), 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(split.test_pos.size()), 1);
    std::vector<std::uint8_t> predicted;
    for (double p : s.positive_score) predicted.push_back(p >= 0.5);
    report.test_positive = split.test_pos.size();
    report.test_negative = split.test_neg.size();
    report.auc = metrics::roc_auc(s.positive_score, labels);
    report.f1 = metrics::f1_score(predicted, labels);
    std::vector<double> truth;
    for (const Edge& e : split.test_pos) truth.push_back(e.weight);
    const std::vector<double> pred(s.weight.begin(),
                                   s.weight.begin() + static_cast<std::ptrdiff_t>(truth.size()));
    report.mae = metrics::mean_absolute_error(pred, truth);
    return report;
}

TrainResult train_sign_prediction(const SignedWeightedGraph& g, const RunConfig& config,
                                  const TrainOptions& options) {
    return run_training(Task::sign, g, config, options);
}

TrainResult train_weight_prediction(const SignedWeightedGraph& g, const RunConfig& config,
                                    const TrainOptions& options) {
    return run_training(Task::weight, g, config, options);
}

TrainResult train_signed_weight_prediction(const SignedWeightedGraph& g, const RunConfig& config,
                                           const TrainOptions& options) {
    return run_training(Task::signed_weight, g, config, options);
}

TrainResult train(Task task, const SignedWeightedGraph& g, const RunConfig& config,
                  const TrainOptions& options) {
    return run_training(task, g, config, options);
}

}  // namespace wsgat::pipeline
