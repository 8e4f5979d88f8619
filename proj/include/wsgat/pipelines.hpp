#ifndef WSGAT_PIPELINES_HPP
#define WSGAT_PIPELINES_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsgat/autodiff/checkpoint.hpp"
#include "wsgat/config.hpp"
#include "wsgat/graph.hpp"
#include "wsgat/layer.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::pipeline {

using autodiff::Matrix;
using autodiff::Parameter;

enum class Task { sign, weight, signed_weight };

Task parse_task(const std::string& name);
std::string to_string(Task task);

/// Sign classes of the 3-way sign head.
enum SignClass : std::uint32_t { kPositive = 0, kNegative = 1, kNonExistent = 2 };

struct EvalReport {
    std::string task;
    std::string dataset;
    std::uint64_t seed = 0;
    double auc = 0.0;
    double f1 = 0.0;
    std::optional<double> mae;
    /// Test examples per class: sign task counts positive/negative test
    /// links; weight tasks count existing/non-existing test pairs.
    std::size_t test_positive = 0;
    std::size_t test_negative = 0;
    std::string config_digest;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double wall_s = 0.0;
};

struct TaskModel {
    Task task = Task::sign;
    Matrix features;                    // N x F_0 input features, fixed
    graph::SignedWeightedGraph message_graph;
    nn::AttentionIndex index;
    std::vector<nn::WsGatLayer> layers;
    nn::Mlp sign_head;       // sign task: 2 F_L -> ... -> 3 logits
    nn::Mlp existence_head;  // weight tasks: 2 F_L -> ... -> 1 logit
    nn::Mlp weight_head;     // weight tasks: 2 F_L -> ... -> 1 (identity or tanh)

    std::vector<Parameter*> parameters();
    std::vector<autodiff::NamedArray> checkpoint_arrays();
    /// Restores values from a checkpoint with matching names and shapes.
    void load_arrays(const std::vector<autodiff::NamedArray>& arrays);
};

/// Scores of one model on a list of pairs, computed in a single forward.
struct PairScores {
    std::vector<double> positive_score;  // sign: P(+)/(P(+)+P(-)); weight tasks: P(exists)
    std::vector<std::uint32_t> sign_argmax;  // sign task: kPositive or kNegative
    std::vector<double> weight;          // weight tasks
};

PairScores score_pairs(TaskModel& model, const std::vector<graph::NodePair>& pairs);

/// Untrained model for `task` on a fixed message graph and input features.
TaskModel build_model(Task task, graph::SignedWeightedGraph message_graph, Matrix features,
                      const RunConfig& config, Rng& rng);

/// Final-layer embeddings of every node, recorded on `tape`.
autodiff::Var embed(TaskModel& model, autodiff::Tape& tape);

struct PairBatch {
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;

    std::size_t size() const { return src.size(); }
    void push(graph::NodeId u, graph::NodeId v) {
        src.push_back(u);
        dst.push_back(v);
    }
};

/// Labelled training pairs: existing links first, then non-existent pairs.
struct Examples {
    PairBatch pairs;
    std::size_t num_positive = 0;
    std::vector<std::uint32_t> sign_labels;  // sign task, every row
    std::vector<double> exists;              // weight tasks, every row
    Matrix weights;                          // weight tasks, positive rows only
};

Examples make_examples(const std::vector<graph::Edge>& positives,
                       const std::vector<graph::NodePair>& negatives);

/// Sign task: 3-class cross-entropy. Weight tasks: BCE(existence) +
/// lambda * MSE(weight over the positive rows).
autodiff::Var task_loss(TaskModel& model, autodiff::Tape& tape, const autodiff::Var& z,
                        const Examples& examples, double lambda_weight);

struct TrainResult {
    TaskModel model;
    EvalReport report;
    graph::EdgeSplit split;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch, empty without validation
};

struct TrainOptions {
    std::string dataset = "graph";
    std::uint64_t seed = 0;
};

/// 3-class (positive / negative / non-existent) link classifier on SSE
/// features; evaluated on the sign of existing test links only.
TrainResult train_sign_prediction(const graph::SignedWeightedGraph& g, const RunConfig& config,
                                  const TrainOptions& options);

/// Existence + |weight| regression on weights scaled to (0, 1].
TrainResult train_weight_prediction(const graph::SignedWeightedGraph& g, const RunConfig& config,
                                    const TrainOptions& options);

/// Existence + signed weight regression on weights scaled to [-1, 1].
TrainResult train_signed_weight_prediction(const graph::SignedWeightedGraph& g,
                                           const RunConfig& config, const TrainOptions& options);

TrainResult train(Task task, const graph::SignedWeightedGraph& g, const RunConfig& config,
                  const TrainOptions& options);

/// Metrics of a trained model on the split's test sets. Deterministic.
EvalReport evaluate(TaskModel& model, const graph::EdgeSplit& split, Task task);

}  // namespace wsgat::pipeline

#endif  // WSGAT_PIPELINES_HPP
