#ifndef WSGAT_CONFIG_HPP
#define WSGAT_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsgat {

/// Run configuration. Serialized as flat `key = value` lines; `#` starts a
/// comment. Unknown keys are rejected.
struct RunConfig {
    // wsGAT stack
    std::size_t layers = 2;
    std::size_t hidden = 64;
    std::size_t heads = 1;
    std::string head_merge = "concat";      // hidden layers; the last layer averages
    std::vector<std::size_t> attention_hidden = {32};
    std::string attention_input = "factored";
    std::string activation = "elu";
    bool projection = true;
    double self_loop_weight = 1.0;

    // prediction heads
    std::size_t head_layers = 3;
    std::size_t head_hidden = 100;

    // optimisation
    double lr = 1e-3;
    std::size_t epochs = 300;
    std::size_t patience = 30;
    double lambda_weight = 1.0;

    // protocol
    double train_fraction = 0.8;
    double val_fraction = 0.1;

    // input features: auto | sse | degree_onehot_log | random_normal
    std::string features = "auto";
    std::size_t sse_dim = 32;
    std::size_t sse_iters = 500;
    double sse_tol = 1e-8;
    std::size_t feature_dim = 8;

    static RunConfig parse(const std::string& text, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Canonical text: every key in fixed order, one per line.
    std::string to_text() const;
    /// FNV-1a 64 of to_text(), as 16 hex digits.
    std::string digest() const;

    void validate() const;
};

}  // namespace wsgat

#endif  // WSGAT_CONFIG_HPP
