#ifndef WSGAT_AUTODIFF_ADAM_HPP
#define WSGAT_AUTODIFF_ADAM_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "wsgat/autodiff/tape.hpp"

namespace wsgat::autodiff {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates, one pair per parameter, plus the step
/// counter used for bias correction.
struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t step = 0;
};

/// One bias-corrected Adam update of `params` from their `grad` fields.
/// Initializes `state` to zeros on first use.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config);

}  // namespace wsgat::autodiff

#endif  // WSGAT_AUTODIFF_ADAM_HPP
