#ifndef WSGAT_VERIFY_GRADCHECK_HPP
#define WSGAT_VERIFY_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "verify/check_result.hpp"
#include "wsgat/autodiff/tape.hpp"

namespace wsgat::verify {

using autodiff::Matrix;
using autodiff::Tape;
using autodiff::Var;

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-4;

/// Builds a scalar from differentiable leaves created on `tape`.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

/// ||a - n|| / max(||a||, ||n||, 1e-12), taken per input and maximized,
/// where a is the tape gradient and n the central difference.
double gradient_error(const ScalarFn& f, const std::vector<Matrix>& inputs,
                      double h = kFiniteDifferenceStep);

/// Same measure for every Parameter reached by `loss`, rebuilt from
/// scratch for every perturbation.
double parameter_gradient_error(const std::function<Var(Tape&)>& loss,
                                std::span<autodiff::Parameter* const> params,
                                double h = kFiniteDifferenceStep);

/// One result per differentiable op, named after the op.
std::vector<CheckResult> gradcheck_ops(std::uint64_t seed);

/// One result per randomly built TaskModel on an 8-node graph.
std::vector<CheckResult> gradcheck_models(std::uint64_t seed, std::size_t count = 3);

}  // namespace wsgat::verify

#endif  // WSGAT_VERIFY_GRADCHECK_HPP
