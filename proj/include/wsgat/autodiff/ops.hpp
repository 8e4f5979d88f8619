#ifndef WSGAT_AUTODIFF_OPS_HPP
#define WSGAT_AUTODIFF_OPS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wsgat/autodiff/tape.hpp"

namespace wsgat::autodiff {

// Every op records itself on the tape of its inputs, checks shapes (throws
// ShapeError) and checks its output for NaN/Inf (throws NumericFault).
//
// Broadcasting is limited to: b is 1x1 (scalar), or b is 1 x cols(a) (row
// vector added to every row). scale_rows covers the column-vector case.

Var matmul(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product (with the same broadcasting as add).
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// out(r, :) = a(r, :) * s(r) for a column s with rows(a) entries.
Var scale_rows(const Var& a, const Var& s);

/// axis 0 stacks rows, axis 1 stacks columns. Empty (0-size) parts are
/// skipped.
Var concat(std::span<const Var> parts, int axis);

/// Rows [begin, end) of x.
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);

/// out(r, :) = x(index[r], :).
Var gather_rows(const Var& x, std::span<const std::uint32_t> index);
/// out(index[r], :) += x(r, :), out has num_rows rows.
Var scatter_add_rows(const Var& x, std::span<const std::uint32_t> index, std::size_t num_rows);

Var leaky_relu(const Var& x, double slope);
Var relu(const Var& x);
Var elu(const Var& x, double alpha = 1.0);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
/// abs'(0) = 0.
Var abs(const Var& x);
/// Piecewise constant: zero derivative everywhere.
Var sign(const Var& x);
Var square(const Var& x);
Var identity(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

/// Signed softmax per segment over a column of logits:
///   alpha_j = sign(e_j) * exp(|e_j| - m) / sum_{k in seg} exp(|e_k| - m),
/// m = max |e| in the segment. segment[j] < num_segments for every j.
/// The sign factor is treated as locally constant in backward.
Var segment_signed_softmax(const Var& logits, std::span<const std::uint32_t> segment,
                           std::size_t num_segments);

/// Mean cross-entropy of row-wise softmax(logits) against class labels.
Var softmax_cross_entropy(const Var& logits, std::span<const std::uint32_t> labels);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets,
/// computed in the stable log-sum-exp form.
Var bce_with_logits(const Var& logits, std::span<const double> targets);

/// mean((a - b)^2).
Var mse(const Var& a, const Var& b);

/// Activation selector shared by layers and heads.
enum class Activation { identity, relu, leaky_relu, elu, tanh, sigmoid };

Var apply(Activation act, const Var& x, double leaky_slope = 0.2);
Activation parse_activation(const std::string& name);
std::string to_string(Activation act);
/// Scalar version of apply() for dense reference code.
double apply_scalar(Activation act, double x, double leaky_slope = 0.2);

}  // namespace wsgat::autodiff

#endif  // WSGAT_AUTODIFF_OPS_HPP
