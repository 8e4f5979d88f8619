#ifndef WSGAT_VERIFY_DENSE_REFERENCE_HPP
#define WSGAT_VERIFY_DENSE_REFERENCE_HPP

#include <cstdint>
#include <span>

#include "wsgat/graph.hpp"
#include "wsgat/layer.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::verify {

using autodiff::Matrix;

// Plain-loop wsGAT over full N x N arrays. Reads parameter values only; no
// tape, no gather/scatter, no CSR.

/// alpha(i, j) for the arc j -> i (or the self-loop when i == j), 0 where
/// no arc exists.
Matrix dense_attention(const nn::WsGatLayer& layer, std::size_t head, const Matrix& h,
                       const graph::SignedWeightedGraph& g);

Matrix dense_layer_forward(const nn::WsGatLayer& layer, const Matrix& h,
                           const graph::SignedWeightedGraph& g);

Matrix dense_model_forward(std::span<const nn::WsGatLayer> layers, const Matrix& x,
                           const graph::SignedWeightedGraph& g);

/// Random directed signed graph: each ordered pair u != v is an arc with
/// probability density, weight magnitude in [0.1, 1], negative with
/// probability negative_fraction.
graph::SignedWeightedGraph random_signed_graph(std::size_t n, double density,
                                               double negative_fraction, Rng& rng);

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

}  // namespace wsgat::verify

#endif  // WSGAT_VERIFY_DENSE_REFERENCE_HPP
