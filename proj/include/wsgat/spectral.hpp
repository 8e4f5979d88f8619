#ifndef WSGAT_SPECTRAL_HPP
#define WSGAT_SPECTRAL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wsgat/autodiff/matrix.hpp"
#include "wsgat/graph.hpp"

namespace wsgat::spectral {

using autodiff::Matrix;

/// Symmetric sparse matrix in CSR form (both triangles stored).
struct SymmetricSparse {
    std::size_t n = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> cols;
    std::vector<double> values;

    /// out = S * x for an n x k block x.
    Matrix multiply(const Matrix& x) const;
    Matrix to_dense() const;
};

/// S = (A + A^T) / 2 with A_uv = sign(w_uv).
SymmetricSparse signed_adjacency(const graph::SignedWeightedGraph& g);

struct SpectralOptions {
    std::size_t dim = 32;
    std::size_t max_iters = 500;
    double tolerance = 1e-8;
    std::uint64_t seed = 0;
    /// Extra block columns iterated alongside the requested ones; 0 picks
    /// max(8, dim).
    std::size_t oversample = 0;
    /// Chebyshev filter degree applied per sweep; 1 is plain orthogonal
    /// iteration. Rayleigh-Ritz on S itself runs every sweep regardless.
    std::size_t filter_degree = 8;
};

struct SpectralEmbedding {
    Matrix vectors;                 // N x dim, orthonormal columns
    std::vector<double> eigenvalues;  // sorted by decreasing |lambda|
    std::size_t iterations = 0;
    double max_residual = 0.0;      // max_c ||S x_c - l_c x_c|| / |l_c|
};

/// Top-|lambda| eigenpairs of signed_adjacency(g) by orthogonal iteration
/// with a Rayleigh-Ritz step per sweep. Each column is sign-normalized so
/// its largest-magnitude entry is positive. Throws ConvergenceError when the
/// residual tolerance is not met within max_iters.
SpectralEmbedding signed_spectral_embedding(const graph::SignedWeightedGraph& g,
                                            const SpectralOptions& options);

/// Lower-level entry point on an explicit symmetric operator.
SpectralEmbedding top_eigenpairs(const SymmetricSparse& s, const SpectralOptions& options);

/// Cyclic Jacobi eigen-decomposition of a small dense symmetric matrix.
/// Returns eigenvalues (unsorted) and writes eigenvectors as columns.
std::vector<double> jacobi_eigen(Matrix a, Matrix& vectors);

enum class FallbackKind { degree_onehot_log, random_normal };

FallbackKind parse_fallback_kind(const std::string& name);

/// degree_onehot_log rows: [log(1+in_deg), log(1+out_deg), sum w_in,
/// sum w_out, 0...] truncated or zero-padded to d. random_normal: iid N(0,1).
Matrix fallback_features(const graph::SignedWeightedGraph& g, FallbackKind kind, std::size_t d,
                         std::uint64_t seed);

}  // namespace wsgat::spectral

#endif  // WSGAT_SPECTRAL_HPP
