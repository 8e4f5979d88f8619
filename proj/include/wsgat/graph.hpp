#ifndef WSGAT_GRAPH_HPP
#define WSGAT_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace wsgat::graph {

using NodeId = std::uint32_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Ordered (src, dst) pair without a weight, used for non-edges.
struct NodePair {
    NodeId src = 0;
    NodeId dst = 0;

    friend bool operator==(const NodePair&, const NodePair&) = default;
};

/// Compressed adjacency. For csr_out row u lists dst nodes of u's
/// out-arcs; for csr_in row v lists src nodes of v's in-arcs. Neighbor
/// lists are sorted by neighbor id.
struct Csr {
    std::vector<std::size_t> offsets;  // num_nodes + 1
    std::vector<NodeId> neighbors;
    std::vector<double> weights;
    std::vector<std::size_t> edge_ids;  // index into SignedWeightedGraph::edges()

    std::size_t degree(NodeId u) const { return offsets[u + 1] - offsets[u]; }
};

/// Immutable directed graph with signed, finite, nonzero edge weights.
///
/// The edge list keeps the order it was constructed with; all
/// order-dependent computations downstream iterate in that order.
class SignedWeightedGraph {
public:
    SignedWeightedGraph() = default;

    /// Validates every invariant and builds both CSR views. Throws
    /// wsgat::Error on out-of-range ids, self-loops, duplicate pairs, or
    /// zero/non-finite weights. Empty labels default to the decimal id.
    SignedWeightedGraph(std::size_t num_nodes, std::vector<Edge> edges,
                        std::vector<std::string> labels = {});

    std::size_t num_nodes() const noexcept { return num_nodes_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    std::span<const Edge> edges() const noexcept { return edges_; }
    const Csr& csr_out() const noexcept { return csr_out_; }
    const Csr& csr_in() const noexcept { return csr_in_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    bool has_edge(NodeId src, NodeId dst) const;

    std::size_t num_positive() const noexcept { return num_positive_; }
    std::size_t num_negative() const noexcept { return edges_.size() - num_positive_; }
    double positive_fraction() const noexcept;
    double max_abs_weight() const noexcept { return max_abs_weight_; }

    /// Same node set and labels, different edges.
    SignedWeightedGraph with_edges(std::vector<Edge> edges) const;

private:
    std::size_t num_nodes_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::string> labels_;
    Csr csr_out_;
    Csr csr_in_;
    std::size_t num_positive_ = 0;
    double max_abs_weight_ = 0.0;
};

/// Set of ordered pairs keyed as src * 2^32 + dst.
class PairSet {
public:
    static std::uint64_t key(NodeId src, NodeId dst) {
        return (static_cast<std::uint64_t>(src) << 32) | dst;
    }

    bool insert(NodeId src, NodeId dst) { return set_.insert(key(src, dst)).second; }
    bool contains(NodeId src, NodeId dst) const { return set_.count(key(src, dst)) != 0; }
    std::size_t size() const noexcept { return set_.size(); }
    bool empty() const noexcept { return set_.empty(); }

    template <class Range>
    void insert_all(const Range& pairs) {
        for (const auto& p : pairs) insert(p.src, p.dst);
    }

private:
    std::unordered_set<std::uint64_t> set_;
};

enum class EdgeFormat { tsv3, csv4 };

EdgeFormat parse_edge_format(const std::string& name);

struct LoadOptions {
    /// Emit both arcs for every input line (undirected sources).
    bool symmetrize = false;
};

struct LoadStats {
    std::size_t data_lines = 0;
    std::size_t duplicates_collapsed = 0;
    std::size_t self_loops_dropped = 0;
};

/// Parses an edge list. Node ids are assigned in sorted label order
/// (numeric order when every label is an integer) and edges are sorted by
/// (src, dst), so re-ingesting a written file reproduces it byte for byte.
/// Duplicate pairs keep the weight of the last occurrence.
SignedWeightedGraph parse_edge_list(std::istream& in, EdgeFormat format,
                                    const std::string& source_name,
                                    const LoadOptions& options = {},
                                    LoadStats* stats = nullptr);

SignedWeightedGraph load_edge_list(const std::filesystem::path& path, EdgeFormat format,
                                   const LoadOptions& options = {},
                                   LoadStats* stats = nullptr);

/// Writes `src\tdst\tweight\n` lines using the original labels. Weights
/// are printed with round-trip precision.
void write_tsv3(const SignedWeightedGraph& g, std::ostream& out);

std::string format_weight(double w);

enum class WeightNormalization { unit_abs, signed_unit };

/// unit_abs: w -> |w| / max|w|; signed_unit: w -> w / max|w|.
SignedWeightedGraph normalize_weights(const SignedWeightedGraph& g, WeightNormalization mode);

struct EdgeSplit {
    SignedWeightedGraph train_graph;
    std::vector<Edge> test_pos;
    std::vector<NodePair> train_neg;
    std::vector<NodePair> test_neg;
    std::uint64_t seed = 0;
};

/// Random train/test split of the edges plus equal-sized negative sets.
/// train_neg and test_neg are disjoint from each other and from all of g's
/// edges.
EdgeSplit split_edges(const SignedWeightedGraph& g, double train_fraction, std::uint64_t seed);

/// `count` distinct ordered pairs (u, v), u != v, that are neither edges of
/// g nor in `exclude`. Uniform over the admissible pairs.
std::vector<NodePair> sample_negative_edges(const SignedWeightedGraph& g, std::size_t count,
                                            std::uint64_t seed, const PairSet& exclude = {});

}  // namespace wsgat::graph

#endif  // WSGAT_GRAPH_HPP
