#include "wsgat/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "wsgat/errors.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::graph {

namespace {

Csr build_csr(std::size_t num_nodes, std::span<const Edge> edges, bool outgoing) {
    Csr csr;
    csr.offsets.assign(num_nodes + 1, 0);
    for (const Edge& e : edges) ++csr.offsets[(outgoing ? e.src : e.dst) + 1];
    for (std::size_t i = 0; i < num_nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Row-major by owner, then by neighbor id.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Edge& ea = edges[a];
        const Edge& eb = edges[b];
        const NodeId oa = outgoing ? ea.src : ea.dst;
        const NodeId ob = outgoing ? eb.src : eb.dst;
        if (oa != ob) return oa < ob;
        return (outgoing ? ea.dst : ea.src) < (outgoing ? eb.dst : eb.src);
    });
    csr.neighbors.reserve(edges.size());
    csr.weights.reserve(edges.size());
    csr.edge_ids = order;
    for (std::size_t id : order) {
        csr.neighbors.push_back(outgoing ? edges[id].dst : edges[id].src);
        csr.weights.push_back(edges[id].weight);
    }
    return csr;
}

std::vector<std::string_view> split_fields(std::string_view line, EdgeFormat format) {
    std::vector<std::string_view> fields;
    if (format == EdgeFormat::csv4 || line.find('\t') != std::string_view::npos) {
        const char sep = format == EdgeFormat::csv4 ? ',' : '\t';
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = line.find(sep, start);
            fields.push_back(line.substr(start, pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        for (auto& f : fields) {
            while (!f.empty() && (f.front() == ' ' || f.front() == '\r')) f.remove_prefix(1);
            while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
        }
        return fields;
    }
    // Whitespace-separated fallback (KONECT-style files).
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_integer(std::string_view s, long long& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

SignedWeightedGraph::SignedWeightedGraph(std::size_t num_nodes, std::vector<Edge> edges,
                                         std::vector<std::string> labels)
    : num_nodes_(num_nodes), edges_(std::move(edges)), labels_(std::move(labels)) {
    if (num_nodes_ > std::numeric_limits<NodeId>::max()) throw Error("too many nodes");
    if (labels_.empty()) {
        labels_.reserve(num_nodes_);
        for (std::size_t i = 0; i < num_nodes_; ++i) labels_.push_back(std::to_string(i));
    } else if (labels_.size() != num_nodes_) {
        throw Error("label count " + std::to_string(labels_.size()) + " != num_nodes " +
                    std::to_string(num_nodes_));
    }
    PairSet seen;
    for (const Edge& e : edges_) {
        if (e.src >= num_nodes_ || e.dst >= num_nodes_)
            throw Error("edge endpoint out of range: " + std::to_string(e.src) + "->" +
                        std::to_string(e.dst));
        if (e.src == e.dst) throw Error("self-loop on node " + std::to_string(e.src));
        if (!std::isfinite(e.weight) || e.weight == 0.0)
            throw Error("edge weight must be finite and nonzero: " + std::to_string(e.src) +
                        "->" + std::to_string(e.dst));
        if (!seen.insert(e.src, e.dst))
            throw Error("duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst));
        if (e.weight > 0) ++num_positive_;
        max_abs_weight_ = std::max(max_abs_weight_, std::abs(e.weight));
    }
    csr_out_ = build_csr(num_nodes_, edges_, true);
    csr_in_ = build_csr(num_nodes_, edges_, false);
}

bool SignedWeightedGraph::has_edge(NodeId src, NodeId dst) const {
    if (src >= num_nodes_) return false;
    const auto first = csr_out_.neighbors.begin() + csr_out_.offsets[src];
    const auto last = csr_out_.neighbors.begin() + csr_out_.offsets[src + 1];
    return std::binary_search(first, last, dst);
}

double SignedWeightedGraph::positive_fraction() const noexcept {
    return edges_.empty() ? 0.0
                          : static_cast<double>(num_positive_) / static_cast<double>(edges_.size());
}

SignedWeightedGraph SignedWeightedGraph::with_edges(std::vector<Edge> edges) const {
    return SignedWeightedGraph(num_nodes_, std::move(edges), labels_);
}

EdgeFormat parse_edge_format(const std::string& name) {
    if (name == "tsv3") return EdgeFormat::tsv3;
    if (name == "csv4") return EdgeFormat::csv4;
    throw Error("unknown edge format '" + name + "' (expected tsv3 or csv4)");
}

SignedWeightedGraph parse_edge_list(std::istream& in, EdgeFormat format,
                                    const std::string& source_name, const LoadOptions& options,
                                    LoadStats* stats) {
    struct RawEdge {
        std::string src;
        std::string dst;
        double weight;
    };
    std::vector<RawEdge> raw;
    LoadStats local;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    const std::size_t expected_fields = format == EdgeFormat::csv4 ? 4 : 3;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        if (is_blank(view) || view.front() == '#' || view.front() == '%') continue;

        const auto fields = split_fields(view, format);
        if (fields.size() != expected_fields)
            throw ParseError(source_name, line_no,
                             "expected " + std::to_string(expected_fields) + " fields, got " +
                                 std::to_string(fields.size()));
        double weight = 0.0;
        if (!parse_double(fields[2], weight)) {
            // csv4 may carry a SOURCE,TARGET,RATING,TIME header line.
            if (format == EdgeFormat::csv4 && first_data_line) {
                first_data_line = false;
                continue;
            }
            throw ParseError(source_name, line_no,
                             "weight '" + std::string(fields[2]) + "' is not a number");
        }
        first_data_line = false;
        if (fields[0].empty() || fields[1].empty())
            throw ParseError(source_name, line_no, "empty node id");
        if (!std::isfinite(weight)) throw ParseError(source_name, line_no, "non-finite weight");
        if (weight == 0.0)
            throw ParseError(source_name, line_no,
                             "zero weight (0 is reserved for non-existent links)");
        ++local.data_lines;
        if (fields[0] == fields[1]) {
            ++local.self_loops_dropped;
            continue;
        }
        raw.push_back({std::string(fields[0]), std::string(fields[1]), weight});
        if (options.symmetrize)
            raw.push_back({std::string(fields[1]), std::string(fields[0]), weight});
    }
    if (raw.empty()) throw EmptyGraphError(source_name + ": edge list contains no edges");

    std::vector<std::string> labels;
    {
        std::unordered_map<std::string, int> unique;
        for (const auto& r : raw) {
            unique.emplace(r.src, 0);
            unique.emplace(r.dst, 0);
        }
        labels.reserve(unique.size());
        for (auto& kv : unique) labels.push_back(kv.first);
    }
    bool all_integer = true;
    std::vector<long long> numeric(labels.size());
    for (std::size_t i = 0; i < labels.size() && all_integer; ++i)
        all_integer = parse_integer(labels[i], numeric[i]);
    if (all_integer) {
        std::vector<std::size_t> idx(labels.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (numeric[a] != numeric[b]) return numeric[a] < numeric[b];
            return labels[a] < labels[b];  // "07" vs "7"
        });
        std::vector<std::string> sorted;
        sorted.reserve(labels.size());
        for (std::size_t i : idx) sorted.push_back(std::move(labels[i]));
        labels = std::move(sorted);
    } else {
        std::sort(labels.begin(), labels.end());
    }
    std::unordered_map<std::string, NodeId> id_of;
    id_of.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) id_of.emplace(labels[i], static_cast<NodeId>(i));

    // Last occurrence wins.
    std::unordered_map<std::uint64_t, double> weight_of;
    weight_of.reserve(raw.size());
    for (const auto& r : raw) {
        const auto key = PairSet::key(id_of.at(r.src), id_of.at(r.dst));
        auto [it, inserted] = weight_of.insert_or_assign(key, r.weight);
        if (!inserted) ++local.duplicates_collapsed;
    }
    if (options.symmetrize) {
        // Each input line produced two arcs; count duplicates per line.
        local.duplicates_collapsed /= 2;
    }
    std::vector<Edge> edges;
    edges.reserve(weight_of.size());
    for (const auto& [key, w] : weight_of)
        edges.push_back({static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xffffffffu), w});
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    if (stats) *stats = local;
    const std::size_t n = labels.size();
    return SignedWeightedGraph(n, std::move(edges), std::move(labels));
}

SignedWeightedGraph load_edge_list(const std::filesystem::path& path, EdgeFormat format,
                                   const LoadOptions& options, LoadStats* stats) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open edge list '" + path.string() + "'");
    return parse_edge_list(in, format, path.string(), options, stats);
}

std::string format_weight(double w) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), w);
    return std::string(buf, ptr);
}

void write_tsv3(const SignedWeightedGraph& g, std::ostream& out) {
    const auto& labels = g.labels();
    for (const Edge& e : g.edges())
        out << labels[e.src] << '\t' << labels[e.dst] << '\t' << format_weight(e.weight) << '\n';
}

SignedWeightedGraph normalize_weights(const SignedWeightedGraph& g, WeightNormalization mode) {
    const double scale = g.max_abs_weight();
    if (!(scale > 0.0)) throw Error("cannot normalize a graph without weighted edges");
    std::vector<Edge> edges(g.edges().begin(), g.edges().end());
    for (Edge& e : edges) {
        e.weight = mode == WeightNormalization::unit_abs ? std::abs(e.weight) / scale
                                                         : e.weight / scale;
        // Denormal underflow would violate the nonzero invariant.
        if (e.weight == 0.0) e.weight = std::copysign(std::numeric_limits<double>::min(), e.weight);
    }
    return g.with_edges(std::move(edges));
}

std::vector<NodePair> sample_negative_edges(const SignedWeightedGraph& g, std::size_t count,
                                            std::uint64_t seed, const PairSet& exclude) {
    std::vector<NodePair> result;
    if (count == 0) return result;
    const std::uint64_t n = g.num_nodes();
    const std::uint64_t total = n * (n - (n > 0 ? 1 : 0));

    // Admissible pairs = all ordered non-self pairs minus (E u exclude).
    // exclude is opaque, so count its non-self, non-edge members by
    // enumeration only when it is small enough to matter.
    auto blocked = [&](NodeId u, NodeId v) {
        return u == v || g.has_edge(u, v) || exclude.contains(u, v);
    };

    Rng rng(seed);
    const bool enumerate = total <= (std::uint64_t{1} << 22) || count * 4 >= total;
    if (enumerate) {
        if (total > (std::uint64_t{1} << 28))
            throw SamplingExhaustedError("negative sampling: graph too large to enumerate");
        std::vector<NodePair> candidates;
        for (NodeId u = 0; u < n; ++u)
            for (NodeId v = 0; v < n; ++v)
                if (!blocked(u, v)) candidates.push_back({u, v});
        if (candidates.size() < count)
            throw SamplingExhaustedError("negative sampling: requested " + std::to_string(count) +
                                         " pairs but only " + std::to_string(candidates.size()) +
                                         " non-adjacent pairs exist");
        // Partial Fisher-Yates.
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + rng.uniform_index(candidates.size() - i);
            std::swap(candidates[i], candidates[j]);
        }
        candidates.resize(count);
        return candidates;
    }

    if (count > total - g.num_edges())
        throw SamplingExhaustedError("negative sampling: requested " + std::to_string(count) +
                                     " pairs exceeds the number of non-adjacent pairs");
    PairSet chosen;
    const std::size_t max_attempts = 64 * count + 4096;
    std::size_t attempts = 0;
    result.reserve(count);
    while (result.size() < count) {
        if (++attempts > max_attempts)
            throw SamplingExhaustedError("negative sampling: gave up after " +
                                         std::to_string(max_attempts) + " draws with " +
                                         std::to_string(result.size()) + "/" +
                                         std::to_string(count) + " pairs found");
        const auto u = static_cast<NodeId>(rng.uniform_index(n));
        const auto v = static_cast<NodeId>(rng.uniform_index(n));
        if (blocked(u, v) || chosen.contains(u, v)) continue;
        chosen.insert(u, v);
        result.push_back({u, v});
    }
    return result;
}

EdgeSplit split_edges(const SignedWeightedGraph& g, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("train_fraction must lie in (0, 1)");
    Rng rng(seed);
    Rng perm_rng = rng.fork(1);
    const std::uint64_t train_neg_seed = rng.next_u64();
    const std::uint64_t test_neg_seed = rng.next_u64();

    std::vector<std::size_t> order(g.num_edges());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[perm_rng.uniform_index(i)]);

    const auto num_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(g.num_edges())));
    std::vector<Edge> train;
    train.reserve(num_train);
    EdgeSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Edge& e = g.edges()[order[i]];
        (i < num_train ? train : split.test_pos).push_back(e);
    }
    split.train_neg = sample_negative_edges(g, train.size(), train_neg_seed);
    PairSet exclude;
    exclude.insert_all(split.train_neg);
    split.test_neg = sample_negative_edges(g, split.test_pos.size(), test_neg_seed, exclude);
    split.train_graph = g.with_edges(std::move(train));
    return split;
}

}  // namespace wsgat::graph
