#ifndef WSGAT_TESTS_FIXTURES_HPP
#define WSGAT_TESTS_FIXTURES_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wsgat/config.hpp"
#include "wsgat/graph.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::test {

/// Two factions; arcs inside a faction are positive, across are negative.
/// Magnitudes are uniform in [1, 10] (bitcoin-like scale).
inline graph::SignedWeightedGraph faction_graph(std::size_t n, std::size_t edges, std::uint64_t seed) {
    Rng rng(seed);
    graph::PairSet seen;
    std::vector<graph::Edge> out;
    while (out.size() < edges) {
        const auto u = static_cast<graph::NodeId>(rng.uniform_index(n));
        const auto v = static_cast<graph::NodeId>(rng.uniform_index(n));
        if (u == v || !seen.insert(u, v)) continue;
        const double magnitude = 1.0 + static_cast<double>(rng.uniform_index(10));
        const bool same = (u % 2) == (v % 2);
        out.push_back({u, v, same ? magnitude : -magnitude});
    }
    return graph::SignedWeightedGraph(n, std::move(out));
}

/// Small and fast configuration for pipeline tests.
inline RunConfig small_config() {
    RunConfig c;
    c.hidden = 8;
    c.attention_hidden = {8};
    c.head_hidden = 16;
    c.lr = 1e-2;
    c.epochs = 40;
    c.patience = 40;
    c.sse_dim = 4;
    c.feature_dim = 8;
    return c;
}

/// Fresh per-test directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("wsgat_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace wsgat::test

#endif  // WSGAT_TESTS_FIXTURES_HPP
