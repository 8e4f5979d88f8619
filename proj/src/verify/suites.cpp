#include "verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "verify/dense_reference.hpp"
#include "verify/gradcheck.hpp"
#include "wsgat/autodiff/ops.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/metrics.hpp"
#include "wsgat/rng.hpp"
#include "wsgat/spectral.hpp"

namespace wsgat::verify {

namespace ad = wsgat::autodiff;

namespace {

CheckResult bounded(std::string module, std::string property, double observed, double threshold,
                    std::string detail = {}) {
    CheckResult r{std::move(module), std::move(property), observed <= threshold, observed,
                  threshold, std::move(detail)};
    return r;
}

struct OracleCase {
    graph::SignedWeightedGraph g;
    Matrix x;
    std::vector<nn::WsGatLayer> layers;
};

nn::StackConfig random_stack(Rng& rng) {
    static const ad::Activation acts[] = {ad::Activation::elu, ad::Activation::tanh,
                                          ad::Activation::identity, ad::Activation::leaky_relu};
    nn::StackConfig s;
    s.layers = 1 + rng.uniform_index(2);
    s.hidden = 1 + rng.uniform_index(4);
    s.heads = 1 + rng.uniform_index(3);
    s.hidden_merge = rng.uniform_index(2) ? nn::HeadMerge::concat : nn::HeadMerge::mean;
    s.attention_hidden = {1 + rng.uniform_index(6)};
    if (rng.uniform_index(3) == 0) s.attention_hidden.push_back(1 + rng.uniform_index(4));
    s.activation = acts[rng.uniform_index(4)];
    s.projection = rng.uniform_index(4) != 0;
    s.self_loop_weight = rng.uniform_index(5) == 0 ? -1.0 : 1.0;
    s.attention_input = rng.uniform_index(2) ? nn::AttentionInput::factored : nn::AttentionInput::concat;
    return s;
}

/// Graphs of 1..10 nodes; every fourth case has two heads or more forced,
/// and negative weights appear in all but the all-positive quarter.
std::vector<OracleCase> oracle_corpus(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<OracleCase> cases;
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t n = 1 + rng.uniform_index(10);
        const double density = rng.uniform(0.1, 0.7);
        const double neg = c % 4 == 3 ? 0.0 : rng.uniform(0.2, 0.6);
        OracleCase oc{random_signed_graph(n, density, neg, rng), {}, {}};
        const std::size_t f = 1 + rng.uniform_index(4);
        oc.x = random_matrix(n, f, rng);
        nn::StackConfig s = random_stack(rng);
        if (c % 4 == 0) s.heads = 2 + rng.uniform_index(2);
        oc.layers = nn::make_stack(s, f, rng);
        cases.push_back(std::move(oc));
    }
    return cases;
}

double max_abs(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return INFINITY;
    return ad::max_abs_diff(a, b);
}

/// Sparse attention of every head of every layer, with the layer input.
template <class F>
void for_each_attention(OracleCase& oc, F&& visit) {
    const auto index = nn::AttentionIndex::build(oc.g);
    Matrix h = oc.x;
    for (auto& layer : oc.layers) {
        for (std::size_t k = 0; k < layer.num_heads(); ++k) {
            ad::Tape tape;
            ad::Var hv = tape.constant(h);
            ad::Var alpha = nn::attention_coefficients(nn::attention_logits(layer, k, tape, hv, index), index);
            visit(layer, k, h, index, alpha.value());
        }
        ad::Tape tape;
        h = nn::layer_forward(layer, tape, tape.constant(h), index).value();
    }
}

}  // namespace

CheckResult dense_equivalence(std::size_t graphs, std::uint64_t seed) {
    double worst = 0.0;
    std::size_t multi_head = 0, negative = 0;
    for (OracleCase& oc : oracle_corpus(graphs, seed)) {
        ad::Tape tape;
        const auto index = nn::AttentionIndex::build(oc.g);
        const Matrix sparse = nn::model_forward(oc.layers, tape, tape.constant(oc.x), index).value();
        const Matrix dense = dense_model_forward(oc.layers, oc.x, oc.g);
        worst = std::max(worst, max_abs(sparse, dense));
        multi_head += oc.layers.front().num_heads() > 1;
        negative += oc.g.num_negative() > 0;
    }
    std::ostringstream d;
    d << graphs << " graphs, " << multi_head << " multi-head, " << negative << " with negative arcs";
    return bounded("wsgat", "dense_equivalence", worst, kOracleTolerance, d.str());
}

std::vector<CheckResult> attention_invariants(std::size_t graphs, std::uint64_t seed) {
    double range_excess = 0.0, l1_error = 0.0, dense_gap = 0.0;
    for (OracleCase& oc : oracle_corpus(graphs, seed)) {
        for_each_attention(oc, [&](const nn::WsGatLayer& layer, std::size_t k, const Matrix& h,
                                   const nn::AttentionIndex& index, const Matrix& alpha) {
            std::vector<double> l1(index.num_nodes, 0.0);
            Matrix as_dense(index.num_nodes, index.num_nodes);
            for (std::size_t e = 0; e < index.size(); ++e) {
                range_excess = std::max(range_excess, std::abs(alpha[e]) - 1.0);
                l1[index.dst[e]] += std::abs(alpha[e]);
                as_dense(index.dst[e], index.src[e]) = alpha[e];
            }
            for (double s : l1) l1_error = std::max(l1_error, std::abs(s - 1.0));
            dense_gap = std::max(dense_gap, max_abs(as_dense, dense_attention(layer, k, h, oc.g)));
        });
    }
    return {bounded("wsgat", "attention_range", range_excess, 0.0, "max(|alpha|) - 1"),
            bounded("wsgat", "attention_l1", l1_error, kOracleTolerance, "max |sum|alpha| - 1|"),
            bounded("wsgat", "attention_dense", dense_gap, kOracleTolerance)};
}

namespace {

CheckResult factored_matches_concat() {
    Rng rng(21);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 1 + rng.uniform_index(10);
        auto g = random_signed_graph(n, 0.4, 0.4, rng);
        const std::size_t f = 1 + rng.uniform_index(5);
        const Matrix x = random_matrix(n, f, rng);
        const std::uint64_t init = rng.next_u64();
        nn::LayerConfig lc;
        lc.in_features = f;
        lc.out_features = 3;
        lc.heads = 2;
        Matrix logits[2];
        for (int mode = 0; mode < 2; ++mode) {
            lc.attention_input = mode ? nn::AttentionInput::concat : nn::AttentionInput::factored;
            Rng r(init);
            nn::WsGatLayer layer(lc, r, "l");
            ad::Tape tape;
            const auto index = nn::AttentionIndex::build(g);
            logits[mode] = nn::attention_logits(layer, 1, tape, tape.constant(x), index).value();
        }
        worst = std::max(worst, max_abs(logits[0], logits[1]));
    }
    return bounded("wsgat", "factored_matches_concat", worst, kOracleTolerance);
}

CheckResult permutation_equivariance() {
    Rng rng(23);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 2 + rng.uniform_index(9);
        auto g = random_signed_graph(n, 0.4, 0.4, rng);
        const Matrix x = random_matrix(n, 3, rng);
        nn::StackConfig s = random_stack(rng);
        auto layers = nn::make_stack(s, 3, rng);
        std::vector<std::uint32_t> pi(n);
        std::iota(pi.begin(), pi.end(), 0u);
        for (std::size_t i = n; i > 1; --i) std::swap(pi[i - 1], pi[rng.uniform_index(i)]);
        std::vector<graph::Edge> edges;
        for (const auto& e : g.edges()) edges.push_back({pi[e.src], pi[e.dst], e.weight});
        graph::SignedWeightedGraph pg(n, edges);
        Matrix px(n, 3);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < 3; ++q) px(pi[i], q) = x(i, q);
        ad::Tape t1, t2;
        const Matrix y = nn::model_forward(layers, t1, t1.constant(x), nn::AttentionIndex::build(g)).value();
        const Matrix py = nn::model_forward(layers, t2, t2.constant(px), nn::AttentionIndex::build(pg)).value();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < y.cols(); ++q)
                worst = std::max(worst, std::abs(py(pi[i], q) - y(i, q)));
    }
    return bounded("wsgat", "permutation_equivariance", worst, 0.0, "exact equality");
}

CheckResult sign_sensitivity() {
    Rng rng(29);
    std::size_t changed = 0, trials = 0;
    for (int c = 0; c < 50; ++c) {
        nn::LayerConfig lc;
        lc.in_features = 2;
        lc.out_features = 2;
        const std::uint64_t init = rng.next_u64();
        const Matrix x = random_matrix(2, 2, rng);
        const double w = rng.uniform(0.1, 1.0);
        Rng r(init);
        nn::WsGatLayer layer(lc, r, "l");
        // Row 2F of the first attention weight multiplies w_ij.
        double wrow = 0.0;
        const Matrix& w0 = layer.head(0).attention.weights[0].value;
        for (std::size_t q = 0; q < w0.cols(); ++q) wrow += std::abs(w0(4, q));
        if (wrow == 0.0) continue;
        ++trials;
        double logit[2];
        for (int s = 0; s < 2; ++s) {
            graph::SignedWeightedGraph g(2, {{0, 1, s ? -w : w}});
            ad::Tape tape;
            logit[s] = nn::attention_logits(layer, 0, tape, tape.constant(x), nn::AttentionIndex::build(g)).value()[0];
        }
        changed += logit[0] != logit[1];
    }
    CheckResult r{"wsgat", "sign_sensitivity", changed == trials, static_cast<double>(trials - changed), 0.0,
                  std::to_string(changed) + "/" + std::to_string(trials) + " logits changed"};
    return r;
}

CheckResult negation_negates_alpha() {
    Rng rng(31);
    double worst = 0.0;
    for (int c = 0; c < 200; ++c) {
        const std::size_t n = 1 + rng.uniform_index(12);
        const std::size_t segs = 1 + rng.uniform_index(4);
        std::vector<std::uint32_t> seg(n);
        for (auto& s : seg) s = static_cast<std::uint32_t>(rng.uniform_index(segs));
        const Matrix e = random_matrix(n, 1, rng, 3.0);
        Matrix ne = e;
        for (double& v : ne.values()) v = -v;
        ad::Tape tape;
        const Matrix a = ad::segment_signed_softmax(tape.constant(e), seg, segs).value();
        const Matrix b = ad::segment_signed_softmax(tape.constant(ne), seg, segs).value();
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] + b[i]));
    }
    return bounded("autodiff", "signed_softmax_negation", worst, 0.0, "exact equality");
}

/// Top-d |eigenvalue| pairs of a dense symmetric matrix via Eigen.
void dense_top(const Matrix& s, std::size_t d, std::vector<double>& values, Eigen::MatrixXd& vectors) {
    const auto n = static_cast<Eigen::Index>(s.rows());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = s(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    values.clear();
    vectors.resize(n, static_cast<Eigen::Index>(d + 1 <= static_cast<std::size_t>(n) ? d + 1 : d));
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        values.push_back(es.eigenvalues()(order[c]));
        vectors.col(c) = es.eigenvectors().col(order[c]);
    }
}

std::vector<CheckResult> spectral_oracle() {
    Rng rng(37);
    double angle = 0.0, value_gap = 0.0, ortho = 0.0, residual = 0.0, flip = 0.0;
    std::size_t used = 0;
    for (int c = 0; used < 20 && c < 400; ++c) {
        auto g = random_signed_graph(12, 0.25, 0.4, rng);
        if (g.num_edges() == 0) continue;
        const std::size_t d = 4;
        const Matrix sd = spectral::signed_adjacency(g).to_dense();
        std::vector<double> vals;
        Eigen::MatrixXd vecs;
        dense_top(sd, d, vals, vecs);
        // Needs a clear gap below the d-th magnitude for a unique subspace.
        if (std::abs(vals[d - 1]) - std::abs(vals[d]) < 1e-2 || std::abs(vals[d - 1]) < 1e-2) continue;
        ++used;
        spectral::SpectralOptions opts;
        opts.dim = d;
        opts.seed = rng.next_u64();
        const auto emb = spectral::signed_spectral_embedding(g, opts);
        Eigen::MatrixXd x(12, static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t q = 0; q < d; ++q) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = emb.vectors(i, q);
        const Eigen::MatrixXd q = vecs.leftCols(static_cast<Eigen::Index>(d));
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(q.transpose() * x).singularValues();
        const double cos_min = std::min(1.0, sv.minCoeff());
        angle = std::max(angle, std::sqrt(std::max(0.0, 1.0 - cos_min * cos_min)));
        for (std::size_t k = 0; k < d; ++k) value_gap = std::max(value_gap, std::abs(emb.eigenvalues[k] - vals[k]));
        ortho = std::max(ortho, (x.transpose() * x - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff());
        residual = std::max(residual, emb.max_residual);

        std::vector<graph::Edge> neg;
        for (const auto& e : g.edges()) neg.push_back({e.src, e.dst, -e.weight});
        opts.seed = rng.next_u64();
        const auto nemb = spectral::signed_spectral_embedding(g.with_edges(neg), opts);
        std::vector<double> a = emb.eigenvalues, b = nemb.eigenvalues;
        for (double& v : b) v = -v;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        for (std::size_t k = 0; k < d; ++k) flip = std::max(flip, std::abs(a[k] - b[k]));
    }
    const std::string detail = std::to_string(used) + " graphs, 12 nodes, d=4";
    return {bounded("spectral", "subspace_angle", angle, 1e-6, detail),
            bounded("spectral", "eigenvalues_match_dense", value_gap, 1e-6, detail),
            bounded("spectral", "orthonormal_columns", ortho, 1e-8, detail),
            bounded("spectral", "eigen_residual", residual, 1e-6, detail),
            bounded("spectral", "sign_flip_negates_spectrum", flip, 1e-6, detail)};
}

// Brute-force references; deliberately naive.

double auc_reference(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
    std::uint64_t twice = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (l[i]) ++pos; else ++neg;
        if (!l[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j]) continue;
            twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
        }
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double f1_reference(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& l) {
    double tp = 0, pp = 0, lp = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        tp += p[i] && l[i];
        pp += p[i] != 0;
        lp += l[i] != 0;
    }
    const double precision = pp == 0 ? 0.0 : tp / pp;
    const double recall = lp == 0 ? 0.0 : tp / lp;
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

double mae_reference(const std::vector<double>& p, const std::vector<double>& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
    return s / static_cast<double>(p.size());
}

/// Labels with both classes; scores drawn from a small grid so ties occur.
void random_instance(Rng& rng, std::vector<double>& scores, std::vector<std::uint8_t>& labels) {
    const std::size_t n = 2 + rng.uniform_index(49);
    scores.resize(n);
    labels.resize(n);
    const bool coarse = rng.uniform_index(2) == 0;
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = coarse ? static_cast<double>(rng.uniform_index(5)) / 4.0 : rng.uniform01();
        labels[i] = rng.uniform_index(2);
    }
    labels[0] = 1;
    labels[1] = 0;
}

std::vector<CheckResult> auc_properties() {
    Rng rng(41);
    std::size_t monotone_bad = 0, complement_bad = 0;
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (int c = 0; c < 1000; ++c) {
        random_instance(rng, s, l);
        const double auc = metrics::roc_auc(s, l);
        std::vector<double> ex(s.size()), af(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            ex[i] = std::exp(s[i]);
            af[i] = 3.0 * s[i] - 7.0;
        }
        monotone_bad += metrics::roc_auc(ex, l) != auc || metrics::roc_auc(af, l) != auc;
        std::vector<std::uint8_t> flipped(l.size());
        for (std::size_t i = 0; i < l.size(); ++i) flipped[i] = 1 - l[i];
        complement_bad += auc + metrics::roc_auc(s, flipped) != 1.0;
    }
    return {bounded("metrics", "auc_monotone_invariance", static_cast<double>(monotone_bad), 0.0,
                    "mismatching instances of 1000"),
            bounded("metrics", "auc_label_complement", static_cast<double>(complement_bad), 0.0,
                    "mismatching instances of 1000")};
}

}  // namespace

CheckResult metric_bruteforce(const std::string& metric, std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t mismatches = 0;
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (std::size_t c = 0; c < instances; ++c) {
        random_instance(rng, s, l);
        if (metric == "roc_auc") {
            mismatches += metrics::roc_auc(s, l) != auc_reference(s, l);
        } else if (metric == "f1") {
            std::vector<std::uint8_t> p(l.size());
            for (auto& v : p) v = rng.uniform_index(2);
            mismatches += metrics::f1_score(p, l) != f1_reference(p, l);
        } else if (metric == "mae") {
            std::vector<double> t(s.size());
            for (auto& v : t) v = rng.uniform(-1.0, 1.0);
            mismatches += metrics::mean_absolute_error(s, t) != mae_reference(s, t);
        } else {
            throw ConfigError("unknown metric '" + metric + "'");
        }
    }
    return bounded("metrics", metric + "_bruteforce", static_cast<double>(mismatches), 0.0,
                   "mismatching instances of " + std::to_string(instances));
}

CheckResult f1_closed_form() {
    // 8998 of 10000 labels positive; the all-positive predictor has
    // precision p and recall 1, so F1 = 2p / (1 + p).
    std::vector<std::uint8_t> labels(10000, 0), predicted(10000, 1);
    std::fill(labels.begin(), labels.begin() + 8998, 1);
    const double f1 = metrics::f1_score(predicted, labels);
    return bounded("metrics", "f1_all_positive_closed_form", std::abs(f1 - 0.9472), 1e-4,
                   "f1 = " + std::to_string(f1));
}

const std::vector<Property>& property_registry() {
    static const std::vector<Property> registry = {
        {"gradcheck", "autodiff", "op_gradients", [] { return gradcheck_ops(3); }},
        {"gradcheck", "wsgat", "model_gradients", [] { return gradcheck_models(5, 3); }},
        {"oracle", "wsgat", "dense_equivalence", [] { return std::vector{dense_equivalence()}; }},
        {"oracle", "wsgat", "attention_invariants", [] { return attention_invariants(); }},
        {"oracle", "wsgat", "factored_matches_concat", [] { return std::vector{factored_matches_concat()}; }},
        {"oracle", "wsgat", "permutation_equivariance", [] { return std::vector{permutation_equivariance()}; }},
        {"oracle", "wsgat", "sign_sensitivity", [] { return std::vector{sign_sensitivity()}; }},
        {"oracle", "autodiff", "signed_softmax_negation", [] { return std::vector{negation_negates_alpha()}; }},
        {"oracle", "spectral", "dense_eigensolver", [] { return spectral_oracle(); }},
        {"metrics", "metrics", "roc_auc_bruteforce", [] { return std::vector{metric_bruteforce("roc_auc")}; }},
        {"metrics", "metrics", "f1_bruteforce", [] { return std::vector{metric_bruteforce("f1")}; }},
        {"metrics", "metrics", "mae_bruteforce", [] { return std::vector{metric_bruteforce("mae")}; }},
        {"metrics", "metrics", "auc_properties", [] { return auc_properties(); }},
        {"metrics", "metrics", "f1_closed_form", [] { return std::vector{f1_closed_form()}; }},
    };
    return registry;
}

std::vector<CheckResult> run_suite(const std::string& suite) {
    if (suite != "all" && suite != "gradcheck" && suite != "oracle" && suite != "metrics")
        throw ConfigError("unknown suite '" + suite + "' (expected gradcheck, oracle, metrics or all)");
    std::vector<CheckResult> results;
    for (const Property& p : property_registry()) {
        if (suite != "all" && p.suite != suite) continue;
        try {
            for (CheckResult& r : p.run()) results.push_back(std::move(r));
        } catch (const std::exception& e) {
            results.push_back({p.module, p.name, false, INFINITY, 0.0, std::string("threw: ") + e.what()});
        }
    }
    return results;
}

}  // namespace wsgat::verify
