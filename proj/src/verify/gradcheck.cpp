#include "verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "verify/dense_reference.hpp"
#include "wsgat/autodiff/ops.hpp"
#include "wsgat/pipelines.hpp"
#include "wsgat/rng.hpp"

namespace wsgat::verify {

namespace ad = wsgat::autodiff;

namespace {

double norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return std::sqrt(s);
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
    Matrix diff = analytic;
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= numeric[i];
    const double denom = std::max({norm(analytic), norm(numeric), 1e-12});
    return norm(diff) / denom;
}

double evaluate(const ScalarFn& f, const std::vector<Matrix>& inputs) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m));
    return f(tape, leaves).value()[0];
}

/// Pushes entries out of (-margin, margin) so kinked ops stay differentiable.
Matrix away_from_zero(Matrix m, double margin = 0.2) {
    for (double& v : m.values())
        if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
    return m;
}

/// sum(op(x) * r) for a fixed random r, so every output entry matters.
ScalarFn contract(std::function<Var(Tape&, std::span<const Var>)> op, Matrix r) {
    return [op = std::move(op), r = std::move(r)](Tape& t, std::span<const Var> in) {
        Var y = op(t, in);
        if (y.rows() == 1 && y.cols() == 1) return y;
        return ad::sum(ad::mul(y, t.constant(r)));
    };
}

struct OpCase {
    std::string name;
    std::vector<Matrix> inputs;
    std::function<Var(Tape&, std::span<const Var>)> op;
    std::size_t out_rows = 1;
    std::size_t out_cols = 1;
};

std::vector<OpCase> op_cases(Rng& rng) {
    auto rnd = [&](std::size_t r, std::size_t c) { return random_matrix(r, c, rng); };
    auto kinked = [&](std::size_t r, std::size_t c) { return away_from_zero(rnd(r, c)); };
    using S = std::span<const Var>;
    std::vector<OpCase> cases;
    cases.push_back({"matmul", {rnd(3, 4), rnd(4, 2)}, [](Tape&, S v) { return ad::matmul(v[0], v[1]); }, 3, 2});
    cases.push_back({"add", {rnd(3, 4), rnd(3, 4)}, [](Tape&, S v) { return ad::add(v[0], v[1]); }, 3, 4});
    cases.push_back({"add[scalar]", {rnd(3, 4), rnd(1, 1)}, [](Tape&, S v) { return ad::add(v[0], v[1]); }, 3, 4});
    cases.push_back({"add[row]", {rnd(3, 4), rnd(1, 4)}, [](Tape&, S v) { return ad::add(v[0], v[1]); }, 3, 4});
    cases.push_back({"sub", {rnd(3, 4), rnd(3, 4)}, [](Tape&, S v) { return ad::sub(v[0], v[1]); }, 3, 4});
    cases.push_back({"sub[row]", {rnd(3, 4), rnd(1, 4)}, [](Tape&, S v) { return ad::sub(v[0], v[1]); }, 3, 4});
    cases.push_back({"mul", {rnd(3, 4), rnd(3, 4)}, [](Tape&, S v) { return ad::mul(v[0], v[1]); }, 3, 4});
    cases.push_back({"mul[scalar]", {rnd(3, 4), rnd(1, 1)}, [](Tape&, S v) { return ad::mul(v[0], v[1]); }, 3, 4});
    cases.push_back({"mul[row]", {rnd(3, 4), rnd(1, 4)}, [](Tape&, S v) { return ad::mul(v[0], v[1]); }, 3, 4});
    cases.push_back({"scale", {rnd(3, 4)}, [](Tape&, S v) { return ad::scale(v[0], -1.7); }, 3, 4});
    cases.push_back({"scale_rows", {rnd(4, 3), rnd(4, 1)}, [](Tape&, S v) { return ad::scale_rows(v[0], v[1]); }, 4, 3});
    cases.push_back({"concat[rows]", {rnd(2, 3), rnd(1, 3)}, [](Tape&, S v) { return ad::concat(v, 0); }, 3, 3});
    cases.push_back({"concat[cols]", {rnd(3, 2), rnd(3, 1), Matrix(3, 0)}, [](Tape&, S v) { return ad::concat(v, 1); }, 3, 3});
    cases.push_back({"slice_rows", {rnd(5, 3)}, [](Tape&, S v) { return ad::slice_rows(v[0], 1, 4); }, 3, 3});
    cases.push_back({"gather_rows", {rnd(4, 3)}, [](Tape&, S v) {
        static const std::uint32_t idx[] = {2, 0, 2, 3, 1};
        return ad::gather_rows(v[0], idx);
    }, 5, 3});
    cases.push_back({"scatter_add_rows", {rnd(5, 2)}, [](Tape&, S v) {
        static const std::uint32_t idx[] = {0, 2, 0, 1, 3};
        return ad::scatter_add_rows(v[0], idx, 4);
    }, 4, 2});
    cases.push_back({"leaky_relu", {kinked(3, 4)}, [](Tape&, S v) { return ad::leaky_relu(v[0], 0.2); }, 3, 4});
    cases.push_back({"relu", {kinked(3, 4)}, [](Tape&, S v) { return ad::relu(v[0]); }, 3, 4});
    cases.push_back({"elu", {kinked(3, 4)}, [](Tape&, S v) { return ad::elu(v[0]); }, 3, 4});
    cases.push_back({"tanh", {rnd(3, 4)}, [](Tape&, S v) { return ad::tanh(v[0]); }, 3, 4});
    cases.push_back({"sigmoid", {rnd(3, 4)}, [](Tape&, S v) { return ad::sigmoid(v[0]); }, 3, 4});
    cases.push_back({"exp", {rnd(3, 4)}, [](Tape&, S v) { return ad::exp(v[0]); }, 3, 4});
    cases.push_back({"abs", {kinked(3, 4)}, [](Tape&, S v) { return ad::abs(v[0]); }, 3, 4});
    // sign has a zero derivative; chained with square so the check is not vacuous.
    cases.push_back({"sign", {kinked(3, 4)}, [](Tape&, S v) { return ad::mul(ad::sign(v[0]), ad::square(v[0])); }, 3, 4});
    cases.push_back({"square", {rnd(3, 4)}, [](Tape&, S v) { return ad::square(v[0]); }, 3, 4});
    cases.push_back({"identity", {rnd(3, 4)}, [](Tape&, S v) { return ad::identity(v[0]); }, 3, 4});
    cases.push_back({"sum", {rnd(3, 4)}, [](Tape&, S v) { return ad::sum(ad::square(v[0])); }});
    cases.push_back({"mean", {rnd(3, 4)}, [](Tape&, S v) { return ad::mean(ad::square(v[0])); }});
    cases.push_back({"segment_signed_softmax", {kinked(7, 1)}, [](Tape&, S v) {
        static const std::uint32_t seg[] = {0, 0, 1, 2, 2, 2, 1};
        return ad::segment_signed_softmax(v[0], seg, 4);
    }, 7, 1});
    cases.push_back({"softmax_cross_entropy", {rnd(5, 3)}, [](Tape&, S v) {
        static const std::uint32_t labels[] = {0, 2, 1, 1, 0};
        return ad::softmax_cross_entropy(v[0], labels);
    }});
    cases.push_back({"bce_with_logits", {rnd(6, 1)}, [](Tape&, S v) {
        static const double targets[] = {1, 0, 0, 1, 1, 0};
        return ad::bce_with_logits(v[0], targets);
    }});
    cases.push_back({"mse", {rnd(4, 2), rnd(4, 2)}, [](Tape&, S v) { return ad::mse(v[0], v[1]); }});
    return cases;
}

}  // namespace

double gradient_error(const ScalarFn& f, const std::vector<Matrix>& inputs, double h) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m));
    tape.backward(f(tape, leaves));
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Matrix analytic = leaves[k].grad();
        Matrix numeric(inputs[k].rows(), inputs[k].cols());
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            std::vector<Matrix> plus = inputs, minus = inputs;
            plus[k][i] += h;
            minus[k][i] -= h;
            numeric[i] = (evaluate(f, plus) - evaluate(f, minus)) / (2 * h);
        }
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

double parameter_gradient_error(const std::function<Var(Tape&)>& loss,
                                std::span<ad::Parameter* const> params, double h) {
    for (auto* p : params) p->zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    double worst = 0.0;
    for (auto* p : params) {
        Matrix numeric(p->value.rows(), p->value.cols());
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            Tape tp;
            const double fp = loss(tp).value()[0];
            p->value[i] = saved - h;
            Tape tm;
            const double fm = loss(tm).value()[0];
            p->value[i] = saved;
            numeric[i] = (fp - fm) / (2 * h);
        }
        worst = std::max(worst, relative_error(p->grad, numeric));
    }
    for (auto* p : params) p->zero_grad();
    return worst;
}

std::vector<CheckResult> gradcheck_ops(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<CheckResult> results;
    for (OpCase& c : op_cases(rng)) {
        const Matrix r = random_matrix(c.out_rows, c.out_cols, rng);
        CheckResult res;
        res.module = "autodiff";
        res.property = "gradient:" + c.name;
        res.threshold = kGradientTolerance;
        res.observed = gradient_error(contract(c.op, r), c.inputs);
        res.passed = res.observed < res.threshold;
        results.push_back(res);
    }
    return results;
}

std::vector<CheckResult> gradcheck_models(std::uint64_t seed, std::size_t count) {
    using pipeline::Task;
    static const Task tasks[] = {Task::sign, Task::weight, Task::signed_weight};
    Rng rng(seed);
    std::vector<CheckResult> results;
    for (std::size_t m = 0; m < count; ++m) {
        const Task task = tasks[m % 3];
        RunConfig cfg;
        cfg.layers = 2;
        cfg.hidden = 3;
        cfg.heads = 2;
        cfg.attention_hidden = {4};
        cfg.head_layers = 3;
        cfg.head_hidden = 5;
        cfg.attention_input = m % 2 == 1 ? "concat" : "factored";
        cfg.head_merge = m % 3 == 2 ? "mean" : "concat";

        CheckResult res;
        res.module = "wsgat";
        res.property = "gradient:model[" + pipeline::to_string(task) + "," + cfg.attention_input +
                       "," + cfg.head_merge + "]";
        res.threshold = kGradientTolerance;
        bool built = false;
        for (int attempt = 0; attempt < 200 && !built; ++attempt) {
            auto g = random_signed_graph(8, 0.3, 0.35, rng);
            if (g.num_positive() < 2 || g.num_negative() < 2) continue;
            if (task == Task::weight)
                g = graph::normalize_weights(g, graph::WeightNormalization::unit_abs);
            std::vector<graph::Edge> positives(g.edges().begin(), g.edges().end());
            auto negatives = graph::sample_negative_edges(g, positives.size(), rng.next_u64());
            auto model = pipeline::build_model(task, g, random_matrix(8, 3, rng), cfg, rng);
            const auto examples = pipeline::make_examples(positives, negatives);
            auto loss = [&](Tape& t) {
                return pipeline::task_loss(model, t, pipeline::embed(model, t), examples, 1.0);
            };
            {
                Tape probe;
                loss(probe);
                // The finite difference must not straddle a kink.
                if (probe.kink_margin() < 1e-4) continue;
            }
            const auto params = model.parameters();
            res.observed = parameter_gradient_error(loss, params);
            std::ostringstream d;
            d << params.size() << " parameter tensors, " << g.num_edges() << " arcs";
            res.detail = d.str();
            built = true;
        }
        if (!built) {
            res.observed = INFINITY;
            res.detail = "no kink-free model found";
        }
        res.passed = built && res.observed < res.threshold;
        results.push_back(res);
    }
    return results;
}

}  // namespace wsgat::verify
