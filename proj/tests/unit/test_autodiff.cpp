#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "verify/dense_reference.hpp"
#include "verify/gradcheck.hpp"
#include "wsgat/autodiff/adam.hpp"
#include "wsgat/autodiff/checkpoint.hpp"
#include "wsgat/autodiff/ops.hpp"
#include "wsgat/errors.hpp"
#include "wsgat/rng.hpp"

using namespace wsgat;
using namespace wsgat::autodiff;

TEST_CASE("matmul: identity, 1x1 and shape errors") {
    Rng rng(1);
    const Matrix a = verify::random_matrix(3, 3, rng);
    Tape t;
    CHECK(matmul(t.constant(a), t.constant(Matrix::identity(3))).value() == a);
    CHECK(matmul(t.constant(Matrix::scalar(2)), t.constant(Matrix::scalar(3))).value()[0] == 6.0);
    CHECK_THROWS_AS(matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))), ShapeError);
}

TEST_CASE("matmul gradient of sum(A B) matches finite differences") {
    Rng rng(2);
    const double err = verify::gradient_error(
        [](Tape&, std::span<const Var> x) { return sum(matmul(x[0], x[1])); },
        {verify::random_matrix(3, 4, rng), verify::random_matrix(4, 2, rng)});
    CHECK(err < 1e-6);
}

TEST_CASE("matrix kernels agree with naive products") {
    Rng rng(3);
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {5, 3, 7}, {9, 17, 2}, {13, 4, 11}}) {
        const Matrix a = verify::random_matrix(m, k, rng);
        const Matrix b = verify::random_matrix(k, n, rng);
        Matrix naive(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                for (int p = 0; p < k; ++p) naive(i, j) += a(i, p) * b(p, j);
        CHECK(max_abs_diff(matmul(a, b), naive) < 1e-12);

        Matrix bt(n, k);
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j) bt(j, p) = b(p, j);
        Matrix nt(m, n);
        matmul_add_nt(a, bt, nt);
        CHECK(max_abs_diff(nt, naive) < 1e-12);

        Matrix at(k, m);
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) at(p, i) = a(i, p);
        Matrix tn(m, n);
        matmul_add_tn(at, b, tn);
        CHECK(max_abs_diff(tn, naive) < 1e-12);
    }
}

TEST_CASE("concat examples") {
    Tape t;
    const Var parts[] = {t.constant(Matrix::scalar(1)), t.constant(Matrix::scalar(2)),
                         t.constant(Matrix::scalar(0.5))};
    CHECK(concat(parts, 1).value() == Matrix::from_rows({{1, 2, 0.5}}));

    const Var x = t.leaf(Matrix::from_rows({{1, 2}, {3, 4}}));
    const Var with_empty[] = {x, t.constant(Matrix(2, 0))};
    CHECK(concat(with_empty, 1).value() == x.value());

    const Var y = t.leaf(Matrix::from_rows({{5}, {6}}));
    const Var xy[] = {x, y};
    t.backward(sum(concat(xy, 1)));
    CHECK(x.grad() == Matrix(2, 2, 1.0));
    CHECK(y.grad() == Matrix(2, 1, 1.0));

    Tape u;
    const Var bad[] = {u.constant(Matrix(2, 1)), u.constant(Matrix(3, 1))};
    CHECK_THROWS_AS(concat(bad, 1), ShapeError);
}

TEST_CASE("pointwise examples") {
    Tape t;
    CHECK(leaky_relu(t.constant(Matrix::scalar(-1)), 0.2).value()[0] == doctest::Approx(-0.2));
    CHECK(sign(t.constant(Matrix::column({3, -0.5, 0}))).value() == Matrix::column({1, -1, 0}));

    const Var x = t.leaf(Matrix::scalar(0.0));
    t.backward(tanh(x));
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("abs and sign derivatives at zero") {
    Tape t;
    const Var x = t.leaf(Matrix::column({-2, 0, 3}));
    t.backward(sum(add(abs(x), sign(x))));
    CHECK(x.grad() == Matrix::column({-1, 0, 1}));
}

TEST_CASE("broadcasting is limited to scalars and row vectors") {
    Tape t;
    const Var a = t.constant(Matrix::from_rows({{1, 2}, {3, 4}}));
    CHECK(add(a, t.constant(Matrix::scalar(1))).value() == Matrix::from_rows({{2, 3}, {4, 5}}));
    CHECK(add(a, t.constant(Matrix::from_rows({{10, 20}}))).value() ==
          Matrix::from_rows({{11, 22}, {13, 24}}));
    CHECK_THROWS_AS(add(a, t.constant(Matrix::column({1, 2}))), ShapeError);
}

TEST_CASE("NaN and Inf trip a numeric fault") {
    Tape t;
    CHECK_THROWS_AS(t.constant(Matrix::scalar(std::numeric_limits<double>::quiet_NaN())), NumericFault);
    const Var big = t.constant(Matrix::scalar(1000));
    CHECK_THROWS_AS(exp(big), NumericFault);
    CHECK_THROWS_AS(mul(t.constant(Matrix::scalar(1e300)), t.constant(Matrix::scalar(1e300))),
                    NumericFault);
}

TEST_CASE("segment_signed_softmax examples") {
    Tape t;
    const std::uint32_t one[] = {0};
    CHECK(segment_signed_softmax(t.constant(Matrix::column({2.0})), one, 1).value()[0] == 1.0);

    const std::uint32_t two[] = {0, 0};
    const Matrix a = segment_signed_softmax(t.constant(Matrix::column({1.0, -1.0})), two, 1).value();
    CHECK(a == Matrix::column({0.5, -0.5}));

    const std::uint32_t three[] = {0, 0, 0};
    const Matrix b = segment_signed_softmax(t.constant(Matrix::column({2, -1, 0.5})), three, 1).value();
    const double z = std::exp(2.0) + std::exp(1.0) + std::exp(0.5);
    CHECK(std::abs(b[0] - std::exp(2.0) / z) < 1e-15);
    CHECK(std::abs(b[1] + std::exp(1.0) / z) < 1e-15);
    CHECK(std::abs(b[2] - std::exp(0.5) / z) < 1e-15);
}

TEST_CASE("segment_signed_softmax: empty segments, negation, L1 mass, large logits") {
    Tape t;
    const std::uint32_t seg[] = {0, 2, 2, 0, 2};
    const Matrix e = Matrix::column({0.3, -4, 700, -2, 1.5});
    const Matrix a = segment_signed_softmax(t.constant(e), seg, 4).value();
    double mass0 = 0, mass2 = 0;
    for (int k = 0; k < 5; ++k) {
        CHECK(std::abs(a[k]) <= 1.0);
        (seg[k] == 0 ? mass0 : mass2) += std::abs(a[k]);
    }
    CHECK(std::abs(mass0 - 1) < 1e-12);
    CHECK(std::abs(mass2 - 1) < 1e-12);

    Matrix neg = e;
    for (double& v : neg.values()) v = -v;
    const Matrix an = segment_signed_softmax(t.constant(neg), seg, 4).value();
    for (int k = 0; k < 5; ++k) CHECK(an[k] == -a[k]);
}

TEST_CASE("backward examples and errors") {
    {
        Tape t;
        const Var x = t.leaf(Matrix::scalar(3));
        t.backward(square(x));
        CHECK(x.grad()[0] == 6.0);
        CHECK_THROWS_AS(t.backward(square(x)), TapeError);
        t.reset_grads();
    }
    {
        Tape t;
        const Var x = t.leaf(Matrix::column({1, 2}));
        CHECK_THROWS_AS(t.backward(x), TapeError);
    }
    {
        Parameter p("p", Matrix::scalar(4));
        Tape t;
        const Var c = t.constant(Matrix::scalar(2));
        t.backward(square(c));
        CHECK(p.grad[0] == 0.0);
        CHECK(c.grad()[0] == 0.0);
    }
    {
        Tape t, u;
        const Var x = t.leaf(Matrix::scalar(1));
        const Var y = u.leaf(Matrix::scalar(1));
        CHECK_THROWS_AS(add(x, y), TapeError);
    }
}

TEST_CASE("a parameter used twice accumulates once per backward") {
    Parameter p("p", Matrix::scalar(3));
    Tape t;
    const Var a = t.param(p);
    const Var b = t.param(p);
    CHECK(a.id() == b.id());
    t.backward(mul(a, b));
    CHECK(p.grad[0] == 6.0);
}

TEST_CASE("composite sum(tanh(W x)) matches finite differences") {
    Rng rng(4);
    const double err = verify::gradient_error(
        [](Tape&, std::span<const Var> in) { return sum(tanh(matmul(in[0], in[1]))); },
        {verify::random_matrix(4, 3, rng), verify::random_matrix(3, 1, rng)});
    CHECK(err < 1e-4);
}

TEST_CASE("losses match closed forms") {
    Tape t;
    const std::uint32_t labels[] = {0, 2};
    const Matrix logits = Matrix::from_rows({{1, 2, 3}, {0, 0, 0}});
    const double ce = softmax_cross_entropy(t.constant(logits), labels).value()[0];
    const double z0 = std::exp(1) + std::exp(2) + std::exp(3);
    CHECK(ce == doctest::Approx(0.5 * (-std::log(std::exp(1) / z0) + std::log(3.0))).epsilon(1e-14));

    const double targets[] = {1, 0};
    const double bce = bce_with_logits(t.constant(Matrix::column({2, -800})), targets).value()[0];
    CHECK(bce == doctest::Approx(0.5 * std::log1p(std::exp(-2.0))).epsilon(1e-14));

    const double m = mse(t.constant(Matrix::column({1, 2})), t.constant(Matrix::column({0, 4}))).value()[0];
    CHECK(m == 2.5);
}

TEST_CASE("adam examples") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Parameter p("p", Matrix::column({1, -2}));
        Parameter* ps[] = {&p};
        AdamState state;
        for (int i = 0; i < 5; ++i) adam_step(ps, state, {});
        CHECK(p.value == Matrix::column({1, -2}));
    }
    SUBCASE("first step moves each coordinate by about lr against the gradient") {
        Parameter p("p", Matrix::column({0, 0, 0}));
        p.grad = Matrix::column({3, -0.01, 200});
        Parameter* ps[] = {&p};
        AdamState state;
        AdamConfig cfg;
        cfg.lr = 0.1;
        adam_step(ps, state, cfg);
        CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-6));
        CHECK(p.value[1] == doctest::Approx(0.1).epsilon(1e-5));
        CHECK(p.value[2] == doctest::Approx(-0.1).epsilon(1e-6));
        CHECK(state.step == 1);
    }
    SUBCASE("200 steps on x^2 from 5 with lr 0.1") {
        Parameter p("x", Matrix::scalar(5));
        Parameter* ps[] = {&p};
        AdamState state;
        AdamConfig cfg;
        cfg.lr = 0.1;
        // Scalar simulation of the same recursion.
        double x = 5, m = 0, v = 0;
        for (int k = 1; k <= 200; ++k) {
            Tape t;
            t.backward(square(t.param(p)));
            adam_step(ps, state, cfg);
            p.zero_grad();
            const double g = 2 * x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            x -= 0.1 * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.999, k))) + 1e-8);
        }
        CHECK(std::abs(p.value[0]) < 0.5);
        CHECK(std::abs(p.value[0] - x) < 1e-12);
    }
}

TEST_CASE("checkpoint round trip and layout") {
    const std::vector<NamedArray> arrays = {{"a", Matrix::from_rows({{1, -2.5}, {3, 1e-300}})},
                                            {"bias", Matrix(1, 3, 0.25)}};
    std::stringstream buf;
    write_checkpoint(buf, arrays);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == "WSGATCK1");
    // magic + count + (4 + 1 + 4 + 16 + 32) + (4 + 4 + 4 + 16 + 24)
    CHECK(bytes.size() == 8 + 8 + 57 + 52);
    const auto back = read_checkpoint(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "a");
    CHECK(back[0].value == arrays[0].value);
    CHECK(back[1].value == arrays[1].value);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
    std::stringstream wrong_magic("WSGATCK0" + bytes.substr(8));
    CHECK_THROWS_AS(read_checkpoint(wrong_magic), CheckpointError);
}

TEST_CASE("every op passes the finite-difference check") {
    for (const auto& r : verify::gradcheck_ops(5)) {
        INFO(r.property << " observed " << r.observed);
        CHECK(r.passed);
    }
}

TEST_CASE("gradient fault injection is detected and named") {
    testing::set_gradient_fault("tanh");
    const auto results = verify::gradcheck_ops(5);
    testing::clear_gradient_fault();
    bool tanh_failed = false;
    for (const auto& r : results)
        if (r.property.find("tanh") != std::string::npos) tanh_failed = tanh_failed || !r.passed;
    CHECK(tanh_failed);
}
