#include <doctest.h>

#include <cmath>
#include <limits>

#include "bitbcnn/ops.hpp"
#include "bitbcnn/param_store.hpp"
#include "bitbcnn/tape.hpp"
#include "test_util.hpp"

using namespace bitbcnn;
using bitbcnn::testutil::max_gradient_error;

TEST_CASE("affine basics") {
    CHECK(affine(Tensor::vector({1, 2}), Tensor::identity(2), Tensor::vector({0, 0})).values() ==
          std::vector<Scalar>{1, 2});
    CHECK(affine(Tensor::vector({1, 2}), Tensor::zeros({2, 2}), Tensor::vector({3, 4})).values() ==
          std::vector<Scalar>{3, 4});
    CHECK(affine(Tensor::vector({1, 1}), Tensor::matrix(2, 2, {1, 2, 3, 4}),
                 Tensor::vector({0, 0}))
              .values() == std::vector<Scalar>{3, 7});
    CHECK_THROWS_AS(
        affine(Tensor::vector({1, 2, 3}), Tensor::identity(2), Tensor::vector({0, 0})),
        DimensionError);
}

TEST_CASE("tanh_map basics and odd symmetry") {
    CHECK(tanh_map(Tensor::vector({0, 0})).values() == std::vector<Scalar>{0, 0});
    CHECK(tanh_map(Tensor::vector({50.0}))[0] == doctest::Approx(1.0).epsilon(1e-12));
    RngStream rng(42);
    for (int i = 0; i < 50; ++i) {
        const double x = rng.next_uniform(-5, 5);
        CHECK(tanh_map(Tensor::vector({-x}))[0] ==
              doctest::Approx(-tanh_map(Tensor::vector({x}))[0]));
    }
}

TEST_CASE("softmax symmetry, direct value, sum and shift invariance") {
    Tensor p = softmax(Tensor::vector({0, 0}));
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    Tensor q = softmax(Tensor::vector({std::log(2.0), 0.0}));
    CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    RngStream rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.next_below(6);
        Tensor z({k});
        for (std::size_t i = 0; i < k; ++i) z[i] = rng.next_uniform(-30, 30);
        Tensor s = softmax(z);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(s[i] > 0.0);
            total += s[i];
        }
        CHECK(std::abs(total - 1.0) < 1e-12);

        const double shift = rng.next_uniform(-100, 100);
        Tensor shifted = z;
        for (std::size_t i = 0; i < k; ++i) shifted[i] += shift;
        Tensor s2 = softmax(shifted);
        for (std::size_t i = 0; i < k; ++i) CHECK(s[i] == doctest::Approx(s2[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(softmax(Tensor::vector({1.0})), DimensionError);
}

TEST_CASE("cross_entropy values and label range") {
    CHECK(cross_entropy(Tensor::vector({0.5, 0.5}), 1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy(Tensor::vector({1.0, 0.0}), 0) == doctest::Approx(0.0));
    CHECK(cross_entropy(Tensor::vector({0.9, 0.1}), 1) ==
          doctest::Approx(2.302585092994046).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy(Tensor::vector({0.5, 0.5}), 2), Error);
}

TEST_CASE("backward on linear and quadratic forms") {
    // loss = w * x with x = 3, w = 2
    {
        ParamStore params;
        params.add("w", Tensor::matrix(1, 1, {2.0}));
        Tape tape(&params);
        ValueId loss = tape.matvec(tape.param("w"), tape.constant(Tensor::vector({3.0})));
        tape.backward(loss);
        CHECK(params.grad("w")[0] == doctest::Approx(3.0));
    }
    // loss = w^2 at w = 3: the same parameter enters as matrix and (via a
    // row extraction) as vector, so the gradient accumulates from both roles.
    {
        ParamStore params;
        params.add("w", Tensor::matrix(1, 1, {3.0}));
        Tape tape(&params);
        ValueId w = tape.param("w");
        ValueId w_vec = tape.weighted_row_sum(w, {{0, 1.0}});
        ValueId loss = tape.matvec(w, w_vec);
        CHECK(tape.value(loss)[0] == doctest::Approx(9.0));
        tape.backward(loss);
        CHECK(params.grad("w")[0] == doctest::Approx(6.0));
    }
    // Non-scalar loss is rejected.
    {
        ParamStore params;
        params.add("v", Tensor::vector({1.0, 2.0}));
        Tape tape(&params);
        ValueId v = tape.param("v");
        CHECK_THROWS_AS(tape.backward(v), Error);
    }
}

TEST_CASE("finite differences against analytic derivatives") {
    ParamStore params;
    params.add("w", Tensor::vector({3.0}));
    auto square = [](ParamStore& p) { return p.value("w")[0] * p.value("w")[0]; };
    auto grads = finite_difference_gradient(square, params);
    CHECK(std::abs(grads.at("w")[0] - 6.0) < 1e-9);
    CHECK(params.value("w")[0] == doctest::Approx(3.0));  // restored

    auto constant = [](ParamStore&) { return 4.2; };
    CHECK(finite_difference_gradient(constant, params).at("w")[0] == doctest::Approx(0.0));

    ParamStore params2;
    params2.add("w", Tensor::vector({0.0}));
    auto tanh_fn = [](ParamStore& p) { return std::tanh(p.value("w")[0]); };
    CHECK(std::abs(finite_difference_gradient(tanh_fn, params2).at("w")[0] - 1.0) < 1e-9);
}

TEST_CASE("sgd_step updates, no-ops, convexity, and gradient validation") {
    {
        ParamStore params;
        params.add("w", Tensor::vector({1.0}));
        params.grad("w")[0] = 0.5;
        params.sgd_step(0.1);
        CHECK(params.value("w")[0] == doctest::Approx(0.95));
    }
    {
        ParamStore params;
        params.add("w", Tensor::vector({1.25}));
        params.sgd_step(0.1);  // zero gradients
        CHECK(params.value("w")[0] == doctest::Approx(1.25));
    }
    {
        // Two steps on f(w) = w^2 strictly decrease f for lr < 1.
        ParamStore params;
        params.add("w", Tensor::vector({2.0}));
        double previous = 4.0;
        for (int step = 0; step < 2; ++step) {
            params.grad("w")[0] = 2.0 * params.value("w")[0];
            params.sgd_step(0.3);
            params.zero_grads();
            const double f = params.value("w")[0] * params.value("w")[0];
            CHECK(f < previous);
            previous = f;
        }
    }
    {
        ParamStore params;
        params.add("bad_param", Tensor::vector({1.0}));
        params.grad("bad_param")[0] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_WITH_AS(params.sgd_step(0.1), doctest::Contains("bad_param"), Error);
    }
}

TEST_CASE("adam step matches the hand-computed update") {
    ParamStore params;
    params.add("w", Tensor::vector({1.0}));
    params.grad("w")[0] = 0.5;
    params.adam_step(0.1);
    // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    CHECK(params.value("w")[0] == doctest::Approx(0.9).epsilon(1e-7));
    params.grad("w")[0] = 0.5;
    params.adam_step(0.1);
    CHECK(params.value("w")[0] == doctest::Approx(0.8).epsilon(1e-6));

    // Drives a quadratic toward its minimum.
    ParamStore quad;
    quad.add("w", Tensor::vector({3.0}));
    for (int i = 0; i < 500; ++i) {
        quad.grad("w")[0] = 2.0 * quad.value("w")[0];
        quad.adam_step(0.05);
        quad.zero_grads();
    }
    CHECK(std::abs(quad.value("w")[0]) < 0.1);

    ParamStore bad;
    bad.add("p", Tensor::vector({1.0}));
    bad.grad("p")[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(bad.adam_step(0.1), doctest::Contains("p"), Error);
}

TEST_CASE("momentum accumulates velocity") {
    ParamStore params;
    params.add("w", Tensor::vector({0.0}));
    params.grad("w")[0] = 1.0;
    params.sgd_step(0.1, 0.9);
    CHECK(params.value("w")[0] == doctest::Approx(-0.1));
    params.grad("w")[0] = 1.0;
    params.sgd_step(0.1, 0.9);  // velocity = 0.9 * 1 + 1 = 1.9
    CHECK(params.value("w")[0] == doctest::Approx(-0.29));
}

TEST_CASE("dropout mask: inference identity, kept fraction, determinism") {
    RngStream rng(5);
    Tensor infer = dropout_mask({4, 5}, 0.7, rng, RunMode::kInfer);
    for (std::size_t i = 0; i < infer.size(); ++i) CHECK(infer[i] == 1.0);

    RngStream rng_a(99);
    Tensor mask = dropout_mask({100000}, 0.7, rng_a, RunMode::kTrain);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0) {
            ++kept;
            CHECK(mask[i] == doctest::Approx(1.0 / 0.7));
        }
    }
    const double fraction = static_cast<double>(kept) / 100000.0;
    CHECK(fraction > 0.69);
    CHECK(fraction < 0.71);

    RngStream rng_b(99);
    Tensor mask_b = dropout_mask({100000}, 0.7, rng_b, RunMode::kTrain);
    CHECK(mask.values() == mask_b.values());

    CHECK_THROWS_AS(dropout_mask({2}, 0.0, rng_a, RunMode::kTrain), Error);
    CHECK_THROWS_AS(dropout_mask({2}, -0.2, rng_a, RunMode::kTrain), Error);
}

TEST_CASE("inverted dropout expectation identity over 1e6 samples") {
    RngStream rng(2024);
    Tensor mask = dropout_mask({1000000}, 0.7, rng, RunMode::kTrain);
    double mean = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) mean += mask[i];
    mean /= static_cast<double>(mask.size());
    CHECK(mean > 0.99);
    CHECK(mean < 1.01);
}

TEST_CASE("rng streams are reproducible and splits differ") {
    RngStream a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream c = RngStream(123).split(1);
    RngStream d = RngStream(123).split(2);
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("tensor invariants: shape/value mismatch and non-finite rejection") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}),
                    DimensionError);
    CHECK_THROWS_AS(Tensor({0}), DimensionError);
}

// Every differentiable op pattern against central finite differences:
// randomized small inputs, over 100 trials across the patterns.
TEST_CASE("per-op gradients match finite differences") {
    RngStream rng(31337);
    auto fill = [&](std::size_t n) {
        std::vector<Scalar> v(n);
        for (Scalar& x : v) x = rng.next_uniform(-1.5, 1.5);
        return v;
    };
    double worst = 0.0;

    for (int trial = 0; trial < 20; ++trial) {  // affine
        const std::size_t m = 1 + rng.next_below(4), n = 1 + rng.next_below(4);
        ParamStore params;
        params.add("x", Tensor({n}, fill(n)));
        params.add("W", Tensor({m, n}, fill(m * n)));
        params.add("b", Tensor({m}, fill(m)));
        Tensor row({1, m}, fill(m));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row), t.affine(t.param("x"), t.param("W"), t.param("b")));
        }));
    }

    for (int trial = 0; trial < 20; ++trial) {  // tanh of affine
        const std::size_t m = 2 + rng.next_below(3), n = 1 + rng.next_below(4);
        ParamStore params;
        params.add("x", Tensor({n}, fill(n)));
        params.add("W", Tensor({m, n}, fill(m * n)));
        params.add("b", Tensor({m}, fill(m)));
        Tensor row({1, m}, fill(m));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row),
                            t.tanh_map(t.affine(t.param("x"), t.param("W"), t.param("b"))));
        }));
    }

    for (int trial = 0; trial < 20; ++trial) {  // softmax + cross-entropy
        const std::size_t k = 2 + rng.next_below(4);
        ParamStore params;
        params.add("z", Tensor({k}, fill(k)));
        const std::size_t label = rng.next_below(k);
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.cross_entropy(t.softmax(t.param("z")), label);
        }));
    }

    for (int trial = 0; trial < 15; ++trial) {  // add and scale
        const std::size_t n = 1 + rng.next_below(4);
        ParamStore params;
        params.add("a", Tensor({n}, fill(n)));
        params.add("c", Tensor({n}, fill(n)));
        const double factor = rng.next_uniform(-2, 2);
        Tensor row({1, n}, fill(n));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row), t.scale(t.add(t.param("a"), t.param("c")), factor));
        }));
    }

    for (int trial = 0; trial < 15; ++trial) {  // dropout-style constant mask
        const std::size_t n = 2 + rng.next_below(4);
        ParamStore params;
        params.add("a", Tensor({n}, fill(n)));
        Tensor mask({n});
        for (std::size_t i = 0; i < n; ++i) mask[i] = rng.next_unit() < 0.5 ? 0.0 : 2.0;
        Tensor row({1, n}, fill(n));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row), t.mul_mask(t.tanh_map(t.param("a")), mask));
        }));
    }

    for (int trial = 0; trial < 15; ++trial) {  // embedding-style weighted row sum
        const std::size_t rows = 3 + rng.next_below(4), cols = 2 + rng.next_below(3);
        ParamStore params;
        params.add("table", Tensor({rows, cols}, fill(rows * cols)));
        std::vector<std::pair<std::size_t, double>> picks;
        const std::size_t n_picks = 1 + rng.next_below(4);
        for (std::size_t i = 0; i < n_picks; ++i) {
            picks.emplace_back(rng.next_below(rows), rng.next_uniform(0.1, 1.0));
        }
        Tensor row({1, cols}, fill(cols));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row), t.weighted_row_sum(t.param("table"), picks));
        }));
    }

    for (int trial = 0; trial < 15; ++trial) {  // concat
        const std::size_t n = 1 + rng.next_below(3), m = 1 + rng.next_below(3);
        ParamStore params;
        params.add("a", Tensor({n}, fill(n)));
        params.add("c", Tensor({m}, fill(m)));
        Tensor row({1, n + m}, fill(n + m));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            return t.matvec(t.constant(row),
                            t.concat(t.tanh_map(t.param("a")), t.tanh_map(t.param("c"))));
        }));
    }

    // max_over: only trials whose channel margins are wide enough that the
    // finite-difference step cannot flip the argmax.
    int accepted = 0;
    while (accepted < 15) {
        const std::size_t n = 2 + rng.next_below(3), k = 2 + rng.next_below(3);
        std::vector<Tensor> values;
        for (std::size_t i = 0; i < k; ++i) values.push_back(Tensor({n}, fill(n)));
        bool separated = true;
        for (std::size_t j = 0; j < n && separated; ++j) {
            double best = -1e9, runner_up = -1e9;
            for (std::size_t i = 0; i < k; ++i) {
                if (values[i][j] > best) {
                    runner_up = best;
                    best = values[i][j];
                } else if (values[i][j] > runner_up) {
                    runner_up = values[i][j];
                }
            }
            if (best - runner_up < 1e-3) separated = false;
        }
        if (!separated) continue;
        ++accepted;
        ParamStore params;
        for (std::size_t i = 0; i < k; ++i) params.add("v" + std::to_string(i), values[i]);
        Tensor row({1, n}, fill(n));
        worst = std::max(worst, max_gradient_error(params, [&](Tape& t) {
            std::vector<ValueId> ids;
            for (std::size_t i = 0; i < k; ++i) ids.push_back(t.param("v" + std::to_string(i)));
            return t.matvec(t.constant(row), t.max_over(ids));
        }));
    }

    CHECK(worst < 1e-4);
}
