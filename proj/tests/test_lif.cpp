#include <cmath>

#include "doctest.h"
#include "spikenas/gradcheck.hpp"
#include "spikenas/lif.hpp"
#include "spikenas/ops.hpp"
#include "testutil.hpp"

using namespace spikenas;
using testutil::random_tensor;

namespace {

Tensor<double> scalar5(double v) { return Tensor<double>::full({1, 1, 1, 1, 1}, v); }

}  // namespace

TEST_CASE("lif_step: charge, spike, and reset") {
    LifConfig<double> cfg;  // tau 0.2, v_th 0.5
    auto [u1, o1] = lif_step(scalar5(0.0), scalar5(0.0), scalar5(0.6), cfg);
    CHECK(u1.data()[0] == 0.6);
    CHECK(o1.data()[0] == 1.0);

    // reset through the (1 - o) factor, then sub-threshold
    auto [u2, o2] = lif_step(u1, o1, scalar5(0.3), cfg);
    CHECK(u2.data()[0] == 0.3);
    CHECK(o2.data()[0] == 0.0);

    auto [u3, o3] = lif_step(scalar5(0.0), scalar5(0.0), scalar5(0.0), cfg);
    CHECK(u3.data()[0] == 0.0);
    CHECK(o3.data()[0] == 0.0);
}

TEST_CASE("lif_step rejects mismatched shapes") {
    LifConfig<double> cfg;
    auto a = Tensor<double>::zeros({1, 2, 1, 1, 1});
    CHECK_THROWS_AS(lif_step(a, a, scalar5(0.0), cfg), ShapeError);
}

TEST_CASE("lif_sequence: three-step hand-derived trace") {
    LifConfig<double> cfg;
    auto x = Tensor<double>::from_values({1, 1, 1, 1, 3}, {0.6, 0.3, 0.3});
    auto [u, o] = lif_sequence_trace(x, cfg);

    // hand evaluation of the recurrence, same arithmetic order
    const double u1 = 0.6;
    const double o1 = 1.0;
    const double u2 = 0.2 * u1 * (1.0 - o1) + 0.3;
    const double u3 = 0.2 * u2 * (1.0 - 0.0) + 0.3;
    CHECK(u.at(0, 0, 0, 0, 0) == u1);
    CHECK(u.at(0, 0, 0, 0, 1) == u2);
    CHECK(u.at(0, 0, 0, 0, 2) == u3);
    CHECK(u.at(0, 0, 0, 0, 1) == doctest::Approx(0.3));
    CHECK(u.at(0, 0, 0, 0, 2) == doctest::Approx(0.36));
    CHECK(o.at(0, 0, 0, 0, 0) == 1.0);
    CHECK(o.at(0, 0, 0, 0, 1) == 0.0);
    CHECK(o.at(0, 0, 0, 0, 2) == 0.0);
}

TEST_CASE("lif_sequence: T=1 equals a single step from rest") {
    Rng rng(40);
    auto x = random_tensor<double>({2, 3, 2, 2, 1}, rng);
    LifConfig<double> cfg;
    auto seq = lif_sequence(x, cfg);
    auto zero = Tensor<double>::zeros(x.shape());
    auto [u, o] = lif_step(zero, zero, x, cfg);
    CHECK(testutil::max_abs_diff(seq, o) == 0.0);
}

TEST_CASE("lif_sequence: threshold above all input silences the neuron") {
    Rng rng(41);
    auto x = random_tensor<double>({1, 2, 2, 2, 4}, rng, 0.0, 1.0);
    LifConfig<double> cfg;
    cfg.v_th = 50.0;
    auto o = lif_sequence(x, cfg);
    for (std::size_t i = 0; i < o.size(); ++i) CHECK(o.data()[i] == 0.0);
}

TEST_CASE("lif_sequence outputs are exactly binary") {
    Rng rng(42);
    auto x = random_tensor<double>({2, 3, 3, 3, 4}, rng, -2.0, 2.0);
    auto o = lif_sequence(x, LifConfig<double>{});
    for (std::size_t i = 0; i < o.size(); ++i)
        CHECK((o.data()[i] == 0.0 || o.data()[i] == 1.0));
}

TEST_CASE("state reset: a spike zeroes the membrane carry exactly") {
    // large constant drive spikes every step; u must equal x exactly
    LifConfig<double> cfg;
    cfg.tau = 0.5;
    auto x = Tensor<double>::full({1, 1, 1, 1, 4}, 0.9);
    auto [u, o] = lif_sequence_trace(x, cfg);
    for (dim_t t = 0; t < 4; ++t) {
        CHECK(o.at(0, 0, 0, 0, t) == 1.0);
        CHECK(u.at(0, 0, 0, 0, t) == 0.9);  // no decay contribution after reset
    }
}

TEST_CASE("spike(0) is 0 at the exact threshold") {
    LifConfig<double> cfg;
    auto x = Tensor<double>::full({1, 1, 1, 1, 1}, cfg.v_th);
    auto o = lif_sequence(x, cfg);
    CHECK(o.data()[0] == 0.0);
}

TEST_CASE("surrogate window values and unit integral") {
    LifConfig<double> cfg;  // a = 1
    CHECK(spike_surrogate_grad(0.0, cfg) == 1.0);
    CHECK(spike_surrogate_grad(0.6, cfg) == 0.0);
    CHECK(spike_surrogate_grad(-0.6, cfg) == 0.0);

    for (double a : {0.5, 1.0, 2.0}) {
        LifConfig<double> c;
        c.surrogate_width = a;
        // midpoint rule over [-2a, 2a]
        const int steps = 40000;
        const double dv = 4.0 * a / steps;
        double integral = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double v = -2.0 * a + (i + 0.5) * dv;
            integral += spike_surrogate_grad(v, c) * dv;
        }
        CHECK(std::abs(integral - 1.0) < 1e-3);
    }
}

TEST_CASE("gradient flows only through the surrogate window") {
    LifConfig<double> cfg;  // v_th 0.5, a 1 -> window |u-0.5| < 0.5
    // drive far above threshold at every step
    auto hot = Tensor<double>::full({1, 1, 1, 1, 3}, 10.0);
    hot.set_requires_grad();
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        tape.backward(sum_all(lif_sequence(hot, cfg)));
    }
    for (std::size_t i = 0; i < hot.size(); ++i) CHECK(hot.grad_vec()[i] == 0.0);

    // and far below
    auto cold = Tensor<double>::full({1, 1, 1, 1, 3}, -10.0);
    cold.set_requires_grad();
    Tape<double> tape2;
    {
        Tape<double>::Scope scope(tape2);
        tape2.backward(sum_all(lif_sequence(cold, cfg)));
    }
    for (std::size_t i = 0; i < cold.size(); ++i) CHECK(cold.grad_vec()[i] == 0.0);
}

TEST_CASE("lif backward matches finite differences of the relaxed forward") {
    Rng rng(43);
    auto x = random_tensor<double>({2, 2, 2, 2, 3}, rng, -1.0, 1.5);
    x.set_requires_grad();
    auto probe = random_tensor<double>({2, 2, 2, 2, 3}, rng);
    auto report = finite_diff_check<double>(
        [&] {
            auto o = lif_sequence(x, LifConfig<double>{}, LifMode::relaxed);
            return sum_all(mul(o, probe));
        },
        {x}, 1e-6);
    CHECK(report.max_rel_err < 1e-3);
}
