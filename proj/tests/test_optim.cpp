#include <cmath>

#include "doctest.h"
#include "spikenas/optim.hpp"
#include "testutil.hpp"

using namespace spikenas;
using testutil::random_tensor;

namespace {

Tensor<double> param_with_grad(std::vector<double> v, std::vector<double> g) {
    const Shape5 shape{dim_t(v.size()), 1, 1, 1, 1};
    auto t = Tensor<double>::from_values(shape, std::move(v));
    t.set_requires_grad();
    auto* gd = t.grad_data();
    for (std::size_t i = 0; i < g.size(); ++i) gd[i] = g[i];
    return t;
}

}  // namespace

TEST_CASE("sgd: zero momentum and decay is plain gradient descent") {
    auto p = param_with_grad({1.0, -2.0}, {0.5, -0.25});
    SgdMomentum<double> opt({p}, 0.0, 0.0);
    opt.step(0.1);
    CHECK(p.data()[0] == doctest::Approx(1.0 - 0.1 * 0.5));
    CHECK(p.data()[1] == doctest::Approx(-2.0 + 0.1 * 0.25));
}

TEST_CASE("sgd: two steps with constant grad displace lr*g*(2+m)") {
    const double g = 0.7, m = 0.9, lr = 0.01;
    auto p = param_with_grad({3.0}, {g});
    SgdMomentum<double> opt({p}, m, 0.0);
    opt.step(lr);
    p.zero_grad();
    p.grad_data()[0] = g;
    opt.step(lr);
    CHECK(p.data()[0] == doctest::Approx(3.0 - lr * g * (2.0 + m)));
}

TEST_CASE("sgd: zero grad and zero velocity is a fixed point") {
    auto p = param_with_grad({1.5}, {0.0});
    SgdMomentum<double> opt({p}, 0.9, 0.0);
    opt.step(0.1);
    CHECK(p.data()[0] == 1.5);
}

TEST_CASE("sgd: weight decay pulls toward zero") {
    auto p = param_with_grad({2.0}, {0.0});
    SgdMomentum<double> opt({p}, 0.0, 0.1);
    opt.step(0.5);
    CHECK(p.data()[0] == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0));
}

TEST_CASE("adam: first step has magnitude about lr, sign of the gradient") {
    for (double g : {0.003, 1.0, 250.0, -42.0}) {
        auto p = param_with_grad({1.0}, {g});
        Adam<double> opt({p}, 0.001);
        opt.step();
        const double delta = p.data()[0] - 1.0;
        CHECK(std::abs(std::abs(delta) - 0.001) < 1e-6);
        CHECK(std::signbit(delta) == !std::signbit(g));
    }
}

TEST_CASE("adam: gradient scale invariance of the first step") {
    auto p1 = param_with_grad({1.0, -0.5}, {0.2, -0.8});
    auto p2 = param_with_grad({1.0, -0.5}, {0.2 * 37, -0.8 * 37});
    Adam<double> o1({p1}, 0.01), o2({p2}, 0.01);
    o1.step();
    o2.step();
    CHECK(p1.data()[0] == doctest::Approx(p2.data()[0]).epsilon(1e-9));
    CHECK(p1.data()[1] == doctest::Approx(p2.data()[1]).epsilon(1e-9));
}

TEST_CASE("adam: zero grad never moves") {
    auto p = param_with_grad({0.25}, {0.0});
    Adam<double> opt({p}, 0.1);
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(p.data()[0] == 0.25);
}

TEST_CASE("cosine schedule boundaries and midpoint") {
    CHECK(cosine_lr<double>(0, 40, 0.05) == doctest::Approx(0.05));
    CHECK(cosine_lr<double>(40, 40, 0.05) == doctest::Approx(0.0));
    CHECK(cosine_lr<double>(20, 40, 0.05, 0.01) == doctest::Approx(0.03));
    CHECK_THROWS_AS(cosine_lr<double>(41, 40, 0.05), ShapeError);
}

TEST_CASE("cosine schedule is monotone non-increasing") {
    double prev = cosine_lr<double>(0, 100, 1.0);
    for (dim_t e = 1; e <= 100; ++e) {
        const double lr = cosine_lr<double>(e, 100, 1.0);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
}

TEST_CASE("gradient clipping rescales to the target norm") {
    auto p = param_with_grad({0.0, 0.0}, {3.0, 4.0});  // norm 5
    std::vector<Tensor<double>> params = {p};
    const double norm = clip_grad_global_norm(params, 1.0);
    CHECK(norm == doctest::Approx(5.0));
    CHECK(p.grad_vec()[0] == doctest::Approx(0.6));
    CHECK(p.grad_vec()[1] == doctest::Approx(0.8));

    auto q = param_with_grad({0.0}, {0.5});
    std::vector<Tensor<double>> qs = {q};
    clip_grad_global_norm(qs, 1.0);  // under the cap: untouched
    CHECK(q.grad_vec()[0] == 0.5);
}
