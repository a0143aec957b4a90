#include <cmath>

#include "doctest.h"
#include "spikenas/attention.hpp"
#include "spikenas/gradcheck.hpp"
#include "testutil.hpp"

using namespace spikenas;
using testutil::random_tensor;

namespace {

template <class T>
void fill_random(Tensor<T>& t, Rng& rng, double s = 0.5) {
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = T(rng.uniform(-s, s));
}

}  // namespace

TEST_CASE("eca kernel size rule") {
    CHECK(eca_kernel_size(64) == 3);
    CHECK(eca_kernel_size(128) == 5);
    CHECK(eca_kernel_size(1) == 1);
    for (dim_t c = 1; c <= 512; ++c) {
        const dim_t k = eca_kernel_size(c);
        CHECK(k % 2 == 1);
        CHECK(k >= 1);
        if (c > 1) CHECK(k >= eca_kernel_size(c - 1));  // non-decreasing
    }
    CHECK_THROWS_AS(eca_kernel_size(0), ShapeError);
}

TEST_CASE("temporal kernel rule") {
    CHECK(ct_temporal_kernel(1) == 1);
    CHECK(ct_temporal_kernel(2) == 1);
    CHECK(ct_temporal_kernel(3) == 3);
    CHECK(ct_temporal_kernel(8) == 3);
}

TEST_CASE("ct_attention: zero kernel halves the input") {
    Rng rng(50);
    auto x = random_tensor<double>({2, 8, 4, 4, 2}, rng);
    auto p = CtAttentionParams<double>::make(8, 2);
    auto y = ct_attention(x, p);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == 0.5 * x.data()[i]);
}

TEST_CASE("ct_attention: shape preserved for random shapes") {
    Rng rng(51);
    for (auto s : {Shape5{1, 4, 3, 5, 1}, Shape5{3, 16, 2, 2, 2}, Shape5{2, 7, 1, 1, 3}}) {
        auto x = random_tensor<double>(s, rng);
        auto p = CtAttentionParams<double>::make(s.c, s.t);
        fill_random(p.conv_kernel, rng);
        CHECK(ct_attention(x, p).shape() == s);
    }
}

TEST_CASE("ct_attention: single-tap closed form") {
    // C=2 gives k_C=1; T=1 gives k_T=1; the conv is a single scalar tap
    Rng rng(52);
    auto x = random_tensor<double>({2, 2, 3, 3, 1}, rng);
    auto p = CtAttentionParams<double>::make(2, 1);
    REQUIRE(p.k_c == 1);
    REQUIRE(p.k_t == 1);
    const double v = 0.8;
    p.conv_kernel.data()[0] = v;
    auto y = ct_attention(x, p);
    for (dim_t n = 0; n < 2; ++n)
        for (dim_t c = 0; c < 2; ++c) {
            double m = 0;
            for (dim_t h = 0; h < 3; ++h)
                for (dim_t w = 0; w < 3; ++w) m += x.at(n, c, h, w, 0);
            m /= 9.0;
            const double gate = 1.0 / (1.0 + std::exp(-v * m));
            for (dim_t h = 0; h < 3; ++h)
                for (dim_t w = 0; w < 3; ++w)
                    CHECK(y.at(n, c, h, w, 0) == doctest::Approx(gate * x.at(n, c, h, w, 0)));
        }
}

TEST_CASE("ct_attention parameter count") {
    auto p = CtAttentionParams<double>::make(64, 2);
    CHECK(p.param_count() == 3);  // k_C=3, k_T=1
    CHECK(p.conv_kernel.numel() == 3);
}

TEST_CASE("ma_ct_attention: zero second layer gives a 0.5 gate") {
    Rng rng(53);
    auto x = random_tensor<double>({2, 4, 3, 3, 2}, rng);
    auto p = MaAttentionParams<double>::make(4, 2, 2);
    fill_random(p.mlp_w1, rng);  // w2 stays zero
    auto y = ma_ct_attention(x, p);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(0.5 * x.data()[i]));
}

TEST_CASE("ma_ct_attention: spatially constant input doubles the MLP output") {
    Rng rng(54);
    const dim_t C = 3, T = 2;
    auto p = MaAttentionParams<double>::make(C, T, 2);
    fill_random(p.mlp_w1, rng);
    fill_random(p.mlp_w2, rng);
    // constant over (H,W) per (c,t): avg pool == max pool
    auto x = Tensor<double>::zeros({1, C, 4, 4, T});
    std::vector<double> pooled(std::size_t(C * T));
    for (dim_t c = 0; c < C; ++c)
        for (dim_t t = 0; t < T; ++t) {
            const double v = rng.uniform(-1, 1);
            pooled[std::size_t(c * T + t)] = v;
            for (dim_t h = 0; h < 4; ++h)
                for (dim_t w = 0; w < 4; ++w) x.at(0, c, h, w, t) = v;
        }
    // hand MLP: w2 * relu(w1 * pooled), doubled, sigmoid
    const dim_t hidden = p.hidden;
    std::vector<double> h1(std::size_t(hidden), 0.0);
    for (dim_t j = 0; j < hidden; ++j) {
        for (dim_t i = 0; i < C * T; ++i)
            h1[std::size_t(j)] += p.mlp_w1.data()[j * C * T + i] * pooled[std::size_t(i)];
        h1[std::size_t(j)] = std::max(0.0, h1[std::size_t(j)]);
    }
    auto y = ma_ct_attention(x, p);
    for (dim_t c = 0; c < C; ++c)
        for (dim_t t = 0; t < T; ++t) {
            double o = 0;
            for (dim_t j = 0; j < hidden; ++j)
                o += p.mlp_w2.data()[(c * T + t) * hidden + j] * h1[std::size_t(j)];
            const double gate = 1.0 / (1.0 + std::exp(-2.0 * o));
            CHECK(y.at(0, c, 2, 1, t) == doctest::Approx(gate * x.at(0, c, 2, 1, t)));
        }
}

TEST_CASE("ma_spatial_attention: zero kernel halves, constant input gives constant map") {
    Rng rng(55);
    auto x = random_tensor<double>({2, 4, 5, 5, 2}, rng);
    auto p = MaAttentionParams<double>::make(4, 2);
    auto y = ma_spatial_attention(x, p);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == 0.5 * x.data()[i]);

    fill_random(p.spatial_kernel, rng);
    auto cst = Tensor<double>::zeros({1, 3, 10, 10, 1});
    auto p3 = MaAttentionParams<double>::make(3, 1);
    fill_random(p3.spatial_kernel, rng);
    for (dim_t c = 0; c < 3; ++c) {
        const double v = rng.uniform(0.5, 1.0);
        for (dim_t h = 0; h < 10; ++h)
            for (dim_t w = 0; w < 10; ++w) cst.at(0, c, h, w, 0) = v;
    }
    auto yc = ma_spatial_attention(cst, p3);
    // translation symmetry holds wherever the same-padded kernel sees only
    // real data, i.e. at least k/2 from every border
    const double ref = yc.at(0, 1, 3, 3, 0) / cst.at(0, 1, 3, 3, 0);
    for (dim_t h = 3; h <= 6; ++h)
        for (dim_t w = 3; w <= 6; ++w)
            CHECK(yc.at(0, 1, h, w, 0) / cst.at(0, 1, h, w, 0) == doctest::Approx(ref));
}

TEST_CASE("ma_attention: both parameter sets zero gives a quarter of x") {
    Rng rng(56);
    auto x = random_tensor<double>({2, 4, 3, 3, 2}, rng);
    auto p = MaAttentionParams<double>::make(4, 2);
    auto y = ma_attention(x, p);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(0.25 * x.data()[i]));
}

TEST_CASE("ma_attention: attention strictly contracts the sup norm") {
    Rng rng(57);
    auto x = random_tensor<double>({2, 4, 4, 4, 2}, rng, 0.1, 1.0);
    auto p = MaAttentionParams<double>::make(4, 2, 2);
    fill_random(p.mlp_w1, rng);
    fill_random(p.mlp_w2, rng);
    fill_random(p.spatial_kernel, rng);
    auto y = ma_attention(x, p);
    double xmax = 0, ymax = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xmax = std::max(xmax, std::abs(x.data()[i]));
        ymax = std::max(ymax, std::abs(y.data()[i]));
    }
    CHECK(ymax < xmax);
}

TEST_CASE("ma_attention: sub-block order matters") {
    Rng rng(58);
    auto x = random_tensor<double>({1, 4, 4, 4, 2}, rng);
    auto p = MaAttentionParams<double>::make(4, 2, 2);
    fill_random(p.mlp_w1, rng);
    fill_random(p.mlp_w2, rng);
    fill_random(p.spatial_kernel, rng);
    auto forward_order = ma_spatial_attention(ma_ct_attention(x, p), p);
    auto swapped = ma_ct_attention(ma_spatial_attention(x, p), p);
    CHECK(testutil::max_abs_diff(forward_order, swapped) > 1e-6);
}

TEST_CASE("ma parameter count formula") {
    const dim_t C = 16, T = 2, r = 4;
    auto p = MaAttentionParams<double>::make(C, T, r);
    const dim_t ct = C * T;
    const dim_t expected = 2 * ct * ((ct + r - 1) / r) + 2 * 7 * 7;
    CHECK(p.param_count() == expected);
}

TEST_CASE("attention blocks pass the finite-difference check") {
    Rng rng(59);
    auto x = random_tensor<double>({2, 4, 3, 3, 2}, rng);
    x.set_requires_grad();

    auto ct = CtAttentionParams<double>::make(4, 2);
    fill_random(ct.conv_kernel, rng);
    ct.conv_kernel.set_requires_grad();
    auto r1 = finite_diff_check<double>(
        [&] {
            auto y = ct_attention(x, ct);
            return sum_all(mul(y, y));
        },
        {x, ct.conv_kernel}, 1e-5);
    CHECK(r1.max_rel_err < 1e-5);

    auto ma = MaAttentionParams<double>::make(4, 2, 2);
    fill_random(ma.mlp_w1, rng);
    fill_random(ma.mlp_w2, rng);
    fill_random(ma.spatial_kernel, rng);
    ma.mlp_w1.set_requires_grad();
    ma.mlp_w2.set_requires_grad();
    ma.spatial_kernel.set_requires_grad();
    auto r2 = finite_diff_check<double>(
        [&] {
            auto y = ma_attention(x, ma);
            return sum_all(mul(y, y));
        },
        {x, ma.mlp_w1, ma.mlp_w2, ma.spatial_kernel}, 1e-5);
    CHECK(r2.max_rel_err < 1e-4);
}
