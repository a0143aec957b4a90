#include "spikenas/gradcheck_suite.hpp"

#include "spikenas/attention.hpp"
#include "spikenas/candidates.hpp"
#include "spikenas/gradcheck.hpp"
#include "spikenas/lif.hpp"
#include "spikenas/loss.hpp"
#include "spikenas/network.hpp"
#include "spikenas/ops.hpp"
#include "spikenas/rng.hpp"

namespace spikenas {

namespace {

using D = double;

Tensor<D> rand_t(Shape5 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<D> t = Tensor<D>::empty(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

struct CaseRunner {
    int trials;
    std::uint64_t seed;
    std::vector<GradCheckCase> results;

    template <class Fn>
    void run(const std::string& name, double tolerance, Fn&& one_trial) {
        GradCheckCase c;
        c.name = name;
        c.tolerance = tolerance;
        Rng rng = Rng::stream(seed, std::hash<std::string>{}(name));
        for (int t = 0; t < trials; ++t)
            c.max_rel_err = std::max(c.max_rel_err, one_trial(rng));
        c.pass = c.max_rel_err < tolerance;
        results.push_back(c);
    }
};

double check_conv2d(Rng& rng) {
    const dim_t G = rng.uniform(0, 1) < 0.5 ? 1 : 4;
    Conv2dSpec spec;
    spec.stride = rng.uniform(0, 1) < 0.5 ? 1 : 2;
    spec.dilation = rng.uniform(0, 1) < 0.5 ? 1 : 2;
    spec.padding = spec.dilation == 2 ? 2 : 1;
    spec.groups = G;
    auto x = rand_t({2, 4, 5, 5, 2}, rng);
    auto k = rand_t({4, 4 / G, 3, 3, 1}, rng);
    auto probe_shape = conv2d(x, k, spec).shape();
    auto probe = rand_t(probe_shape, rng);
    x.set_requires_grad();
    k.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(conv2d(x, k, spec), probe)); }, {x, k},
                                1e-5)
        .max_rel_err;
}

double check_pool_avg(Rng& rng) {
    auto x = rand_t({2, 3, 5, 5, 2}, rng);
    auto probe = rand_t({2, 3, 3, 3, 2}, rng);
    x.set_requires_grad();
    return finite_diff_check<D>(
               [&] { return sum_all(mul(pool2d(x, PoolKind::avg, 3, 2, 1), probe)); }, {x}, 1e-5)
        .max_rel_err;
}

double check_linear(Rng& rng) {
    auto x = rand_t({3, 3, 2, 2, 1}, rng);
    auto w = rand_t({4, 12, 1, 1, 1}, rng);
    auto b = rand_t({1, 4, 1, 1, 1}, rng);
    auto probe = rand_t({3, 4, 1, 1, 1}, rng);
    x.set_requires_grad();
    w.set_requires_grad();
    b.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(linear(x, w, b), probe)); }, {x, w, b},
                                1e-5)
        .max_rel_err;
}

double check_sigmoid(Rng& rng) {
    auto x = rand_t({2, 3, 4, 1, 2}, rng, -3, 3);
    auto probe = rand_t(x.shape(), rng);
    x.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(sigmoid(x), probe)); }, {x}, 1e-5)
        .max_rel_err;
}

double check_softmax(Rng& rng) {
    auto x = rand_t({2, 8, 1, 1, 1}, rng, -4, 4);
    auto probe = rand_t(x.shape(), rng);
    x.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(softmax_over(x, Axis::C), probe)); },
                                {x}, 1e-6)
        .max_rel_err;
}

double check_batchnorm(Rng& rng) {
    auto x = rand_t({3, 3, 4, 4, 2}, rng);
    auto gamma = rand_t({1, 3, 1, 1, 1}, rng, 0.5, 1.5);
    auto beta = rand_t({1, 3, 1, 1, 1}, rng);
    auto probe = rand_t(x.shape(), rng);
    x.set_requires_grad();
    gamma.set_requires_grad();
    beta.set_requires_grad();
    return finite_diff_check<D>(
               [&] {
                   auto rm = Tensor<D>::zeros({1, 3, 1, 1, 1});
                   auto rv = Tensor<D>::full({1, 3, 1, 1, 1}, 1.0);
                   return sum_all(
                       mul(batchnorm<D>(x, gamma, beta, rm, rv, 0.1, 1e-5, true), probe));
               },
               {x, gamma, beta}, 1e-5)
        .max_rel_err;
}

double check_ct_attention(Rng& rng) {
    auto x = rand_t({2, 4, 5, 5, 2}, rng);
    auto p = CtAttentionParams<D>::make(4, 2);
    for (std::size_t i = 0; i < p.conv_kernel.size(); ++i)
        p.conv_kernel.data()[i] = rng.uniform(-1, 1);
    auto probe = rand_t(x.shape(), rng);
    x.set_requires_grad();
    p.conv_kernel.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(ct_attention(x, p), probe)); },
                                {x, p.conv_kernel}, 1e-5)
        .max_rel_err;
}

double check_ma_attention(Rng& rng) {
    auto x = rand_t({2, 4, 5, 5, 2}, rng);
    auto p = MaAttentionParams<D>::make(4, 2, 2);
    for (auto* t : {&p.mlp_w1, &p.mlp_w2, &p.spatial_kernel})
        for (std::size_t i = 0; i < t->size(); ++i) t->data()[i] = rng.uniform(-0.6, 0.6);
    auto probe = rand_t(x.shape(), rng);
    x.set_requires_grad();
    p.mlp_w1.set_requires_grad();
    p.mlp_w2.set_requires_grad();
    p.spatial_kernel.set_requires_grad();
    return finite_diff_check<D>([&] { return sum_all(mul(ma_attention(x, p), probe)); },
                                {x, p.mlp_w1, p.mlp_w2, p.spatial_kernel}, 1e-5)
        .max_rel_err;
}

double check_mixed_edge_alpha(Rng& rng) {
    ParamStore<D> store;
    std::array<CandidateParams<D>, kNumCandidates> ops;
    for (int o = 0; o < kNumCandidates; ++o)
        ops[std::size_t(o)] =
            make_candidate<D>(CandidateOp(o), 4, 1, store, "op" + std::to_string(o));
    init_params(store, std::uint64_t(rng.uniform_int(0, 1 << 30)));
    auto x = rand_t({1, 4, 5, 5, 2}, rng);
    auto alpha = rand_t({1, kNumCandidates, 1, 1, 1}, rng);
    auto probe = rand_t(x.shape(), rng);
    alpha.set_requires_grad();
    LifConfig<D> lif;
    return finite_diff_check<D>(
               [&] {
                   std::vector<Tensor<D>> outs(kNumCandidates);
                   for (int o = 0; o < kNumCandidates; ++o)
                       if (CandidateOp(o) != CandidateOp::none)
                           outs[std::size_t(o)] =
                               apply_candidate(ops[std::size_t(o)], x, lif, false, nullptr, 0);
                   return sum_all(mul(weighted_sum(outs, softmax_over(alpha, Axis::C)), probe));
               },
               {alpha}, 1e-6)
        .max_rel_err;
}

double check_cross_entropy(Rng& rng) {
    auto logits = rand_t({4, 6, 1, 1, 1}, rng, -2, 2);
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(int(rng.uniform_int(0, 5)));
    logits.set_requires_grad();
    return finite_diff_check<D>([&] { return cross_entropy(logits, labels); }, {logits}, 1e-6)
        .max_rel_err;
}

// conv -> LIF (surrogate-relaxed forward) -> linear -> cross-entropy.
// The relaxed forward is piecewise linear at the surrogate window edges,
// so the step uses a small epsilon to stay on one side of any kink.
double check_composite(Rng& rng) {
    auto x = rand_t({2, 2, 4, 4, 2}, rng);
    auto k = rand_t({3, 2, 3, 3, 1}, rng);
    auto w = rand_t({3, 96, 1, 1, 1}, rng, -0.3, 0.3);
    std::vector<int> labels = {int(rng.uniform_int(0, 2)), int(rng.uniform_int(0, 2))};
    x.set_requires_grad();
    k.set_requires_grad();
    w.set_requires_grad();
    LifConfig<D> lif;
    Conv2dSpec spec;
    spec.padding = 1;
    return finite_diff_check<D>(
               [&] {
                   auto conv = conv2d(x, k, spec);
                   auto o = lif_sequence(conv, lif, LifMode::relaxed);
                   return cross_entropy(linear(o, w), labels);
               },
               {x, k, w}, 1e-7)
        .max_rel_err;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(int trials, std::uint64_t seed) {
    CaseRunner r;
    r.trials = trials;
    r.seed = seed;
    r.run("conv2d", 1e-4, check_conv2d);
    r.run("pool2d_avg", 1e-4, check_pool_avg);
    r.run("linear", 1e-4, check_linear);
    r.run("sigmoid", 1e-4, check_sigmoid);
    r.run("softmax", 1e-4, check_softmax);
    r.run("batchnorm", 1e-4, check_batchnorm);
    r.run("ct_attention", 1e-4, check_ct_attention);
    r.run("ma_attention", 1e-4, check_ma_attention);
    r.run("mixed_edge_alpha", 1e-4, check_mixed_edge_alpha);
    r.run("cross_entropy", 1e-4, check_cross_entropy);
    r.run("conv_lif_linear_ce", 1e-3, check_composite);
    return r.results;
}

}  // namespace spikenas
