#include "doctest.h"
#include "spikenas/candidates.hpp"
#include "spikenas/metrics.hpp"
#include "testutil.hpp"

using namespace spikenas;

TEST_CASE("spike ledger: counting, additivity, reset") {
    SpikeLedger ledger(3, SpikeLedger::Scope::train);

    auto zeros = Tensor<double>::zeros({1, 2, 2, 2, 1});
    record_spikes(ledger, 0, zeros);
    CHECK(ledger.total == 0);

    auto seven = Tensor<double>::zeros({1, 2, 4, 4, 1});
    for (int i = 0; i < 7; ++i) seven.data()[i * 3] = 1.0;
    record_spikes(ledger, 1, seven);
    CHECK(ledger.per_cell[1] == 7);
    CHECK(ledger.total == 7);

    record_spikes(ledger, 1, seven);
    record_spikes(ledger, 2, seven);
    CHECK(ledger.per_cell[1] == 14);
    CHECK(ledger.per_cell[2] == 7);
    CHECK(ledger.total == 21);

    std::uint64_t sum = 0;
    for (auto c : ledger.per_cell) sum += c;
    CHECK(sum == ledger.total);

    ledger.reset();
    CHECK(ledger.total == 0);
    CHECK(ledger.per_cell[1] == 0);

    CHECK_THROWS_AS(ledger.record(5, 1), ShapeError);
    CHECK_THROWS_AS(ledger.record(-1, 1), ShapeError);
}

TEST_CASE("ledger additivity property on random binary tensors") {
    Rng rng(70);
    SpikeLedger a(4), b(4), merged(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = Tensor<double>::zeros({2, 3, 3, 3, 2});
        std::uint64_t expect = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (rng.uniform(0, 1) < 0.3) {
                t.data()[i] = 1.0;
                ++expect;
            }
        }
        const dim_t slot = dim_t(trial % 4);
        SpikeLedger single(4);
        record_spikes(single, slot, t);
        CHECK(single.per_cell[std::size_t(slot)] == expect);
        a.merge(single);
        record_spikes(merged, slot, t);
    }
    CHECK(a.total == merged.total);
    CHECK(a.per_cell == merged.per_cell);
}

TEST_CASE("count_params: small closed-form cases") {
    ParamStore<double> store;
    // bias-free 1x1 conv, Cin=Cout=4 -> 16 scalars
    store.add("conv", Tensor<double>::zeros({4, 4, 1, 1, 1}), Role::weight);
    CHECK(count_params(store.params) == 16);
    store.add("alpha", Tensor<double>::zeros({14, 8, 1, 1, 1}), Role::alpha);
    store.add("att", Tensor<double>::zeros({1, 1, 3, 1, 1}), Role::weight, Subsystem::attention);
    CHECK(count_params(store.params) == 16 + 112 + 3);
    CHECK(count_params(store.params, Role::weight) == 19);
    CHECK(count_params(store.params, Role::alpha) == 112);
    CHECK(count_params(store.params, Role::weight, Subsystem::attention) == 3);
    CHECK(count_params(store.params, Role::weight, Subsystem::backbone) == 16);
}

TEST_CASE("accuracy with lowest-index tie break") {
    auto logits = Tensor<double>::zeros({4, 3, 1, 1, 1});
    // row 0: class 1 wins; row 1: tie between 0 and 2 -> 0; row 2: class 2; row 3: all equal -> 0
    logits.data()[0 * 3 + 1] = 2.0;
    logits.data()[1 * 3 + 0] = 1.0;
    logits.data()[1 * 3 + 2] = 1.0;
    logits.data()[2 * 3 + 2] = 5.0;
    CHECK(accuracy(logits, {1, 0, 2, 0}) == 1.0);
    CHECK(accuracy(logits, {1, 2, 2, 1}) == 0.5);
    CHECK(accuracy(logits, {0, 2, 1, 1}) == 0.0);
    CHECK_THROWS_AS(accuracy(logits, {1, 2}), ShapeError);
}
