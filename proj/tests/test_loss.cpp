#include <cmath>

#include "doctest.h"
#include "spikenas/gradcheck.hpp"
#include "spikenas/loss.hpp"
#include "testutil.hpp"

using namespace spikenas;
using testutil::random_tensor;

TEST_CASE("cross entropy: uniform logits give ln(k)") {
    for (dim_t k : {2, 5, 10}) {
        auto logits = Tensor<double>::full({3, k, 1, 1, 1}, 0.7);
        auto loss = cross_entropy(logits, {0, 1, int(k - 1)});
        CHECK(loss.data()[0] == doctest::Approx(std::log(double(k))));
    }
}

TEST_CASE("cross entropy: saturated correct logits give about zero") {
    auto logits = Tensor<double>::zeros({2, 4, 1, 1, 1});
    logits.at(0, 2, 0, 0, 0) = 50.0;
    logits.at(1, 0, 0, 0, 0) = 50.0;
    auto loss = cross_entropy(logits, {2, 0});
    CHECK(loss.data()[0] < 1e-12);
}

TEST_CASE("cross entropy rejects bad labels") {
    auto logits = Tensor<double>::zeros({2, 4, 1, 1, 1});
    CHECK_THROWS_AS(cross_entropy(logits, {0, 4}), ShapeError);
    CHECK_THROWS_AS(cross_entropy(logits, {-1, 0}), ShapeError);
    CHECK_THROWS_AS(cross_entropy(logits, {0}), ShapeError);
}

TEST_CASE("cross entropy gradient equals softmax minus onehot") {
    Rng rng(90);
    auto logits = random_tensor<double>({3, 5, 1, 1, 1}, rng, -2, 2);
    std::vector<int> labels = {4, 0, 2};
    logits.set_requires_grad();
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        tape.backward(cross_entropy(logits, labels));
    }
    for (dim_t n = 0; n < 3; ++n) {
        double denom = 0;
        for (dim_t j = 0; j < 5; ++j) denom += std::exp(logits.at(n, j, 0, 0, 0));
        for (dim_t j = 0; j < 5; ++j) {
            double expect = std::exp(logits.at(n, j, 0, 0, 0)) / denom;
            if (int(j) == labels[std::size_t(n)]) expect -= 1.0;
            expect /= 3.0;
            CHECK(logits.grad_vec()[std::size_t(n * 5 + j)] == doctest::Approx(expect));
        }
    }

    auto report = finite_diff_check<double>([&] { return cross_entropy(logits, labels); },
                                            {logits}, 1e-6);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("auxiliary loss adds with its weight") {
    auto logits = Tensor<double>::zeros({2, 3, 1, 1, 1});
    auto aux = Tensor<double>::zeros({2, 3, 1, 1, 1});
    aux.at(0, 0, 0, 0, 0) = 1.0;
    std::vector<int> labels = {0, 1};
    const double main_loss = cross_entropy(logits, labels).data()[0];
    const double aux_loss = cross_entropy(aux, labels).data()[0];
    auto combined = cross_entropy_with_aux(logits, aux, labels, 0.4);
    CHECK(combined.data()[0] == doctest::Approx(main_loss + 0.4 * aux_loss));

    auto no_aux = cross_entropy_with_aux(logits, Tensor<double>(), labels, 0.4);
    CHECK(no_aux.data()[0] == doctest::Approx(main_loss));
}
