#include "doctest.h"
#include "spikenas/ops.hpp"
#include "spikenas/tensor.hpp"
#include "testutil.hpp"

using namespace spikenas;
using testutil::random_tensor;

TEST_CASE("shape and indexing") {
    Tensor<double> t = Tensor<double>::zeros({2, 3, 4, 5, 2});
    CHECK(t.numel() == 240);
    t.at(1, 2, 3, 4, 1) = 7.5;
    CHECK(t.data()[t.index(1, 2, 3, 4, 1)] == 7.5);
    // per-time-slice H*W planes are contiguous
    CHECK(t.index(0, 0, 0, 1, 0) - t.index(0, 0, 0, 0, 0) == 1);
    CHECK(t.index(0, 0, 1, 0, 0) - t.index(0, 0, 0, 0, 0) == 5);
    CHECK(t.index(0, 0, 0, 0, 1) - t.index(0, 0, 0, 0, 0) == 20);
}

TEST_CASE("from_values validates length") {
    CHECK_THROWS_AS(Tensor<double>::from_values({1, 2, 1, 1, 1}, {1.0}), ShapeError);
}

TEST_CASE("backward of sum gives ones") {
    Rng rng(3);
    auto x = random_tensor<double>({2, 3, 2, 2, 1}, rng);
    x.set_requires_grad();
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        auto loss = sum_all(x);
        tape.backward(loss);
    }
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad_vec()[i] == 1.0);
}

TEST_CASE("backward of sum(x*x) gives 2x") {
    Rng rng(4);
    auto x = random_tensor<double>({1, 2, 3, 1, 2}, rng);
    x.set_requires_grad();
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        auto loss = sum_all(mul(x, x));
        tape.backward(loss);
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(x.grad_vec()[i] == doctest::Approx(2.0 * x.data()[i]));
}

TEST_CASE("fan-out accumulates k-fold gradient") {
    Rng rng(5);
    auto x = random_tensor<double>({1, 4, 1, 1, 1}, rng);
    x.set_requires_grad();
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        auto y = add(add(x, x), x);  // x used three times
        tape.backward(sum_all(y));
    }
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad_vec()[i] == 3.0);
}

TEST_CASE("repeated backward accumulates unless grads are zeroed") {
    auto x = Tensor<double>::full({1, 3, 1, 1, 1}, 2.0);
    x.set_requires_grad();
    Tape<double> tape;
    Tensor<double> loss;
    {
        Tape<double>::Scope scope(tape);
        loss = sum_all(x);
    }
    tape.backward(loss);
    tape.backward(loss);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad_vec()[i] == 2.0);
    x.zero_grad();
    tape.backward(loss);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad_vec()[i] == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = Tensor<double>::full({1, 2, 1, 1, 1}, 1.0);
    x.set_requires_grad();
    Tape<double> tape;
    Tensor<double> y;
    {
        Tape<double>::Scope scope(tape);
        y = add(x, x);
    }
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("no tape means no recording") {
    auto x = Tensor<double>::full({1, 2, 1, 1, 1}, 1.0);
    x.set_requires_grad();
    auto y = add(x, x);
    CHECK(y.data()[0] == 2.0);
    CHECK_FALSE(y.has_grad());
}
