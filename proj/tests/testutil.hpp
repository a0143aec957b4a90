#pragma once

#include <vector>

#include "spikenas/rng.hpp"
#include "spikenas/tensor.hpp"

namespace spikenas::testutil {

template <class T>
Tensor<T> random_tensor(Shape5 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t = Tensor<T>::empty(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = T(rng.uniform(lo, hi));
    return t;
}

template <class T>
Tensor<T> random_normal(Shape5 s, Rng& rng, double sigma = 1.0) {
    Tensor<T> t = Tensor<T>::empty(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = T(rng.normal(0.0, sigma));
    return t;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, double(std::abs(a.data()[i] - b.data()[i])));
    return m;
}

}  // namespace spikenas::testutil
