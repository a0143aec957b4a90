#pragma once

// Central-difference gradient verification. The forward builder is re-run
// with perturbed leaf values; analytic gradients come from one recorded
// backward pass. Non-differentiable spike paths are excluded by contract
// (checks there run in the surrogate-relaxed mode instead).

#include <functional>
#include <vector>

#include "spikenas/tensor.hpp"

namespace spikenas {

template <class T>
struct GradCheckReport {
    T max_rel_err = T(0);
    dim_t worst_leaf = -1;
    dim_t worst_index = -1;
};

// forward() must rebuild the computation from the current leaf values and
// return a scalar. Leaves must have requires_grad set.
template <class T>
GradCheckReport<T> finite_diff_check(const std::function<Tensor<T>()>& forward,
                                     std::vector<Tensor<T>> leaves, T epsilon) {
    GradCheckReport<T> report;
    for (auto& leaf : leaves) leaf.zero_grad();

    Tape<T> tape;
    {
        typename Tape<T>::Scope scope(tape);
        Tensor<T> loss = forward();
        tape.backward(loss);
    }

    std::vector<std::vector<T>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) {
        leaf.grad_data();
        analytic.push_back(leaf.grad_vec());
    }
    tape.clear();

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor<T>& leaf = leaves[li];
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            const T saved = leaf.data()[i];
            leaf.data()[i] = saved + epsilon;
            const T fp = forward().data()[0];
            leaf.data()[i] = saved - epsilon;
            const T fm = forward().data()[0];
            leaf.data()[i] = saved;
            const T numeric = (fp - fm) / (T(2) * epsilon);
            const T a = analytic[li][i];
            const T denom = std::max(std::max(std::abs(a), std::abs(numeric)), T(1e-8));
            const T rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_leaf = dim_t(li);
                report.worst_index = dim_t(i);
            }
        }
    }
    return report;
}

}  // namespace spikenas
