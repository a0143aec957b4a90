#pragma once

#include <vector>

#include "spikenas/tensor.hpp"

namespace spikenas {

// Mean over the batch of -log softmax(logits)[label], computed with the
// log-sum-exp trick. Gradient: (softmax - onehot) / N.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

// Main loss plus aux_weight times the auxiliary head's loss (when the aux
// logits are defined).
template <class T>
Tensor<T> cross_entropy_with_aux(const Tensor<T>& logits, const Tensor<T>& aux_logits,
                                 const std::vector<int>& labels, T aux_weight);

}  // namespace spikenas
