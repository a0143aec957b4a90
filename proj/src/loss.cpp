#include "spikenas/loss.hpp"

#include <cmath>

#include "spikenas/ops.hpp"

namespace spikenas {

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    const dim_t n = logits.shape().n;
    const dim_t k = logits.shape().c * logits.shape().h * logits.shape().w * logits.shape().t;
    check_shape(std::size_t(n) == labels.size(),
                "cross_entropy: batch " + std::to_string(n) + " vs " +
                    std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
        check_shape(labels[i] >= 0 && dim_t(labels[i]) < k,
                    "cross_entropy: label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " outside [0," + std::to_string(k) + ")");

    Tensor<T> out = Tensor<T>::zeros({1, 1, 1, 1, 1});
    T acc = T(0);
    for (dim_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        T m = row[0];
        for (dim_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        T s = T(0);
        for (dim_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
        acc += m + std::log(s) - row[std::size_t(labels[std::size_t(i)])];
    }
    out.data()[0] = acc / T(n);

    Tensor<T> lc = logits, oc = out;
    std::vector<int> lab = labels;
    if (recording(out, logits)) {
        Tape<T>::current()->record(out, [lc, oc, lab, n, k]() mutable {
            if (!lc.diff()) return;
            const T g = oc.grad_vec()[0] / T(n);
            T* gx = lc.grad_data();
            for (dim_t i = 0; i < n; ++i) {
                const T* row = lc.data() + i * k;
                T m = row[0];
                for (dim_t j = 1; j < k; ++j) m = std::max(m, row[j]);
                T s = T(0);
                for (dim_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
                for (dim_t j = 0; j < k; ++j) {
                    T p = std::exp(row[j] - m) / s;
                    if (j == dim_t(lab[std::size_t(i)])) p -= T(1);
                    gx[i * k + j] += g * p;
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> cross_entropy_with_aux(const Tensor<T>& logits, const Tensor<T>& aux_logits,
                                 const std::vector<int>& labels, T aux_weight) {
    Tensor<T> main = cross_entropy(logits, labels);
    if (!aux_logits.defined() || aux_weight == T(0)) return main;
    return add(main, scale(cross_entropy(aux_logits, labels), aux_weight));
}

#define SPIKENAS_INSTANTIATE_LOSS(T)                                                  \
    template Tensor<T> cross_entropy<T>(const Tensor<T>&, const std::vector<int>&);   \
    template Tensor<T> cross_entropy_with_aux<T>(const Tensor<T>&, const Tensor<T>&,  \
                                                 const std::vector<int>&, T);

SPIKENAS_INSTANTIATE_LOSS(float)
SPIKENAS_INSTANTIATE_LOSS(double)

}  // namespace spikenas
