#pragma once

// Optimizers for the bilevel loop: SGD with momentum for weights, Adam for
// architecture parameters, cosine-annealed learning rates, and global-norm
// gradient clipping.

#include <vector>

#include "spikenas/tensor.hpp"

namespace spikenas {

// v <- momentum*v + (grad + weight_decay*p); p <- p - lr*v
template <class T>
class SgdMomentum {
public:
    SgdMomentum(std::vector<Tensor<T>> params, T momentum, T weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        for (const auto& p : params_) velocity_.emplace_back(p.size(), T(0));
    }

    void step(T lr);
    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> velocity_;
    T momentum_, weight_decay_;
};

// Bias-corrected Adam. Weight decay is classic L2 folded into the
// gradient before the moment updates.
template <class T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
         T eps = T(1e-8), T weight_decay = T(0))
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          weight_decay_(weight_decay) {
        for (const auto& p : params_) {
            m_.emplace_back(p.size(), T(0));
            v_.emplace_back(p.size(), T(0));
        }
    }

    void step();
    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    T lr_, beta1_, beta2_, eps_, weight_decay_;
    std::int64_t t_ = 0;
};

// lr_min + (lr_max - lr_min) * (1 + cos(pi*epoch/total)) / 2
template <class T>
T cosine_lr(dim_t epoch, dim_t total, T lr_max, T lr_min = T(0));

// Scales all gradients so their joint L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <class T>
T clip_grad_global_norm(std::vector<Tensor<T>>& params, T max_norm);

}  // namespace spikenas
