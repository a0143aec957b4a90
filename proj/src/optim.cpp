#include "spikenas/optim.hpp"

#include <cmath>

namespace spikenas {

template <class T>
void SgdMomentum<T>::step(T lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor<T>& p = params_[i];
        std::vector<T>& v = velocity_[i];
        const bool has_grad = p.has_grad();
        const T* g = has_grad ? p.grad_vec().data() : nullptr;
        T* w = p.data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const T gj = (g ? g[j] : T(0)) + weight_decay_ * w[j];
            v[j] = momentum_ * v[j] + gj;
            w[j] -= lr * v[j];
        }
    }
}

template <class T>
void Adam<T>::step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, T(t_));
    const T bc2 = T(1) - std::pow(beta2_, T(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor<T>& p = params_[i];
        const bool has_grad = p.has_grad();
        const T* g = has_grad ? p.grad_vec().data() : nullptr;
        T* w = p.data();
        std::vector<T>& m = m_[i];
        std::vector<T>& v = v_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const T gj = (g ? g[j] : T(0)) + weight_decay_ * w[j];
            m[j] = beta1_ * m[j] + (T(1) - beta1_) * gj;
            v[j] = beta2_ * v[j] + (T(1) - beta2_) * gj * gj;
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

template <class T>
T cosine_lr(dim_t epoch, dim_t total, T lr_max, T lr_min) {
    check_shape(total >= 1 && epoch >= 0 && epoch <= total,
                "cosine_lr: epoch " + std::to_string(epoch) + " outside [0," +
                    std::to_string(total) + "]");
    const T c = std::cos(T(M_PI) * T(epoch) / T(total));
    return lr_min + (lr_max - lr_min) * (T(1) + c) / T(2);
}

template <class T>
T clip_grad_global_norm(std::vector<Tensor<T>>& params, T max_norm) {
    T sq = T(0);
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        const T* g = p.grad_vec().data();
        sq += kern::dot(p.size(), g, g);
    }
    const T norm = std::sqrt(sq);
    if (norm > max_norm && norm > T(0)) {
        const T s = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            T* g = p.grad_data();
            kern::scale(p.size(), s, g, g);
        }
    }
    return norm;
}

#define SPIKENAS_INSTANTIATE_OPTIM(T)                       \
    template class SgdMomentum<T>;                          \
    template class Adam<T>;                                 \
    template T cosine_lr<T>(dim_t, dim_t, T, T);            \
    template T clip_grad_global_norm<T>(std::vector<Tensor<T>>&, T);

SPIKENAS_INSTANTIATE_OPTIM(float)
SPIKENAS_INSTANTIATE_OPTIM(double)

}  // namespace spikenas
