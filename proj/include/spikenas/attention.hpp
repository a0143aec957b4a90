#pragma once

// Attention over 5-D feature maps.
//
// ct_attention: channel-temporal gate in the ECA style — spatial average
// pooling, a single-channel 2-D convolution over the C x T plane with an
// adaptive kernel, sigmoid, broadcast scaling.
//
// ma_attention: CBAM-style sequence — channel-temporal gate from a shared
// two-layer MLP over the flattened C*T vector fed by spatial avg and max
// pooling, then a spatial gate from channel max/avg maps convolved down to
// one channel per time step.

#include "spikenas/ops.hpp"
#include "spikenas/tensor.hpp"

namespace spikenas {

// Adaptive kernel size from the channel count: floor(log2(C)/2 + 1/2),
// rounded up to odd, minimum 1.
dim_t eca_kernel_size(dim_t channels);

// Temporal kernel extent: T for T in {1,3}, otherwise 3; even sizes are
// disallowed so T=2 degenerates to 1 (a per-time-step channel conv).
dim_t ct_temporal_kernel(dim_t time);

inline constexpr dim_t kDefaultMaReduction = 64;
inline constexpr dim_t kDefaultSpatialKernel = 7;

template <class T>
struct CtAttentionParams {
    Tensor<T> conv_kernel;  // (1,1,k_C,k_T,1)
    dim_t k_c = 1, k_t = 1;

    static CtAttentionParams<T> make(dim_t channels, dim_t time) {
        CtAttentionParams<T> p;
        p.k_c = eca_kernel_size(channels);
        p.k_t = ct_temporal_kernel(time);
        p.conv_kernel = Tensor<T>::zeros({1, 1, p.k_c, p.k_t, 1});
        return p;
    }

    dim_t param_count() const { return k_c * k_t; }
};

template <class T>
struct MaAttentionParams {
    Tensor<T> mlp_w1;          // (hidden, C*T, 1,1,1)
    Tensor<T> mlp_w2;          // (C*T, hidden, 1,1,1)
    Tensor<T> spatial_kernel;  // (1,2,k_s,k_s,1)
    dim_t channels = 0, time = 0, hidden = 0;
    dim_t reduction = kDefaultMaReduction;
    dim_t spatial_k = kDefaultSpatialKernel;

    static MaAttentionParams<T> make(dim_t channels, dim_t time,
                                     dim_t reduction = kDefaultMaReduction,
                                     dim_t spatial_k = kDefaultSpatialKernel) {
        check_shape(reduction >= 1, "ma attention: reduction ratio must be >= 1");
        check_shape(spatial_k % 2 == 1, "ma attention: spatial kernel must be odd");
        MaAttentionParams<T> p;
        p.channels = channels;
        p.time = time;
        p.reduction = reduction;
        p.spatial_k = spatial_k;
        const dim_t ct = channels * time;
        p.hidden = (ct + reduction - 1) / reduction;
        p.mlp_w1 = Tensor<T>::zeros({p.hidden, ct, 1, 1, 1});
        p.mlp_w2 = Tensor<T>::zeros({ct, p.hidden, 1, 1, 1});
        p.spatial_kernel = Tensor<T>::zeros({1, 2, spatial_k, spatial_k, 1});
        return p;
    }

    dim_t param_count() const {
        return mlp_w1.numel() + mlp_w2.numel() + spatial_kernel.numel();
    }
};

template <class T>
Tensor<T> ct_attention(const Tensor<T>& x, const CtAttentionParams<T>& p);

template <class T>
Tensor<T> ma_ct_attention(const Tensor<T>& x, const MaAttentionParams<T>& p);

template <class T>
Tensor<T> ma_spatial_attention(const Tensor<T>& x, const MaAttentionParams<T>& p);

// Channel-temporal gate followed by the spatial gate.
template <class T>
Tensor<T> ma_attention(const Tensor<T>& x, const MaAttentionParams<T>& p);

}  // namespace spikenas
