#include "spikenas/attention.hpp"

#include <cmath>

namespace spikenas {

dim_t eca_kernel_size(dim_t channels) {
    check_shape(channels >= 1, "eca_kernel_size: channels must be >= 1");
    const double raw = std::floor(std::log2(double(channels)) / 2.0 + 0.5);
    dim_t k = dim_t(raw);
    if (k < 1) return 1;
    return (k % 2 == 1) ? k : k + 1;
}

dim_t ct_temporal_kernel(dim_t time) {
    check_shape(time >= 1, "ct_temporal_kernel: time window must be >= 1");
    if (time == 2) return 1;
    return std::min<dim_t>(time, 3);
}

template <class T>
Tensor<T> ct_attention(const Tensor<T>& x, const CtAttentionParams<T>& p) {
    const Shape5 s = x.shape();
    check_shape(p.conv_kernel.shape().h == p.k_c && p.conv_kernel.shape().w == p.k_t,
                "ct_attention: kernel shape " + p.conv_kernel.shape().str() +
                    " does not match (k_C,k_T)=(" + std::to_string(p.k_c) + "," +
                    std::to_string(p.k_t) + ")");
    Tensor<T> pooled = reduce_pool(x, AxisSet::spatial(), PoolKind::avg);  // (N,C,1,1,T)
    // Treat the C x T plane as a one-channel image for the 2-D conv.
    Tensor<T> img = reshape(pooled, {s.n, 1, s.c, s.t, 1});
    Conv2dSpec spec;
    spec.padding = (p.k_c - 1) / 2;
    spec.pad_w = (p.k_t - 1) / 2;
    Tensor<T> conv = conv2d(img, p.conv_kernel, spec);
    Tensor<T> weights = sigmoid(reshape(conv, {s.n, s.c, 1, 1, s.t}));
    return mul(x, weights);
}

template <class T>
Tensor<T> ma_ct_attention(const Tensor<T>& x, const MaAttentionParams<T>& p) {
    const Shape5 s = x.shape();
    check_shape(s.c == p.channels && s.t == p.time,
                "ma_ct_attention: input " + s.str() + " does not match params (C=" +
                    std::to_string(p.channels) + ",T=" + std::to_string(p.time) + ")");
    auto mlp = [&](const Tensor<T>& pooled) {
        Tensor<T> h = relu(linear(pooled, p.mlp_w1));
        return linear(h, p.mlp_w2);  // (N, C*T)
    };
    Tensor<T> avg_path = mlp(reduce_pool(x, AxisSet::spatial(), PoolKind::avg));
    Tensor<T> max_path = mlp(reduce_pool(x, AxisSet::spatial(), PoolKind::max));
    Tensor<T> gate = sigmoid(add(avg_path, max_path));
    Tensor<T> weights = reshape(gate, {s.n, s.c, 1, 1, s.t});
    return mul(x, weights);
}

template <class T>
Tensor<T> ma_spatial_attention(const Tensor<T>& x, const MaAttentionParams<T>& p) {
    Tensor<T> mx = reduce_pool(x, AxisSet::channel(), PoolKind::max);  // (N,1,H,W,T)
    Tensor<T> av = reduce_pool(x, AxisSet::channel(), PoolKind::avg);
    Tensor<T> cat = concat_channels<T>({mx, av});  // (N,2,H,W,T)
    Conv2dSpec spec;
    spec.padding = (p.spatial_k - 1) / 2;
    Tensor<T> conv = conv2d(cat, p.spatial_kernel, spec);  // (N,1,H,W,T)
    Tensor<T> weights = sigmoid(conv);
    return mul(x, weights);
}

template <class T>
Tensor<T> ma_attention(const Tensor<T>& x, const MaAttentionParams<T>& p) {
    return ma_spatial_attention(ma_ct_attention(x, p), p);
}

#define SPIKENAS_INSTANTIATE_ATTENTION(T)                                            \
    template Tensor<T> ct_attention<T>(const Tensor<T>&, const CtAttentionParams<T>&); \
    template Tensor<T> ma_ct_attention<T>(const Tensor<T>&, const MaAttentionParams<T>&); \
    template Tensor<T> ma_spatial_attention<T>(const Tensor<T>&, const MaAttentionParams<T>&); \
    template Tensor<T> ma_attention<T>(const Tensor<T>&, const MaAttentionParams<T>&);

SPIKENAS_INSTANTIATE_ATTENTION(float)
SPIKENAS_INSTANTIATE_ATTENTION(double)

}  // namespace spikenas
