#pragma once

// Differentiable primitives over Tensor<T>. Every op validates shapes,
// computes its forward result, and (when a tape is active and an input is
// differentiable) records a backward closure.
//
// 2-D ops (conv2d, pool2d) act independently on each time slice with
// shared parameters.

#include <vector>

#include "spikenas/tensor.hpp"

namespace spikenas {

struct Conv2dSpec {
    dim_t stride = 1;
    dim_t padding = 0;  // applied to both spatial axes unless pad_w >= 0
    dim_t dilation = 1;
    dim_t groups = 1;
    dim_t pad_w = -1;  // rectangular padding for non-square kernels

    dim_t pad_h_eff() const { return padding; }
    dim_t pad_w_eff() const { return pad_w >= 0 ? pad_w : padding; }
};

enum class PoolKind { max, avg };

// Reduction axis subset for reduce_pool; the batch axis is never reduced.
struct AxisSet {
    bool c = false, h = false, w = false, t = false;
    static AxisSet spatial() { return {false, true, true, false}; }
    static AxisSet channel() { return {true, false, false, false}; }
    static AxisSet spatial_temporal() { return {false, true, true, true}; }
};

enum class Axis { N, C, H, W, T };

// x: (N,Ci,H,W,T), kernel: (Co,Ci/groups,kh,kw,1) -> (N,Co,Ho,Wo,T)
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Conv2dSpec& spec);

template <class T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, dim_t window, dim_t stride, dim_t padding);

template <class T>
Tensor<T> reduce_pool(const Tensor<T>& x, AxisSet axes, PoolKind kind);

// x flattened per sample to (N, F); weight (Fout,F,1,1,1); bias optional
// (1,Fout,1,1,1) -> (N,Fout,1,1,1)
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {});

template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> relu(const Tensor<T>& x);

// Same-shape elementwise sum.
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise product with broadcast over singleton axes on either side.
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// out = c * x for a plain constant.
template <class T> Tensor<T> scale(const Tensor<T>& x, T c);

template <class T> Tensor<T> softmax_over(const Tensor<T>& x, Axis axis);

// Normalizes per channel with statistics over (N,H,W,T). In training mode
// batch statistics are used and running stats updated in place; in eval
// mode running stats are used.
template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, T momentum, T eps,
                    bool training);

// Softmax-weighted sum of same-shape tensors: out = sum_i w[i] * items[i].
// Undefined entries are exact zeros (their weight gradient is zero).
template <class T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& items, const Tensor<T>& weights);

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& items);

// Broadcasts (N,C,H,W,1) across the time axis.
template <class T> Tensor<T> replicate_t(const Tensor<T>& x, dim_t t);

// Copies row i of the leading axis: (R,C,H,W,T) -> (1,C,H,W,T).
template <class T> Tensor<T> take_row(const Tensor<T>& x, dim_t i);

// Same-data view with a new shape (copying; numel must match).
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape5 s);

template <class T> Tensor<T> sum_all(const Tensor<T>& x);

}  // namespace spikenas
