#pragma once

// Discrete-time leaky integrate-and-fire dynamics:
//
//   u[t] = tau * u[t-1] * (1 - o[t-1]) + x[t]
//   o[t] = spike(u[t] - v_th),  spike strict: 1 iff its argument > 0
//
// Initial state is zero; no state persists across forward passes. The
// spike function's backward pass uses a rectangular surrogate of width
// `surrogate_width` centered on the threshold.

#include <utility>

#include "spikenas/tensor.hpp"

namespace spikenas {

template <class T>
struct LifConfig {
    T tau = T(0.2);
    T v_th = T(0.5);
    T surrogate_width = T(1);

    void validate() const {
        check_shape(tau >= T(0) && tau < T(1), "lif: tau must be in [0,1)");
        check_shape(v_th > T(0), "lif: v_th must be positive");
        check_shape(surrogate_width > T(0), "lif: surrogate width must be positive");
    }
};

// The test-only relaxed mode replaces the Heaviside output by the
// surrogate's antiderivative (a clamped ramp), making the whole sequence
// differentiable so finite differences can validate the backward pass.
enum class LifMode { spike, relaxed };

// d(o)/d(u - v_th): (1/a) inside |v| < a/2, zero outside.
template <class T>
T spike_surrogate_grad(T v, const LifConfig<T>& cfg) {
    const T a = cfg.surrogate_width;
    return std::abs(v) < a / T(2) ? T(1) / a : T(0);
}

// Forward-only single step; returns (u, o).
template <class T>
std::pair<Tensor<T>, Tensor<T>> lif_step(const Tensor<T>& u_prev, const Tensor<T>& o_prev,
                                         const Tensor<T>& x, const LifConfig<T>& cfg);

// Unrolls lif_step along the time axis from rest, recording surrogate
// gradients on the active tape. Returns the binary outputs o.
template <class T>
Tensor<T> lif_sequence(const Tensor<T>& x_seq, const LifConfig<T>& cfg,
                       LifMode mode = LifMode::spike);

// Membrane trace alongside the outputs (tests inspect u).
template <class T>
std::pair<Tensor<T>, Tensor<T>> lif_sequence_trace(const Tensor<T>& x_seq,
                                                   const LifConfig<T>& cfg,
                                                   LifMode mode = LifMode::spike);

}  // namespace spikenas
