#include "spikenas/lif.hpp"

#include <cmath>

namespace spikenas {

namespace {

// Surrogate antiderivative: 0 below -a/2, ramp of slope 1/a, 1 above a/2.
template <class T>
T relaxed_spike(T v, T a) {
    const T r = v / a + T(0.5);
    return r < T(0) ? T(0) : (r > T(1) ? T(1) : r);
}

}  // namespace

template <class T>
std::pair<Tensor<T>, Tensor<T>> lif_step(const Tensor<T>& u_prev, const Tensor<T>& o_prev,
                                         const Tensor<T>& x, const LifConfig<T>& cfg) {
    cfg.validate();
    check_shape(u_prev.shape() == x.shape() && o_prev.shape() == x.shape(),
                "lif_step: state shapes " + u_prev.shape().str() + "/" + o_prev.shape().str() +
                    " do not match input " + x.shape().str());
    Tensor<T> u = Tensor<T>::empty(x.shape());
    Tensor<T> o = Tensor<T>::empty(x.shape());
    kern::lif_step(x.size(), cfg.tau, cfg.v_th, u_prev.data(), o_prev.data(), x.data(),
                   u.data(), o.data());
    return {u, o};
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> lif_sequence_trace(const Tensor<T>& x_seq,
                                                   const LifConfig<T>& cfg, LifMode mode) {
    cfg.validate();
    const Shape5 s = x_seq.shape();
    check_shape(s.t >= 1, "lif_sequence: empty time axis");
    Tensor<T> u_full = Tensor<T>::empty(s);
    Tensor<T> o_full = Tensor<T>::empty(s);
    const dim_t hw = s.h * s.w;
    const dim_t cells = s.n * s.c;
    const T tau = cfg.tau, vth = cfg.v_th, a = cfg.surrogate_width;

    kern::parallel_for(cells, [&](dim_t cb, dim_t ce) {
        for (dim_t cell = cb; cell < ce; ++cell) {
            const dim_t n = cell / s.c, c = cell % s.c;
            const dim_t base = x_seq.index(n, c, 0, 0, 0);
            for (dim_t t = 0; t < s.t; ++t) {
                const T* xt = x_seq.data() + base + t * hw;
                T* ut = u_full.data() + base + t * hw;
                T* ot = o_full.data() + base + t * hw;
                if (t == 0) {
                    kern::copy(std::size_t(hw), xt, ut);
                    if (mode == LifMode::spike) {
                        for (dim_t i = 0; i < hw; ++i)
                            ot[i] = (ut[i] - vth) > T(0) ? T(1) : T(0);
                    } else {
                        for (dim_t i = 0; i < hw; ++i) ot[i] = relaxed_spike(ut[i] - vth, a);
                    }
                } else if (mode == LifMode::spike) {
                    kern::lif_step(std::size_t(hw), tau, vth, ut - hw, ot - hw, xt, ut, ot);
                } else {
                    const T* up = ut - hw;
                    const T* op = ot - hw;
                    for (dim_t i = 0; i < hw; ++i) {
                        ut[i] = tau * up[i] * (T(1) - op[i]) + xt[i];
                        ot[i] = relaxed_spike(ut[i] - vth, a);
                    }
                }
            }
        }
    });

    Tensor<T> xc = x_seq, uc = u_full, oc = o_full;
    if (recording(o_full, x_seq)) {
        // Backward-through-time: gradient enters at each o[t], flows into
        // u[t] through the surrogate, and into u[t-1] through both the
        // decay and the reset factor.
        Tape<T>::current()->record(o_full, [xc, uc, oc, tau, vth, a, hw, cells]() mutable {
            if (!xc.diff()) return;
            xc.grad_data();
            const Shape5 s2 = xc.shape();
            kern::parallel_for(cells, [&](dim_t cb, dim_t ce) {
                std::vector<T> carry(static_cast<std::size_t>(hw));
                for (dim_t cell = cb; cell < ce; ++cell) {
                    const dim_t n = cell / s2.c, c = cell % s2.c;
                    const dim_t base = xc.index(n, c, 0, 0, 0);
                    kern::fill(std::size_t(hw), T(0), carry.data());
                    for (dim_t t = s2.t - 1; t >= 0; --t) {
                        const dim_t off = base + t * hw;
                        kern::lif_backward_step(std::size_t(hw), tau, vth, T(1) / a, a / T(2),
                                                uc.data() + off, oc.data() + off,
                                                oc.grad_vec().data() + off, carry.data(),
                                                xc.grad_data() + off);
                    }
                }
            });
        });
    }
    return {u_full, o_full};
}

template <class T>
Tensor<T> lif_sequence(const Tensor<T>& x_seq, const LifConfig<T>& cfg, LifMode mode) {
    return lif_sequence_trace(x_seq, cfg, mode).second;
}

#define SPIKENAS_INSTANTIATE_LIF(T)                                                           \
    template std::pair<Tensor<T>, Tensor<T>> lif_step<T>(const Tensor<T>&, const Tensor<T>&, \
                                                         const Tensor<T>&, const LifConfig<T>&); \
    template std::pair<Tensor<T>, Tensor<T>> lif_sequence_trace<T>(                           \
        const Tensor<T>&, const LifConfig<T>&, LifMode);                                      \
    template Tensor<T> lif_sequence<T>(const Tensor<T>&, const LifConfig<T>&, LifMode);

SPIKENAS_INSTANTIATE_LIF(float)
SPIKENAS_INSTANTIATE_LIF(double)

}  // namespace spikenas
