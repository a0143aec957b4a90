#pragma once

// The eight candidate operations of the cell search space and their
// parameter blocks. Parameterized ops run LIF activation, then their
// convolution(s), then batchnorm; pooling ops run pool2d then batchnorm;
// skip_connect is the identity at stride 1 and a strided 1x1 projection
// (plus batchnorm) at stride 2; none is the zero map of the strided shape.

#include <string>
#include <vector>

#include "spikenas/genotype.hpp"
#include "spikenas/lif.hpp"
#include "spikenas/metrics.hpp"
#include "spikenas/ops.hpp"
#include "spikenas/tensor.hpp"

namespace spikenas {

// Learnable parameters plus named non-learnable state (batchnorm running
// statistics). Registration order is the initialization draw order, so
// construction must be deterministic.
template <class T>
struct ParamStore {
    std::vector<Parameter<T>> params;
    std::vector<Parameter<T>> buffers;

    Tensor<T> add(const std::string& name, Tensor<T> t, Role role,
                  Subsystem sub = Subsystem::backbone,
                  InitKind init = InitKind::fan_in_uniform) {
        t.set_requires_grad();
        params.push_back({t, name, role, sub, init});
        return t;
    }

    Tensor<T> add_buffer(const std::string& name, Tensor<T> t,
                         Subsystem sub = Subsystem::backbone) {
        buffers.push_back({t, name, Role::weight, sub, InitKind::zeros});
        return t;
    }

    Parameter<T>* find(const std::string& name) {
        for (auto& p : params)
            if (p.name == name) return &p;
        for (auto& b : buffers)
            if (b.name == name) return &b;
        return nullptr;
    }
};

template <class T>
struct BatchNorm {
    Tensor<T> gamma, beta, running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    static BatchNorm<T> make(dim_t channels, ParamStore<T>& store, const std::string& prefix,
                             Subsystem sub = Subsystem::backbone) {
        BatchNorm<T> bn;
        bn.gamma = store.add(prefix + ".gamma", Tensor<T>::full({1, channels, 1, 1, 1}, T(1)),
                             Role::weight, sub, InitKind::ones);
        bn.beta = store.add(prefix + ".beta", Tensor<T>::zeros({1, channels, 1, 1, 1}),
                            Role::weight, sub, InitKind::zeros);
        bn.running_mean =
            store.add_buffer(prefix + ".running_mean", Tensor<T>::zeros({1, channels, 1, 1, 1}), sub);
        bn.running_var = store.add_buffer(prefix + ".running_var",
                                          Tensor<T>::full({1, channels, 1, 1, 1}, T(1)), sub);
        return bn;
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        return batchnorm<T>(x, gamma, beta, running_mean, running_var, momentum, eps, training);
    }
};

template <class T>
struct CandidateParams {
    CandidateOp op = CandidateOp::none;
    dim_t channels = 0;
    dim_t stride = 1;
    Tensor<T> w_depth;  // depthwise k x k
    Tensor<T> w_point;  // 1x1
    Tensor<T> w_proj;   // skip_connect stride-2 projection
    BatchNorm<T> bn;
    bool has_bn = false;
};

// Builds (and registers) the parameter block for one candidate op.
template <class T>
CandidateParams<T> make_candidate(CandidateOp op, dim_t channels, dim_t stride,
                                  ParamStore<T>& store, const std::string& prefix);

// Applies the candidate. LIF spikes emitted inside the op are counted
// into `ledger` slot `ledger_slot` when a ledger is given.
template <class T>
Tensor<T> apply_candidate(CandidateParams<T>& p, const Tensor<T>& x, const LifConfig<T>& lif,
                          bool training, SpikeLedger* ledger, dim_t ledger_slot);

// Output spatial size of a candidate at the given stride.
inline dim_t candidate_out_dim(dim_t in, dim_t stride) { return (in + stride - 1) / stride; }

}  // namespace spikenas
