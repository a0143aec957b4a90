#include "spikenas/candidates.hpp"

namespace spikenas {

template <class T>
CandidateParams<T> make_candidate(CandidateOp op, dim_t channels, dim_t stride,
                                  ParamStore<T>& store, const std::string& prefix) {
    CandidateParams<T> p;
    p.op = op;
    p.channels = channels;
    p.stride = stride;
    switch (op) {
        case CandidateOp::sep_conv_3x3:
        case CandidateOp::sep_conv_5x5:
        case CandidateOp::dil_conv_3x3:
        case CandidateOp::dil_conv_5x5: {
            const dim_t k =
                (op == CandidateOp::sep_conv_3x3 || op == CandidateOp::dil_conv_3x3) ? 3 : 5;
            p.w_depth = store.add(prefix + ".depth", Tensor<T>::zeros({channels, 1, k, k, 1}),
                                  Role::weight);
            p.w_point = store.add(prefix + ".point", Tensor<T>::zeros({channels, channels, 1, 1, 1}),
                                  Role::weight);
            p.bn = BatchNorm<T>::make(channels, store, prefix + ".bn");
            p.has_bn = true;
            break;
        }
        case CandidateOp::max_pool_3x3:
        case CandidateOp::avg_pool_3x3:
            p.bn = BatchNorm<T>::make(channels, store, prefix + ".bn");
            p.has_bn = true;
            break;
        case CandidateOp::skip_connect:
            if (stride != 1) {
                p.w_proj = store.add(prefix + ".proj",
                                     Tensor<T>::zeros({channels, channels, 1, 1, 1}), Role::weight);
                p.bn = BatchNorm<T>::make(channels, store, prefix + ".bn");
                p.has_bn = true;
            }
            break;
        case CandidateOp::none:
            break;
    }
    return p;
}

template <class T>
Tensor<T> apply_candidate(CandidateParams<T>& p, const Tensor<T>& x, const LifConfig<T>& lif,
                          bool training, SpikeLedger* ledger, dim_t ledger_slot) {
    const Shape5 s = x.shape();
    check_shape(s.c == p.channels, "apply_candidate: input channels " + std::to_string(s.c) +
                                       " do not match op channels " + std::to_string(p.channels));
    switch (p.op) {
        case CandidateOp::none: {
            return Tensor<T>::zeros({s.n, s.c, candidate_out_dim(s.h, p.stride),
                                     candidate_out_dim(s.w, p.stride), s.t});
        }
        case CandidateOp::skip_connect: {
            if (p.stride == 1) return x;
            Conv2dSpec proj;
            proj.stride = p.stride;
            auto y = conv2d(x, p.w_proj, proj);
            return p.bn.forward(y, training);
        }
        case CandidateOp::max_pool_3x3:
        case CandidateOp::avg_pool_3x3: {
            const PoolKind kind =
                p.op == CandidateOp::max_pool_3x3 ? PoolKind::max : PoolKind::avg;
            auto y = pool2d(x, kind, 3, p.stride, 1);
            return p.bn.forward(y, training);
        }
        default: {
            const bool dil =
                p.op == CandidateOp::dil_conv_3x3 || p.op == CandidateOp::dil_conv_5x5;
            const dim_t k = p.w_depth.shape().h;
            Tensor<T> o = lif_sequence(x, lif);
            if (ledger) record_spikes(*ledger, ledger_slot, o);
            Conv2dSpec depth;
            depth.stride = p.stride;
            depth.groups = p.channels;
            depth.dilation = dil ? 2 : 1;
            depth.padding = dil ? (k - 1) : (k - 1) / 2;
            Tensor<T> y = conv2d(o, p.w_depth, depth);
            y = conv2d(y, p.w_point, {});
            return p.bn.forward(y, training);
        }
    }
}

#define SPIKENAS_INSTANTIATE_CANDIDATES(T)                                                      \
    template CandidateParams<T> make_candidate<T>(CandidateOp, dim_t, dim_t, ParamStore<T>&,    \
                                                  const std::string&);                          \
    template Tensor<T> apply_candidate<T>(CandidateParams<T>&, const Tensor<T>&,                \
                                          const LifConfig<T>&, bool, SpikeLedger*, dim_t);

SPIKENAS_INSTANTIATE_CANDIDATES(float)
SPIKENAS_INSTANTIATE_CANDIDATES(double)

}  // namespace spikenas
