#include "spikenas/network.hpp"

#include <algorithm>
#include <cmath>

#include "spikenas/rng.hpp"

namespace spikenas {

const char* attention_name(AttentionMode m) {
    switch (m) {
        case AttentionMode::ct: return "ct";
        case AttentionMode::ma: return "ma";
        default: return "off";
    }
}

AttentionMode attention_from_string(const std::string& s) {
    if (s == "off") return AttentionMode::off;
    if (s == "ct") return AttentionMode::ct;
    if (s == "ma") return AttentionMode::ma;
    throw ConfigError("unknown attention mode: '" + s + "' (expected off|ct|ma)");
}

std::vector<dim_t> MacroConfig::resolved_reductions() const {
    if (!reduction_positions.empty()) return reduction_positions;
    std::vector<dim_t> r = {layers / 3, 2 * layers / 3};
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
}

dim_t MacroConfig::resolved_aux_after() const {
    return aux_after >= 0 ? aux_after : std::min<dim_t>(4, layers - 1);
}

void MacroConfig::validate() const {
    check_shape(layers >= 1, "macro: layers must be >= 1");
    check_shape(init_channels >= 1, "macro: init_channels must be >= 1");
    check_shape(classes >= 2, "macro: need at least two classes");
    check_shape(time_window >= 1, "macro: time window must be >= 1");
    check_shape(nodes >= 1, "macro: nodes must be >= 1");
    for (dim_t r : resolved_reductions())
        check_shape(r >= 0 && r < layers,
                    "macro: reduction position " + std::to_string(r) + " outside [0," +
                        std::to_string(layers) + ")");
    check_shape(resolved_aux_after() < layers, "macro: aux_after " +
                                                   std::to_string(resolved_aux_after()) +
                                                   " must be < layers");
}

// ---------------------------------------------------------------------
// Cell

namespace {

inline dim_t edge_linear_index(int node, int src) { return dim_t(node) * (node + 3) / 2 + src; }

}  // namespace

template <class T>
Cell<T> Cell<T>::supernet(const CellShape<T>& shape, const LifConfig<T>& lif,
                          ParamStore<T>& store, const std::string& prefix) {
    Cell<T> cell;
    cell.shape_ = shape;
    cell.lif_ = lif;
    cell.is_supernet_ = true;
    cell.pre0_w_ = store.add(prefix + ".pre0.conv",
                             Tensor<T>::zeros({shape.channels, shape.c_in0, 1, 1, 1}), Role::weight);
    cell.pre0_bn_ = BatchNorm<T>::make(shape.channels, store, prefix + ".pre0.bn");
    cell.pre1_w_ = store.add(prefix + ".pre1.conv",
                             Tensor<T>::zeros({shape.channels, shape.c_in1, 1, 1, 1}), Role::weight);
    cell.pre1_bn_ = BatchNorm<T>::make(shape.channels, store, prefix + ".pre1.bn");
    for (const EdgeRef& e : cell_edge_list(int(shape.nodes))) {
        const dim_t idx = edge_linear_index(e.node, e.src);
        const dim_t stride = (shape.reduction && e.src < 2) ? 2 : 1;
        std::array<CandidateParams<T>, kNumCandidates> ops;
        for (int o = 0; o < kNumCandidates; ++o)
            ops[std::size_t(o)] =
                make_candidate<T>(CandidateOp(o), shape.channels, stride, store,
                                  prefix + ".edge" + std::to_string(idx) + ".op" + std::to_string(o));
        cell.edge_ops_.push_back(std::move(ops));
    }
    return cell;
}

template <class T>
Cell<T> Cell<T>::discrete(const CellShape<T>& shape, const std::vector<GenotypeNode>& nodes,
                          const LifConfig<T>& lif, ParamStore<T>& store,
                          const std::string& prefix) {
    check_shape(dim_t(nodes.size()) == shape.nodes,
                "cell: genotype has " + std::to_string(nodes.size()) + " nodes, expected " +
                    std::to_string(shape.nodes));
    Cell<T> cell;
    cell.shape_ = shape;
    cell.lif_ = lif;
    cell.is_supernet_ = false;
    cell.genotype_nodes_ = nodes;
    cell.pre0_w_ = store.add(prefix + ".pre0.conv",
                             Tensor<T>::zeros({shape.channels, shape.c_in0, 1, 1, 1}), Role::weight);
    cell.pre0_bn_ = BatchNorm<T>::make(shape.channels, store, prefix + ".pre0.bn");
    cell.pre1_w_ = store.add(prefix + ".pre1.conv",
                             Tensor<T>::zeros({shape.channels, shape.c_in1, 1, 1, 1}), Role::weight);
    cell.pre1_bn_ = BatchNorm<T>::make(shape.channels, store, prefix + ".pre1.bn");
    for (int node = 0; node < int(shape.nodes); ++node) {
        std::array<CandidateParams<T>, 2> pair;
        for (int side = 0; side < 2; ++side) {
            const GenotypeEdge& ge = nodes[std::size_t(node)][std::size_t(side)];
            const dim_t idx = edge_linear_index(node, ge.src);
            const dim_t stride = (shape.reduction && ge.src < 2) ? 2 : 1;
            pair[std::size_t(side)] = make_candidate<T>(
                ge.op, shape.channels, stride, store,
                prefix + ".edge" + std::to_string(idx) + ".op" + std::to_string(int(ge.op)));
        }
        cell.node_ops_.push_back(std::move(pair));
    }
    return cell;
}

template <class T>
Tensor<T> Cell<T>::forward(const Tensor<T>& s0, const Tensor<T>& s1,
                           const Tensor<T>& edge_weights, bool training, SpikeLedger* ledger,
                           dim_t ledger_slot, const AttentionBlock<T>* attention) {
    check_shape(s0.shape().c == shape_.c_in0 && s1.shape().c == shape_.c_in1,
                "cell: input channels " + s0.shape().str() + "/" + s1.shape().str() +
                    " do not match (" + std::to_string(shape_.c_in0) + "," +
                    std::to_string(shape_.c_in1) + ")");
    Conv2dSpec pre0_spec;
    pre0_spec.stride = shape_.reduce_prev ? 2 : 1;
    Tensor<T> p0 = pre0_bn_.forward(conv2d(s0, pre0_w_, pre0_spec), training);
    Tensor<T> p1 = pre1_bn_.forward(conv2d(s1, pre1_w_, {}), training);
    check_shape(p0.shape() == p1.shape(),
                "cell: preprocessed inputs disagree: " + p0.shape().str() + " vs " +
                    p1.shape().str());

    std::vector<Tensor<T>> states = {p0, p1};
    for (int node = 0; node < int(shape_.nodes); ++node) {
        Tensor<T> acc;
        auto accumulate = [&](const Tensor<T>& v) {
            acc = acc.defined() ? add(acc, v) : v;
        };
        if (is_supernet_) {
            for (int src = 0; src < node + 2; ++src) {
                const dim_t idx = edge_linear_index(node, src);
                auto& ops = edge_ops_[std::size_t(idx)];
                std::vector<Tensor<T>> outs(kNumCandidates);
                for (int o = 0; o < kNumCandidates; ++o) {
                    if (CandidateOp(o) == CandidateOp::none) continue;  // exact zero
                    outs[std::size_t(o)] = apply_candidate<T>(
                        ops[std::size_t(o)], states[std::size_t(src)], lif_, training, ledger,
                        ledger_slot);
                }
                accumulate(weighted_sum<T>(outs, take_row(edge_weights, idx)));
            }
        } else {
            for (int side = 0; side < 2; ++side) {
                const GenotypeEdge& ge = genotype_nodes_[std::size_t(node)][std::size_t(side)];
                accumulate(apply_candidate<T>(node_ops_[std::size_t(node)][std::size_t(side)],
                                              states[std::size_t(ge.src)], lif_, training, ledger,
                                              ledger_slot));
            }
        }
        states.push_back(acc);
    }
    std::vector<Tensor<T>> nodes(states.begin() + 2, states.end());
    Tensor<T> out = concat_channels(nodes);
    if (attention) out = attention->apply(out);
    return out;
}

// ---------------------------------------------------------------------
// Network

template <class T>
Network<T>::Network(const MacroConfig& macro, const Genotype* genotype, std::uint64_t seed)
    : macro_(macro) {
    macro_.validate();
    is_supernet_ = (genotype == nullptr);
    if (genotype) {
        genotype->validate();
        check_shape(genotype->nodes == int(macro_.nodes),
                    "network: genotype nodes " + std::to_string(genotype->nodes) +
                        " do not match macro nodes " + std::to_string(macro_.nodes));
    }
    lif_.tau = T(macro_.lif_tau);
    lif_.v_th = T(macro_.lif_vth);
    lif_.surrogate_width = T(macro_.lif_surrogate_width);
    lif_.validate();

    stem_w_ = store_.add("stem.conv",
                         Tensor<T>::zeros({macro_.init_channels, macro_.in_channels, 3, 3, 1}),
                         Role::weight);
    stem_bn_ = BatchNorm<T>::make(macro_.init_channels, store_, "stem.bn");

    const std::vector<dim_t> reductions = macro_.resolved_reductions();
    auto is_reduction = [&](dim_t k) {
        return std::find(reductions.begin(), reductions.end(), k) != reductions.end();
    };

    dim_t c_prev_prev = macro_.init_channels;
    dim_t c_prev = macro_.init_channels;
    dim_t c_cur = macro_.init_channels;
    bool prev_was_reduction = false;
    const dim_t aux_after = macro_.resolved_aux_after();
    for (dim_t k = 0; k < macro_.layers; ++k) {
        CellShape<T> shape;
        shape.reduction = is_reduction(k);
        if (shape.reduction) c_cur *= 2;
        shape.reduce_prev = prev_was_reduction;
        shape.nodes = macro_.nodes;
        shape.channels = c_cur;
        shape.c_in0 = c_prev_prev;
        shape.c_in1 = c_prev;
        const std::string prefix = "cell" + std::to_string(k);
        if (is_supernet_) {
            cells_.push_back(Cell<T>::supernet(shape, lif_, store_, prefix));
        } else {
            cells_.push_back(Cell<T>::discrete(
                shape, shape.reduction ? genotype->reduction : genotype->normal, lif_, store_,
                prefix));
        }
        // attention sites
        AttentionBlock<T> att;
        const bool site = macro_.attention != AttentionMode::off &&
                          (macro_.attention_every_cell || k == macro_.layers - 1);
        if (site) {
            const dim_t out_c = cells_.back().out_channels();
            att.mode = macro_.attention;
            if (macro_.attention == AttentionMode::ct) {
                att.ct = CtAttentionParams<T>::make(out_c, macro_.time_window);
                att.ct.conv_kernel = store_.add(prefix + ".attention.ct.kernel",
                                                att.ct.conv_kernel, Role::weight,
                                                Subsystem::attention);
            } else {
                att.ma = MaAttentionParams<T>::make(out_c, macro_.time_window,
                                                    macro_.attention_reduction);
                att.ma.mlp_w1 = store_.add(prefix + ".attention.ma.mlp1", att.ma.mlp_w1,
                                           Role::weight, Subsystem::attention);
                att.ma.mlp_w2 = store_.add(prefix + ".attention.ma.mlp2", att.ma.mlp_w2,
                                           Role::weight, Subsystem::attention);
                att.ma.spatial_kernel = store_.add(prefix + ".attention.ma.spatial",
                                                   att.ma.spatial_kernel, Role::weight,
                                                   Subsystem::attention);
            }
        }
        attention_.push_back(att);

        prev_was_reduction = shape.reduction;
        c_prev_prev = c_prev;
        c_prev = cells_.back().out_channels();
        if (k == aux_after) aux_src_channels_ = c_prev;
    }
    final_channels_ = c_prev;

    cls_w_ = store_.add("classifier.weight",
                        Tensor<T>::zeros({macro_.classes, final_channels_, 1, 1, 1}), Role::weight);
    cls_b_ = store_.add("classifier.bias", Tensor<T>::zeros({1, macro_.classes, 1, 1, 1}),
                        Role::weight, Subsystem::backbone, InitKind::zeros);

    if (macro_.aux_enabled) {
        aux_conv_ = store_.add("aux.conv", Tensor<T>::zeros({128, aux_src_channels_, 1, 1, 1}),
                               Role::weight);
        aux_fc_w_ = store_.add("aux.fc.weight", Tensor<T>::zeros({macro_.classes, 128, 1, 1, 1}),
                               Role::weight);
        aux_fc_b_ = store_.add("aux.fc.bias", Tensor<T>::zeros({1, macro_.classes, 1, 1, 1}),
                               Role::weight, Subsystem::backbone, InitKind::zeros);
    }

    if (is_supernet_) {
        const dim_t edges = cell_edge_count(int(macro_.nodes));
        alpha_normal_ = store_.add("alpha.normal", Tensor<T>::zeros({edges, kNumCandidates, 1, 1, 1}),
                                   Role::alpha, Subsystem::backbone, InitKind::alpha_noise);
        alpha_reduction_ = store_.add("alpha.reduction",
                                      Tensor<T>::zeros({edges, kNumCandidates, 1, 1, 1}),
                                      Role::alpha, Subsystem::backbone, InitKind::alpha_noise);
    }

    init_params(store_, seed);
}

template <class T>
AlphaMatrix Network<T>::alpha_matrix(bool reduction) const {
    check_shape(is_supernet_, "alpha_matrix: discrete networks carry no alphas");
    const Tensor<T>& a = reduction ? alpha_reduction_ : alpha_normal_;
    AlphaMatrix m(std::size_t(a.shape().n));
    for (dim_t e = 0; e < a.shape().n; ++e)
        for (int o = 0; o < kNumCandidates; ++o)
            m[std::size_t(e)][std::size_t(o)] = double(a.data()[e * kNumCandidates + o]);
    return m;
}

template <class T>
ForwardOutput<T> Network<T>::forward(const Tensor<T>& images, bool training, bool with_aux,
                                     SpikeLedger* ledger) {
    const Shape5 s = images.shape();
    check_shape(s.c == macro_.in_channels, "network: input channels " + std::to_string(s.c) +
                                               " do not match config " +
                                               std::to_string(macro_.in_channels));
    check_shape(s.t == 1, "network: input time axis must be 1 (direct encoding adds it)");
    if (ledger)
        check_shape(dim_t(ledger->per_cell.size()) == ledger_slots(),
                    "network: ledger has " + std::to_string(ledger->per_cell.size()) +
                        " slots, expected " + std::to_string(ledger_slots()));

    Conv2dSpec stem_spec;
    stem_spec.padding = 1;
    Tensor<T> x = stem_bn_.forward(conv2d(images, stem_w_, stem_spec), training);
    x = replicate_t(x, macro_.time_window);

    Tensor<T> wn, wr;
    if (is_supernet_) {
        wn = softmax_over(alpha_normal_, Axis::C);
        wr = softmax_over(alpha_reduction_, Axis::C);
    }

    Tensor<T> s0 = x, s1 = x, aux_src;
    const dim_t aux_after = macro_.resolved_aux_after();
    for (dim_t k = 0; k < macro_.layers; ++k) {
        Cell<T>& cell = cells_[std::size_t(k)];
        const Tensor<T>& w = cell.shape().reduction ? wr : wn;
        const AttentionBlock<T>* att =
            attention_[std::size_t(k)].mode != AttentionMode::off ? &attention_[std::size_t(k)]
                                                                  : nullptr;
        Tensor<T> out = cell.forward(s0, s1, w, training, ledger, k, att);
        s0 = s1;
        s1 = out;
        if (k == aux_after) aux_src = out;
    }

    // classifier: LIF -> global average pool over (H,W,T) -> linear
    Tensor<T> o = lif_sequence(s1, lif_);
    if (ledger) record_spikes(*ledger, macro_.layers, o);
    Tensor<T> pooled = reduce_pool(o, AxisSet::spatial_temporal(), PoolKind::avg);
    ForwardOutput<T> result;
    result.logits = linear(pooled, cls_w_, cls_b_);

    if (with_aux && macro_.aux_enabled) {
        Tensor<T> ap = reduce_pool(aux_src, AxisSet::spatial_temporal(), PoolKind::avg);
        Tensor<T> ac = conv2d(ap, aux_conv_, {});
        result.aux_logits = linear(ac, aux_fc_w_, aux_fc_b_);
    }
    return result;
}

template <class T>
void init_params(ParamStore<T>& store, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 0x1A17);
    for (auto& p : store.params) {
        switch (p.init) {
            case InitKind::zeros:
            case InitKind::ones:
                break;  // already in place
            case InitKind::fan_in_uniform: {
                const Shape5 s = p.tensor.shape();
                const double fan_in = double(s.c * s.h * s.w * s.t);
                const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
                for (std::size_t i = 0; i < p.tensor.size(); ++i)
                    p.tensor.data()[i] = T(rng.uniform(-bound, bound));
                break;
            }
            case InitKind::alpha_noise:
                for (std::size_t i = 0; i < p.tensor.size(); ++i)
                    p.tensor.data()[i] = T(rng.normal(0.0, 1e-3));
                break;
        }
    }
}

#define SPIKENAS_INSTANTIATE_NETWORK(T)                        \
    template class Cell<T>;                                    \
    template class Network<T>;                                 \
    template void init_params<T>(ParamStore<T>&, std::uint64_t);

SPIKENAS_INSTANTIATE_NETWORK(float)
SPIKENAS_INSTANTIATE_NETWORK(double)

}  // namespace spikenas
