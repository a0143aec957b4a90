#pragma once

// Macro architecture: stem, a stack of normal/reduction cells with channel
// doubling at each reduction, optional attention at the concatenation of
// the final cell (or every cell), an auxiliary classifier, and the spiking
// classifier head. One class covers both the relaxed supernet (mixed
// edges weighted by softmaxed alphas) and the discrete network built from
// a genotype.

#include <cstdint>
#include <string>
#include <vector>

#include "spikenas/attention.hpp"
#include "spikenas/candidates.hpp"
#include "spikenas/genotype.hpp"

namespace spikenas {

enum class AttentionMode { off, ct, ma };

const char* attention_name(AttentionMode m);
AttentionMode attention_from_string(const std::string& s);

struct MacroConfig {
    dim_t layers = 5;
    dim_t init_channels = 16;
    dim_t in_channels = 3;
    dim_t classes = 10;
    dim_t time_window = 2;
    dim_t nodes = 4;
    std::vector<dim_t> reduction_positions;  // empty: floor(L/3) and floor(2L/3)
    dim_t aux_after = -1;                    // -1: min(4, layers-1)
    double aux_weight = 0.4;
    bool aux_enabled = true;
    AttentionMode attention = AttentionMode::off;
    bool attention_every_cell = false;
    dim_t attention_reduction = kDefaultMaReduction;
    double lif_tau = 0.2;
    double lif_vth = 0.5;
    double lif_surrogate_width = 1.0;

    std::vector<dim_t> resolved_reductions() const;
    dim_t resolved_aux_after() const;
    void validate() const;
};

template <class T>
struct AttentionBlock {
    AttentionMode mode = AttentionMode::off;
    CtAttentionParams<T> ct;
    MaAttentionParams<T> ma;

    Tensor<T> apply(const Tensor<T>& x) const {
        switch (mode) {
            case AttentionMode::ct: return ct_attention(x, ct);
            case AttentionMode::ma: return ma_attention(x, ma);
            default: return x;
        }
    }
};

template <class T>
struct CellShape {
    bool reduction = false;
    bool reduce_prev = false;  // s0 carries twice the spatial size of s1
    dim_t nodes = 4;
    dim_t channels = 0;
    dim_t c_in0 = 0, c_in1 = 0;
};

template <class T>
class Cell {
public:
    Cell() = default;

    static Cell supernet(const CellShape<T>& shape, const LifConfig<T>& lif, ParamStore<T>& store,
                         const std::string& prefix);
    static Cell discrete(const CellShape<T>& shape, const std::vector<GenotypeNode>& nodes,
                         const LifConfig<T>& lif, ParamStore<T>& store, const std::string& prefix);

    // edge_weights: softmaxed (E,8,1,1,1) mixture weights; ignored by
    // discrete cells. Returns the channel concatenation of all
    // intermediate nodes, with `attention` applied when given.
    Tensor<T> forward(const Tensor<T>& s0, const Tensor<T>& s1, const Tensor<T>& edge_weights,
                      bool training, SpikeLedger* ledger, dim_t ledger_slot,
                      const AttentionBlock<T>* attention);

    dim_t out_channels() const { return shape_.nodes * shape_.channels; }
    const CellShape<T>& shape() const { return shape_; }

private:
    CellShape<T> shape_;
    LifConfig<T> lif_;
    bool is_supernet_ = false;
    Tensor<T> pre0_w_, pre1_w_;
    BatchNorm<T> pre0_bn_, pre1_bn_;
    std::vector<std::array<CandidateParams<T>, kNumCandidates>> edge_ops_;  // supernet
    std::vector<GenotypeNode> genotype_nodes_;                              // discrete
    std::vector<std::array<CandidateParams<T>, 2>> node_ops_;               // discrete
};

template <class T>
struct ForwardOutput {
    Tensor<T> logits;
    Tensor<T> aux_logits;  // undefined when aux is off
};

template <class T>
class Network {
public:
    // Supernet when genotype is null, discrete network otherwise.
    Network(const MacroConfig& macro, const Genotype* genotype, std::uint64_t seed);

    ForwardOutput<T> forward(const Tensor<T>& images, bool training, bool with_aux,
                             SpikeLedger* ledger = nullptr);

    ParamStore<T>& store() { return store_; }
    const ParamStore<T>& store() const { return store_; }
    const MacroConfig& macro() const { return macro_; }
    bool is_supernet() const { return is_supernet_; }

    Tensor<T> alpha_normal() const { return alpha_normal_; }
    Tensor<T> alpha_reduction() const { return alpha_reduction_; }
    AlphaMatrix alpha_matrix(bool reduction) const;

    // Ledger layout: one slot per cell plus a final classifier slot.
    dim_t ledger_slots() const { return macro_.layers + 1; }

    // Channel count entering each attention site / the classifier.
    dim_t final_channels() const { return final_channels_; }

private:
    MacroConfig macro_;
    bool is_supernet_ = true;
    LifConfig<T> lif_;
    ParamStore<T> store_;
    Tensor<T> stem_w_;
    BatchNorm<T> stem_bn_;
    std::vector<Cell<T>> cells_;
    std::vector<AttentionBlock<T>> attention_;  // per cell; mode off when not a site
    Tensor<T> cls_w_, cls_b_;
    Tensor<T> aux_conv_, aux_fc_w_, aux_fc_b_;
    dim_t aux_src_channels_ = 0;
    dim_t final_channels_ = 0;
    Tensor<T> alpha_normal_, alpha_reduction_;
};

// Deterministic parameter initialization: fan-in-scaled uniform for
// conv/linear weights, N(0, 1e-3) symmetry-breaking noise for alphas.
template <class T>
void init_params(ParamStore<T>& store, std::uint64_t seed);

}  // namespace spikenas
