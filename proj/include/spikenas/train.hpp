#pragma once

// The search/retrain engine: alternating first-order bilevel optimization
// of architecture parameters (Adam, validation batches) and weights (SGD
// with momentum and cosine annealing, training batches), genotype
// derivation, and fixed-architecture retraining.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spikenas/dataset.hpp"
#include "spikenas/genotype.hpp"
#include "spikenas/metrics.hpp"
#include "spikenas/network.hpp"
#include "spikenas/optim.hpp"

namespace spikenas {

struct SearchConfig {
    dim_t epochs = 40;
    dim_t batch_size = 64;
    double w_lr = 0.0050;  // cosine-annealed
    double w_momentum = 0.9;
    double w_decay = 3e-4;
    double alpha_lr = 0.0003;
    double alpha_beta1 = 0.9;
    double alpha_beta2 = 0.999;
    double alpha_eps = 1e-8;
    double alpha_decay = 1e-3;
    double grad_clip = 5.0;  // global norm on w; 0 disables
    std::uint64_t seed = 1;

    void validate() const {
        check_shape(epochs >= 1 && batch_size >= 1, "search config: epochs/batch must be >= 1");
        check_shape(w_lr > 0 && alpha_lr > 0, "search config: learning rates must be positive");
    }
};

struct RetrainConfig {
    dim_t epochs = 600;
    dim_t batch_size = 64;
    double w_lr = 0.0025;  // cosine-annealed
    double w_momentum = 0.9;
    double w_decay = 3e-4;
    double grad_clip = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        check_shape(epochs >= 0 && batch_size >= 1, "retrain config: bad epochs/batch");
        check_shape(w_lr > 0, "retrain config: learning rate must be positive");
    }
};

struct EpochRecord {
    dim_t epoch = 0;
    double lr = 0;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
    dim_t images_train = 0, images_val = 0;
    // raw spike counts summed over the epoch's forward passes: train scope
    // on training passes, validation scope on evaluation passes
    std::vector<std::uint64_t> nos_train, nos_val;
    std::uint64_t nos_train_total = 0, nos_val_total = 0;
};

struct TrainHistory {
    dim_t ledger_slots = 0;
    std::vector<EpochRecord> epochs;

    // columns: epoch,lr,train_loss,train_acc,val_loss,val_acc,
    // images_train,images_val,nos_train_cell_0..k-1,nos_train_classifier,
    // nos_train_total,nos_val_cell_0..k-1,nos_val_classifier,nos_val_total
    std::string to_csv() const;
};

// A float-precision training network: 32-bit is the training build; the
// 64-bit instantiations exist for gradient-check oracles.
using train_real = float;

struct EvalResult {
    double loss = 0, acc = 0;
    SpikeLedger ledger;
};

// Whole-split evaluation in eval mode (no aux, batch statistics frozen).
EvalResult evaluate(Network<train_real>& net, const BatchStream<train_real>& stream);

// One epoch of Algorithm-style alternation: per iteration, Adam-step the
// alphas on a validation batch, then SGD-step the weights on a training
// batch; evaluate on the validation stream at the end.
EpochRecord bilevel_epoch(Network<train_real>& net, Adam<train_real>& alpha_opt,
                          SgdMomentum<train_real>& w_opt, const BatchStream<train_real>& train,
                          const BatchStream<train_real>& val, const SearchConfig& cfg,
                          dim_t epoch);

// Weight-only epoch for retraining.
EpochRecord train_epoch(Network<train_real>& net, SgdMomentum<train_real>& w_opt,
                        const BatchStream<train_real>& train, const BatchStream<train_real>& val,
                        const RetrainConfig& cfg, dim_t epoch);

struct SearchResult {
    Genotype genotype;
    TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full search: split 1:1, bilevel epochs, derive the genotype.
SearchResult run_search(Network<train_real>& supernet, const ImageDataset& data,
                        const SearchConfig& cfg, const EpochCallback& on_epoch = {});

// Full retrain on a discrete network: split 5:1, weight-only epochs.
TrainHistory run_retrain(Network<train_real>& net, const ImageDataset& data,
                         const RetrainConfig& cfg, const EpochCallback& on_epoch = {});

// Parameter handles by role (weights vs alphas), in registration order.
template <class T>
std::vector<Tensor<T>> role_tensors(ParamStore<T>& store, Role role) {
    std::vector<Tensor<T>> out;
    for (auto& p : store.params)
        if (p.role == role) out.push_back(p.tensor);
    return out;
}

}  // namespace spikenas
