#include "spikenas/train.hpp"

#include <cstdio>

#include "spikenas/loss.hpp"

namespace spikenas {

namespace {

using T = train_real;

void zero_all(ParamStore<T>& store) {
    for (auto& p : store.params) p.tensor.zero_grad();
}

double tensor_scalar(const Tensor<T>& t) { return double(t.data()[0]); }

struct BatchOutcome {
    double loss = 0;
    double acc = 0;
};

// Forward + backward on one batch with the other parameter group frozen,
// so only the trained group accumulates gradients.
BatchOutcome grad_pass(Network<T>& net, const typename BatchStream<T>::Batch& batch,
                       SpikeLedger* ledger, Role trained) {
    for (auto& p : net.store().params)
        if (p.role != trained) p.tensor.freeze(true);
    Tape<T> tape;
    Tensor<T> loss;
    ForwardOutput<T> out;
    {
        typename Tape<T>::Scope scope(tape);
        out = net.forward(batch.images, true, true, ledger);
        loss = cross_entropy_with_aux(out.logits, out.aux_logits, batch.labels,
                                      T(net.macro().aux_weight));
        tape.backward(loss);
    }
    for (auto& p : net.store().params)
        if (p.role != trained) p.tensor.freeze(false);
    return {tensor_scalar(loss), accuracy(out.logits, batch.labels)};
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

EvalResult evaluate(Network<train_real>& net, const BatchStream<train_real>& stream) {
    EvalResult r;
    r.ledger = SpikeLedger(std::size_t(net.ledger_slots()), SpikeLedger::Scope::validation);
    double weighted_loss = 0;
    double correct = 0;
    dim_t images = 0;
    for (dim_t b = 0; b < stream.batches_per_epoch(); ++b) {
        auto batch = stream.get(0, b);
        auto out = net.forward(batch.images, false, false, &r.ledger);
        auto loss = cross_entropy(out.logits, batch.labels);
        const dim_t n = batch.images.shape().n;
        weighted_loss += tensor_scalar(loss) * double(n);
        correct += accuracy(out.logits, batch.labels) * double(n);
        images += n;
    }
    r.loss = weighted_loss / double(images);
    r.acc = correct / double(images);
    return r;
}

EpochRecord bilevel_epoch(Network<train_real>& net, Adam<train_real>& alpha_opt,
                          SgdMomentum<train_real>& w_opt, const BatchStream<train_real>& train,
                          const BatchStream<train_real>& val, const SearchConfig& cfg,
                          dim_t epoch) {
    check_shape(net.is_supernet(), "bilevel_epoch: needs a supernet");
    check_shape(train.batches_per_epoch() >= 1 && val.batches_per_epoch() >= 1,
                "bilevel_epoch: empty stream");
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr<double>(epoch, cfg.epochs, cfg.w_lr);

    auto w_params = role_tensors(net.store(), Role::weight);
    SpikeLedger train_ledger(std::size_t(net.ledger_slots()), SpikeLedger::Scope::train);

    double loss_sum = 0, acc_sum = 0;
    dim_t images = 0;
    const dim_t vb = val.batches_per_epoch();
    for (dim_t i = 0; i < train.batches_per_epoch(); ++i) {
        // architecture step on a validation batch
        zero_all(net.store());
        grad_pass(net, val.get(epoch, i % vb), nullptr, Role::alpha);
        alpha_opt.step();

        // weight step on a training batch
        zero_all(net.store());
        auto batch = train.get(epoch, i);
        auto outcome = grad_pass(net, batch, &train_ledger, Role::weight);
        if (cfg.grad_clip > 0) clip_grad_global_norm(w_params, T(cfg.grad_clip));
        w_opt.step(T(rec.lr));

        const dim_t n = batch.images.shape().n;
        loss_sum += outcome.loss * double(n);
        acc_sum += outcome.acc * double(n);
        images += n;
    }
    rec.train_loss = loss_sum / double(images);
    rec.train_acc = acc_sum / double(images);
    rec.images_train = images;
    rec.nos_train = train_ledger.per_cell;
    rec.nos_train_total = train_ledger.total;

    EvalResult ev = evaluate(net, val);
    rec.val_loss = ev.loss;
    rec.val_acc = ev.acc;
    rec.images_val = val.images_per_epoch();
    rec.nos_val = ev.ledger.per_cell;
    rec.nos_val_total = ev.ledger.total;
    return rec;
}

EpochRecord train_epoch(Network<train_real>& net, SgdMomentum<train_real>& w_opt,
                        const BatchStream<train_real>& train, const BatchStream<train_real>& val,
                        const RetrainConfig& cfg, dim_t epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr<double>(epoch, cfg.epochs, cfg.w_lr);
    auto w_params = role_tensors(net.store(), Role::weight);
    SpikeLedger train_ledger(std::size_t(net.ledger_slots()), SpikeLedger::Scope::train);

    double loss_sum = 0, acc_sum = 0;
    dim_t images = 0;
    for (dim_t i = 0; i < train.batches_per_epoch(); ++i) {
        zero_all(net.store());
        auto batch = train.get(epoch, i);
        auto outcome = grad_pass(net, batch, &train_ledger, Role::weight);
        if (cfg.grad_clip > 0) clip_grad_global_norm(w_params, T(cfg.grad_clip));
        w_opt.step(T(rec.lr));
        const dim_t n = batch.images.shape().n;
        loss_sum += outcome.loss * double(n);
        acc_sum += outcome.acc * double(n);
        images += n;
    }
    rec.train_loss = loss_sum / double(images);
    rec.train_acc = acc_sum / double(images);
    rec.images_train = images;
    rec.nos_train = train_ledger.per_cell;
    rec.nos_train_total = train_ledger.total;

    EvalResult ev = evaluate(net, val);
    rec.val_loss = ev.loss;
    rec.val_acc = ev.acc;
    rec.images_val = val.images_per_epoch();
    rec.nos_val = ev.ledger.per_cell;
    rec.nos_val_total = ev.ledger.total;
    return rec;
}

SearchResult run_search(Network<train_real>& supernet, const ImageDataset& data,
                        const SearchConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    SplitPlan plan;
    plan.stage = SplitPlan::Stage::search;
    plan.seed = cfg.seed;
    auto [train_ds, val_ds] = split(data, plan);
    const ChannelStats stats = compute_channel_stats(train_ds);
    BatchStream<T> train(std::move(train_ds), stats, cfg.batch_size, cfg.seed ^ 0x51, true);
    BatchStream<T> val(std::move(val_ds), stats, cfg.batch_size, cfg.seed ^ 0x52, true);

    Adam<T> alpha_opt(role_tensors(supernet.store(), Role::alpha), T(cfg.alpha_lr),
                      T(cfg.alpha_beta1), T(cfg.alpha_beta2), T(cfg.alpha_eps),
                      T(cfg.alpha_decay));
    SgdMomentum<T> w_opt(role_tensors(supernet.store(), Role::weight), T(cfg.w_momentum),
                         T(cfg.w_decay));

    SearchResult result;
    result.history.ledger_slots = supernet.ledger_slots();
    for (dim_t e = 0; e < cfg.epochs; ++e) {
        EpochRecord rec = bilevel_epoch(supernet, alpha_opt, w_opt, train, val, cfg, e);
        result.history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    result.genotype = derive_genotype(supernet.alpha_matrix(false), supernet.alpha_matrix(true),
                                      int(supernet.macro().nodes));
    result.genotype.channels = supernet.macro().init_channels;
    result.genotype.layers = supernet.macro().layers;
    result.genotype.attention = attention_name(supernet.macro().attention);
    return result;
}

TrainHistory run_retrain(Network<train_real>& net, const ImageDataset& data,
                         const RetrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    SplitPlan plan;
    plan.stage = SplitPlan::Stage::retrain;
    plan.seed = cfg.seed;
    auto [train_ds, val_ds] = split(data, plan);
    const ChannelStats stats = compute_channel_stats(train_ds);
    BatchStream<T> train(std::move(train_ds), stats, cfg.batch_size, cfg.seed ^ 0x61, true);
    BatchStream<T> val(std::move(val_ds), stats, cfg.batch_size, cfg.seed ^ 0x62, true);

    SgdMomentum<T> w_opt(role_tensors(net.store(), Role::weight), T(cfg.w_momentum),
                         T(cfg.w_decay));
    TrainHistory history;
    history.ledger_slots = net.ledger_slots();
    for (dim_t e = 0; e < cfg.epochs; ++e) {
        EpochRecord rec = train_epoch(net, w_opt, train, val, cfg, e);
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return history;
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,lr,train_loss,train_acc,val_loss,val_acc,images_train,images_val";
    const dim_t cells = ledger_slots - 1;
    for (dim_t i = 0; i < cells; ++i) out += ",nos_train_cell_" + std::to_string(i);
    out += ",nos_train_classifier,nos_train_total";
    for (dim_t i = 0; i < cells; ++i) out += ",nos_val_cell_" + std::to_string(i);
    out += ",nos_val_classifier,nos_val_total\n";
    for (const EpochRecord& r : epochs) {
        out += std::to_string(r.epoch) + "," + fmt(r.lr) + "," + fmt(r.train_loss) + "," +
               fmt(r.train_acc) + "," + fmt(r.val_loss) + "," + fmt(r.val_acc) + "," +
               std::to_string(r.images_train) + "," + std::to_string(r.images_val);
        for (auto v : r.nos_train) out += "," + std::to_string(v);
        out += "," + std::to_string(r.nos_train_total);
        for (auto v : r.nos_val) out += "," + std::to_string(v);
        out += "," + std::to_string(r.nos_val_total);
        out += "\n";
    }
    return out;
}

}  // namespace spikenas
