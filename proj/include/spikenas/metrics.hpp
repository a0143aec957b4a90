#pragma once

// Spike accounting, parameter counting, and classification accuracy.
// Spikes are counted at LIF outputs only; pooled or normalized real-valued
// maps never contribute.

#include <cstdint>
#include <string>
#include <vector>

#include "spikenas/tensor.hpp"

namespace spikenas {

struct SpikeLedger {
    enum class Scope { train, validation, eval };

    Scope scope = Scope::train;
    std::vector<std::uint64_t> per_cell;
    // maximum possible spikes per slot (sum of LIF element counts seen),
    // i.e. neurons * T * batch for the forward passes recorded
    std::vector<std::uint64_t> capacity;
    std::uint64_t total = 0;

    explicit SpikeLedger(std::size_t slots = 0, Scope sc = Scope::train)
        : scope(sc), per_cell(slots, 0), capacity(slots, 0) {}

    void reset() {
        for (auto& c : per_cell) c = 0;
        for (auto& c : capacity) c = 0;
        total = 0;
    }

    void record(dim_t cell_index, std::uint64_t count, std::uint64_t sites = 0) {
        if (cell_index < 0 || std::size_t(cell_index) >= per_cell.size())
            throw ShapeError("spike ledger: cell index " + std::to_string(cell_index) +
                             " out of range (slots=" + std::to_string(per_cell.size()) + ")");
        per_cell[std::size_t(cell_index)] += count;
        capacity[std::size_t(cell_index)] += sites;
        total += count;
    }

    void merge(const SpikeLedger& other) {
        if (per_cell.size() < other.per_cell.size()) {
            per_cell.resize(other.per_cell.size(), 0);
            capacity.resize(other.per_cell.size(), 0);
        }
        for (std::size_t i = 0; i < other.per_cell.size(); ++i) {
            per_cell[i] += other.per_cell[i];
            capacity[i] += other.capacity[i];
        }
        total += other.total;
    }
};

template <class T>
inline void record_spikes(SpikeLedger& ledger, dim_t cell_index, const Tensor<T>& o) {
    ledger.record(cell_index, kern::count_ones(o.size(), o.data()),
                  std::uint64_t(o.numel()));
}

// Exact number of learnable scalars, optionally filtered by role and/or
// subsystem.
template <class T>
dim_t count_params(const std::vector<Parameter<T>>& params) {
    dim_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

template <class T>
dim_t count_params(const std::vector<Parameter<T>>& params, Role role) {
    dim_t n = 0;
    for (const auto& p : params)
        if (p.role == role) n += p.tensor.numel();
    return n;
}

template <class T>
dim_t count_params(const std::vector<Parameter<T>>& params, Role role, Subsystem sub) {
    dim_t n = 0;
    for (const auto& p : params)
        if (p.role == role && p.subsystem == sub) n += p.tensor.numel();
    return n;
}

// argmax over the class axis of (N,classes,1,1,1) logits; ties go to the
// lowest class index.
template <class T>
std::vector<int> predict(const Tensor<T>& logits) {
    const dim_t n = logits.shape().n, k = logits.shape().c;
    std::vector<int> out(static_cast<std::size_t>(n));
    for (dim_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        int best = 0;
        for (dim_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = int(j);
        out[std::size_t(i)] = best;
    }
    return out;
}

template <class T>
double accuracy(const Tensor<T>& logits, const std::vector<int>& labels) {
    check_shape(std::size_t(logits.shape().n) == labels.size(),
                "accuracy: logits batch " + std::to_string(logits.shape().n) + " vs " +
                    std::to_string(labels.size()) + " labels");
    std::vector<int> pred = predict(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += (pred[i] == labels[i]);
    return labels.empty() ? 0.0 : double(correct) / double(labels.size());
}

}  // namespace spikenas
