#pragma once

// Exact combinatorial size of the cell search space. Counts can exceed
// 64 bits for larger node/op settings, so arithmetic runs on a small
// big-unsigned type.

#include <cstdint>
#include <string>
#include <vector>

namespace spikenas {

class BigUint {
public:
    BigUint() : limbs_{0} {}
    explicit BigUint(std::uint64_t v);

    BigUint& mul(std::uint64_t m);
    BigUint& mul(const BigUint& o);

    bool operator==(const BigUint& o) const { return limbs_ == o.limbs_; }
    bool operator==(std::uint64_t v) const { return *this == BigUint(v); }

    std::string str() const;

    // Throws if the value does not fit.
    std::uint64_t to_u64() const;

private:
    std::vector<std::uint32_t> limbs_;  // base 2^32, little-endian, no leading zeros
    void trim();
};

// Per cell kind: prod_{i=0..nodes-1} C(i+2,2) * (ops-1)^(2*nodes).
// Each node keeps 2 of its i+2 incoming edges and each kept edge picks one
// of the ops-1 non-none operations.
BigUint search_space_cell_size(int nodes, int ops);

// Whole-network convention: layers * per-kind size.
BigUint search_space_size(int nodes, int ops, int layers);

}  // namespace spikenas
