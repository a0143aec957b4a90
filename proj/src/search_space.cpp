#include "spikenas/search_space.hpp"

#include "spikenas/error.hpp"

namespace spikenas {

BigUint::BigUint(std::uint64_t v) {
    limbs_ = {std::uint32_t(v & 0xFFFFFFFFu), std::uint32_t(v >> 32)};
    trim();
}

void BigUint::trim() {
    while (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
}

BigUint& BigUint::mul(std::uint64_t m) {
    const std::uint64_t lo = m & 0xFFFFFFFFu, hi = m >> 32;
    std::vector<std::uint32_t> out(limbs_.size() + 2, 0);
    auto add_at = [&](std::size_t pos, std::uint64_t v) {
        while (v != 0) {
            if (pos >= out.size()) out.push_back(0);
            const std::uint64_t s = std::uint64_t(out[pos]) + (v & 0xFFFFFFFFu);
            out[pos] = std::uint32_t(s & 0xFFFFFFFFu);
            v = (v >> 32) + (s >> 32);
            ++pos;
        }
    };
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        add_at(i, std::uint64_t(limbs_[i]) * lo);
        add_at(i + 1, std::uint64_t(limbs_[i]) * hi);
    }
    limbs_ = std::move(out);
    trim();
    return *this;
}

BigUint& BigUint::mul(const BigUint& o) {
    std::vector<std::uint32_t> out(limbs_.size() + o.limbs_.size(), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        std::uint64_t carry = 0;
        for (std::size_t j = 0; j < o.limbs_.size(); ++j) {
            const std::uint64_t s = std::uint64_t(limbs_[i]) * o.limbs_[j] + out[i + j] + carry;
            out[i + j] = std::uint32_t(s & 0xFFFFFFFFu);
            carry = s >> 32;
        }
        std::size_t pos = i + o.limbs_.size();
        while (carry != 0) {
            const std::uint64_t s = std::uint64_t(out[pos]) + carry;
            out[pos] = std::uint32_t(s & 0xFFFFFFFFu);
            carry = s >> 32;
            ++pos;
        }
    }
    limbs_ = std::move(out);
    trim();
    return *this;
}

std::string BigUint::str() const {
    // repeated division by 10^9
    std::vector<std::uint32_t> work = limbs_;
    std::string out;
    auto all_zero = [&] {
        for (auto l : work)
            if (l) return false;
        return true;
    };
    if (all_zero()) return "0";
    while (!all_zero()) {
        std::uint64_t rem = 0;
        for (std::size_t i = work.size(); i-- > 0;) {
            const std::uint64_t cur = (rem << 32) | work[i];
            work[i] = std::uint32_t(cur / 1000000000ull);
            rem = cur % 1000000000ull;
        }
        const bool more = !all_zero();
        std::string chunk = std::to_string(rem);
        if (more)
            chunk = std::string(9 - chunk.size(), '0') + chunk;
        out = chunk + out;
    }
    return out;
}

std::uint64_t BigUint::to_u64() const {
    if (limbs_.size() > 2) throw ConfigError("BigUint: value does not fit in 64 bits: " + str());
    std::uint64_t v = limbs_[0];
    if (limbs_.size() == 2) v |= std::uint64_t(limbs_[1]) << 32;
    return v;
}

BigUint search_space_cell_size(int nodes, int ops) {
    check_shape(nodes >= 1, "search_space: nodes must be >= 1");
    check_shape(ops >= 2, "search_space: need at least one non-none op");
    BigUint size(1);
    for (int i = 0; i < nodes; ++i) {
        const std::uint64_t in_edges = std::uint64_t(i) + 2;
        size.mul(in_edges * (in_edges - 1) / 2);  // C(i+2, 2)
    }
    for (int k = 0; k < 2 * nodes; ++k) size.mul(std::uint64_t(ops - 1));
    return size;
}

BigUint search_space_size(int nodes, int ops, int layers) {
    check_shape(layers >= 1, "search_space: layers must be >= 1");
    BigUint size = search_space_cell_size(nodes, ops);
    size.mul(std::uint64_t(layers));
    return size;
}

}  // namespace spikenas
