#pragma once

// Versioned binary checkpoints. Layout (little-endian):
//   magic "SNCK" | version u16 | scalar width u8 (4 or 8) |
//   config echo (u32 length + bytes) | genotype text (u32 length + bytes,
//   empty for supernets) | blob count u32 | blobs
// Each blob: name (u32 length + bytes) | role u8 (0 weight, 1 alpha,
// 2 buffer) | shape 5 x u64 | raw scalar data.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spikenas/candidates.hpp"
#include "spikenas/tensor.hpp"

namespace spikenas {

struct CheckpointBlob {
    std::uint8_t role = 0;
    Shape5 shape;
    std::vector<double> data;  // widened on load; written at native width
};

struct Checkpoint {
    std::string config_echo;
    std::string genotype_text;  // empty for supernets
    std::map<std::string, CheckpointBlob> blobs;
};

template <class T>
Checkpoint make_checkpoint(const ParamStore<T>& store, const std::string& config_echo,
                           const std::string& genotype_text);

void save_checkpoint(const Checkpoint& ck, const std::string& path, int scalar_width);
Checkpoint load_checkpoint(const std::string& path);

// Copies blob values into the store by name; throws when a store tensor
// has no blob or shapes disagree.
template <class T>
void restore_params(ParamStore<T>& store, const Checkpoint& ck);

}  // namespace spikenas
