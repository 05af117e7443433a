#pragma once

#include "fire/layers.hpp"

#include <cstdint>
#include <string>

namespace fire {

struct Checkpoint {
    NetworkParams params;
    uint64_t seed = 0;
    uint64_t step = 0;
    int chunk = 0;
};

// A checkpoint is a directory: manifest.txt (text key-value, one entry per
// line) plus one raw blob per tensor, little-endian 64-bit reals in row-major
// order, byte lengths declared in the manifest. Round trips are bit-exact.
void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace fire
