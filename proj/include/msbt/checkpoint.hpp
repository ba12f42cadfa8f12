#pragma once

#include <cstdint>
#include <string>

#include "msbt/model.hpp"

namespace msbt {

struct LoadedCheckpoint {
    Model model;
    size_t epoch = 0;
    uint64_t seed = 0;
};

// Binary checkpoint: magic "MSBC", u32 version, u64 seed, u32 epoch, the
// model config as length-prefixed key=value text, then length-prefixed
// parameter records (key string, rank, dims, little-endian float64 data).
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Model& model, size_t epoch,
                     uint64_t seed);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace msbt
