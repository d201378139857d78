#pragma once

#include <cstdint>
#include <string>

#include "ict/model.hpp"

namespace ict {

// Schedule state mirrored into a JSON sidecar next to the binary checkpoint.
struct CheckpointState {
    int epoch = 0;
    double lr = 0.0;
    double margin = 0.0;
    double eta = 0.0;
    std::uint64_t seed = 0;
};

// Versioned binary: magic, version, config, then every parameter tensor in
// declared order as little-endian f64. Sidecar written to <path>.json.
void save_checkpoint(const ModelParams& params, const std::string& path,
                     const CheckpointState& state = {});

// Loaded parameters default to requires_grad = false (inference).
ModelParams load_checkpoint(const std::string& path, CheckpointState* state = nullptr);

}  // namespace ict
