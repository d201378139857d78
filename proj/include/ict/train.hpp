#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ict/losses.hpp"
#include "ict/model.hpp"

namespace ict {

struct TrainSchedule {
    int epochs = 20;
    int batch_size = 64;  // images; always an even number of mirrored pairs
    double lr0 = 0.0005;
    std::vector<int> lr_milestones{8, 10, 12};  // lr /= 10 after each
    double s = 64.0;
    double m_max = 0.3;
    int m_ramp_end_epoch = 10;  // m: 0 at epoch 1, linear ramp, m_max from here on
    double eta0 = 4.0;
    double eta_step = 0.5;  // +0.5 per epoch
    double momentum = 0.9;

    double lr_at(int epoch) const;      // epochs are 1-based
    double margin_at(int epoch) const;
    double eta_at(int epoch) const;

    static TrainSchedule desk();
    static TrainSchedule paper();
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double margin = 0.0;
    double eta = 0.0;
    double l_ident = 0.0;
    double l_consist = 0.0;
    double gate_open_fraction = 0.0;
};

struct TrainOptions {
    bool use_consistency = true;  // false forces eta = 0 (ablation)
    int n_threads = 0;            // 0 = hardware concurrency
    std::string checkpoint_dir;   // per-epoch checkpoints when non-empty
    std::string metrics_path;     // per-epoch JSONL log when non-empty
    bool verbose = false;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> log;
    std::vector<int> label_map;  // head index -> raw identity label
};

// Mirrored fake pairs with labels remapped to contiguous head indices.
struct LoadedPairs {
    std::vector<PairImages> pairs;
    std::vector<int> label_map;
};
LoadedPairs load_training_pairs(const std::string& fake_root,
                                const std::string& fake_meta_path);

// SGD with momentum over the composite loss under the given schedule; batches
// always hold both members of each sampled pair. Deterministic per seed.
TrainResult train(ICTConfig config, const TrainSchedule& schedule,
                  const std::string& fake_root, const std::string& fake_meta_path,
                  std::uint64_t seed, const TrainOptions& options = {});

}  // namespace ict
