#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffplan/dataset.hpp"
#include "diffplan/optim.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/unet.hpp"

namespace diffplan {

enum class CheckpointKind : uint8_t { Denoiser = 0, Value = 1 };

// Versioned binary container (magic "TPCK"): network hyperparameters,
// parameter blobs behind a name index, the noise schedule, normalization
// stats, and optional optimizer/rng state for exact training resumption.
struct Checkpoint {
    CheckpointKind kind = CheckpointKind::Denoiser;
    std::string env_name;
    int state_dim = 0;
    int action_dim = 0;
    int horizon = 0;  // training horizon
    UNetConfig net;
    NoiseSchedule schedule;
    NormStats stats;
    double discount = 0.0;  // value checkpoints only
    uint64_t config_hash = 0;
    uint64_t train_step = 0;

    NamedParams params;

    // Optimizer state, present when saved mid-training.
    struct OptState {
        int64_t t = 0;
        std::vector<std::vector<double>> m, v;
    };
    std::optional<OptState> opt;
    std::string rng_state;  // training stream, serialized

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // Rebuilds the network and copies parameters in by name.
    std::shared_ptr<DenoiserNet> build_denoiser() const;
    std::shared_ptr<ValueNet> build_value() const;
};

// Copies checkpoint parameter values into a freshly constructed network's
// tensors (matched by name; throws IoError on mismatch).
void load_params_into(const NamedParams& dst, const NamedParams& src);

}  // namespace diffplan
