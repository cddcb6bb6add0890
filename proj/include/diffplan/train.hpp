#pragma once

#include <functional>
#include <vector>

#include "diffplan/dataset.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/optim.hpp"
#include "diffplan/unet.hpp"

namespace diffplan {

struct TrainOptions {
    // Cosine decay from the optimizer's configured rate down to that rate
    // times lr_floor across the run; 1.0 = constant.
    double lr_floor = 0.05;
    int batch = 32;
    int steps = 5000;     // total steps; also the decay-schedule horizon
    int until_step = 0;   // stop early at this step (0 = run to `steps`)
    int log_every = 100;
    int start_step = 0;   // > 0 when resuming
    // Overwrite the first and last state rows of each noised window with
    // their clean values before the forward pass, mirroring how the sampler
    // pins endpoints during goal-conditioned planning. The model then
    // learns to harmonize a trajectory with clean endpoint evidence.
    bool endpoint_conditioning = false;
    // Called at (log_every)-step boundaries and at the final step.
    std::function<void(int step, double loss)> on_log;
    std::function<void(int step)> on_checkpoint;
    int checkpoint_every = 0;  // 0 = never (final save is the caller's job)
};

// Minimizes the noise-prediction objective over dataset windows of length
// `horizon`. The dataset must be normalized. Throws ValueError on NaN loss.
void train_denoiser(DenoiserNet& net, Adam& optimizer, const EpisodeDataset& dataset,
                    const NoiseSchedule& schedule, int horizon, const TrainOptions& options,
                    Rng& rng);

// Regresses the discounted return of clean windows from their noised
// versions, conditioning on the noise level. Throws ValueError when the
// dataset has no rewards.
void train_value(ValueNet& net, Adam& optimizer, const EpisodeDataset& dataset,
                 const NoiseSchedule& schedule, int horizon, double discount,
                 const TrainOptions& options, Rng& rng);

}  // namespace diffplan
