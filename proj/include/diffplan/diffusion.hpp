#pragma once

#include <functional>
#include <memory>
#include <span>

#include "diffplan/rng.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/tensor.hpp"
#include "diffplan/trajectory.hpp"
#include "diffplan/unet.hpp"

namespace diffplan {

class Guide;  // guidance.hpp

struct DiffusionModel {
    std::shared_ptr<Denoiser> denoiser;
    NoiseSchedule schedule;
    int state_dim = 0;
    int action_dim = 0;

    int width() const { return state_dim + action_dim; }
};

// Closed-form forward corruption to level i:
//   tau_i = sqrt(abar_i) * tau_0 + sqrt(1 - abar_i) * eps.
Trajectory forward_noise(const Trajectory& tau0, int i, const Trajectory& eps,
                         const NoiseSchedule& schedule);

// Simplified noise-prediction objective: per sample, a uniform step
// i ~ U{1..N} and fresh Gaussian noise; the loss is the batch mean of the
// squared error norm between injected and predicted noise. Differentiable.
Tensor training_loss(const DiffusionModel& model, std::span<const Trajectory> batch,
                     Rng& rng);

// Mean of the reverse transition:
//   mu = (tau_i - beta_i / sqrt(1 - abar_i) * eps_theta(tau_i, i)) / sqrt(alpha_i).
Trajectory reverse_mean(const DiffusionModel& model, const Trajectory& tau_i, int i);

// One reverse transition: mu + sqrt(posterior_var_i) * z. The final step
// (i = 1) adds no noise.
Trajectory reverse_step(const DiffusionModel& model, const Trajectory& tau_i, int i,
                        Rng& rng);

// Called with (i, tau_i) as sampling progresses, including the initial noise.
using SampleObserver = std::function<void(int, const Trajectory&)>;

// Full ancestral sampling from pure noise over `horizon` steps, optionally
// steered by a guide (gradient perturbation + constraint overwrites).
// horizon may differ from the training horizon but must be a multiple of
// the denoiser's resampling factor.
Trajectory sample(const DiffusionModel& model, int horizon, Rng& rng,
                  const Guide* guide = nullptr, const SampleObserver& observer = {});

}  // namespace diffplan
