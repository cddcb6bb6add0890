#pragma once

#include <cstdint>
#include <span>

#include "diffplan/dataset.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/envs.hpp"
#include "diffplan/guidance.hpp"

namespace diffplan {

struct PlannerConfig {
    int horizon = 32;
    // Denoising budget when replanning from the previous plan;
    // 0 disables warm-starting (every replan runs the full N steps).
    int warm_start_steps = 0;
    bool open_loop = false;
    int max_episode_steps = 200;
    double goal_tol = 0.1;  // normalized units
    bool stop_on_success = true;
};

// Rolling state of the receding-horizon loop.
struct PlanState {
    Trajectory plan;                 // normalized
    std::vector<double> env_state;   // raw units
    int step = 0;
};

struct EpisodeResult {
    uint64_t seed = 0;
    double episode_return = 0.0;
    bool success = false;
    int steps = 0;
    double wall_ms = 0.0;
    // Raw-unit logs, replayable through Environment::transition.
    std::vector<std::vector<double>> states;  // length steps + 1
    std::vector<std::vector<double>> actions;
    std::vector<double> rewards;
};

// Samples a plan conditioned on the current (normalized) state: the first
// state of every denoising iterate is overwritten with `current_state`.
Trajectory plan(const DiffusionModel& model, const Guide* guide,
                std::span<const double> current_state, const PlannerConfig& config,
                Rng& rng);

// Re-plans from the previous plan: shift one step forward (consumed action),
// corrupt to noise level k, then k guided denoising steps with conditioning.
// k = 0 returns the shifted plan with only first-state conditioning.
Trajectory warm_start_plan(const DiffusionModel& model, const Guide* guide,
                           const Trajectory& previous_plan,
                           std::span<const double> current_state, int k,
                           const PlannerConfig& config, Rng& rng);

// One full episode against the environment. Closed-loop mode executes the
// first action and replans (warm-started when configured); open-loop mode
// executes the initial plan's actions in sequence.
EpisodeResult run_episode(const DiffusionModel& model, const Guide* guide,
                          const Environment& env, const NormStats& stats,
                          const PlannerConfig& config, uint64_t seed);

}  // namespace diffplan
