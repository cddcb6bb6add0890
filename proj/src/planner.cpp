#include "diffplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

ConstraintSet first_state_constraint(std::span<const double> state) {
    ConstraintSet cs;
    cs.add(0, 0, std::vector<double>(state.begin(), state.end()));
    return cs;
}

Guide with_first_state(const Guide* guide, std::span<const double> state) {
    Guide merged;
    if (guide) {
        merged.gradient_fn = guide->gradient_fn;
        merged.scale = guide->scale;
        merged.constraints =
            ConstraintSet::merged(guide->constraints, first_state_constraint(state));
    } else {
        merged.constraints = first_state_constraint(state);
    }
    return merged;
}

// Advance the plan by one consumed step: drop the first row, repeat the last.
Trajectory shift_plan(const Trajectory& plan) {
    Trajectory out = plan;
    const int w = plan.width();
    for (int t = 0; t + 1 < plan.horizon; ++t)
        for (int d = 0; d < w; ++d) out.at(t, d) = plan.at(t + 1, d);
    return out;
}

}  // namespace

Trajectory plan(const DiffusionModel& model, const Guide* guide,
                std::span<const double> current_state, const PlannerConfig& config,
                Rng& rng) {
    if (static_cast<int>(current_state.size()) != model.state_dim)
        throw ShapeError("plan: current state dimension " +
                         std::to_string(current_state.size()) + " != state_dim " +
                         std::to_string(model.state_dim));
    const Guide merged = with_first_state(guide, current_state);
    return sample(model, config.horizon, rng, &merged);
}

Trajectory warm_start_plan(const DiffusionModel& model, const Guide* guide,
                           const Trajectory& previous_plan,
                           std::span<const double> current_state, int k,
                           const PlannerConfig& config, Rng& rng) {
    const int N = model.schedule.n_steps;
    if (k < 0 || k > N)
        throw ValueError("warm_start_plan: k = " + std::to_string(k) + " outside [0, " +
                         std::to_string(N) + "]");
    if (previous_plan.horizon != config.horizon ||
        previous_plan.width() != model.width())
        throw ShapeError("warm_start_plan: previous plan shape mismatch");
    if (static_cast<int>(current_state.size()) != model.state_dim)
        throw ShapeError("warm_start_plan: current state dimension mismatch");

    const Guide merged = with_first_state(guide, current_state);
    Trajectory tau = shift_plan(previous_plan);
    if (k == 0) return apply_constraints(std::move(tau), merged.constraints);

    const Trajectory eps =
        Trajectory::randn(tau.horizon, tau.state_dim, tau.action_dim, rng);
    tau = forward_noise(tau, k, eps, model.schedule);
    tau = apply_constraints(std::move(tau), merged.constraints);
    for (int i = k; i >= 1; --i) tau = guided_reverse_step(model, tau, i, &merged, rng);
    return tau;
}

EpisodeResult run_episode(const DiffusionModel& model, const Guide* guide,
                          const Environment& env, const NormStats& stats,
                          const PlannerConfig& config, uint64_t seed) {
    if (env.state_dim() != model.state_dim || env.action_dim() != model.action_dim)
        throw ShapeError("run_episode: environment dims (" +
                         std::to_string(env.state_dim()) + ", " +
                         std::to_string(env.action_dim()) +
                         ") do not match the model");
    const auto t_begin = std::chrono::steady_clock::now();
    Rng rng(seed);

    EpisodeResult result;
    result.seed = seed;

    PlanState ps;
    ps.env_state = env.sample_start(rng);
    result.states.push_back(ps.env_state);

    const auto goal = env.goal();
    const int pd = env.position_dim();
    auto goal_distance = [&](const std::vector<double>& raw_state) {
        double d2 = 0.0;
        for (int d = 0; d < pd; ++d) {
            const double a = stats.to_unit(raw_state[d], d);
            const double b = stats.to_unit((*goal)[d], d);
            d2 += (a - b) * (a - b);
        }
        return std::sqrt(d2);
    };

    auto normalized_state = [&](const std::vector<double>& raw) {
        std::vector<double> ns = raw;
        stats.apply(ns);
        return ns;
    };

    const int N = model.schedule.n_steps;
    bool have_plan = false;
    int plan_cursor = 0;  // open-loop execution index

    while (ps.step < config.max_episode_steps && result.steps < config.max_episode_steps) {
        if (!have_plan) {
            ps.plan = plan(model, guide, normalized_state(ps.env_state), config, rng);
            have_plan = true;
            plan_cursor = 0;
        } else if (!config.open_loop) {
            const int k = std::min(config.warm_start_steps, N);
            if (k <= 0) {
                ps.plan = plan(model, guide, normalized_state(ps.env_state), config, rng);
            } else {
                ps.plan = warm_start_plan(model, guide, ps.plan,
                                          normalized_state(ps.env_state), k, config, rng);
            }
            plan_cursor = 0;
        }

        const int row = config.open_loop ? plan_cursor : 0;
        if (row >= ps.plan.horizon) break;  // open-loop plan exhausted
        std::vector<double> action(ps.plan.action(row).begin(), ps.plan.action(row).end());
        stats.invert(action, model.state_dim);

        auto [next, reward] = env.transition(ps.env_state, action);
        ps.env_state = std::move(next);
        ++ps.step;
        ++plan_cursor;

        result.actions.push_back(action);
        result.states.push_back(ps.env_state);
        result.rewards.push_back(reward);
        result.episode_return += reward;
        ++result.steps;

        if (goal && goal_distance(ps.env_state) <= config.goal_tol) {
            result.success = true;
            if (config.stop_on_success) break;
        }
        if (config.open_loop && plan_cursor >= ps.plan.horizon) break;
    }

    result.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_begin)
                         .count();
    return result;
}

}  // namespace diffplan
