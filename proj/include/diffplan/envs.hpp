#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffplan/rng.hpp"

namespace diffplan {

struct WallBox {
    double xlo, xhi, ylo, yhi;
};

// Deterministic toy environment. Transitions are pure functions of
// (state, action); all stochasticity lives in the start distribution.
class Environment {
public:
    virtual ~Environment() = default;

    virtual const std::string& name() const = 0;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    // Leading state dimensions that are spatial positions.
    virtual int position_dim() const = 0;

    virtual std::pair<std::vector<double>, double> transition(
        std::span<const double> state, std::span<const double> action) const = 0;

    virtual std::vector<double> sample_start(Rng& rng) const = 0;
    // A reachable position target for the scripted controllers.
    virtual std::vector<double> sample_waypoint(Rng& rng) const = 0;

    virtual std::optional<std::vector<double>> goal() const { return std::nullopt; }
    // True when the reward is a sparse goal bonus (episodes may stop early
    // once the goal is reached).
    virtual bool sparse_reward() const { return false; }

    virtual std::vector<WallBox> walls() const { return {}; }
    // Per position dimension.
    virtual std::pair<std::vector<double>, std::vector<double>> position_bounds() const = 0;
    virtual double action_limit() const = 0;
    virtual int default_episode_length() const = 0;
};

// Known names: pointmass-umaze, pointmass-open, integrator-1d.
std::unique_ptr<Environment> make_env(const std::string& name);

// Scripted demonstration policies.
class Controller {
public:
    virtual ~Controller() = default;
    virtual void begin_episode(std::span<const double> state, Rng& rng) = 0;
    virtual std::vector<double> act(std::span<const double> state, Rng& rng) = 0;
};

// Samples random waypoints and PD-tracks them, re-sampling on arrival or
// timeout; produces undirected coverage of the workspace.
std::unique_ptr<Controller> make_waypoint_pd_controller(const Environment& env);
std::unique_ptr<Controller> make_random_controller(const Environment& env);

std::unique_ptr<Controller> make_controller(const Environment& env,
                                            const std::string& kind);

}  // namespace diffplan
