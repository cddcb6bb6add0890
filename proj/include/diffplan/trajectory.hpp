#pragma once

#include <span>
#include <vector>

#include "diffplan/tensor.hpp"

namespace diffplan {

// The object being diffused: one row per planning timestep, columns holding
// the state followed by the action taken at that timestep.
struct Trajectory {
    int horizon = 0;
    int state_dim = 0;
    int action_dim = 0;
    std::vector<double> values;  // row-major [horizon][state_dim + action_dim]

    int width() const { return state_dim + action_dim; }

    double& at(int t, int d) { return values[static_cast<size_t>(t) * width() + d]; }
    double at(int t, int d) const { return values[static_cast<size_t>(t) * width() + d]; }

    std::span<double> row(int t) {
        return {values.data() + static_cast<size_t>(t) * width(), static_cast<size_t>(width())};
    }
    std::span<const double> row(int t) const {
        return {values.data() + static_cast<size_t>(t) * width(), static_cast<size_t>(width())};
    }
    std::span<const double> state(int t) const {
        return {values.data() + static_cast<size_t>(t) * width(), static_cast<size_t>(state_dim)};
    }
    std::span<const double> action(int t) const {
        return {values.data() + static_cast<size_t>(t) * width() + state_dim,
                static_cast<size_t>(action_dim)};
    }

    static Trajectory zeros(int horizon, int state_dim, int action_dim);
    static Trajectory randn(int horizon, int state_dim, int action_dim, Rng& rng);

    bool same_shape(const Trajectory& other) const {
        return horizon == other.horizon && state_dim == other.state_dim &&
               action_dim == other.action_dim;
    }
};

// Stacks trajectories into the network layout [batch, width, horizon].
Tensor to_net_batch(std::span<const Trajectory> batch, bool requires_grad = false);
Tensor to_net_batch(const Trajectory& single, bool requires_grad = false);

// Extracts one batch row back into trajectory layout.
Trajectory from_net_batch(const Tensor& batch, int row, int state_dim, int action_dim);

}  // namespace diffplan
