#include "diffplan/envs.hpp"

#include <algorithm>
#include <cmath>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// 2-D point mass with acceleration actions, axis-aligned wall boxes, and a
// sparse goal bonus. Collisions clamp the position to the wall face and zero
// the velocity on the blocked axis.
class PointMassEnv final : public Environment {
public:
    PointMassEnv(std::string name, std::vector<WallBox> walls)
        : name_(std::move(name)), walls_(std::move(walls)) {}

    const std::string& name() const override { return name_; }
    int state_dim() const override { return 4; }   // px, py, vx, vy
    int action_dim() const override { return 2; }  // ax, ay
    int position_dim() const override { return 2; }
    bool sparse_reward() const override { return true; }
    double action_limit() const override { return kAccelLimit; }
    int default_episode_length() const override { return 200; }
    std::vector<WallBox> walls() const override { return walls_; }

    std::optional<std::vector<double>> goal() const override {
        return std::vector<double>{kGoalX, kGoalY};
    }

    std::pair<std::vector<double>, std::vector<double>> position_bounds() const override {
        return {{0.0, 0.0}, {kExtent, kExtent}};
    }

    std::pair<std::vector<double>, double> transition(
        std::span<const double> state, std::span<const double> action) const override {
        if (state.size() != 4 || action.size() != 2)
            throw ShapeError(name_ + ": expected state dim 4 and action dim 2");
        double px = state[0], py = state[1];
        double vx = state[2], vy = state[3];
        const double ax = clamp(action[0], -kAccelLimit, kAccelLimit);
        const double ay = clamp(action[1], -kAccelLimit, kAccelLimit);
        vx = clamp(vx + ax * kDt, -kVelLimit, kVelLimit);
        vy = clamp(vy + ay * kDt, -kVelLimit, kVelLimit);
        move_axis(px, vx, py, /*horizontal=*/true);
        move_axis(py, vy, px, /*horizontal=*/false);
        const double dx = px - kGoalX, dy = py - kGoalY;
        const double reward = (std::sqrt(dx * dx + dy * dy) <= kGoalRadius) ? 1.0 : 0.0;
        return {{px, py, vx, vy}, reward};
    }

    std::vector<double> sample_start(Rng& rng) const override {
        auto p = sample_free(rng);
        return {p[0], p[1], 0.0, 0.0};
    }

    std::vector<double> sample_waypoint(Rng& rng) const override { return sample_free(rng); }

private:
    static constexpr double kDt = 0.1;
    static constexpr double kAccelLimit = 2.0;
    static constexpr double kVelLimit = 2.0;
    static constexpr double kExtent = 2.0;
    static constexpr double kGoalX = 1.6;
    static constexpr double kGoalY = 1.6;
    static constexpr double kGoalRadius = 0.1;
    static constexpr double kMargin = 0.15;

    void move_axis(double& pos, double& vel, double other, bool horizontal) const {
        double next = pos + vel * kDt;
        if (next < 0.0) {
            next = 0.0;
            vel = 0.0;
        } else if (next > kExtent) {
            next = kExtent;
            vel = 0.0;
        }
        for (const WallBox& w : walls_) {
            const double lo = horizontal ? w.xlo : w.ylo;
            const double hi = horizontal ? w.xhi : w.yhi;
            const double olo = horizontal ? w.ylo : w.xlo;
            const double ohi = horizontal ? w.yhi : w.xhi;
            if (other <= olo || other >= ohi) continue;
            if (pos <= lo && next > lo) {
                next = lo;
                vel = 0.0;
            } else if (pos >= hi && next < hi) {
                next = hi;
                vel = 0.0;
            }
        }
        pos = next;
    }

    bool in_free_space(double x, double y) const {
        if (x < kMargin || x > kExtent - kMargin || y < kMargin || y > kExtent - kMargin)
            return false;
        for (const WallBox& w : walls_)
            if (x > w.xlo - kMargin && x < w.xhi + kMargin && y > w.ylo - kMargin &&
                y < w.yhi + kMargin)
                return false;
        return true;
    }

    std::vector<double> sample_free(Rng& rng) const {
        for (int tries = 0; tries < 1000; ++tries) {
            const double x = rng.uniform(0.0, kExtent);
            const double y = rng.uniform(0.0, kExtent);
            if (in_free_space(x, y)) return {x, y};
        }
        throw ValueError(name_ + ": could not sample a free position");
    }

    std::string name_;
    std::vector<WallBox> walls_;
};

// 1-D double integrator with a dense distance penalty toward a fixed target.
class Integrator1dEnv final : public Environment {
public:
    Integrator1dEnv() : name_("integrator-1d") {}

    const std::string& name() const override { return name_; }
    int state_dim() const override { return 2; }   // x, v
    int action_dim() const override { return 1; }  // a
    int position_dim() const override { return 1; }
    double action_limit() const override { return kAccelLimit; }
    int default_episode_length() const override { return 64; }

    std::optional<std::vector<double>> goal() const override {
        return std::vector<double>{kTarget};
    }

    std::pair<std::vector<double>, std::vector<double>> position_bounds() const override {
        return {{-kExtent}, {kExtent}};
    }

    std::pair<std::vector<double>, double> transition(
        std::span<const double> state, std::span<const double> action) const override {
        if (state.size() != 2 || action.size() != 1)
            throw ShapeError(name_ + ": expected state dim 2 and action dim 1");
        double x = state[0], v = state[1];
        const double a = clamp(action[0], -kAccelLimit, kAccelLimit);
        v = clamp(v + a * kDt, -kVelLimit, kVelLimit);
        x += v * kDt;
        if (x < -kExtent) {
            x = -kExtent;
            v = 0.0;
        } else if (x > kExtent) {
            x = kExtent;
            v = 0.0;
        }
        return {{x, v}, -std::abs(x - kTarget)};
    }

    std::vector<double> sample_start(Rng& rng) const override {
        return {rng.uniform(-1.5, 1.5), 0.0};
    }

    std::vector<double> sample_waypoint(Rng& rng) const override {
        return {rng.uniform(-1.5, 1.5)};
    }

private:
    static constexpr double kDt = 0.1;
    static constexpr double kAccelLimit = 1.0;
    static constexpr double kVelLimit = 2.0;
    static constexpr double kExtent = 2.0;
    static constexpr double kTarget = 0.75;

    std::string name_;
};

class WaypointPdController final : public Controller {
public:
    explicit WaypointPdController(const Environment& env) : env_(env) {}

    void begin_episode(std::span<const double>, Rng& rng) override {
        waypoint_ = env_.sample_waypoint(rng);
        steps_at_waypoint_ = 0;
    }

    std::vector<double> act(std::span<const double> state, Rng& rng) override {
        const int pd = env_.position_dim();
        double dist2 = 0.0;
        for (int d = 0; d < pd; ++d) {
            const double e = waypoint_[d] - state[d];
            dist2 += e * e;
        }
        if (std::sqrt(dist2) < kArriveTol || ++steps_at_waypoint_ > kTimeout) {
            waypoint_ = env_.sample_waypoint(rng);
            steps_at_waypoint_ = 0;
        }
        const double limit = env_.action_limit();
        std::vector<double> action(env_.action_dim(), 0.0);
        for (int d = 0; d < pd && d < env_.action_dim(); ++d) {
            const double err = waypoint_[d] - state[d];
            const double vel = state[pd + d];
            action[d] = clamp(kP * err - kD * vel, -limit, limit);
        }
        return action;
    }

private:
    static constexpr double kP = 6.0;
    static constexpr double kD = 2.0;
    static constexpr double kArriveTol = 0.25;
    static constexpr int kTimeout = 40;

    const Environment& env_;
    std::vector<double> waypoint_;
    int steps_at_waypoint_ = 0;
};

class RandomController final : public Controller {
public:
    explicit RandomController(const Environment& env) : env_(env) {}

    void begin_episode(std::span<const double>, Rng&) override {}

    std::vector<double> act(std::span<const double>, Rng& rng) override {
        std::vector<double> action(env_.action_dim());
        const double limit = env_.action_limit();
        for (double& a : action) a = rng.uniform(-limit, limit);
        return action;
    }

private:
    const Environment& env_;
};

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& name) {
    if (name == "pointmass-umaze") {
        // U-shaped free space: a slab attached to the top edge splits the
        // arena into two arms connected along the bottom.
        return std::make_unique<PointMassEnv>(name,
                                              std::vector<WallBox>{{0.8, 1.2, 0.8, 2.0}});
    }
    if (name == "pointmass-open") return std::make_unique<PointMassEnv>(name, std::vector<WallBox>{});
    if (name == "integrator-1d") return std::make_unique<Integrator1dEnv>();
    throw ValueError("unknown environment '" + name +
                     "' (known: pointmass-umaze, pointmass-open, integrator-1d)");
}

std::unique_ptr<Controller> make_waypoint_pd_controller(const Environment& env) {
    return std::make_unique<WaypointPdController>(env);
}

std::unique_ptr<Controller> make_random_controller(const Environment& env) {
    return std::make_unique<RandomController>(env);
}

std::unique_ptr<Controller> make_controller(const Environment& env, const std::string& kind) {
    if (kind == "waypoint-pd") return make_waypoint_pd_controller(env);
    if (kind == "random") return make_random_controller(env);
    throw ValueError("unknown controller '" + kind + "' (known: waypoint-pd, random)");
}

}  // namespace diffplan
