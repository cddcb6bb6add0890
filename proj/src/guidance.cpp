#include "diffplan/guidance.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "diffplan/errors.hpp"

namespace diffplan {

void ConstraintSet::add(int t, int col, std::vector<double> values) {
    if (values.empty()) throw ValueError("constraint: empty value vector");
    for (double v : values)
        if (!std::isfinite(v)) throw ValueError("constraint: non-finite value");
    if (t < 0 || col < 0) throw ValueError("constraint: negative timestep or column");
    items_.push_back({t, col, std::move(values)});
}

void ConstraintSet::validate(int horizon, int width) const {
    for (const Constraint& c : items_) {
        if (c.t < 0 || c.t >= horizon)
            throw ShapeError("constraint at timestep " + std::to_string(c.t) +
                             " outside horizon [0, " + std::to_string(horizon) + ")");
        if (c.col < 0 || c.col + static_cast<int>(c.values.size()) > width)
            throw ShapeError("constraint columns [" + std::to_string(c.col) + ", " +
                             std::to_string(c.col + c.values.size()) +
                             ") outside trajectory width " + std::to_string(width));
    }
}

ConstraintSet ConstraintSet::merged(const ConstraintSet& a, const ConstraintSet& b) {
    // Coordinate-wise union; identical pins are tolerated, conflicts are not.
    std::map<std::pair<int, int>, double> seen;
    ConstraintSet out;
    auto absorb = [&](const ConstraintSet& cs) {
        for (const Constraint& c : cs.items_) {
            for (size_t j = 0; j < c.values.size(); ++j) {
                const auto key = std::make_pair(c.t, c.col + static_cast<int>(j));
                auto [it, inserted] = seen.emplace(key, c.values[j]);
                if (!inserted && it->second != c.values[j])
                    throw ValueError("conflicting constraints at timestep " +
                                     std::to_string(c.t) + ", column " +
                                     std::to_string(key.second));
            }
            out.items_.push_back(c);
        }
    };
    absorb(a);
    absorb(b);
    return out;
}

Trajectory apply_constraints(Trajectory tau, const ConstraintSet& constraints) {
    constraints.validate(tau.horizon, tau.width());
    for (const Constraint& c : constraints.items()) {
        double* row = tau.values.data() + static_cast<size_t>(c.t) * tau.width();
        for (size_t j = 0; j < c.values.size(); ++j) row[c.col + j] = c.values[j];
    }
    return tau;
}

Guide reward_guide_from_value(std::shared_ptr<const ValueNet> value, double alpha) {
    if (!value) throw ValueError("reward_guide_from_value: null value net");
    if (alpha < 0.0) throw ValueError("guide scale must be non-negative");
    Guide g;
    g.scale = alpha;
    g.gradient_fn = [value](const Trajectory& tau, int step) {
        GradModeGuard grad_on(true);
        Tensor input = to_net_batch(tau, /*requires_grad=*/true);
        Tensor out = value->forward(input, std::span<const int>(&step, 1));
        backward(out);
        GuideEval eval;
        eval.objective = out.data()[0];
        // Input gradient is [1, C, T]; transpose back to row-major [T][C].
        const int C = tau.width(), T = tau.horizon;
        eval.gradient.resize(static_cast<size_t>(C) * T);
        const std::vector<double>& gin = input.grad();
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t)
                eval.gradient[static_cast<size_t>(t) * C + c] =
                    gin[static_cast<size_t>(c) * T + t];
        return eval;
    };
    return g;
}

Guide quadratic_guide(std::vector<double> target, int col, double alpha) {
    if (target.empty()) throw ValueError("quadratic_guide: empty target");
    if (alpha < 0.0) throw ValueError("guide scale must be non-negative");
    Guide g;
    g.scale = alpha;
    g.gradient_fn = [target = std::move(target), col](const Trajectory& tau, int) {
        const int w = static_cast<int>(target.size());
        if (col < 0 || col + w > tau.width())
            throw ShapeError("quadratic_guide: target columns outside trajectory width");
        GuideEval eval;
        eval.gradient.assign(tau.values.size(), 0.0);
        for (int t = 0; t < tau.horizon; ++t) {
            for (int j = 0; j < w; ++j) {
                const double d = tau.at(t, col + j) - target[j];
                eval.objective -= d * d;
                eval.gradient[static_cast<size_t>(t) * tau.width() + col + j] = -2.0 * d;
            }
        }
        return eval;
    };
    return g;
}

Guide inpaint_guide(ConstraintSet constraints) {
    Guide g;
    g.constraints = std::move(constraints);
    return g;
}

Guide compose(const std::vector<Guide>& guides) {
    Guide out;
    out.scale = 1.0;
    ConstraintSet merged;
    std::vector<std::pair<Guide::GradientFn, double>> parts;
    for (const Guide& g : guides) {
        merged = ConstraintSet::merged(merged, g.constraints);
        if (g.gradient_fn) parts.emplace_back(g.gradient_fn, g.scale);
    }
    out.constraints = std::move(merged);
    if (!parts.empty()) {
        out.gradient_fn = [parts = std::move(parts)](const Trajectory& tau, int step) {
            GuideEval total;
            total.gradient.assign(tau.values.size(), 0.0);
            for (const auto& [fn, scale] : parts) {
                GuideEval one = fn(tau, step);
                if (one.gradient.size() != tau.values.size())
                    throw ShapeError("composed guide: gradient shape mismatch");
                total.objective += scale * one.objective;
                for (size_t j = 0; j < total.gradient.size(); ++j)
                    total.gradient[j] += scale * one.gradient[j];
            }
            return total;
        };
    } else {
        out.scale = 0.0;
    }
    return out;
}

Trajectory guided_reverse_step(const DiffusionModel& model, const Trajectory& tau_i,
                               int i, const Guide* guide, Rng& rng) {
    Trajectory mu = reverse_mean(model, tau_i, i);
    const double var = model.schedule.posterior_var_at(i);

    if (guide && guide->has_gradient()) {
        GuideEval eval = guide->gradient_fn(mu, i);
        if (eval.gradient.size() != mu.values.size())
            throw ShapeError("guide gradient shape mismatch");
        for (double gv : eval.gradient)
            if (!std::isfinite(gv))
                throw ValueError("guide gradient is not finite at step " + std::to_string(i));
        const double coef = guide->scale * var;
        for (size_t j = 0; j < mu.values.size(); ++j) mu.values[j] += coef * eval.gradient[j];
    }

    if (i > 1) {
        const double sigma = std::sqrt(var);
        for (double& v : mu.values) v += sigma * rng.normal();
    }
    if (guide) mu = apply_constraints(std::move(mu), guide->constraints);
    return mu;
}

}  // namespace diffplan
