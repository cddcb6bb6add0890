#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "diffplan/diffusion.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan {

// Fixed values for a coordinate range of one trajectory row; the sampler
// overwrites these exactly after every denoising step.
struct Constraint {
    int t = 0;    // planning timestep
    int col = 0;  // first column within the (state, action) row
    std::vector<double> values;
};

class ConstraintSet {
public:
    ConstraintSet() = default;

    void add(int t, int col, std::vector<double> values);
    bool empty() const { return items_.empty(); }
    const std::vector<Constraint>& items() const { return items_; }

    // Throws ShapeError if any constraint falls outside the trajectory.
    void validate(int horizon, int width) const;

    // Union; throws ValueError when the same coordinate is pinned to two
    // different values.
    static ConstraintSet merged(const ConstraintSet& a, const ConstraintSet& b);

private:
    std::vector<Constraint> items_;
};

struct GuideEval {
    double objective = 0.0;
    std::vector<double> gradient;  // same length as the trajectory's values
};

// A perturbation of the sampling process: a differentiable objective whose
// gradient nudges each reverse-step mean, plus hard constraints.
class Guide {
public:
    using GradientFn = std::function<GuideEval(const Trajectory&, int step)>;

    Guide() = default;
    Guide(GradientFn fn, double scale, ConstraintSet constraints)
        : gradient_fn(std::move(fn)), scale(scale), constraints(std::move(constraints)) {}

    GradientFn gradient_fn;  // may be empty (constraint-only guide)
    double scale = 0.0;      // alpha; 0 reduces to unconditional sampling
    ConstraintSet constraints;

    bool has_gradient() const { return static_cast<bool>(gradient_fn) && scale != 0.0; }
};

// Steers sampling along the gradients of a trained return predictor.
Guide reward_guide_from_value(std::shared_ptr<const ValueNet> value, double alpha);

// Analytic objective J(tau) = -sum_t ||tau[t, col:col+target.size()] - target||^2.
Guide quadratic_guide(std::vector<double> target, int col, double alpha);

// Constraint-only guide (goal inpainting).
Guide inpaint_guide(ConstraintSet constraints);

// Additive composition: gradients are summed with each component's scale
// baked in; constraint sets are unioned.
Guide compose(const std::vector<Guide>& guides);

// Exact overwrite of constrained coordinates; everything else untouched.
Trajectory apply_constraints(Trajectory tau, const ConstraintSet& constraints);

// One reverse transition sampled from N(mu + scale * Sigma_i * g, Sigma_i)
// with g evaluated at mu, followed by constraint overwrites. Bit-identical
// to reverse_step when the guide is null / scale 0 / constraint-free.
Trajectory guided_reverse_step(const DiffusionModel& model, const Trajectory& tau_i,
                               int i, const Guide* guide, Rng& rng);

}  // namespace diffplan
