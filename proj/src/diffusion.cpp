#include "diffplan/diffusion.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "diffplan/errors.hpp"
#include "diffplan/guidance.hpp"

namespace diffplan {

Trajectory forward_noise(const Trajectory& tau0, int i, const Trajectory& eps,
                         const NoiseSchedule& schedule) {
    if (!eps.same_shape(tau0)) throw ShapeError("forward_noise: eps shape mismatch");
    if (i < 1 || i > schedule.n_steps)
        throw ValueError("forward_noise: step " + std::to_string(i) + " outside [1, " +
                         std::to_string(schedule.n_steps) + "]");
    const double abar = schedule.alpha_bar_at(i);
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    Trajectory out = tau0;
    for (size_t j = 0; j < out.values.size(); ++j)
        out.values[j] = a * tau0.values[j] + b * eps.values[j];
    return out;
}

Tensor training_loss(const DiffusionModel& model, std::span<const Trajectory> batch,
                     Rng& rng) {
    if (batch.empty()) throw ValueError("training_loss: empty batch");
    const int B = static_cast<int>(batch.size());
    const int N = model.schedule.n_steps;

    std::vector<int> steps(B);
    std::vector<Trajectory> noised(B);
    std::vector<Trajectory> eps(B);
    for (int b = 0; b < B; ++b) {
        steps[b] = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(N)));
        eps[b] = Trajectory::randn(batch[b].horizon, batch[b].state_dim, batch[b].action_dim,
                                   rng);
        noised[b] = forward_noise(batch[b], steps[b], eps[b], model.schedule);
    }
    const Tensor input = to_net_batch(noised);
    const Tensor target = to_net_batch(eps);
    Tensor predicted = model.denoiser->forward(input, steps);
    return mse_loss(predicted, target);
}

Trajectory reverse_mean(const DiffusionModel& model, const Trajectory& tau_i, int i) {
    const NoiseSchedule& s = model.schedule;
    const double beta = s.beta_at(i);  // validates i
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha_at(i));
    const double eps_coef = beta / std::sqrt(1.0 - s.alpha_bar_at(i));

    NoGradGuard no_grad;
    const Tensor input = to_net_batch(tau_i);
    const int step = i;
    const Tensor eps_pred = model.denoiser->forward(input, std::span<const int>(&step, 1));
    Trajectory eps = from_net_batch(eps_pred, 0, tau_i.state_dim, tau_i.action_dim);

    Trajectory mu = tau_i;
    for (size_t j = 0; j < mu.values.size(); ++j)
        mu.values[j] = inv_sqrt_alpha * (tau_i.values[j] - eps_coef * eps.values[j]);
    return mu;
}

Trajectory reverse_step(const DiffusionModel& model, const Trajectory& tau_i, int i,
                        Rng& rng) {
    return guided_reverse_step(model, tau_i, i, nullptr, rng);
}

Trajectory sample(const DiffusionModel& model, int horizon, Rng& rng, const Guide* guide,
                  const SampleObserver& observer) {
    const int multiple = model.denoiser->horizon_multiple();
    if (horizon <= 0 || horizon % multiple != 0)
        throw ShapeError("sample: horizon " + std::to_string(horizon) +
                         " must be a positive multiple of " + std::to_string(multiple));
    if (model.denoiser->channels() != model.width())
        throw ShapeError("sample: denoiser channels != state_dim + action_dim");
    if (guide) guide->constraints.validate(horizon, model.width());

    Trajectory tau = Trajectory::randn(horizon, model.state_dim, model.action_dim, rng);
    if (guide) tau = apply_constraints(std::move(tau), guide->constraints);
    if (observer) observer(model.schedule.n_steps, tau);

    for (int i = model.schedule.n_steps; i >= 1; --i) {
        tau = guided_reverse_step(model, tau, i, guide, rng);
        if (observer) observer(i - 1, tau);
    }
    return tau;
}

}  // namespace diffplan
