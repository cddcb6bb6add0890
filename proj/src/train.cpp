#include "diffplan/train.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

void check_dataset(const EpisodeDataset& dataset, int horizon) {
    if (!dataset.normalized())
        throw ValueError("training requires a normalized dataset");
    bool any = false;
    for (const EpisodeLog& ep : dataset.episodes()) {
        if (ep.length >= horizon) any = true;
        for (double v : ep.states)
            if (!std::isfinite(v)) throw ValueError("dataset contains non-finite states");
        for (double v : ep.actions)
            if (!std::isfinite(v)) throw ValueError("dataset contains non-finite actions");
    }
    if (!any)
        throw ValueError("training: no episode is at least " + std::to_string(horizon) +
                         " steps long");
}

double scheduled_lr(double base_lr, const TrainOptions& options, int step) {
    if (options.lr_floor >= 1.0) return base_lr;
    const double u = static_cast<double>(step) / options.steps;
    const double w = 0.5 * (1.0 + std::cos(3.141592653589793 * u));
    return base_lr * (options.lr_floor + (1.0 - options.lr_floor) * w);
}

void log_step(const TrainOptions& options, int step, double loss) {
    if (options.on_log &&
        (step % std::max(1, options.log_every) == 0 || step == options.steps))
        options.on_log(step, loss);
    if (options.on_checkpoint && options.checkpoint_every > 0 &&
        step % options.checkpoint_every == 0 && step < options.steps)
        options.on_checkpoint(step);
}

}  // namespace

void train_denoiser(DenoiserNet& net, Adam& optimizer, const EpisodeDataset& dataset,
                    const NoiseSchedule& schedule, int horizon, const TrainOptions& options,
                    Rng& rng) {
    check_dataset(dataset, horizon);
    const double base_lr = optimizer.lr();
    DiffusionModel model{
        std::shared_ptr<Denoiser>(&net, [](Denoiser*) {}),  // non-owning
        schedule, dataset.state_dim(), dataset.action_dim()};

    const int last_step = options.until_step > 0
                              ? std::min(options.until_step, options.steps)
                              : options.steps;
    for (int step = options.start_step + 1; step <= last_step; ++step) {
        const std::vector<Trajectory> batch =
            segment_sampler(dataset, horizon, options.batch, rng);
        Tensor loss;
        if (options.endpoint_conditioning) {
            const int N = schedule.n_steps;
            const int sd = dataset.state_dim();
            std::vector<int> steps_drawn(batch.size());
            std::vector<Trajectory> noised(batch.size());
            std::vector<Trajectory> eps(batch.size());
            for (size_t b = 0; b < batch.size(); ++b) {
                steps_drawn[b] = 1 + static_cast<int>(rng.uniform_int(N));
                eps[b] = Trajectory::randn(horizon, sd, dataset.action_dim(), rng);
                noised[b] = forward_noise(batch[b], steps_drawn[b], eps[b], schedule);
                for (int d = 0; d < sd; ++d) {
                    noised[b].at(0, d) = batch[b].at(0, d);
                    noised[b].at(horizon - 1, d) = batch[b].at(horizon - 1, d);
                }
            }
            Tensor predicted = net.forward(to_net_batch(noised), steps_drawn);
            loss = mse_loss(predicted, to_net_batch(eps));
        } else {
            loss = training_loss(model, batch, rng);
        }
        const double loss_value = loss.data()[0];
        if (!std::isfinite(loss_value))
            throw ValueError("training diverged: loss is not finite at step " +
                             std::to_string(step));
        optimizer.zero_grad();
        backward(loss);
        optimizer.set_lr(scheduled_lr(base_lr, options, step));
        optimizer.step();
        log_step(options, step, loss_value);
    }
}

void train_value(ValueNet& net, Adam& optimizer, const EpisodeDataset& dataset,
                 const NoiseSchedule& schedule, int horizon, double discount,
                 const TrainOptions& options, Rng& rng) {
    check_dataset(dataset, horizon);
    if (!dataset.has_rewards())
        throw ValueError("value training requires a dataset with rewards");
    const double base_lr = optimizer.lr();

    const int B = options.batch;
    const int last_step = options.until_step > 0
                              ? std::min(options.until_step, options.steps)
                              : options.steps;
    for (int step = options.start_step + 1; step <= last_step; ++step) {
        std::vector<Trajectory> noised(B);
        std::vector<int> steps(B);
        Tensor targets = Tensor::zeros({B, 1});
        for (int b = 0; b < B; ++b) {
            const SegmentIndex idx = sample_segment(dataset, horizon, rng);
            const Trajectory tau0 = dataset.window(idx.episode, idx.start, horizon);
            targets.data()[b] =
                dataset.window_return(idx.episode, idx.start, horizon, discount);
            steps[b] = 1 + static_cast<int>(rng.uniform_int(schedule.n_steps));
            const Trajectory eps =
                Trajectory::randn(horizon, tau0.state_dim, tau0.action_dim, rng);
            noised[b] = forward_noise(tau0, steps[b], eps, schedule);
        }
        Tensor predicted = net.forward(to_net_batch(noised), steps);
        Tensor loss = mse_loss(predicted, targets);
        const double loss_value = loss.data()[0];
        if (!std::isfinite(loss_value))
            throw ValueError("value training diverged: loss is not finite at step " +
                             std::to_string(step));
        optimizer.zero_grad();
        backward(loss);
        optimizer.set_lr(scheduled_lr(base_lr, options, step));
        optimizer.step();
        log_step(options, step, loss_value);
    }
}

}  // namespace diffplan
