#include "diffplan/schedule.hpp"

#include <cmath>
#include <string>

#include "diffplan/errors.hpp"

namespace diffplan {

int NoiseSchedule::check(int i) const {
    if (i < 1 || i > n_steps)
        throw ValueError("diffusion step " + std::to_string(i) + " outside [1, " +
                         std::to_string(n_steps) + "]");
    return i - 1;
}

double NoiseSchedule::alpha_bar_at(int i) const {
    if (i == 0) return 1.0;
    return alpha_bar[check(i)];
}

NoiseSchedule schedule_from_betas(int n_steps, double offset, std::vector<double> betas) {
    if (n_steps < 2) throw ValueError("noise schedule: need at least 2 diffusion steps");
    if (static_cast<int>(betas.size()) != n_steps)
        throw ValueError("noise schedule: expected " + std::to_string(n_steps) + " betas");
    NoiseSchedule s;
    s.n_steps = n_steps;
    s.offset = offset;
    s.beta = std::move(betas);
    s.alpha.resize(n_steps);
    s.alpha_bar.resize(n_steps);
    s.posterior_var.resize(n_steps);
    double abar = 1.0;
    for (int i = 1; i <= n_steps; ++i) {
        const double beta = s.beta[i - 1];
        if (beta <= 0.0 || beta > 0.999)
            throw ValueError("noise schedule: beta outside (0, 0.999] at step " +
                             std::to_string(i));
        const double prev_abar = abar;
        abar *= 1.0 - beta;
        s.alpha[i - 1] = 1.0 - beta;
        s.alpha_bar[i - 1] = abar;
        s.posterior_var[i - 1] = (1.0 - prev_abar) / (1.0 - abar) * beta;
    }
    return s;
}

NoiseSchedule cosine_schedule(int n_steps, double offset) {
    if (n_steps < 2) throw ValueError("cosine_schedule: need at least 2 diffusion steps");
    if (offset <= 0.0) throw ValueError("cosine_schedule: offset must be positive");

    const double half_pi = 1.5707963267948966;
    auto f = [&](int i) {
        const double u = (static_cast<double>(i) / n_steps + offset) / (1.0 + offset);
        const double c = std::cos(u * half_pi);
        return c * c;
    };

    std::vector<double> betas(n_steps);
    const double f0 = f(0);
    double prev_abar_target = 1.0;
    for (int i = 1; i <= n_steps; ++i) {
        const double abar_target = f(i) / f0;
        double beta = 1.0 - abar_target / prev_abar_target;
        if (beta > 0.999) beta = 0.999;
        prev_abar_target = abar_target;
        betas[i - 1] = beta;
    }
    return schedule_from_betas(n_steps, offset, std::move(betas));
}

}  // namespace diffplan
