#pragma once

#include <vector>

namespace diffplan {

// Per-step coefficients of the forward corruption process and the fixed
// reverse-process variances. Diffusion steps are 1-based: i in [1, N].
struct NoiseSchedule {
    int n_steps = 0;   // N
    double offset = 0.008;  // s
    std::vector<double> beta;           // beta[i-1] holds beta_i
    std::vector<double> alpha;          // 1 - beta_i
    std::vector<double> alpha_bar;      // prod_{j<=i} alpha_j
    std::vector<double> posterior_var;  // (1 - abar_{i-1}) / (1 - abar_i) * beta_i

    double beta_at(int i) const { return beta[check(i)]; }
    double alpha_at(int i) const { return alpha[check(i)]; }
    double posterior_var_at(int i) const { return posterior_var[check(i)]; }
    // alpha_bar_at(0) == 1 by convention.
    double alpha_bar_at(int i) const;

private:
    int check(int i) const;  // throws ValueError when i is outside [1, N]
};

// Cosine signal-retention curve: abar_i tracks f(i)/f(0) with
// f(i) = cos^2(((i/N + s)/(1 + s)) * pi/2), and beta_i clipped at 0.999.
NoiseSchedule cosine_schedule(int n_steps, double offset = 0.008);

// Rebuilds the derived arrays from betas exactly as cosine_schedule does
// (checkpoints store betas only).
NoiseSchedule schedule_from_betas(int n_steps, double offset, std::vector<double> betas);

}  // namespace diffplan
