#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffplan/tensor.hpp"
#include "diffplan/unet.hpp"

namespace diffplan {

// Adam with bias correction. Moment buffers are exposed by parameter name so
// checkpoints can freeze and restore the optimizer mid-run.
class Adam {
public:
    struct Options {
        double lr = 4e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam(NamedParams params, Options options);

    void step();
    void zero_grad();
    void set_lr(double lr);
    double lr() const { return options_.lr; }

    int64_t t() const { return t_; }
    const NamedParams& params() const { return params_; }

    // Flat moment access for checkpointing (same order as params()).
    const std::vector<std::vector<double>>& m() const { return m_; }
    const std::vector<std::vector<double>>& v() const { return v_; }
    void restore(int64_t t, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

private:
    NamedParams params_;
    Options options_;
    std::vector<std::vector<double>> m_, v_;
    int64_t t_ = 0;
};

}  // namespace diffplan
