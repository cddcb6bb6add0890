#include "diffplan/optim.hpp"

#include <cmath>

#include "diffplan/errors.hpp"

namespace diffplan {

Adam::Adam(NamedParams params, Options options)
    : params_(std::move(params)), options_(options) {
    if (options_.lr <= 0.0) throw ValueError("Adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, t] : params_) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        Tensor& theta = params_[p].second;
        const std::vector<double>& g = theta.grad();
        double* x = theta.data();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        for (size_t j = 0; j < m.size(); ++j) {
            m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
            v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            x[j] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

void Adam::set_lr(double lr) {
    if (lr <= 0.0) throw ValueError("Adam: learning rate must be positive");
    options_.lr = lr;
}

void Adam::restore(int64_t t, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw ValueError("Adam::restore: moment count mismatch");
    for (size_t p = 0; p < params_.size(); ++p)
        if (m[p].size() != m_[p].size() || v[p].size() != v_[p].size())
            throw ValueError("Adam::restore: moment size mismatch for " + params_[p].first);
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace diffplan
