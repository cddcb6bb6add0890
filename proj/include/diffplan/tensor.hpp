#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "diffplan/rng.hpp"

namespace diffplan {

namespace detail {

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand, same length as value
    bool requires_grad = false;
    uint64_t id = 0;  // creation order, used as the tape's topological key
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;  // scatters grad into parents

    double* grad_data();
};

}  // namespace detail

// Dense row-major f64 array, optionally tracked for reverse-mode autodiff.
// Copying a Tensor copies the handle, not the storage. Once a tensor has
// been consumed by an op its values must not be mutated until backward()
// has run for every loss that depends on it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0,
                        bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int axis) const { return impl_->shape[axis]; }
    int size() const { return static_cast<int>(impl_->value.size()); }

    double* data() { return impl_->value.data(); }
    const double* data() const { return impl_->value.data(); }
    std::vector<double>& values() { return impl_->value; }
    const std::vector<double>& values() const { return impl_->value; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    // Gradient of the last backward() pass; zeros if the tensor was unused.
    const std::vector<double>& grad() const;
    void zero_grad();

    // Breaks the autodiff graph link while sharing values (used by samplers
    // that post-process network outputs outside any training step).
    Tensor detached() const;

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend Tensor make_op_result(std::vector<int> shape,
                                 std::vector<const Tensor*> inputs,
                                 std::function<void(detail::TensorImpl&)> backward_fn);
};

// RAII toggle for graph construction.
class GradModeGuard {
public:
    explicit GradModeGuard(bool enable);
    ~GradModeGuard();
    GradModeGuard(const GradModeGuard&) = delete;
    GradModeGuard& operator=(const GradModeGuard&) = delete;

private:
    bool prev_;
};

// Disables graph construction (sampling, evaluation).
struct NoGradGuard : GradModeGuard {
    NoGradGuard() : GradModeGuard(false) {}
};

bool grad_enabled();

// ---- primitive operations -------------------------------------------------

// "Same" or valid cross-correlation along the last axis.
// input [b, c_in, L], kernel [c_out, c_in, k]; output length (L + 2p - k)/stride + 1.
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);
Tensor conv1d(const Tensor& input, const Tensor& kernel, int padding);

// Per-(batch, group) normalization over (channels_in_group x length),
// population variance, then per-channel affine gain/bias.
Tensor group_norm(const Tensor& input, int groups, const Tensor& gain,
                  const Tensor& bias, double eps);

// x * tanh(softplus(x)), elementwise.
Tensor mish(const Tensor& x);

// input [b, d_in] x weight [d_out, d_in] + bias [d_out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Nearest-neighbor x2 along the last axis: [b, c, L] -> [b, c, 2L].
Tensor upsample_nearest2(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor scale(const Tensor& x, double s);
// [b, c, L] * [b, 1]: one learned scalar per batch row.
Tensor scale_rows(const Tensor& x, const Tensor& s);
// [b, c, L] + [b, c] broadcast over length (timestep-embedding injection).
Tensor add_channel_bias(const Tensor& x, const Tensor& e);
// Concatenate along axis 1: [b, c1, L] ++ [b, c2, L] -> [b, c1+c2, L].
Tensor concat_channels(const Tensor& a, const Tensor& b);
// [b, c, L] -> [b, c], mean over the temporal axis.
Tensor mean_over_length(const Tensor& x);

Tensor sum(const Tensor& x);  // -> scalar, shape {1}
// Mean over the batch axis of the per-sample summed squared error.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Reverse pass from a scalar loss. Gradients accumulate into every
// requires_grad tensor reachable from the loss; deterministic and
// bit-identical across runs for identical inputs.
void backward(const Tensor& loss);

}  // namespace diffplan
