#include "diffplan/trajectory.hpp"

#include <string>

#include "diffplan/errors.hpp"

namespace diffplan {

Trajectory Trajectory::zeros(int horizon, int state_dim, int action_dim) {
    if (horizon <= 0 || state_dim <= 0 || action_dim < 0)
        throw ShapeError("Trajectory: dimensions must be positive");
    Trajectory t;
    t.horizon = horizon;
    t.state_dim = state_dim;
    t.action_dim = action_dim;
    t.values.assign(static_cast<size_t>(horizon) * (state_dim + action_dim), 0.0);
    return t;
}

Trajectory Trajectory::randn(int horizon, int state_dim, int action_dim, Rng& rng) {
    Trajectory t = zeros(horizon, state_dim, action_dim);
    for (double& v : t.values) v = rng.normal();
    return t;
}

Tensor to_net_batch(std::span<const Trajectory> batch, bool requires_grad) {
    if (batch.empty()) throw ShapeError("to_net_batch: empty batch");
    const int T = batch[0].horizon;
    const int C = batch[0].width();
    const int B = static_cast<int>(batch.size());
    Tensor out = Tensor::zeros({B, C, T}, requires_grad);
    double* o = out.data();
    for (int b = 0; b < B; ++b) {
        if (!batch[b].same_shape(batch[0]))
            throw ShapeError("to_net_batch: trajectory " + std::to_string(b) +
                             " has a different shape");
        // [T][C] rows -> [C][T] channels
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                o[(static_cast<size_t>(b) * C + c) * T + t] = batch[b].values[
                    static_cast<size_t>(t) * C + c];
    }
    return out;
}

Tensor to_net_batch(const Trajectory& single, bool requires_grad) {
    return to_net_batch(std::span<const Trajectory>(&single, 1), requires_grad);
}

Trajectory from_net_batch(const Tensor& batch, int row, int state_dim, int action_dim) {
    if (batch.shape().size() != 3) throw ShapeError("from_net_batch: expected [b, c, T]");
    const int B = batch.dim(0), C = batch.dim(1), T = batch.dim(2);
    if (row < 0 || row >= B) throw ShapeError("from_net_batch: row out of range");
    if (C != state_dim + action_dim)
        throw ShapeError("from_net_batch: channel count " + std::to_string(C) +
                         " != state_dim + action_dim");
    Trajectory t = Trajectory::zeros(T, state_dim, action_dim);
    const double* src = batch.data();
    for (int c = 0; c < C; ++c)
        for (int tt = 0; tt < T; ++tt)
            t.values[static_cast<size_t>(tt) * C + c] =
                src[(static_cast<size_t>(row) * C + c) * T + tt];
    return t;
}

}  // namespace diffplan
