#include "diffplan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

std::atomic<uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

int shape_size(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

double* ensure_grad(detail::TensorImpl& impl) {
    if (impl.grad.size() != impl.value.size()) impl.grad.assign(impl.value.size(), 0.0);
    return impl.grad.data();
}

// mish(x) = x * tanh(softplus(x)). With u = 1 + e^x:
//   tanh(ln u) = (u^2 - 1) / (u^2 + 1),  sigmoid(x) = (u - 1) / u,
// so one exponential serves both the value and the derivative.
double mish_value(double x) {
    if (x > 30.0) return x;
    const double u = 1.0 + std::exp(x);
    const double u2 = u * u;
    return x * (u2 - 1.0) / (u2 + 1.0);
}

double mish_derivative(double x) {
    if (x > 30.0) return 1.0;
    const double u = 1.0 + std::exp(x);
    const double u2 = u * u;
    const double t = (u2 - 1.0) / (u2 + 1.0);
    const double sig = (u - 1.0) / u;
    return t + x * (1.0 - t * t) * sig;
}

}  // namespace

double* detail::TensorImpl::grad_data() { return ensure_grad(*this); }

Tensor make_op_result(std::vector<int> shape, std::vector<const Tensor*> inputs,
                      std::function<void(detail::TensorImpl&)> backward_fn) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->value.resize(shape_size(impl->shape));
    impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    bool track = false;
    if (g_grad_enabled) {
        for (const Tensor* t : inputs) {
            if (t->defined() && t->requires_grad()) track = true;
        }
    }
    if (track) {
        impl->requires_grad = true;
        for (const Tensor* t : inputs) {
            if (t->defined()) impl->parents.push_back(t->impl());
        }
        impl->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->value.assign(shape_size(shape), v);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != static_cast<int>(data.size()))
        throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(data);
    impl->requires_grad = requires_grad;
    impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(impl));
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double scale, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = scale * rng.normal();
    return t;
}

const std::vector<double>& Tensor::grad() const {
    ensure_grad(*impl_);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detached() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->value = impl_->value;
    impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(impl));
}

GradModeGuard::GradModeGuard(bool enable) : prev_(g_grad_enabled) { g_grad_enabled = enable; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- conv1d ----------------------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
    if (input.shape().size() != 3 || kernel.shape().size() != 3)
        throw ShapeError("conv1d: expected input [b, c_in, L] and kernel [c_out, c_in, k]");
    const int B = input.dim(0), Cin = input.dim(1), L = input.dim(2);
    const int Cout = kernel.dim(0), K = kernel.dim(2);
    if (kernel.dim(1) != Cin)
        throw ShapeError("conv1d: kernel channels_in (" + std::to_string(kernel.dim(1)) +
                         ") != input channels (" + std::to_string(Cin) + ")");
    if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != Cout))
        throw ShapeError("conv1d: bias must have shape [c_out]");
    if (stride < 1) throw ValueError("conv1d: stride must be >= 1");
    if (padding < 0) throw ValueError("conv1d: padding must be >= 0");
    if (L + 2 * padding < K)
        throw ShapeError("conv1d: kernel size " + std::to_string(K) +
                         " exceeds padded length " + std::to_string(L + 2 * padding));
    const int Lout = (L + 2 * padding - K) / stride + 1;

    auto in_impl = input.impl();
    auto k_impl = kernel.impl();
    auto b_impl = bias.defined() ? bias.impl() : nullptr;

    Tensor out = make_op_result(
        {B, Cout, Lout}, {&input, &kernel, &bias},
        [in_impl, k_impl, b_impl, B, Cin, Cout, L, K, Lout, stride,
         padding](detail::TensorImpl& o) {
            const double* gout = o.grad.data();
            const double* in = in_impl->value.data();
            const double* kw = k_impl->value.data();
            double* gin = in_impl->requires_grad ? in_impl->grad_data() : nullptr;
            double* gk = k_impl->requires_grad ? k_impl->grad_data() : nullptr;
            double* gb = (b_impl && b_impl->requires_grad) ? b_impl->grad_data() : nullptr;
            const bool fused = (K == 3 && stride == 1 && padding == 1 && L == Lout && L >= 2);
            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Cout; ++co) {
                    const double* go = gout + (static_cast<size_t>(b) * Cout + co) * Lout;
                    if (gb) {
                        double s = 0.0;
                        for (int lo = 0; lo < Lout; ++lo) s += go[lo];
                        gb[co] += s;
                    }
                    for (int ci = 0; ci < Cin; ++ci) {
                        const double* xin = in + (static_cast<size_t>(b) * Cin + ci) * L;
                        double* gi = gin ? gin + (static_cast<size_t>(b) * Cin + ci) * L : nullptr;
                        const size_t kbase = (static_cast<size_t>(co) * Cin + ci) * K;
                        if (fused) {
                            const double w0 = kw[kbase], w1 = kw[kbase + 1], w2 = kw[kbase + 2];
                            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                            a1 += go[0] * xin[0];
                            a2 += go[0] * xin[1];
                            for (int l = 1; l < L - 1; ++l) {
                                const double g = go[l];
                                a0 += g * xin[l - 1];
                                a1 += g * xin[l];
                                a2 += g * xin[l + 1];
                            }
                            a0 += go[L - 1] * xin[L - 2];
                            a1 += go[L - 1] * xin[L - 1];
                            if (gk) {
                                gk[kbase] += a0;
                                gk[kbase + 1] += a1;
                                gk[kbase + 2] += a2;
                            }
                            if (gi) {
                                // gin[l] += w0*go[l+1] + w1*go[l] + w2*go[l-1]
                                gi[0] += w0 * go[1] + w1 * go[0];
                                for (int l = 1; l < L - 1; ++l)
                                    gi[l] += w0 * go[l + 1] + w1 * go[l] + w2 * go[l - 1];
                                gi[L - 1] += w1 * go[L - 1] + w2 * go[L - 2];
                            }
                            continue;
                        }
                        for (int j = 0; j < K; ++j) {
                            const int off = j - padding;
                            // valid lo range: 0 <= lo*stride + off < L
                            int lo_begin = 0;
                            if (off < 0) lo_begin = (-off + stride - 1) / stride;
                            int lo_end = Lout;
                            if (off < L) {
                                lo_end = std::min(Lout, (L - 1 - off) / stride + 1);
                            } else {
                                lo_end = 0;
                            }
                            const double w = kw[kbase + j];
                            double gw_acc = 0.0;
                            for (int lo = lo_begin; lo < lo_end; ++lo) {
                                const int li = lo * stride + off;
                                const double g = go[lo];
                                gw_acc += g * xin[li];
                                if (gi) gi[li] += w * g;
                            }
                            if (gk) gk[kbase + j] += gw_acc;
                        }
                    }
                }
            }
        });

    double* outp = out.data();
    const double* in = input.data();
    const double* kw = kernel.data();
    const double* bp = bias.defined() ? bias.data() : nullptr;
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            double* orow = outp + (static_cast<size_t>(b) * Cout + co) * Lout;
            const double bv = bp ? bp[co] : 0.0;
            for (int lo = 0; lo < Lout; ++lo) orow[lo] = bv;
            for (int ci = 0; ci < Cin; ++ci) {
                const double* xin = in + (static_cast<size_t>(b) * Cin + ci) * L;
                const double* krow = kw + (static_cast<size_t>(co) * Cin + ci) * K;
                if (K == 3 && stride == 1 && padding == 1 && L == Lout && L >= 2) {
                    const double w0 = krow[0], w1 = krow[1], w2 = krow[2];
                    orow[0] += w1 * xin[0] + w2 * xin[1];
                    for (int l = 1; l < L - 1; ++l)
                        orow[l] += w0 * xin[l - 1] + w1 * xin[l] + w2 * xin[l + 1];
                    orow[L - 1] += w0 * xin[L - 2] + w1 * xin[L - 1];
                } else if (stride == 1) {
                    for (int j = 0; j < K; ++j) {
                        const int off = j - padding;
                        const int lo_begin = std::max(0, -off);
                        const int lo_end = std::min(Lout, L - off);
                        const double w = krow[j];
                        for (int lo = lo_begin; lo < lo_end; ++lo) orow[lo] += w * xin[lo + off];
                    }
                } else {
                    for (int j = 0; j < K; ++j) {
                        const int off = j - padding;
                        int lo_begin = 0;
                        if (off < 0) lo_begin = (-off + stride - 1) / stride;
                        int lo_end = (off < L) ? std::min(Lout, (L - 1 - off) / stride + 1) : 0;
                        const double w = krow[j];
                        for (int lo = lo_begin; lo < lo_end; ++lo)
                            orow[lo] += w * xin[lo * stride + off];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, int padding) {
    return conv1d(input, kernel, Tensor(), 1, padding);
}

// ---- group_norm ------------------------------------------------------------

Tensor group_norm(const Tensor& input, int groups, const Tensor& gain,
                  const Tensor& bias, double eps) {
    if (input.shape().size() != 3)
        throw ShapeError("group_norm: expected input [b, c, L]");
    const int B = input.dim(0), C = input.dim(1), L = input.dim(2);
    if (groups < 1 || C % groups != 0)
        throw ShapeError("group_norm: groups (" + std::to_string(groups) +
                         ") does not divide channels (" + std::to_string(C) + ")");
    if (gain.shape().size() != 1 || gain.dim(0) != C || bias.shape().size() != 1 ||
        bias.dim(0) != C)
        throw ShapeError("group_norm: gain and bias must have shape [channels]");
    const int CG = C / groups;
    const int n = CG * L;

    // Saved statistics per (batch, group) for the backward pass.
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * groups);
    auto inv = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * groups);

    auto in_impl = input.impl();
    auto g_impl = gain.impl();
    auto b_impl = bias.impl();

    Tensor out = make_op_result(
        {B, C, L}, {&input, &gain, &bias},
        [in_impl, g_impl, b_impl, mean, inv, B, C, L, groups, CG,
         n](detail::TensorImpl& o) {
            const double* gout = o.grad.data();
            const double* in = in_impl->value.data();
            const double* gainv = g_impl->value.data();
            double* gin = in_impl->requires_grad ? in_impl->grad_data() : nullptr;
            double* ggain = g_impl->requires_grad ? g_impl->grad_data() : nullptr;
            double* gbias = b_impl->requires_grad ? b_impl->grad_data() : nullptr;
            for (int b = 0; b < B; ++b) {
                for (int g = 0; g < groups; ++g) {
                    const double m = (*mean)[static_cast<size_t>(b) * groups + g];
                    const double iv = (*inv)[static_cast<size_t>(b) * groups + g];
                    // dxhat = gout * gain; reduce sums first, then scatter.
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int cg = 0; cg < CG; ++cg) {
                        const int c = g * CG + cg;
                        const size_t base = (static_cast<size_t>(b) * C + c) * L;
                        const double gv = gainv[c];
                        for (int l = 0; l < L; ++l) {
                            const double dxh = gout[base + l] * gv;
                            const double xh = (in[base + l] - m) * iv;
                            sum_dxhat += dxh;
                            sum_dxhat_xhat += dxh * xh;
                        }
                    }
                    for (int cg = 0; cg < CG; ++cg) {
                        const int c = g * CG + cg;
                        const size_t base = (static_cast<size_t>(b) * C + c) * L;
                        const double gv = gainv[c];
                        double gg = 0.0, gbs = 0.0;
                        for (int l = 0; l < L; ++l) {
                            const double go = gout[base + l];
                            const double xh = (in[base + l] - m) * iv;
                            if (gin) {
                                const double dxh = go * gv;
                                gin[base + l] +=
                                    iv * (dxh - sum_dxhat / n - xh * sum_dxhat_xhat / n);
                            }
                            gg += go * xh;
                            gbs += go;
                        }
                        if (ggain) ggain[c] += gg;
                        if (gbias) gbias[c] += gbs;
                    }
                }
            }
        });

    double* outp = out.data();
    const double* in = input.data();
    const double* gainv = gain.data();
    const double* biasv = bias.data();
    // Group statistics are summed in value-sorted order, which makes them a
    // pure function of the value multiset. Temporal convolutions are exactly
    // shift-equivariant, so this keeps the whole network's response to a
    // shifted input bit-identical away from the boundaries; naive positional
    // sums leak position-dependent rounding dust that near-constant groups
    // then amplify by 1/sqrt(eps) per layer.
    std::vector<double> scratch(static_cast<size_t>(n));
    for (int b = 0; b < B; ++b) {
        for (int g = 0; g < groups; ++g) {
            for (int cg = 0; cg < CG; ++cg) {
                const size_t base = (static_cast<size_t>(b) * C + g * CG + cg) * L;
                std::copy_n(in + base, L, scratch.data() + static_cast<size_t>(cg) * L);
            }
            std::sort(scratch.begin(), scratch.end());
            double s = 0.0;
            for (double v : scratch) s += v;
            const double m = s / n;
            // Second moment in the same canonical order.
            double s2 = 0.0;
            for (double v : scratch) {
                const double d = v - m;
                s2 += d * d;
            }
            const double var = s2 / n;
            const double iv = 1.0 / std::sqrt(var + eps);
            (*mean)[static_cast<size_t>(b) * groups + g] = m;
            (*inv)[static_cast<size_t>(b) * groups + g] = iv;
            for (int cg = 0; cg < CG; ++cg) {
                const int c = g * CG + cg;
                const size_t base = (static_cast<size_t>(b) * C + c) * L;
                const double gv = gainv[c], bv = biasv[c];
                for (int l = 0; l < L; ++l)
                    outp[base + l] = gv * (in[base + l] - m) * iv + bv;
            }
        }
    }
    return out;
}

// ---- elementwise -----------------------------------------------------------

Tensor mish(const Tensor& x) {
    auto x_impl = x.impl();
    Tensor out = make_op_result(x.shape(), {&x}, [x_impl](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        const double* xv = x_impl->value.data();
        double* gx = x_impl->grad_data();
        const size_t n = x_impl->value.size();
        for (size_t i = 0; i < n; ++i) gx[i] += gout[i] * mish_derivative(xv[i]);
    });
    const double* xv = x.data();
    double* o = out.data();
    for (int i = 0; i < x.size(); ++i) o[i] = mish_value(xv[i]);
    return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.shape().size() != 2 || weight.shape().size() != 2)
        throw ShapeError("linear: expected input [b, d_in] and weight [d_out, d_in]");
    const int B = input.dim(0), Din = input.dim(1), Dout = weight.dim(0);
    if (weight.dim(1) != Din)
        throw ShapeError("linear: weight d_in (" + std::to_string(weight.dim(1)) +
                         ") != input d_in (" + std::to_string(Din) + ")");
    if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != Dout))
        throw ShapeError("linear: bias must have shape [d_out]");

    auto in_impl = input.impl();
    auto w_impl = weight.impl();
    auto b_impl = bias.defined() ? bias.impl() : nullptr;

    Tensor out = make_op_result(
        {B, Dout}, {&input, &weight, &bias},
        [in_impl, w_impl, b_impl, B, Din, Dout](detail::TensorImpl& o) {
            const double* gout = o.grad.data();
            const double* in = in_impl->value.data();
            const double* w = w_impl->value.data();
            double* gin = in_impl->requires_grad ? in_impl->grad_data() : nullptr;
            double* gw = w_impl->requires_grad ? w_impl->grad_data() : nullptr;
            double* gb = (b_impl && b_impl->requires_grad) ? b_impl->grad_data() : nullptr;
            for (int b = 0; b < B; ++b) {
                const double* grow = gout + static_cast<size_t>(b) * Dout;
                const double* xrow = in + static_cast<size_t>(b) * Din;
                double* girow = gin ? gin + static_cast<size_t>(b) * Din : nullptr;
                for (int o2 = 0; o2 < Dout; ++o2) {
                    const double g = grow[o2];
                    if (gb) gb[o2] += g;
                    const double* wrow = w + static_cast<size_t>(o2) * Din;
                    double* gwrow = gw ? gw + static_cast<size_t>(o2) * Din : nullptr;
                    for (int i = 0; i < Din; ++i) {
                        if (girow) girow[i] += g * wrow[i];
                        if (gwrow) gwrow[i] += g * xrow[i];
                    }
                }
            }
        });

    double* o = out.data();
    const double* in = input.data();
    const double* w = weight.data();
    const double* bp = bias.defined() ? bias.data() : nullptr;
    for (int b = 0; b < B; ++b) {
        const double* xrow = in + static_cast<size_t>(b) * Din;
        double* orow = o + static_cast<size_t>(b) * Dout;
        for (int o2 = 0; o2 < Dout; ++o2) {
            const double* wrow = w + static_cast<size_t>(o2) * Din;
            double acc = bp ? bp[o2] : 0.0;
            for (int i = 0; i < Din; ++i) acc += xrow[i] * wrow[i];
            orow[o2] = acc;
        }
    }
    return out;
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x.shape().size() != 3) throw ShapeError("upsample_nearest2: expected [b, c, L]");
    const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
    auto x_impl = x.impl();
    Tensor out = make_op_result({B, C, 2 * L}, {&x}, [x_impl, B, C, L](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        double* gx = x_impl->grad_data();
        const size_t rows = static_cast<size_t>(B) * C;
        for (size_t r = 0; r < rows; ++r) {
            const double* grow = gout + r * (2 * L);
            double* gxrow = gx + r * L;
            for (int l = 0; l < L; ++l) gxrow[l] += grow[2 * l] + grow[2 * l + 1];
        }
    });
    const double* xv = x.data();
    double* o = out.data();
    const size_t rows = static_cast<size_t>(B) * C;
    for (size_t r = 0; r < rows; ++r) {
        const double* xrow = xv + r * L;
        double* orow = o + r * (2 * L);
        for (int l = 0; l < L; ++l) orow[2 * l] = orow[2 * l + 1] = xrow[l];
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
    auto a_impl = a.impl();
    auto b_impl = b.impl();
    Tensor out = make_op_result(a.shape(), {&a, &b}, [a_impl, b_impl](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        const size_t n = o.value.size();
        if (a_impl->requires_grad) {
            double* ga = a_impl->grad_data();
            for (size_t i = 0; i < n; ++i) ga[i] += gout[i];
        }
        if (b_impl->requires_grad) {
            double* gb = b_impl->grad_data();
            for (size_t i = 0; i < n; ++i) gb[i] += gout[i];
        }
    });
    const double* av = a.data();
    const double* bv = b.data();
    double* o = out.data();
    for (int i = 0; i < a.size(); ++i) o[i] = av[i] + bv[i];
    return out;
}

Tensor scale(const Tensor& x, double s) {
    auto x_impl = x.impl();
    Tensor out = make_op_result(x.shape(), {&x}, [x_impl, s](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        double* gx = x_impl->grad_data();
        for (size_t i = 0; i < o.value.size(); ++i) gx[i] += s * gout[i];
    });
    const double* xv = x.data();
    double* o = out.data();
    for (int i = 0; i < x.size(); ++i) o[i] = s * xv[i];
    return out;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (x.shape().size() != 3 || s.shape().size() != 2 || s.dim(0) != x.dim(0) ||
        s.dim(1) != 1)
        throw ShapeError("scale_rows: expected x [b, c, L] and s [b, 1]");
    const int B = x.dim(0);
    const int per = x.size() / B;
    auto x_impl = x.impl();
    auto s_impl = s.impl();
    Tensor out = make_op_result(x.shape(), {&x, &s}, [x_impl, s_impl, B,
                                                      per](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        const double* xv = x_impl->value.data();
        const double* sv = s_impl->value.data();
        if (x_impl->requires_grad) {
            double* gx = x_impl->grad_data();
            for (int b = 0; b < B; ++b) {
                const double g = sv[b];
                for (int j = 0; j < per; ++j)
                    gx[static_cast<size_t>(b) * per + j] +=
                        g * gout[static_cast<size_t>(b) * per + j];
            }
        }
        if (s_impl->requires_grad) {
            double* gs = s_impl->grad_data();
            for (int b = 0; b < B; ++b) {
                double acc = 0.0;
                for (int j = 0; j < per; ++j)
                    acc += gout[static_cast<size_t>(b) * per + j] *
                           xv[static_cast<size_t>(b) * per + j];
                gs[b] += acc;
            }
        }
    });
    const double* xv = x.data();
    const double* sv = s.data();
    double* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < per; ++j)
            o[static_cast<size_t>(b) * per + j] = sv[b] * xv[static_cast<size_t>(b) * per + j];
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& e) {
    if (x.shape().size() != 3 || e.shape().size() != 2 || x.dim(0) != e.dim(0) ||
        x.dim(1) != e.dim(1))
        throw ShapeError("add_channel_bias: expected x [b, c, L] and e [b, c]");
    const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
    auto x_impl = x.impl();
    auto e_impl = e.impl();
    Tensor out =
        make_op_result(x.shape(), {&x, &e}, [x_impl, e_impl, B, C, L](detail::TensorImpl& o) {
            const double* gout = o.grad.data();
            if (x_impl->requires_grad) {
                double* gx = x_impl->grad_data();
                for (size_t i = 0; i < o.value.size(); ++i) gx[i] += gout[i];
            }
            if (e_impl->requires_grad) {
                double* ge = e_impl->grad_data();
                for (int b = 0; b < B; ++b)
                    for (int c = 0; c < C; ++c) {
                        const double* grow = gout + (static_cast<size_t>(b) * C + c) * L;
                        double s = 0.0;
                        for (int l = 0; l < L; ++l) s += grow[l];
                        ge[static_cast<size_t>(b) * C + c] += s;
                    }
            }
        });
    const double* xv = x.data();
    const double* ev = e.data();
    double* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const size_t base = (static_cast<size_t>(b) * C + c) * L;
            const double add_v = ev[static_cast<size_t>(b) * C + c];
            for (int l = 0; l < L; ++l) o[base + l] = xv[base + l] + add_v;
        }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: batch/length mismatch");
    const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), L = a.dim(2);
    auto a_impl = a.impl();
    auto b_impl = b.impl();
    Tensor out = make_op_result(
        {B, Ca + Cb, L}, {&a, &b}, [a_impl, b_impl, B, Ca, Cb, L](detail::TensorImpl& o) {
            const double* gout = o.grad.data();
            const int C = Ca + Cb;
            if (a_impl->requires_grad) {
                double* ga = a_impl->grad_data();
                for (int bb = 0; bb < B; ++bb)
                    for (int c = 0; c < Ca; ++c) {
                        const double* src = gout + (static_cast<size_t>(bb) * C + c) * L;
                        double* dst = ga + (static_cast<size_t>(bb) * Ca + c) * L;
                        for (int l = 0; l < L; ++l) dst[l] += src[l];
                    }
            }
            if (b_impl->requires_grad) {
                double* gb = b_impl->grad_data();
                for (int bb = 0; bb < B; ++bb)
                    for (int c = 0; c < Cb; ++c) {
                        const double* src = gout + (static_cast<size_t>(bb) * C + Ca + c) * L;
                        double* dst = gb + (static_cast<size_t>(bb) * Cb + c) * L;
                        for (int l = 0; l < L; ++l) dst[l] += src[l];
                    }
            }
        });
    const double* av = a.data();
    const double* bv = b.data();
    double* o = out.data();
    const int C = Ca + Cb;
    for (int bb = 0; bb < B; ++bb) {
        for (int c = 0; c < Ca; ++c)
            std::copy_n(av + (static_cast<size_t>(bb) * Ca + c) * L, L,
                        o + (static_cast<size_t>(bb) * C + c) * L);
        for (int c = 0; c < Cb; ++c)
            std::copy_n(bv + (static_cast<size_t>(bb) * Cb + c) * L, L,
                        o + (static_cast<size_t>(bb) * C + Ca + c) * L);
    }
    return out;
}

Tensor mean_over_length(const Tensor& x) {
    if (x.shape().size() != 3) throw ShapeError("mean_over_length: expected [b, c, L]");
    const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
    auto x_impl = x.impl();
    Tensor out = make_op_result({B, C}, {&x}, [x_impl, B, C, L](detail::TensorImpl& o) {
        const double* gout = o.grad.data();
        double* gx = x_impl->grad_data();
        const double invL = 1.0 / L;
        for (size_t r = 0; r < static_cast<size_t>(B) * C; ++r) {
            const double g = gout[r] * invL;
            double* gxrow = gx + r * L;
            for (int l = 0; l < L; ++l) gxrow[l] += g;
        }
    });
    const double* xv = x.data();
    double* o = out.data();
    for (size_t r = 0; r < static_cast<size_t>(B) * C; ++r) {
        const double* xrow = xv + r * L;
        double s = 0.0;
        for (int l = 0; l < L; ++l) s += xrow[l];
        o[r] = s / L;
    }
    return out;
}

Tensor sum(const Tensor& x) {
    auto x_impl = x.impl();
    Tensor out = make_op_result({1}, {&x}, [x_impl](detail::TensorImpl& o) {
        const double g = o.grad[0];
        double* gx = x_impl->grad_data();
        for (size_t i = 0; i < x_impl->value.size(); ++i) gx[i] += g;
    });
    const double* xv = x.data();
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += xv[i];
    out.data()[0] = s;
    return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("mse_loss: shape mismatch");
    const int B = pred.dim(0);
    auto p_impl = pred.impl();
    auto t_impl = target.impl();
    Tensor out = make_op_result({1}, {&pred, &target}, [p_impl, t_impl, B](detail::TensorImpl& o) {
        const double g = o.grad[0] * 2.0 / B;
        const double* pv = p_impl->value.data();
        const double* tv = t_impl->value.data();
        const size_t n = p_impl->value.size();
        if (p_impl->requires_grad) {
            double* gp = p_impl->grad_data();
            for (size_t i = 0; i < n; ++i) gp[i] += g * (pv[i] - tv[i]);
        }
        if (t_impl->requires_grad) {
            double* gt = t_impl->grad_data();
            for (size_t i = 0; i < n; ++i) gt[i] -= g * (pv[i] - tv[i]);
        }
    });
    const double* pv = pred.data();
    const double* tv = target.data();
    double s = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        const double d = pv[i] - tv[i];
        s += d * d;
    }
    out.data()[0] = s / B;
    return out;
}

// ---- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ValueError("backward: loss must be a scalar tensor");
    if (!loss.requires_grad())
        throw ValueError("backward: loss does not depend on any tracked tensor");

    // Collect the reachable subgraph; creation ids give a topological order
    // (an op's output id exceeds all of its inputs' ids), so replaying in
    // descending id order visits each node after all of its consumers.
    std::vector<detail::TensorImpl*> nodes;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<detail::TensorImpl*> stack{loss.impl().get()};
    seen.insert(loss.impl().get());
    while (!stack.empty()) {
        detail::TensorImpl* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const detail::TensorImpl* a, const detail::TensorImpl* b) {
                  return a->id > b->id;
              });

    ensure_grad(*loss.impl());
    loss.impl()->grad[0] = 1.0;
    for (detail::TensorImpl* n : nodes) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace diffplan
