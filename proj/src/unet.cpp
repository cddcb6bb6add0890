#include "diffplan/unet.hpp"

#include <cmath>
#include <string>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

constexpr double kGroupNormEps = 1e-5;

// Kaiming-uniform with fan-in scaling.
Tensor kaiming_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}

void check_horizon(int T, int multiple, const char* who) {
    if (T % multiple != 0)
        throw ShapeError(std::string(who) + ": horizon " + std::to_string(T) +
                         " must be divisible by " + std::to_string(multiple) +
                         " (two stride-2 resampling levels)");
}

}  // namespace

void UNetConfig::validate() const {
    if (in_channels < 1) throw ConfigError("model: in_channels must be positive");
    if (widths.size() != 3)
        throw ConfigError("model.channels: expected exactly 3 widths (two levels + bottleneck)");
    for (int w : widths)
        if (w < 1) throw ConfigError("model.channels: widths must be positive");
    if (embed_dim < 2 || embed_dim % 2 != 0)
        throw ConfigError("model.embed_dim: must be even and >= 2");
    if (groups < 1) throw ConfigError("model.groups: must be positive");
    for (int w : widths)
        if (w % groups != 0)
            throw ConfigError("model.groups: " + std::to_string(groups) +
                              " does not divide channel width " + std::to_string(w));
    if (kernel < 1 || kernel % 2 == 0)
        throw ConfigError("model.kernel: must be odd and positive");
}

namespace layers {

Conv1dLayer Conv1dLayer::make(int c_in, int c_out, int k, int stride, Rng& rng) {
    Conv1dLayer l;
    l.weight = kaiming_uniform({c_out, c_in, k}, c_in * k, rng);
    l.bias = Tensor::zeros({c_out}, /*requires_grad=*/true);
    l.stride = stride;
    l.padding = (k - 1) / 2;
    return l;
}

Tensor Conv1dLayer::operator()(const Tensor& x) const {
    return conv1d(x, weight, bias, stride, padding);
}

void Conv1dLayer::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".w", weight);
    out.emplace_back(prefix + ".b", bias);
}

LinearLayer LinearLayer::make(int d_in, int d_out, Rng& rng) {
    LinearLayer l;
    l.weight = kaiming_uniform({d_out, d_in}, d_in, rng);
    l.bias = Tensor::zeros({d_out}, /*requires_grad=*/true);
    return l;
}

Tensor LinearLayer::operator()(const Tensor& x) const { return linear(x, weight, bias); }

void LinearLayer::collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".w", weight);
    out.emplace_back(prefix + ".b", bias);
}

ResBlock1d ResBlock1d::make(int c_in, int c_out, int kernel, int groups, int embed_dim,
                            Rng& rng) {
    ResBlock1d b;
    b.conv1 = Conv1dLayer::make(c_in, c_out, kernel, 1, rng);
    b.conv2 = Conv1dLayer::make(c_out, c_out, kernel, 1, rng);
    b.gn1_gain = Tensor::full({c_out}, 1.0, true);
    b.gn1_bias = Tensor::zeros({c_out}, true);
    b.gn2_gain = Tensor::full({c_out}, 1.0, true);
    b.gn2_bias = Tensor::zeros({c_out}, true);
    b.emb_proj = LinearLayer::make(embed_dim, c_out, rng);
    if (c_in != c_out) b.shortcut = Conv1dLayer::make(c_in, c_out, 1, 1, rng);
    b.groups = groups;
    return b;
}

Tensor ResBlock1d::forward(const Tensor& x, const Tensor& emb) const {
    Tensor h = conv1(x);
    h = group_norm(h, groups, gn1_gain, gn1_bias, kGroupNormEps);
    h = add_channel_bias(h, emb_proj(emb));
    h = conv2(h);
    h = group_norm(h, groups, gn2_gain, gn2_bias, kGroupNormEps);
    h = mish(h);
    return add(h, shortcut ? (*shortcut)(x) : x);
}

void ResBlock1d::collect(const std::string& prefix, NamedParams& out) const {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    out.emplace_back(prefix + ".gn1.gain", gn1_gain);
    out.emplace_back(prefix + ".gn1.bias", gn1_bias);
    out.emplace_back(prefix + ".gn2.gain", gn2_gain);
    out.emplace_back(prefix + ".gn2.bias", gn2_bias);
    emb_proj.collect(prefix + ".emb", out);
    if (shortcut) shortcut->collect(prefix + ".shortcut", out);
}

Downsample1d Downsample1d::make(int c_in, int c_out, int kernel, Rng& rng) {
    Downsample1d d;
    d.conv = Conv1dLayer::make(c_in, c_out, kernel, 2, rng);
    return d;
}

Tensor Downsample1d::operator()(const Tensor& x) const {
    if (x.dim(2) % 2 != 0)
        throw ShapeError("downsample: temporal length " + std::to_string(x.dim(2)) +
                         " is odd");
    return conv(x);
}

Upsample1d Upsample1d::make(int c_in, int c_out, int kernel, Rng& rng) {
    Upsample1d u;
    u.conv = Conv1dLayer::make(c_in, c_out, kernel, 1, rng);
    return u;
}

Tensor Upsample1d::operator()(const Tensor& x) const { return conv(upsample_nearest2(x)); }

}  // namespace layers

Tensor timestep_features(std::span<const int> steps, int dim) {
    const int half = dim / 2;
    Tensor out = Tensor::zeros({static_cast<int>(steps.size()), dim});
    double* o = out.data();
    for (size_t b = 0; b < steps.size(); ++b) {
        for (int j = 0; j < half; ++j) {
            const double freq =
                std::exp(-std::log(10000.0) * (half > 1 ? static_cast<double>(j) / (half - 1) : 0.0));
            const double angle = steps[b] * freq;
            o[b * dim + j] = std::sin(angle);
            o[b * dim + half + j] = std::cos(angle);
        }
    }
    return out;
}

// ---- DenoiserNet -----------------------------------------------------------

DenoiserNet::DenoiserNet(UNetConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    const int C = config_.in_channels;
    const int w0 = config_.widths[0], w1 = config_.widths[1], w2 = config_.widths[2];
    const int k = config_.kernel, g = config_.groups, e = config_.embed_dim;
    using namespace layers;
    conv_in_ = Conv1dLayer::make(C, w0, k, 1, rng);
    enc0_ = ResBlock1d::make(w0, w0, k, g, e, rng);
    down0_ = Downsample1d::make(w0, w1, k, rng);
    enc1_ = ResBlock1d::make(w1, w1, k, g, e, rng);
    down1_ = Downsample1d::make(w1, w2, k, rng);
    mid0_ = ResBlock1d::make(w2, w2, k, g, e, rng);
    mid1_ = ResBlock1d::make(w2, w2, k, g, e, rng);
    up1_ = Upsample1d::make(w2, w1, k, rng);
    dec1_ = ResBlock1d::make(w1 + w1, w1, k, g, e, rng);
    up0_ = Upsample1d::make(w1, w0, k, rng);
    dec0_ = ResBlock1d::make(w0 + w0, w0, k, g, e, rng);
    conv_out_ = Conv1dLayer::make(w0, C, k, 1, rng);
    // Neutral at init (gain 1); lets the network attenuate or amplify its
    // correction by diffusion step, which group-normalized activations
    // cannot express on their own.
    out_gain_ = LinearLayer::make(e, 1, rng);
    for (double& v : out_gain_.weight.values()) v = 0.0;
    out_gain_.bias.values()[0] = 1.0;
}

Tensor DenoiserNet::forward(const Tensor& tau, std::span<const int> steps) {
    if (tau.shape().size() != 3 || tau.dim(1) != config_.in_channels)
        throw ShapeError("denoiser: expected input [batch, " +
                         std::to_string(config_.in_channels) + ", T]");
    if (static_cast<int>(steps.size()) != tau.dim(0))
        throw ShapeError("denoiser: one diffusion step per batch row required");
    check_horizon(tau.dim(2), horizon_multiple(), "denoiser");

    const Tensor emb = timestep_features(steps, config_.embed_dim);

    Tensor h = conv_in_(tau);
    Tensor skip0 = enc0_.forward(h, emb);
    Tensor h1 = down0_(skip0);
    Tensor skip1 = enc1_.forward(h1, emb);
    Tensor h2 = down1_(skip1);
    h2 = mid0_.forward(h2, emb);
    h2 = mid1_.forward(h2, emb);
    Tensor u1 = up1_(h2);
    u1 = dec1_.forward(concat_channels(u1, skip1), emb);
    Tensor u0 = up0_(u1);
    u0 = dec0_.forward(concat_channels(u0, skip0), emb);
    // Global residual with a step-conditioned gain: at high noise levels the
    // optimal translation-equivariant noise prediction is approximately the
    // input itself with a vanishing correction, while the last reverse step
    // divides by sqrt(alpha_N) ~ 0.03; at low noise the correction must grow
    // to ~1/sqrt(1 - abar_1) times the data scale.
    return add(scale_rows(conv_out_(u0), out_gain_(emb)), tau);
}

NamedParams DenoiserNet::parameters() const {
    NamedParams p;
    conv_in_.collect("conv_in", p);
    enc0_.collect("enc0", p);
    down0_.conv.collect("down0", p);
    enc1_.collect("enc1", p);
    down1_.conv.collect("down1", p);
    mid0_.collect("mid0", p);
    mid1_.collect("mid1", p);
    up1_.conv.collect("up1", p);
    dec1_.collect("dec1", p);
    up0_.conv.collect("up0", p);
    dec0_.collect("dec0", p);
    conv_out_.collect("conv_out", p);
    out_gain_.collect("out_gain", p);
    return p;
}

int64_t DenoiserNet::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : parameters()) n += t.size();
    return n;
}

// ---- ValueNet ---------------------------------------------------------------

ValueNet::ValueNet(UNetConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    const int C = config_.in_channels;
    const int w0 = config_.widths[0], w1 = config_.widths[1], w2 = config_.widths[2];
    const int k = config_.kernel, g = config_.groups, e = config_.embed_dim;
    using namespace layers;
    conv_in_ = Conv1dLayer::make(C, w0, k, 1, rng);
    enc0_ = ResBlock1d::make(w0, w0, k, g, e, rng);
    down0_ = Downsample1d::make(w0, w1, k, rng);
    enc1_ = ResBlock1d::make(w1, w1, k, g, e, rng);
    down1_ = Downsample1d::make(w1, w2, k, rng);
    mid0_ = ResBlock1d::make(w2, w2, k, g, e, rng);
    mid1_ = ResBlock1d::make(w2, w2, k, g, e, rng);
    head_ = LinearLayer::make(w2, 1, rng);
    // Zero-initialized scalar head: predictions start at 0 and move only as
    // far as the return targets demand.
    for (double& v : head_.weight.values()) v = 0.0;
}

Tensor ValueNet::forward(const Tensor& tau, std::span<const int> steps) const {
    if (tau.shape().size() != 3 || tau.dim(1) != config_.in_channels)
        throw ShapeError("value net: expected input [batch, " +
                         std::to_string(config_.in_channels) + ", T]");
    if (static_cast<int>(steps.size()) != tau.dim(0))
        throw ShapeError("value net: one diffusion step per batch row required");
    check_horizon(tau.dim(2), 4, "value net");

    const Tensor emb = timestep_features(steps, config_.embed_dim);

    Tensor h = conv_in_(tau);
    h = enc0_.forward(h, emb);
    h = down0_(h);
    h = enc1_.forward(h, emb);
    h = down1_(h);
    h = mid0_.forward(h, emb);
    h = mid1_.forward(h, emb);
    return head_(mean_over_length(h));
}

NamedParams ValueNet::parameters() const {
    NamedParams p;
    conv_in_.collect("conv_in", p);
    enc0_.collect("enc0", p);
    down0_.conv.collect("down0", p);
    enc1_.collect("enc1", p);
    down1_.conv.collect("down1", p);
    mid0_.collect("mid0", p);
    mid1_.collect("mid1", p);
    head_.collect("head", p);
    return p;
}

int64_t ValueNet::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : parameters()) n += t.size();
    return n;
}

}  // namespace diffplan
