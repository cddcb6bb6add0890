#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffplan/rng.hpp"
#include "diffplan/tensor.hpp"

namespace diffplan {

// Interface the diffusion core samples through; lets tests substitute
// scripted noise predictors for the learned network.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    // tau [batch, channels, T], one diffusion step index per batch row.
    virtual Tensor forward(const Tensor& tau, std::span<const int> steps) = 0;
    virtual int channels() const = 0;
    // T must be a multiple of this (1 for architectures without resampling).
    virtual int horizon_multiple() const { return 1; }
};

struct UNetConfig {
    int in_channels = 0;
    std::vector<int> widths = {32, 64, 128};  // two resolution levels + bottleneck
    int embed_dim = 32;
    int groups = 8;
    int kernel = 3;

    void validate() const;  // throws ConfigError
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

namespace layers {

struct Conv1dLayer {
    Tensor weight, bias;
    int stride = 1;
    int padding = 0;

    static Conv1dLayer make(int c_in, int c_out, int k, int stride, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

struct LinearLayer {
    Tensor weight, bias;

    static LinearLayer make(int d_in, int d_out, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// conv -> group norm -> (+ step embedding) -> conv -> group norm -> Mish,
// added to a 1x1-projected (or identity) shortcut.
struct ResBlock1d {
    Conv1dLayer conv1, conv2;
    Tensor gn1_gain, gn1_bias, gn2_gain, gn2_bias;
    LinearLayer emb_proj;  // embed_dim -> c_out
    std::optional<Conv1dLayer> shortcut;
    int groups = 8;

    static ResBlock1d make(int c_in, int c_out, int kernel, int groups, int embed_dim,
                           Rng& rng);
    Tensor forward(const Tensor& x, const Tensor& emb) const;
    void collect(const std::string& prefix, NamedParams& out) const;
};

// Halves the temporal length with a stride-2 convolution.
struct Downsample1d {
    Conv1dLayer conv;
    static Downsample1d make(int c_in, int c_out, int kernel, Rng& rng);
    Tensor operator()(const Tensor& x) const;  // throws on odd length
};

// Doubles the temporal length: nearest-neighbor repeat then convolution.
struct Upsample1d {
    Conv1dLayer conv;
    static Upsample1d make(int c_in, int c_out, int kernel, Rng& rng);
    Tensor operator()(const Tensor& x) const;
};

}  // namespace layers

// Sinusoidal features of the diffusion step, one row per batch entry.
Tensor timestep_features(std::span<const int> steps, int dim);

// The noise-prediction network: a temporal U-Net over [batch, channels, T]
// that is fully convolutional along the horizon axis.
class DenoiserNet : public Denoiser {
public:
    DenoiserNet(UNetConfig config, Rng& init_rng);

    Tensor forward(const Tensor& tau, std::span<const int> steps) override;
    int channels() const override { return config_.in_channels; }
    int horizon_multiple() const override { return 4; }  // two stride-2 levels

    const UNetConfig& config() const { return config_; }
    NamedParams parameters() const;
    int64_t parameter_count() const;

private:
    UNetConfig config_;
    layers::Conv1dLayer conv_in_, conv_out_;
    layers::ResBlock1d enc0_, enc1_, mid0_, mid1_, dec1_, dec0_;
    layers::Downsample1d down0_, down1_;
    layers::Upsample1d up1_, up0_;
    layers::LinearLayer out_gain_;  // embed -> scalar gain on the correction
};

// Return predictor: the encoder half of the U-Net, mean-pooled over the
// horizon, with a scalar head. Conditioned on the diffusion step exactly
// like the denoiser.
class ValueNet {
public:
    ValueNet(UNetConfig config, Rng& init_rng);

    // Returns [batch, 1].
    Tensor forward(const Tensor& tau, std::span<const int> steps) const;

    const UNetConfig& config() const { return config_; }
    NamedParams parameters() const;
    int64_t parameter_count() const;

private:
    UNetConfig config_;
    layers::Conv1dLayer conv_in_;
    layers::ResBlock1d enc0_, enc1_, mid0_, mid1_;
    layers::Downsample1d down0_, down1_;
    layers::LinearLayer head_;
};

}  // namespace diffplan
