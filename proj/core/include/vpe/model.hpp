#pragma once

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpe/kv.hpp"
#include "vpe/nn.hpp"

// The prototyping encoder/decoder pair: a Gaussian encoder over real symbol
// images, a reparameterized sample, and a decoder trained to reproduce the
// class prototype (or the input itself in plain autoencoder mode). Latent
// means double as the embedding used by the one-shot and retrieval stages.

namespace vpe {

enum class TargetMode { kPrototype, kSelf };

struct ConvSpec {
  int channels = 0;
  int kernel = 0;
};

struct VpeConfig {
  int input_size = 64;  // square, divisible by 8 (three stride-2 halvings)
  int in_channels = 3;
  int out_channels = 3;
  int latent_dim = 300;
  std::array<ConvSpec, 3> encoder_plan{{{100, 7}, {150, 4}, {250, 4}}};
  int mc_samples = 1;
  TargetMode target_mode = TargetMode::kPrototype;
  float kl_weight = 1.0f;
  float leaky_slope = 0.2f;
  float bn_epsilon = 1e-5f;
  float bn_momentum = 0.1f;

  // Shrunk layout used by the synthetic desk-scale benchmark.
  static VpeConfig toy() {
    VpeConfig cfg;
    cfg.input_size = 16;
    cfg.encoder_plan = {{{16, 3}, {32, 3}, {64, 3}}};
    return cfg;
  }

  int bottleneck_extent() const { return input_size / 8; }

  void validate() const {
    if (input_size <= 0 || input_size % 8 != 0) {
      throw ConfigError("config: input_size must be a positive multiple of 8, got " +
                        std::to_string(input_size));
    }
    if (latent_dim <= 0) throw ConfigError("config: latent_dim must be positive");
    if (mc_samples < 1) throw ConfigError("config: mc_samples must be >= 1");
    if (in_channels <= 0 || out_channels <= 0) {
      throw ConfigError("config: channel counts must be positive");
    }
    if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) {
      throw ConfigError("config: leaky_slope must be in [0, 1)");
    }
    for (const auto& spec : encoder_plan) {
      if (spec.channels <= 0 || spec.kernel <= 0) {
        throw ConfigError("config: encoder plan entries must be positive");
      }
    }
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "input_size = " << input_size << "\n";
    os << "in_channels = " << in_channels << "\n";
    os << "out_channels = " << out_channels << "\n";
    os << "latent_dim = " << latent_dim << "\n";
    os << "enc_channels = " << encoder_plan[0].channels << "," << encoder_plan[1].channels << ","
       << encoder_plan[2].channels << "\n";
    os << "enc_kernels = " << encoder_plan[0].kernel << "," << encoder_plan[1].kernel << ","
       << encoder_plan[2].kernel << "\n";
    os << "mc_samples = " << mc_samples << "\n";
    os << "target_mode = " << (target_mode == TargetMode::kPrototype ? "prototype" : "self")
       << "\n";
    os << "kl_weight = " << format_float(kl_weight) << "\n";
    os << "leaky_slope = " << format_float(leaky_slope) << "\n";
    os << "bn_epsilon = " << format_float(bn_epsilon) << "\n";
    os << "bn_momentum = " << format_float(bn_momentum) << "\n";
    return os.str();
  }

  static VpeConfig from_kv(const std::map<std::string, std::string>& kv);
};

template <typename T>
struct GaussianLatent {
  Tensor<T> mean;          // [N, D]
  Tensor<T> log_variance;  // [N, D]
  Tensor<T> sample;        // [N, D], filled when reparameterized
  Tensor<T> eps;           // the noise that produced `sample`
  bool has_sample = false;

  std::size_t batch() const { return mean.extent(0); }
  std::size_t dim() const { return mean.extent(1); }
};

// z = mu + exp(0.5 * log_variance) .* eps
template <typename T>
Tensor<T> reparameterize(GaussianLatent<T>& latent, const Tensor<T>& eps) {
  if (!eps.same_shape(latent.mean)) {
    throw std::invalid_argument("reparameterize: eps shape mismatch");
  }
  Tensor<T> z(latent.mean.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) {
    z[i] = latent.mean[i] + std::exp(T(0.5) * latent.log_variance[i]) * eps[i];
  }
  latent.sample = z;
  latent.eps = eps;
  latent.has_sample = true;
  return z;
}

// Closed-form KL against the standard normal prior, one value per sample:
// -0.5 * sum_d (1 + log var - mu^2 - var). Always >= 0.
template <typename T>
std::vector<T> kl_divergence(const GaussianLatent<T>& latent) {
  const std::size_t n = latent.batch(), d = latent.dim();
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T acc = 0;
    const T* mu = latent.mean.data() + i * d;
    const T* lv = latent.log_variance.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      acc += T(1) + lv[j] - mu[j] * mu[j] - std::exp(lv[j]);
    }
    out[i] = T(-0.5) * acc;
  }
  return out;
}

// Pixel-summed binary cross entropy with real-valued targets, one value per
// sample. Predictions are clamped away from {0,1} by 1e-7 for the value;
// gradients flow through the fused sigmoid path in the model.
template <typename T>
std::vector<T> reconstruction_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (!prediction.same_shape(target)) {
    throw std::invalid_argument("reconstruction_loss: prediction " + prediction.shape_string() +
                                " vs target " + target.shape_string());
  }
  const std::size_t n = prediction.extent(0);
  const std::size_t per = prediction.numel() / n;
  std::vector<T> out(n, T(0));
  constexpr T kClamp = T(1e-7);
  for (std::size_t i = 0; i < n; ++i) {
    const T* p = prediction.data() + i * per;
    const T* t = target.data() + i * per;
    T acc = 0;
    for (std::size_t j = 0; j < per; ++j) {
      const T pc = std::min(std::max(p[j], kClamp), T(1) - kClamp);
      acc -= t[j] * std::log(pc) + (T(1) - t[j]) * std::log(T(1) - pc);
    }
    out[i] = acc;
  }
  return out;
}

template <typename T>
struct LossBreakdown {
  T total = 0;
  T recon = 0;
  T kl = 0;
};

template <typename T>
class VpeModel {
 public:
  VpeModel(const VpeConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::stream(init_seed, "init");
    int ch = cfg_.in_channels;
    int extent = cfg_.input_size;
    for (int b = 0; b < 3; ++b) {
      const auto& spec = cfg_.encoder_plan[b];
      const std::string base = "enc" + std::to_string(b + 1);
      enc_conv_[b] = make_conv_params<T>(base + ".conv", spec.channels, ch, spec.kernel, rng);
      enc_bn_[b] = make_batchnorm_params<T>(base + ".bn", spec.channels);
      ch = spec.channels;
      extent /= 2;
    }
    flat_dim_ = static_cast<std::size_t>(ch) * extent * extent;
    fc_mean_ = make_fc_params<T>("fc_mean", flat_dim_, cfg_.latent_dim, rng);
    fc_logvar_ = make_fc_params<T>("fc_logvar", flat_dim_, cfg_.latent_dim, rng);
    dec_fc_ = make_fc_params<T>("dec.fc", cfg_.latent_dim, flat_dim_, rng);
    int dch = ch;
    for (int b = 0; b < 3; ++b) {
      const int out_ch = b < 2 ? cfg_.encoder_plan[1 - b].channels : cfg_.out_channels;
      const std::string base = "dec" + std::to_string(b + 1);
      dec_conv_[b] = make_conv_params<T>(base + ".conv", out_ch, dch, 3, rng);
      dec_bn_[b] = make_batchnorm_params<T>(base + ".bn", out_ch);
      dch = out_ch;
    }
  }

  const VpeConfig& config() const { return cfg_; }

  std::vector<LayerParams<T>*> layers() {
    std::vector<LayerParams<T>*> out;
    for (int b = 0; b < 3; ++b) {
      out.push_back(&enc_conv_[b]);
      out.push_back(&enc_bn_[b]);
    }
    out.push_back(&fc_mean_);
    out.push_back(&fc_logvar_);
    out.push_back(&dec_fc_);
    for (int b = 0; b < 3; ++b) {
      out.push_back(&dec_conv_[b]);
      out.push_back(&dec_bn_[b]);
    }
    return out;
  }

  std::vector<ParamRef<T>> parameters() { return param_refs<T>(layers()); }

  void zero_grads() {
    for (auto* l : layers()) l->zero_grads();
  }

  // --- encoder ---------------------------------------------------------

  GaussianLatent<T> encode(const Tensor<T>& x, BatchNormMode mode) {
    return encode_impl(x, mode, nullptr);
  }

  // Latent mean in eval mode; the feature vector used everywhere downstream.
  Tensor<T> embed(const Tensor<T>& x) {
    return encode(x, BatchNormMode::kEval).mean;
  }

  // --- decoder ---------------------------------------------------------

  Tensor<T> decode(const Tensor<T>& z, BatchNormMode mode) {
    return decode_impl(z, mode, nullptr);
  }

  // --- loss ------------------------------------------------------------

  // Noise tensor shaped [S*N, D] feeding mc_samples reparameterizations.
  Tensor<T> draw_noise(std::size_t batch, Rng& rng) const {
    Tensor<T> eps({static_cast<std::size_t>(cfg_.mc_samples) * batch,
                   static_cast<std::size_t>(cfg_.latent_dim)});
    for (std::size_t i = 0; i < eps.numel(); ++i) eps[i] = static_cast<T>(rng.normal());
    return eps;
  }

  LossBreakdown<T> loss_value(const Tensor<T>& x, const Tensor<T>& target, const Tensor<T>& eps) {
    return loss_impl(x, target, eps, false);
  }

  // Populates every parameter gradient (accumulating; call zero_grads first
  // when a fresh gradient is wanted).
  LossBreakdown<T> loss_and_grads(const Tensor<T>& x, const Tensor<T>& target,
                                  const Tensor<T>& eps) {
    return loss_impl(x, target, eps, true);
  }

 private:
  struct BlockCache {
    Tensor<T> conv_in;
    BatchNormCache<T> bn;
    Tensor<T> bn_out;
  };
  struct EncCache {
    std::array<BlockCache, 3> blocks;
    Tensor<T> flat;
  };
  struct DecCache {
    Tensor<T> z;
    Tensor<T> fc_out;
    std::array<BlockCache, 3> blocks;  // conv_in here is the upsampled map
  };

  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4) throw std::invalid_argument("encode: expected NCHW batch");
    if (x.extent(2) != static_cast<std::size_t>(cfg_.input_size) ||
        x.extent(3) != static_cast<std::size_t>(cfg_.input_size)) {
      throw std::invalid_argument("encode: input is " + std::to_string(x.extent(2)) + "x" +
                                  std::to_string(x.extent(3)) + " but the network expects " +
                                  std::to_string(cfg_.input_size) + "x" +
                                  std::to_string(cfg_.input_size) + " (no implicit resize)");
    }
    if (x.extent(1) != static_cast<std::size_t>(cfg_.in_channels)) {
      throw std::invalid_argument("encode: channel count mismatch");
    }
  }

  GaussianLatent<T> encode_impl(const Tensor<T>& x, BatchNormMode mode, EncCache* cache) {
    check_input(x);
    Tensor<T> cur = x;
    for (int b = 0; b < 3; ++b) {
      const int pad = halving_padding(cfg_.encoder_plan[b].kernel);
      if (cache) cache->blocks[b].conv_in = cur;
      Tensor<T> conv = conv2d_forward(cur, enc_conv_[b], 2, pad);
      Tensor<T> bn = batchnorm_forward(conv, enc_bn_[b], mode, T(cfg_.bn_epsilon),
                                       T(cfg_.bn_momentum), cache ? &cache->blocks[b].bn : nullptr);
      if (cache) cache->blocks[b].bn_out = bn;
      cur = leaky_relu_forward(bn, T(cfg_.leaky_slope));
    }
    const std::size_t n = cur.extent(0);
    cur.reshape({n, flat_dim_});
    if (cache) cache->flat = cur;
    GaussianLatent<T> latent;
    latent.mean = fully_connected_forward(cur, fc_mean_);
    latent.log_variance = fully_connected_forward(cur, fc_logvar_);
    return latent;
  }

  // Backward through both heads and the three blocks.
  void encode_backward(const EncCache& cache, const Tensor<T>& d_mean,
                       const Tensor<T>& d_logvar) {
    Tensor<T> d_flat = fully_connected_backward(cache.flat, fc_mean_, d_mean);
    Tensor<T> d_flat2 = fully_connected_backward(cache.flat, fc_logvar_, d_logvar);
    for (std::size_t i = 0; i < d_flat.numel(); ++i) d_flat[i] += d_flat2[i];
    const std::size_t n = cache.flat.extent(0);
    const std::size_t s = static_cast<std::size_t>(cfg_.bottleneck_extent());
    Tensor<T> cur = d_flat;
    cur.reshape({n, static_cast<std::size_t>(cfg_.encoder_plan[2].channels), s, s});
    for (int b = 2; b >= 0; --b) {
      const int pad = halving_padding(cfg_.encoder_plan[b].kernel);
      Tensor<T> d_bn_out =
          leaky_relu_backward(cache.blocks[b].bn_out, T(cfg_.leaky_slope), cur);
      Tensor<T> d_conv = batchnorm_backward(cache.blocks[b].bn, enc_bn_[b], d_bn_out);
      cur = conv2d_backward(cache.blocks[b].conv_in, enc_conv_[b], 2, pad, d_conv);
    }
  }

  Tensor<T> decode_impl(const Tensor<T>& z, BatchNormMode mode, DecCache* cache) {
    if (z.rank() != 2 || z.extent(1) != static_cast<std::size_t>(cfg_.latent_dim)) {
      throw std::invalid_argument("decode: latent must be [N, " +
                                  std::to_string(cfg_.latent_dim) + "]");
    }
    if (cache) cache->z = z;
    Tensor<T> cur = fully_connected_forward(z, dec_fc_);
    if (cache) cache->fc_out = cur;
    const std::size_t n = z.extent(0);
    const std::size_t s = static_cast<std::size_t>(cfg_.bottleneck_extent());
    cur.reshape({n, static_cast<std::size_t>(cfg_.encoder_plan[2].channels), s, s});
    for (int b = 0; b < 3; ++b) {
      cur = upsample2x_forward(cur);
      if (cache) cache->blocks[b].conv_in = cur;
      Tensor<T> conv = conv2d_forward(cur, dec_conv_[b], 1, 1);
      Tensor<T> bn = batchnorm_forward(conv, dec_bn_[b], mode, T(cfg_.bn_epsilon),
                                       T(cfg_.bn_momentum), cache ? &cache->blocks[b].bn : nullptr);
      if (cache) cache->blocks[b].bn_out = bn;
      cur = leaky_relu_forward(bn, T(cfg_.leaky_slope));
    }
    return sigmoid_forward(cur);
  }

  // d_presigmoid is the gradient at the sigmoid input; returns gradient wrt z.
  Tensor<T> decode_backward(const DecCache& cache, Tensor<T> d_presigmoid) {
    Tensor<T> cur = std::move(d_presigmoid);
    for (int b = 2; b >= 0; --b) {
      Tensor<T> d_bn_out =
          leaky_relu_backward(cache.blocks[b].bn_out, T(cfg_.leaky_slope), cur);
      Tensor<T> d_conv = batchnorm_backward(cache.blocks[b].bn, dec_bn_[b], d_bn_out);
      Tensor<T> d_up = conv2d_backward(cache.blocks[b].conv_in, dec_conv_[b], 1, 1, d_conv);
      cur = upsample2x_backward(d_up);
    }
    const std::size_t n = cache.z.extent(0);
    cur.reshape({n, flat_dim_});
    return fully_connected_backward(cache.fc_out, dec_fc_, cur);
  }

  LossBreakdown<T> loss_impl(const Tensor<T>& x, const Tensor<T>& target, const Tensor<T>& eps,
                             bool with_grads) {
    check_input(x);
    if (!target.same_shape(x) &&
        (target.rank() != 4 || target.extent(0) != x.extent(0) ||
         target.extent(1) != static_cast<std::size_t>(cfg_.out_channels))) {
      throw std::invalid_argument("loss: target shape mismatch");
    }
    const std::size_t n = x.extent(0);
    const std::size_t d = static_cast<std::size_t>(cfg_.latent_dim);
    const std::size_t S = static_cast<std::size_t>(cfg_.mc_samples);
    if (eps.numel() != S * n * d) {
      throw std::invalid_argument("loss: noise must hold mc_samples x batch x latent values");
    }

    EncCache enc_cache;
    GaussianLatent<T> latent = encode_impl(x, BatchNormMode::kTrain, with_grads ? &enc_cache : nullptr);

    Tensor<T> d_mean, d_logvar;
    if (with_grads) {
      d_mean = Tensor<T>({n, d});
      d_logvar = Tensor<T>({n, d});
    }

    LossBreakdown<T> result;
    const T recon_scale = T(1) / static_cast<T>(n * S);
    for (std::size_t s = 0; s < S; ++s) {
      Tensor<T> z({n, d});
      const T* e = eps.data() + s * n * d;
      for (std::size_t i = 0; i < n * d; ++i) {
        z[i] = latent.mean[i] + std::exp(T(0.5) * latent.log_variance[i]) * e[i];
      }
      DecCache dec_cache;
      Tensor<T> p = decode_impl(z, BatchNormMode::kTrain, with_grads ? &dec_cache : nullptr);
      const std::vector<T> per_sample = reconstruction_loss(p, target);
      for (T v : per_sample) result.recon += v * recon_scale;
      if (with_grads) {
        Tensor<T> d_presigmoid(p.shape());
        for (std::size_t i = 0; i < p.numel(); ++i) {
          d_presigmoid[i] = (p[i] - target[i]) * recon_scale;
        }
        Tensor<T> dz = decode_backward(dec_cache, std::move(d_presigmoid));
        for (std::size_t i = 0; i < n * d; ++i) {
          d_mean[i] += dz[i];
          d_logvar[i] += dz[i] * T(0.5) * std::exp(T(0.5) * latent.log_variance[i]) * e[i];
        }
      }
    }

    const std::vector<T> kl = kl_divergence(latent);
    for (T v : kl) result.kl += v / static_cast<T>(n);
    result.total = result.recon + T(cfg_.kl_weight) * result.kl;

    if (with_grads) {
      const T kl_scale = T(cfg_.kl_weight) / static_cast<T>(n);
      for (std::size_t i = 0; i < n * d; ++i) {
        d_mean[i] += kl_scale * latent.mean[i];
        d_logvar[i] += kl_scale * T(0.5) * (std::exp(latent.log_variance[i]) - T(1));
      }
      encode_backward(enc_cache, d_mean, d_logvar);
    }
    return result;
  }

  VpeConfig cfg_;
  std::size_t flat_dim_ = 0;
  std::array<LayerParams<T>, 3> enc_conv_;
  std::array<LayerParams<T>, 3> enc_bn_;
  LayerParams<T> fc_mean_;
  LayerParams<T> fc_logvar_;
  LayerParams<T> dec_fc_;
  std::array<LayerParams<T>, 3> dec_conv_;
  std::array<LayerParams<T>, 3> dec_bn_;
};

using VpeModelF = VpeModel<float>;
using VpeModelD = VpeModel<double>;

}  // namespace vpe
