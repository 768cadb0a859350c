#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vpe/errors.hpp"
#include "vpe/parallel.hpp"
#include "vpe/rng.hpp"
#include "vpe/tensor.hpp"

// Forward and backward kernels for every layer the encoder/decoder needs,
// plus parameter initialization and Adam. Convolution and the fully
// connected layer lower to matrix products (im2col); everything else is
// plain loops. All backwards are hand-derived and validated against the
// finite-difference checker in gradcheck.hpp.

namespace vpe {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

enum class BatchNormMode { kTrain, kEval };

template <typename T>
struct LayerParams {
  std::string name;
  Tensor<T> weight;       // conv: [Cout,Cin,K,K]; fc: [D,M]; batchnorm: gamma [C]
  Tensor<T> bias;         // conv: [Cout]; fc: [M]; batchnorm: beta [C]
  Tensor<T> grad_weight;  // always shape-matched with weight
  Tensor<T> grad_bias;
  Tensor<T> running_mean;  // batchnorm only
  Tensor<T> running_var;   // batchnorm only, strictly positive
  bool batch_norm = false;

  void zero_grads() {
    grad_weight.fill(T(0));
    grad_bias.fill(T(0));
  }
};

// ---------------------------------------------------------------------------
// Initialization

template <typename T>
LayerParams<T> make_conv_params(std::string name, std::size_t out_channels,
                                std::size_t in_channels, std::size_t kernel, Rng& rng) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.weight = Tensor<T>({out_channels, in_channels, kernel, kernel});
  p.bias = Tensor<T>({out_channels});
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * kernel * kernel));
  for (std::size_t i = 0; i < p.weight.numel(); ++i) {
    p.weight[i] = static_cast<T>(stddev * rng.normal());
  }
  p.grad_weight = Tensor<T>(p.weight.shape());
  p.grad_bias = Tensor<T>(p.bias.shape());
  return p;
}

template <typename T>
LayerParams<T> make_fc_params(std::string name, std::size_t in_dim, std::size_t out_dim,
                              Rng& rng) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.weight = Tensor<T>({in_dim, out_dim});
  p.bias = Tensor<T>({out_dim});
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (std::size_t i = 0; i < p.weight.numel(); ++i) {
    p.weight[i] = static_cast<T>(stddev * rng.normal());
  }
  p.grad_weight = Tensor<T>(p.weight.shape());
  p.grad_bias = Tensor<T>(p.bias.shape());
  return p;
}

template <typename T>
LayerParams<T> make_batchnorm_params(std::string name, std::size_t channels) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.batch_norm = true;
  p.weight = Tensor<T>::full({channels}, T(1));
  p.bias = Tensor<T>({channels});
  p.grad_weight = Tensor<T>({channels});
  p.grad_bias = Tensor<T>({channels});
  p.running_mean = Tensor<T>({channels});
  p.running_var = Tensor<T>::full({channels}, T(1));
  return p;
}

// ---------------------------------------------------------------------------
// Convolution (stride s, symmetric zero padding), NCHW.

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Padding that makes a stride-2 convolution halve an even spatial extent.
inline int halving_padding(int kernel) { return kernel % 2 == 1 ? (kernel - 1) / 2 : (kernel - 2) / 2; }

namespace detail {

// Gathers the [Cin*K*K, OH*OW] patch matrix for one batch item.
template <typename T>
void im2col(const T* in, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* col) {
  for (std::size_t c = 0; c < cin; ++c) {
    const T* plane = in + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          T* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                          ? T(0)
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Scatter-adds a patch-gradient matrix back onto the input gradient.
template <typename T>
void col2im(const T* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* din) {
  for (std::size_t c = 0; c < cin; ++c) {
    T* plane = din + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const T* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) {
              dst[static_cast<std::size_t>(ix)] += src[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const LayerParams<T>& p, int stride,
                       int padding) {
  if (input.rank() != 4 || p.weight.rank() != 4) {
    throw std::invalid_argument("conv2d: expected NCHW input and OIKK weight");
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  if (input.extent(1) != p.weight.extent(1)) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.extent(1)) +
                                " channels but kernel '" + p.name + "' expects " +
                                std::to_string(p.weight.extent(1)));
  }
  const std::size_t k = p.weight.extent(2);
  if (k > input.extent(2) + 2 * static_cast<std::size_t>(padding) ||
      k > input.extent(3) + 2 * static_cast<std::size_t>(padding)) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k) +
                                " exceeds padded input " + input.shape_string());
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const LayerParams<T>& p, int stride,
                         int padding) {
  detail::check_conv_shapes(input, p, stride, padding);
  const std::size_t n = input.extent(0), cin = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t cout = p.weight.extent(0), k = p.weight.extent(2);
  const std::size_t oh = conv_out_extent(h, k, stride, padding);
  const std::size_t ow = conv_out_extent(w, k, stride, padding);
  Tensor<T> out({n, cout, oh, ow});

  const std::size_t ckk = cin * k * k;
  parallel_chunks(n, 0, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<T> col(ckk * oh * ow);
    ConstMapRM<T> wmat(p.weight.data(), cout, ckk);
    for (std::size_t i = lo; i < hi; ++i) {
      detail::im2col(input.data() + i * cin * h * w, cin, h, w, k, stride, padding, oh, ow,
                     col.data());
      ConstMapRM<T> cmat(col.data(), ckk, oh * ow);
      MapRM<T> omat(out.data() + i * cout * oh * ow, cout, oh * ow);
      omat.noalias() = wmat * cmat;
      for (std::size_t c = 0; c < cout; ++c) omat.row(c).array() += p.bias[c];
    }
  });
  return out;
}

// Returns grad wrt input; accumulates grad_weight/grad_bias on p.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& input, LayerParams<T>& p, int stride, int padding,
                          const Tensor<T>& grad_out) {
  detail::check_conv_shapes(input, p, stride, padding);
  const std::size_t n = input.extent(0), cin = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t cout = p.weight.extent(0), k = p.weight.extent(2);
  const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
  const std::size_t ckk = cin * k * k;

  Tensor<T> grad_in({n, cin, h, w});

  // Per-chunk weight/bias accumulators, combined in fixed chunk order below.
  const std::size_t chunks = std::min<std::size_t>(kGradChunks, n);
  std::vector<std::vector<T>> gw_parts(chunks, std::vector<T>(cout * ckk, T(0)));
  std::vector<std::vector<T>> gb_parts(chunks, std::vector<T>(cout, T(0)));

  parallel_chunks(n, chunks, [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
    std::vector<T> col(ckk * oh * ow);
    std::vector<T> dcol(ckk * oh * ow);
    ConstMapRM<T> wmat(p.weight.data(), cout, ckk);
    MapRM<T> gw(gw_parts[chunk].data(), cout, ckk);
    for (std::size_t i = lo; i < hi; ++i) {
      detail::im2col(input.data() + i * cin * h * w, cin, h, w, k, stride, padding, oh, ow,
                     col.data());
      ConstMapRM<T> cmat(col.data(), ckk, oh * ow);
      ConstMapRM<T> gmat(grad_out.data() + i * cout * oh * ow, cout, oh * ow);
      gw.noalias() += gmat * cmat.transpose();
      for (std::size_t c = 0; c < cout; ++c) gb_parts[chunk][c] += gmat.row(c).sum();
      MapRM<T> dcmat(dcol.data(), ckk, oh * ow);
      dcmat.noalias() = wmat.transpose() * gmat;
      T* din = grad_in.data() + i * cin * h * w;
      detail::col2im(dcol.data(), cin, h, w, k, stride, padding, oh, ow, din);
    }
  });

  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < p.grad_weight.numel(); ++i) p.grad_weight[i] += gw_parts[c][i];
    for (std::size_t i = 0; i < cout; ++i) p.grad_bias[i] += gb_parts[c][i];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel.

template <typename T>
struct BatchNormCache {
  Tensor<T> x_hat;            // normalized input, same shape as input
  std::vector<T> inv_std;     // per channel
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, LayerParams<T>& p, BatchNormMode mode,
                            T epsilon, T momentum, BatchNormCache<T>* cache) {
  if (input.rank() != 4) throw std::invalid_argument("batchnorm: expected NCHW input");
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  if (c != p.weight.extent(0)) {
    throw std::invalid_argument("batchnorm '" + p.name + "': channel mismatch");
  }
  const std::size_t m = n * h * w;
  if (mode == BatchNormMode::kTrain && m < 2) {
    throw std::invalid_argument("batchnorm: train mode needs at least 2 values per channel");
  }
  if (mode == BatchNormMode::kEval && (p.running_mean.empty() || p.running_var.empty())) {
    throw std::invalid_argument("batchnorm '" + p.name +
                                "': eval mode before running statistics exist");
  }

  Tensor<T> out(input.shape());
  if (cache) {
    cache->x_hat = Tensor<T>(input.shape());
    cache->inv_std.assign(c, T(0));
  }

  parallel_for(c, [&](std::size_t ch) {
    T mean, inv_std;
    if (mode == BatchNormMode::kTrain) {
      // Biased (1/m) batch statistics.
      T sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = input.data() + (i * c + ch) * h * w;
        for (std::size_t j = 0; j < h * w; ++j) sum += src[j];
      }
      mean = sum / static_cast<T>(m);
      T var_sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = input.data() + (i * c + ch) * h * w;
        for (std::size_t j = 0; j < h * w; ++j) {
          const T d = src[j] - mean;
          var_sum += d * d;
        }
      }
      const T var = var_sum / static_cast<T>(m);
      inv_std = T(1) / std::sqrt(var + epsilon);
      p.running_mean[ch] = (T(1) - momentum) * p.running_mean[ch] + momentum * mean;
      p.running_var[ch] = (T(1) - momentum) * p.running_var[ch] + momentum * var;
      if (p.running_var[ch] <= T(0)) p.running_var[ch] = epsilon;
    } else {
      mean = p.running_mean[ch];
      inv_std = T(1) / std::sqrt(p.running_var[ch] + epsilon);
    }
    const T gamma = p.weight[ch], beta = p.bias[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = input.data() + (i * c + ch) * h * w;
      T* dst = out.data() + (i * c + ch) * h * w;
      T* xh = cache ? cache->x_hat.data() + (i * c + ch) * h * w : nullptr;
      for (std::size_t j = 0; j < h * w; ++j) {
        const T norm = (src[j] - mean) * inv_std;
        if (xh) xh[j] = norm;
        dst[j] = gamma * norm + beta;
      }
    }
    if (cache) cache->inv_std[ch] = inv_std;
  });
  return out;
}

// Train-mode backward (the only mode that needs gradients here).
template <typename T>
Tensor<T> batchnorm_backward(const BatchNormCache<T>& cache, LayerParams<T>& p,
                             const Tensor<T>& grad_out) {
  const std::size_t n = grad_out.extent(0), c = grad_out.extent(1), h = grad_out.extent(2),
                    w = grad_out.extent(3);
  const T m = static_cast<T>(n * h * w);
  Tensor<T> grad_in(grad_out.shape());

  parallel_for(c, [&](std::size_t ch) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* dy = grad_out.data() + (i * c + ch) * h * w;
      const T* xh = cache.x_hat.data() + (i * c + ch) * h * w;
      for (std::size_t j = 0; j < h * w; ++j) {
        sum_dy += dy[j];
        sum_dy_xhat += dy[j] * xh[j];
      }
    }
    p.grad_bias[ch] += sum_dy;
    p.grad_weight[ch] += sum_dy_xhat;
    const T gamma = p.weight[ch];
    const T inv_std = cache.inv_std[ch];
    const T mean_dy = sum_dy / m;
    const T mean_dy_xhat = sum_dy_xhat / m;
    for (std::size_t i = 0; i < n; ++i) {
      const T* dy = grad_out.data() + (i * c + ch) * h * w;
      const T* xh = cache.x_hat.data() + (i * c + ch) * h * w;
      T* dx = grad_in.data() + (i * c + ch) * h * w;
      for (std::size_t j = 0; j < h * w; ++j) {
        dx[j] = gamma * inv_std * (dy[j] - mean_dy - xh[j] * mean_dy_xhat);
      }
    }
  });
  return grad_in;
}

// ---------------------------------------------------------------------------
// Leaky rectifier.

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& input, T slope) {
  if (!(slope >= T(0) && slope < T(1))) {
    throw std::invalid_argument("leaky_relu: slope must be in [0, 1)");
  }
  Tensor<T> out(input.shape());
  const T* src = input.data();
  T* dst = out.data();
  for (std::size_t i = 0; i < input.numel(); ++i) {
    dst[i] = src[i] >= T(0) ? src[i] : slope * src[i];
  }
  return out;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& input, T slope, const Tensor<T>& grad_out) {
  Tensor<T> grad_in(input.shape());
  const T* src = input.data();
  const T* dy = grad_out.data();
  T* dx = grad_in.data();
  for (std::size_t i = 0; i < input.numel(); ++i) {
    dx[i] = src[i] >= T(0) ? dy[i] : slope * dy[i];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Fully connected: out[N,M] = in[N,D] * W[D,M] + b[M].

template <typename T>
Tensor<T> fully_connected_forward(const Tensor<T>& input, const LayerParams<T>& p) {
  if (input.rank() != 2 || p.weight.rank() != 2) {
    throw std::invalid_argument("fully_connected: expected rank-2 input and weight");
  }
  if (input.extent(1) != p.weight.extent(0)) {
    throw std::invalid_argument("fully_connected '" + p.name + "': input dim " +
                                std::to_string(input.extent(1)) + " vs weight dim " +
                                std::to_string(p.weight.extent(0)));
  }
  const std::size_t n = input.extent(0), d = input.extent(1), m = p.weight.extent(1);
  Tensor<T> out({n, m});
  ConstMapRM<T> in(input.data(), n, d);
  ConstMapRM<T> wmat(p.weight.data(), d, m);
  MapRM<T> omat(out.data(), n, m);
  omat.noalias() = in * wmat;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.at2(i, j) += p.bias[j];
  }
  return out;
}

template <typename T>
Tensor<T> fully_connected_backward(const Tensor<T>& input, LayerParams<T>& p,
                                   const Tensor<T>& grad_out) {
  const std::size_t n = input.extent(0), d = input.extent(1), m = p.weight.extent(1);
  Tensor<T> grad_in({n, d});
  ConstMapRM<T> in(input.data(), n, d);
  ConstMapRM<T> wmat(p.weight.data(), d, m);
  ConstMapRM<T> dy(grad_out.data(), n, m);
  MapRM<T> dx(grad_in.data(), n, d);
  dx.noalias() = dy * wmat.transpose();
  MapRM<T> gw(p.grad_weight.data(), d, m);
  gw.noalias() += in.transpose() * dy;
  for (std::size_t j = 0; j < m; ++j) p.grad_bias[j] += dy.col(j).sum();
  return grad_in;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling.

template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& input) {
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  Tensor<T> out({n, c, 2 * h, 2 * w});
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = input.data() + (i * c + ch) * h * w;
      T* dst = out.data() + (i * c + ch) * 4 * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const T v = src[y * w + x];
          T* d0 = dst + (2 * y) * 2 * w + 2 * x;
          T* d1 = d0 + 2 * w;
          d0[0] = v;
          d0[1] = v;
          d1[0] = v;
          d1[1] = v;
        }
      }
    }
  });
  return out;
}

// Each source cell receives the sum of its 2x2 block of upstream gradients.
template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out) {
  const std::size_t n = grad_out.extent(0), c = grad_out.extent(1);
  const std::size_t h = grad_out.extent(2) / 2, w = grad_out.extent(3) / 2;
  Tensor<T> grad_in({n, c, h, w});
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* dy = grad_out.data() + (i * c + ch) * 4 * h * w;
      T* dx = grad_in.data() + (i * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const T* s0 = dy + (2 * y) * 2 * w + 2 * x;
          const T* s1 = s0 + 2 * w;
          dx[y * w + x] = s0[0] + s0[1] + s1[0] + s1[1];
        }
      }
    }
  });
  return grad_in;
}

// ---------------------------------------------------------------------------
// Sigmoid, stable for large |x| and strictly inside (0, 1).

template <typename T>
T sigmoid_scalar(T x) {
  T v;
  if (x >= T(0)) {
    v = T(1) / (T(1) + std::exp(-x));
  } else {
    const T e = std::exp(x);
    v = e / (T(1) + e);
  }
  if (v <= T(0)) v = std::numeric_limits<T>::min();
  const T one_minus = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  if (v > one_minus) v = one_minus;
  return v;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.numel(); ++i) out[i] = sigmoid_scalar(input[i]);
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  Tensor<T> grad_in(output.shape());
  for (std::size_t i = 0; i < output.numel(); ++i) {
    grad_in[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Adam.

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
std::vector<ParamRef<T>> param_refs(std::vector<LayerParams<T>*> layers) {
  std::vector<ParamRef<T>> refs;
  for (auto* l : layers) {
    refs.push_back({l->name + ".weight", &l->weight, &l->grad_weight});
    refs.push_back({l->name + ".bias", &l->bias, &l->grad_bias});
  }
  return refs;
}

template <typename T>
struct AdamState {
  struct Moment {
    std::string name;
    Tensor<T> first;
    Tensor<T> second;
  };

  std::uint64_t step_count = 0;
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  std::vector<Moment> moments;

  void ensure_initialized(const std::vector<ParamRef<T>>& refs) {
    if (!moments.empty()) return;
    for (const auto& r : refs) {
      moments.push_back({r.name, Tensor<T>(r.value->shape()), Tensor<T>(r.value->shape())});
    }
  }
};

// Bias-corrected Adam update over all parameters; clears gradients afterward.
// Aborts (without mutating anything) if any gradient is non-finite.
template <typename T>
void adam_step(const std::vector<ParamRef<T>>& refs, AdamState<T>& state) {
  for (const auto& r : refs) {
    if (!r.grad->same_shape(*r.value)) {
      throw std::invalid_argument("adam: gradient shape mismatch for " + r.name);
    }
    if (!r.grad->all_finite()) {
      throw NumericError("adam: non-finite gradient in " + r.name + "; step aborted");
    }
  }
  state.ensure_initialized(refs);
  if (state.moments.size() != refs.size()) {
    throw std::invalid_argument("adam: state tracks a different parameter set");
  }
  state.step_count += 1;
  const T b1t = std::pow(state.beta1, static_cast<T>(state.step_count));
  const T b2t = std::pow(state.beta2, static_cast<T>(state.step_count));
  for (std::size_t pi = 0; pi < refs.size(); ++pi) {
    auto& m = state.moments[pi];
    Tensor<T>& value = *refs[pi].value;
    Tensor<T>& grad = *refs[pi].grad;
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const T g = grad[i];
      m.first[i] = state.beta1 * m.first[i] + (T(1) - state.beta1) * g;
      m.second[i] = state.beta2 * m.second[i] + (T(1) - state.beta2) * g * g;
      const T m_hat = m.first[i] / (T(1) - b1t);
      const T v_hat = m.second[i] / (T(1) - b2t);
      value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    grad.fill(T(0));
  }
}

}  // namespace vpe
