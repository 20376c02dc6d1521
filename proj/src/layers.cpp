#include "c2am/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "c2am/errors.hpp"

namespace c2am {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

}  // namespace

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "kaiming-normal") return InitScheme::kKaimingNormal;
  if (name == "kaiming-uniform") return InitScheme::kKaimingUniform;
  if (name == "normal") return InitScheme::kNormal;
  if (name == "uniform") return InitScheme::kUniform;
  if (name == "zeros") return InitScheme::kZeros;
  throw ConfigError("unknown init scheme '" + name +
                    "' (expected kaiming-normal, kaiming-uniform, normal, uniform, zeros)");
}

PaddingMode parse_padding_mode(const std::string& name) {
  if (name == "zeros") return PaddingMode::kZeros;
  if (name == "circular") return PaddingMode::kCircular;
  throw ConfigError("unknown padding mode '" + name + "' (expected zeros or circular)");
}

std::string to_string(PaddingMode mode) { return mode == PaddingMode::kZeros ? "zeros" : "circular"; }

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kKaimingNormal: return "kaiming-normal";
    case InitScheme::kKaimingUniform: return "kaiming-uniform";
    case InitScheme::kNormal: return "normal";
    case InitScheme::kUniform: return "uniform";
    case InitScheme::kZeros: return "zeros";
  }
  return "unknown";
}

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding),
      weight_(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(name + ".bias", static_cast<std::size_t>(out_channels)) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0) {
    throw ShapeError("invalid convolution geometry for " + name);
  }
}

void Conv2d::initialize(InitScheme scheme, double scale, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_) * k_ * k_;
  switch (scheme) {
    case InitScheme::kKaimingNormal: {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : weight_.value) v = dist(rng);
      break;
    }
    case InitScheme::kKaimingUniform: {
      const double bound = std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : weight_.value) v = dist(rng);
      break;
    }
    case InitScheme::kNormal: {
      std::normal_distribution<double> dist(0.0, scale);
      for (auto& v : weight_.value) v = dist(rng);
      break;
    }
    case InitScheme::kUniform: {
      std::uniform_real_distribution<double> dist(-scale, scale);
      for (auto& v : weight_.value) v = dist(rng);
      break;
    }
    case InitScheme::kZeros:
      std::fill(weight_.value.begin(), weight_.value.end(), 0.0);
      break;
  }
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

int Conv2d::source_index(int i, int size) const {
  if (i >= 0 && i < size) return i;
  if (padding_mode_ == PaddingMode::kZeros) return -1;
  return ((i % size) + size) % size;
}

Tensor4 Conv2d::forward(const Tensor4& input) const { return run(input, nullptr); }

Tensor4 Conv2d::forward_train(const Tensor4& input) {
  Tensor4 output = run(input, &columns_);
  cached_h_ = input.h;
  cached_w_ = input.w;
  return output;
}

Tensor4 Conv2d::run(const Tensor4& input, std::vector<std::vector<double>>* columns) const {
  if (input.c != in_) {
    throw ShapeError("convolution " + weight_.name + " expects " + std::to_string(in_) +
                     " input channels, got " + std::to_string(input.c));
  }
  const int ho = output_size(input.h);
  const int wo = output_size(input.w);
  if (ho <= 0 || wo <= 0) {
    throw ShapeError("input too small for convolution " + weight_.name);
  }
  const int rows = in_ * k_ * k_;
  const int cols = ho * wo;
  Tensor4 output(input.n, out_, ho, wo);
  if (columns != nullptr) columns->assign(input.n, {});
  ConstMatrixMap weights(weight_.value.data(), out_, rows);
  std::vector<double> local;
  for (int i = 0; i < input.n; ++i) {
    std::vector<double>& col = columns != nullptr ? (*columns)[i] : local;
    col.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    const double* src = input.sample(i);
    for (int ch = 0; ch < in_; ++ch) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          double* dst = col.data() + static_cast<std::size_t>((ch * k_ + ky) * k_ + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = source_index(oy * stride_ - pad_ + ky, input.h);
            if (iy < 0) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = source_index(ox * stride_ - pad_ + kx, input.w);
              if (ix < 0) continue;
              dst[oy * wo + ox] = src[(static_cast<std::size_t>(ch) * input.h + iy) * input.w + ix];
            }
          }
        }
      }
    }
    MatrixMap out(output.sample(i), out_, cols);
    out.noalias() = weights * ConstMatrixMap(col.data(), rows, cols);
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
  }
  return output;
}

Tensor4 Conv2d::backward(const Tensor4& grad_output) {
  if (static_cast<int>(columns_.size()) != grad_output.n || grad_output.c != out_) {
    throw ShapeError("convolution backward without a matching cached forward");
  }
  const int ho = grad_output.h;
  const int wo = grad_output.w;
  const int rows = in_ * k_ * k_;
  const int cols = ho * wo;
  Tensor4 grad_input(grad_output.n, in_, cached_h_, cached_w_);
  MatrixMap dweights(weight_.grad.data(), out_, rows);
  ConstMatrixMap weights(weight_.value.data(), out_, rows);
  RowMatrix dcol(rows, cols);
  for (int i = 0; i < grad_output.n; ++i) {
    ConstMatrixMap dout(grad_output.sample(i), out_, cols);
    ConstMatrixMap col(columns_[i].data(), rows, cols);
    dweights.noalias() += dout * col.transpose();
    for (int o = 0; o < out_; ++o) bias_.grad[o] += dout.row(o).sum();
    dcol.noalias() = weights.transpose() * dout;
    double* dst = grad_input.sample(i);
    for (int ch = 0; ch < in_; ++ch) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const double* src = dcol.data() + static_cast<std::size_t>((ch * k_ + ky) * k_ + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = source_index(oy * stride_ - pad_ + ky, cached_h_);
            if (iy < 0) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = source_index(ox * stride_ - pad_ + kx, cached_w_);
              if (ix < 0) continue;
              dst[(static_cast<std::size_t>(ch) * cached_h_ + iy) * cached_w_ + ix] += src[oy * wo + ox];
            }
          }
        }
      }
    }
  }
  return grad_input;
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(name + ".gamma", static_cast<std::size_t>(channels), 1.0),
      beta_(name + ".beta", static_cast<std::size_t>(channels), 0.0),
      running_mean_(static_cast<std::size_t>(channels), 0.0),
      running_var_(static_cast<std::size_t>(channels), 1.0) {}

Tensor4 BatchNorm2d::forward(const Tensor4& input) const {
  if (input.c != channels_) {
    throw ShapeError("batch norm " + gamma_.name + " expects " + std::to_string(channels_) +
                     " channels, got " + std::to_string(input.c));
  }
  Tensor4 output(input.n, input.c, input.h, input.w);
  const std::size_t plane = input.plane();
  for (int ch = 0; ch < channels_; ++ch) {
    const double inv_std = 1.0 / std::sqrt(running_var_[ch] + eps_);
    for (int i = 0; i < input.n; ++i) {
      const double* p = input.sample(i) + ch * plane;
      double* y = output.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        y[k] = gamma_.value[ch] * ((p[k] - running_mean_[ch]) * inv_std) + beta_.value[ch];
      }
    }
  }
  return output;
}

Tensor4 BatchNorm2d::forward_train(const Tensor4& input) {
  if (input.c != channels_) {
    throw ShapeError("batch norm " + gamma_.name + " expects " + std::to_string(channels_) +
                     " channels, got " + std::to_string(input.c));
  }
  Tensor4 output(input.n, input.c, input.h, input.w);
  normalized_ = Tensor4(input.n, input.c, input.h, input.w);
  inv_std_.assign(channels_, 0.0);
  const std::size_t plane = input.plane();
  const double count = static_cast<double>(input.n) * static_cast<double>(plane);
  for (int ch = 0; ch < channels_; ++ch) {
    double sum = 0.0;
    for (int i = 0; i < input.n; ++i) {
      const double* p = input.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) sum += p[k];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int i = 0; i < input.n; ++i) {
      const double* p = input.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - mean) * (p[k] - mean);
    }
    const double var = sq / count;
    const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
    running_mean_[ch] = (1.0 - momentum_) * running_mean_[ch] + momentum_ * mean;
    running_var_[ch] = (1.0 - momentum_) * running_var_[ch] + momentum_ * unbiased;
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    inv_std_[ch] = inv_std;
    for (int i = 0; i < input.n; ++i) {
      const double* p = input.sample(i) + ch * plane;
      double* xhat = normalized_.sample(i) + ch * plane;
      double* y = output.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        xhat[k] = (p[k] - mean) * inv_std;
        y[k] = gamma_.value[ch] * xhat[k] + beta_.value[ch];
      }
    }
  }
  return output;
}

Tensor4 BatchNorm2d::backward(const Tensor4& grad_output) {
  if (grad_output.data.size() != normalized_.data.size()) {
    throw ShapeError("batch norm backward without a matching cached forward");
  }
  Tensor4 grad_input(grad_output.n, grad_output.c, grad_output.h, grad_output.w);
  const std::size_t plane = grad_output.plane();
  const double count = static_cast<double>(grad_output.n) * static_cast<double>(plane);
  for (int ch = 0; ch < channels_; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int i = 0; i < grad_output.n; ++i) {
      const double* dy = grad_output.sample(i) + ch * plane;
      const double* xhat = normalized_.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += dy[k];
        sum_dy_xhat += dy[k] * xhat[k];
      }
    }
    gamma_.grad[ch] += sum_dy_xhat;
    beta_.grad[ch] += sum_dy;
    const double g = gamma_.value[ch];
    const double inv_std = inv_std_[ch];
    for (int i = 0; i < grad_output.n; ++i) {
      const double* dy = grad_output.sample(i) + ch * plane;
      const double* xhat = normalized_.sample(i) + ch * plane;
      double* dx = grad_input.sample(i) + ch * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        dx[k] = g * inv_std * (dy[k] - sum_dy / count - xhat[k] * sum_dy_xhat / count);
      }
    }
  }
  return grad_input;
}

void relu_inplace(Tensor4& t) {
  for (auto& v : t.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(Tensor4& grad, const Tensor4& output) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (output.data[i] <= 0.0) grad.data[i] = 0.0;
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace c2am
