#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace c2am {

// N×C×H×W batch, row-major.
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::size_t sample_size() const { return static_cast<std::size_t>(c) * plane(); }
  double* sample(int i) { return data.data() + i * sample_size(); }
  [[nodiscard]] const double* sample(int i) const { return data.data() + i * sample_size(); }
  double& at(int i, int ch, int y, int x) {
    return data[i * sample_size() + ch * plane() + static_cast<std::size_t>(y) * w + x];
  }
  [[nodiscard]] double at(int i, int ch, int y, int x) const {
    return data[i * sample_size() + ch * plane() + static_cast<std::size_t>(y) * w + x];
  }
};

// Trainable array with its gradient accumulator and optimizer state.
struct Parameter {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> velocity;

  Parameter() = default;
  Parameter(std::string name_, std::size_t size, double fill = 0.0)
      : name(std::move(name_)), value(size, fill), grad(size, 0.0), velocity(size, 0.0) {}

  void zero_grad();
};

enum class InitScheme {
  kKaimingNormal,
  kKaimingUniform,
  kNormal,   // N(0, scale^2)
  kUniform,  // U(-scale, scale)
  kZeros,
};

InitScheme parse_init_scheme(const std::string& name);

// Out-of-range taps read zero, or wrap around to the opposite edge.
enum class PaddingMode { kZeros, kCircular };

PaddingMode parse_padding_mode(const std::string& name);
std::string to_string(PaddingMode mode);
std::string to_string(InitScheme scheme);

// Square-kernel 2-D convolution with zero padding and bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  void initialize(InitScheme scheme, double scale, std::mt19937_64& rng);
  void set_padding_mode(PaddingMode mode) { padding_mode_ = mode; }
  [[nodiscard]] PaddingMode padding_mode() const { return padding_mode_; }

  [[nodiscard]] int in_channels() const { return in_; }
  [[nodiscard]] int out_channels() const { return out_; }
  [[nodiscard]] int output_size(int input) const { return (input + 2 * pad_ - k_) / stride_ + 1; }

  Tensor4 forward(const Tensor4& input) const;
  // Same as forward() but keeps the unfolded input for backward().
  Tensor4 forward_train(const Tensor4& input);
  // Accumulates into weight/bias gradients and returns d(loss)/d(input).
  Tensor4 backward(const Tensor4& grad_output);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  [[nodiscard]] const Parameter& weight() const { return weight_; }
  [[nodiscard]] const Parameter& bias() const { return bias_; }

 private:
  Tensor4 run(const Tensor4& input, std::vector<std::vector<double>>* columns) const;
  // Input coordinate for a (possibly padded) tap, or -1 for a zero tap.
  [[nodiscard]] int source_index(int i, int size) const;

  int in_ = 0;
  int out_ = 0;
  int k_ = 3;
  int stride_ = 1;
  int pad_ = 1;
  PaddingMode padding_mode_ = PaddingMode::kZeros;
  Parameter weight_;
  Parameter bias_;
  // Per-sample im2col buffers from the last cached forward.
  std::vector<std::vector<double>> columns_;
  int cached_h_ = 0;
  int cached_w_ = 0;
};

// Per-channel batch normalization over (N, H, W).
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);

  // Eval mode: frozen running estimates.
  Tensor4 forward(const Tensor4& input) const;
  // Training mode: batch statistics, updates the running estimates.
  Tensor4 forward_train(const Tensor4& input);
  Tensor4 backward(const Tensor4& grad_output);

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  [[nodiscard]] const Parameter& gamma() const { return gamma_; }
  [[nodiscard]] const Parameter& beta() const { return beta_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  [[nodiscard]] const std::vector<double>& running_mean() const { return running_mean_; }
  [[nodiscard]] const std::vector<double>& running_var() const { return running_var_; }
  [[nodiscard]] double eps() const { return eps_; }
  void set_momentum(double m) { momentum_ = m; }

 private:
  int channels_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Parameter gamma_;
  Parameter beta_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  // Cached for backward.
  Tensor4 normalized_;
  std::vector<double> inv_std_;
};

void relu_inplace(Tensor4& t);
// Zeroes gradient entries whose forward output was nonpositive.
void relu_backward_inplace(Tensor4& grad, const Tensor4& output);

double sigmoid(double x);

}  // namespace c2am
