#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "c2am/disentangler.hpp"
#include "c2am/errors.hpp"
#include "c2am/layers.hpp"

using namespace c2am;

namespace {

Tensor4 random_tensor(std::mt19937_64& rng, int n, int c, int h, int w) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor4 t(n, c, h, w);
  for (auto& v : t.data) v = g(rng);
  return t;
}

double dot(const Tensor4& a, const Tensor4& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) s += a.data[k] * b.data[k];
  return s;
}

// The floor absorbs finite-difference noise on gradients that are exactly zero
// (a conv bias feeding batch norm in training mode).
double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

// Central-difference check of d(loss)/d(slot) for every entry of `values`.
double worst_error(std::vector<double>& values, const std::vector<double>& analytic,
                   const std::function<double()>& loss, double step = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + step;
    const double up = loss();
    values[k] = saved - step;
    const double down = loss();
    values[k] = saved;
    worst = std::max(worst, rel(analytic[k], (up - down) / (2.0 * step)));
  }
  return worst;
}

}  // namespace

TEST_CASE("init and padding names") {
  CHECK(parse_init_scheme("kaiming-normal") == InitScheme::kKaimingNormal);
  CHECK(parse_init_scheme("uniform") == InitScheme::kUniform);
  CHECK_THROWS_AS(parse_init_scheme("xavier"), ConfigError);
  CHECK(parse_padding_mode("circular") == PaddingMode::kCircular);
  CHECK(to_string(PaddingMode::kZeros) == "zeros");
  CHECK_THROWS_AS(parse_padding_mode("reflect"), ConfigError);
}

TEST_CASE("circular padding wraps the opposite edge") {
  std::mt19937_64 rng(1);
  Conv2d conv("c", 1, 1, 3, 1, 1);
  conv.initialize(InitScheme::kZeros, 0.0, rng);
  // Kernel picks the left neighbour only.
  conv.weight().value[3] = 1.0;
  Tensor4 x(1, 1, 2, 3);
  x.data = {1, 2, 3, 4, 5, 6};
  const Tensor4 zeros = conv.forward(x);
  CHECK(zeros.data == std::vector<double>{0, 1, 2, 0, 4, 5});
  conv.set_padding_mode(PaddingMode::kCircular);
  const Tensor4 wrapped = conv.forward(x);
  CHECK(wrapped.data == std::vector<double>{3, 1, 2, 6, 4, 5});
}

TEST_CASE("convolution gradients match central differences") {
  for (PaddingMode mode : {PaddingMode::kZeros, PaddingMode::kCircular}) {
    for (int stride : {1, 2}) {
      std::mt19937_64 rng(2 + stride);
      Conv2d conv("c", 3, 4, 3, stride, 1);
      conv.initialize(InitScheme::kKaimingNormal, 0.0, rng);
      conv.set_padding_mode(mode);
      for (auto& b : conv.bias().value) b = 0.1;
      Tensor4 x = random_tensor(rng, 2, 3, 6, 5);
      const Tensor4 probe = random_tensor(rng, 2, 4, conv.output_size(6), conv.output_size(5));
      conv.weight().zero_grad();
      conv.bias().zero_grad();
      conv.forward_train(x);
      const Tensor4 dx = conv.backward(probe);
      auto loss = [&] { return dot(conv.forward(x), probe); };
      CHECK(worst_error(x.data, dx.data, loss) < 1e-6);
      const std::vector<double> dw = conv.weight().grad;
      const std::vector<double> db = conv.bias().grad;
      CHECK(worst_error(conv.weight().value, dw, loss) < 1e-6);
      CHECK(worst_error(conv.bias().value, db, loss) < 1e-6);
    }
  }
}

TEST_CASE("batch norm gradients match central differences") {
  std::mt19937_64 rng(5);
  BatchNorm2d bn("bn", 2);
  bn.gamma().value = {1.3, 0.7};
  bn.beta().value = {0.2, -0.1};
  Tensor4 x = random_tensor(rng, 3, 2, 3, 3);
  const Tensor4 probe = random_tensor(rng, 3, 2, 3, 3);
  bn.gamma().zero_grad();
  bn.beta().zero_grad();
  bn.forward_train(x);
  const Tensor4 dx = bn.backward(probe);
  BatchNorm2d scratch = bn;
  auto loss = [&] {
    scratch.gamma().value = bn.gamma().value;
    scratch.beta().value = bn.beta().value;
    return dot(scratch.forward_train(x), probe);
  };
  CHECK(worst_error(x.data, dx.data, loss) < 1e-5);
  const std::vector<double> dg = bn.gamma().grad;
  CHECK(worst_error(bn.gamma().value, dg, loss) < 1e-6);
}

TEST_CASE("batch norm: batch statistics in training, running statistics at inference") {
  std::mt19937_64 rng(6);
  BatchNorm2d bn("bn", 1, 1.0);
  Tensor4 x = random_tensor(rng, 4, 1, 2, 2);
  for (auto& v : x.data) v = 3.0 * v + 5.0;
  const Tensor4 train = bn.forward_train(x);
  double mean = 0.0;
  for (double v : train.data) mean += v;
  CHECK(std::abs(mean / train.data.size()) < 1e-9);
  // Momentum 1: the running estimates equal the last batch (variance unbiased).
  const Tensor4 eval = bn.forward(x);
  double eval_mean = 0.0;
  for (double v : eval.data) eval_mean += v;
  CHECK(std::abs(eval_mean / eval.data.size()) < 1e-9);
  BatchNorm2d fresh("bn", 1);
  const Tensor4 identity = fresh.forward(x);
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    CHECK(identity.data[k] == doctest::Approx(x.data[k] / std::sqrt(1.0 + fresh.eps())));
  }
}

TEST_CASE("activation head and encoder backpropagate correctly") {
  for (const char* padding : {"zeros", "circular"}) {
    std::mt19937_64 rng(7);
    BuiltinEncoder enc({4, 5}, InitScheme::kKaimingNormal, rng);
    enc.set_padding_mode(parse_padding_mode(padding));
    ActivationHead head(5, InitScheme::kKaimingNormal, 0.0, rng);
    head.conv().set_padding_mode(parse_padding_mode(padding));
    Tensor4 images = random_tensor(rng, 3, 3, 8, 8);
    const Tensor4 probe = random_tensor(rng, 3, 1, 2, 2);

    for (Parameter* p : enc.parameters()) p->zero_grad();
    for (Parameter* p : head.parameters()) p->zero_grad();
    const Tensor4 features = enc.forward_train(images);
    head.forward_train(features);
    const Tensor4 dz = head.backward(probe);
    const Tensor4 dimg = enc.backward(dz);

    ActivationHead scratch = head;
    auto loss = [&] {
      for (std::size_t k = 0; k < head.parameters().size(); ++k) {
        scratch.parameters()[k]->value = head.parameters()[k]->value;
      }
      return dot(scratch.forward_train(enc.forward(images)), probe);
    };
    CHECK(worst_error(images.data, dimg.data, loss) < 1e-4);
    for (Parameter* p : enc.parameters()) {
      const std::vector<double> g = p->grad;
      CHECK(worst_error(p->value, g, loss) < 1e-4);
    }
    for (Parameter* p : head.parameters()) {
      const std::vector<double> g = p->grad;
      CHECK(worst_error(p->value, g, loss) < 1e-4);
    }
  }
}
