#include "c2am/disentangler.hpp"

#include <cmath>
#include <sstream>

#include "c2am/errors.hpp"
#include "c2am/tensor_io.hpp"

namespace c2am {

void ImageBatch::validate() const {
  if (data.n < 1) throw InputError("image batch is empty");
  if (data.c != 3) throw ShapeError("images must have 3 channels, got " + std::to_string(data.c));
  if (data.h < 32 || data.w < 32) {
    throw ShapeError("images must be at least 32×32, got " + std::to_string(data.h) + "×" +
                     std::to_string(data.w));
  }
  if (static_cast<int>(ids.size()) != data.n) {
    throw InputError("batch has " + std::to_string(data.n) + " images but " + std::to_string(ids.size()) +
                     " ids");
  }
  for (double v : data.data) {
    if (!std::isfinite(v)) throw InputError("image batch contains non-finite values");
  }
}

BuiltinEncoder::BuiltinEncoder(std::vector<int> channels, InitScheme scheme, std::mt19937_64& rng)
    : channels_(std::move(channels)) {
  if (channels_.empty()) throw ConfigError("encoder needs at least one block");
  int in = 3;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    convs_.emplace_back("encoder." + std::to_string(i), in, channels_[i], 3, 2, 1);
    convs_.back().initialize(scheme, 0.0, rng);
    in = channels_[i];
  }
}

void BuiltinEncoder::set_padding_mode(PaddingMode mode) {
  for (auto& conv : convs_) conv.set_padding_mode(mode);
}

int BuiltinEncoder::out_channels() const { return channels_.empty() ? 0 : channels_.back(); }

Tensor4 BuiltinEncoder::forward(const Tensor4& images) const {
  Tensor4 x = images;
  for (const auto& conv : convs_) {
    x = conv.forward(x);
    relu_inplace(x);
  }
  return x;
}

Tensor4 BuiltinEncoder::forward_train(const Tensor4& images) {
  activations_.clear();
  Tensor4 x = images;
  for (auto& conv : convs_) {
    x = conv.forward_train(x);
    relu_inplace(x);
    activations_.push_back(x);
  }
  return x;
}

Tensor4 BuiltinEncoder::backward(const Tensor4& grad_features) {
  if (activations_.size() != convs_.size()) {
    throw ShapeError("encoder backward without a matching forward_train");
  }
  Tensor4 grad = grad_features;
  for (std::size_t i = convs_.size(); i-- > 0;) {
    relu_backward_inplace(grad, activations_[i]);
    grad = convs_[i].backward(grad);
  }
  return grad;
}

std::vector<Parameter*> BuiltinEncoder::parameters() {
  std::vector<Parameter*> params;
  for (auto& conv : convs_) {
    params.push_back(&conv.weight());
    params.push_back(&conv.bias());
  }
  return params;
}

std::vector<FeatureMap> BuiltinEncoder::encode(const ImageBatch& batch) const {
  batch.validate();
  const Tensor4 features = forward(batch.data);
  std::vector<FeatureMap> out;
  out.reserve(features.n);
  for (int i = 0; i < features.n; ++i) out.push_back(feature_map_from(features, i, stride()));
  return out;
}

std::string BuiltinEncoder::describe() const {
  std::ostringstream os;
  os << "builtin(";
  for (std::size_t i = 0; i < channels_.size(); ++i) os << (i ? "," : "") << channels_[i];
  os << ")";
  return os.str();
}

PrecomputedFeatures::PrecomputedFeatures(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw IoError("precomputed feature directory not found: " + dir_.string());
  }
}

FeatureMap PrecomputedFeatures::load(const std::string& id, ImageSize image) const {
  const auto path = dir_ / (id + ".c2am");
  if (!std::filesystem::exists(path)) throw IoError("missing precomputed feature file " + path.string());
  FeatureMap z = features_from_stored(read_tensor(path));
  if (image.height > 0) {
    if (image.height % z.height != 0 || image.width % z.width != 0 ||
        image.height / z.height != image.width / z.width) {
      throw ShapeError("feature map " + path.string() + " does not divide the image size evenly");
    }
    z.stride = image.height / z.height;
  }
  return z;
}

std::vector<FeatureMap> PrecomputedFeatures::encode(const ImageBatch& batch) const {
  batch.validate();
  std::vector<FeatureMap> out;
  out.reserve(batch.ids.size());
  for (const auto& id : batch.ids) out.push_back(load(id, {batch.data.h, batch.data.w}));
  return out;
}

std::string PrecomputedFeatures::describe() const { return "features-dir:" + dir_.string(); }

ActivationHead::ActivationHead(int channels, InitScheme scheme, double scale, std::mt19937_64& rng)
    : conv_("head.conv", channels, 1, 3, 1, 1), norm_("head.bn", 1) {
  conv_.initialize(scheme, scale, rng);
}

Tensor4 ActivationHead::logits(const Tensor4& features) const {
  return norm_.forward(conv_.forward(features));
}

ActivationMap ActivationHead::apply(const FeatureMap& z) const {
  if (z.channels != channels()) {
    throw ShapeError("activation head expects " + std::to_string(channels()) + " channels, got " +
                     std::to_string(z.channels));
  }
  const FeatureMap* one = &z;
  const Tensor4 out = logits(stack_features(std::span<const FeatureMap>(one, 1)));
  ActivationMap p(z.height, z.width);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = sigmoid(out.data[i]);
  return p;
}

Tensor4 ActivationHead::forward_train(const Tensor4& features) {
  if (features.c != channels()) {
    throw ShapeError("activation head expects " + std::to_string(channels()) + " channels, got " +
                     std::to_string(features.c));
  }
  maps_ = norm_.forward_train(conv_.forward_train(features));
  for (auto& v : maps_.data) v = sigmoid(v);
  return maps_;
}

Tensor4 ActivationHead::backward(const Tensor4& grad_maps) {
  if (grad_maps.data.size() != maps_.data.size()) {
    throw ShapeError("activation head backward without a matching forward_train");
  }
  Tensor4 grad = grad_maps;
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    const double p = maps_.data[i];
    grad.data[i] *= p * (1.0 - p);
  }
  return conv_.backward(norm_.backward(grad));
}

std::vector<Parameter*> ActivationHead::parameters() {
  return {&conv_.weight(), &conv_.bias(), &norm_.gamma(), &norm_.beta()};
}

std::vector<FeatureMap> encode(const ImageBatch& batch, const EncoderHandle& backbone) {
  return backbone.encode(batch);
}

ActivationMap activation_head(const FeatureMap& z, const ActivationHead& head) { return head.apply(z); }

FgBgRepresentation disentangle(const FeatureMap& z, const ActivationMap& p) {
  if (z.height != p.height || z.width != p.width) {
    throw ShapeError("feature map is " + std::to_string(z.height) + "×" + std::to_string(z.width) +
                     " but activation map is " + std::to_string(p.height) + "×" + std::to_string(p.width));
  }
  FgBgRepresentation rep;
  rep.foreground.assign(z.channels, 0.0);
  rep.background.assign(z.channels, 0.0);
  const int hw = z.spatial();
  for (int c = 0; c < z.channels; ++c) {
    double fg = 0.0;
    double bg = 0.0;
    for (int k = 0; k < hw; ++k) {
      const double value = z.at(c, k);
      fg += p.values[k] * value;
      bg += (1.0 - p.values[k]) * value;
    }
    rep.foreground[c] = fg;
    rep.background[c] = bg;
  }
  return rep;
}

DisentangleGradient disentangle_backward(const FeatureMap& z, const ActivationMap& p,
                                         std::span<const double> d_foreground,
                                         std::span<const double> d_background) {
  if (z.height != p.height || z.width != p.width) throw ShapeError("feature/map spatial mismatch");
  if (static_cast<int>(d_foreground.size()) != z.channels ||
      static_cast<int>(d_background.size()) != z.channels) {
    throw ShapeError("representation gradient length does not match channel count");
  }
  DisentangleGradient g{FeatureMap(z.channels, z.height, z.width, z.stride), ActivationMap(p.height, p.width)};
  const int hw = z.spatial();
  for (int c = 0; c < z.channels; ++c) {
    const double diff = d_foreground[c] - d_background[c];
    for (int k = 0; k < hw; ++k) {
      g.d_map.values[k] += z.at(c, k) * diff;
      g.d_features.at(c, k) = p.values[k] * d_foreground[c] + (1.0 - p.values[k]) * d_background[c];
    }
  }
  return g;
}

FeatureMap feature_map_from(const Tensor4& batch, int index, int stride) {
  FeatureMap z(batch.c, batch.h, batch.w, stride);
  const double* src = batch.sample(index);
  std::copy(src, src + batch.sample_size(), z.values.begin());
  return z;
}

Tensor4 stack_features(std::span<const FeatureMap> maps) {
  if (maps.empty()) return {};
  const FeatureMap& first = maps.front();
  Tensor4 batch(static_cast<int>(maps.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].channels != first.channels || maps[i].height != first.height || maps[i].width != first.width) {
      throw ShapeError("feature maps in a batch must share C×H×W");
    }
    std::copy(maps[i].values.begin(), maps[i].values.end(), batch.sample(static_cast<int>(i)));
  }
  return batch;
}

ActivationMap activation_map_from(const Tensor4& batch, int index) {
  if (batch.c != 1) throw ShapeError("activation batch must have a single channel");
  ActivationMap p(batch.h, batch.w);
  const double* src = batch.sample(index);
  std::copy(src, src + batch.plane(), p.values.begin());
  return p;
}

}  // namespace c2am
