#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c2am/layers.hpp"
#include "c2am/types.hpp"

namespace c2am {

// n×3×H×W normalized images plus their identifiers.
struct ImageBatch {
  Tensor4 data;
  std::vector<std::string> ids;

  // Throws InputError unless n ≥ 1, 3 channels, H,W ≥ 32, finite values and
  // one id per image.
  void validate() const;
};

// Pluggable source of feature maps.
class EncoderHandle {
 public:
  virtual ~EncoderHandle() = default;
  [[nodiscard]] virtual std::vector<FeatureMap> encode(const ImageBatch& batch) const = 0;
  [[nodiscard]] virtual std::string describe() const = 0;
};

// Stack of stride-2 3×3 conv + ReLU blocks. Output is nonnegative and the
// overall stride is 2^blocks.
class BuiltinEncoder final : public EncoderHandle {
 public:
  BuiltinEncoder() = default;
  BuiltinEncoder(std::vector<int> channels, InitScheme scheme, std::mt19937_64& rng);

  [[nodiscard]] std::vector<FeatureMap> encode(const ImageBatch& batch) const override;
  [[nodiscard]] std::string describe() const override;

  [[nodiscard]] Tensor4 forward(const Tensor4& images) const;
  Tensor4 forward_train(const Tensor4& images);
  // Accumulates parameter gradients; returns d(loss)/d(images).
  Tensor4 backward(const Tensor4& grad_features);

  [[nodiscard]] int out_channels() const;
  [[nodiscard]] int stride() const { return 1 << static_cast<int>(convs_.size()); }
  [[nodiscard]] const std::vector<int>& channels() const { return channels_; }
  void set_padding_mode(PaddingMode mode);
  std::vector<Parameter*> parameters();

 private:
  std::vector<int> channels_;
  std::vector<Conv2d> convs_;
  std::vector<Tensor4> activations_;
};

// Reads `<dir>/<image id>.c2am` (C×H×W float32) for every image in the batch.
class PrecomputedFeatures final : public EncoderHandle {
 public:
  explicit PrecomputedFeatures(std::filesystem::path dir);

  [[nodiscard]] std::vector<FeatureMap> encode(const ImageBatch& batch) const override;
  [[nodiscard]] std::string describe() const override;
  // Feature map for one id; stride is derived from `image` when given.
  [[nodiscard]] FeatureMap load(const std::string& id, ImageSize image = {}) const;

  [[nodiscard]] const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// phi(.): 3×3 conv (C -> 1, padding 1) -> batch norm -> sigmoid.
class ActivationHead {
 public:
  ActivationHead() = default;
  ActivationHead(int channels, InitScheme scheme, double scale, std::mt19937_64& rng);

  [[nodiscard]] int channels() const { return conv_.in_channels(); }

  // Eval mode: frozen normalization statistics.
  [[nodiscard]] ActivationMap apply(const FeatureMap& z) const;
  // Pre-sigmoid logits in eval mode, same layout as apply().
  [[nodiscard]] Tensor4 logits(const Tensor4& features) const;

  // Training mode: batch statistics; returns P as N×1×H×W.
  Tensor4 forward_train(const Tensor4& features);
  // Takes d(loss)/dP, accumulates parameter gradients, returns d(loss)/dZ.
  Tensor4 backward(const Tensor4& grad_maps);

  Conv2d& conv() { return conv_; }
  BatchNorm2d& norm() { return norm_; }
  [[nodiscard]] const Conv2d& conv() const { return conv_; }
  [[nodiscard]] const BatchNorm2d& norm() const { return norm_; }
  std::vector<Parameter*> parameters();

 private:
  Conv2d conv_;
  BatchNorm2d norm_;
  Tensor4 maps_;
};

// d(loss)/dZ and d(loss)/dP for one image.
struct DisentangleGradient {
  FeatureMap d_features;
  ActivationMap d_map;
};

std::vector<FeatureMap> encode(const ImageBatch& batch, const EncoderHandle& backbone);

ActivationMap activation_head(const FeatureMap& z, const ActivationHead& head);

// v_f[c] = sum_hw P[hw] Z[c,hw], v_b[c] = sum_hw (1 - P[hw]) Z[c,hw].
FgBgRepresentation disentangle(const FeatureMap& z, const ActivationMap& p);

// Chain rule through disentangle() given d(loss)/dv_f and d(loss)/dv_b.
DisentangleGradient disentangle_backward(const FeatureMap& z, const ActivationMap& p,
                                         std::span<const double> d_foreground,
                                         std::span<const double> d_background);

// Conversions between per-image and batched layouts.
FeatureMap feature_map_from(const Tensor4& batch, int index, int stride);
Tensor4 stack_features(std::span<const FeatureMap> maps);
ActivationMap activation_map_from(const Tensor4& batch, int index);

}  // namespace c2am
