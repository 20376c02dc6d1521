#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2am/config.hpp"
#include "c2am/contrastive.hpp"
#include "c2am/disentangler.hpp"

namespace c2am {

// Encoder (built-in or precomputed features) plus the activation head.
class C2amModel {
 public:
  // Fresh parameters drawn from config.seed.
  explicit C2amModel(const Config& config);

  [[nodiscard]] const Config& config() const { return config_; }
  [[nodiscard]] bool has_builtin_encoder() const { return encoder_.has_value(); }
  BuiltinEncoder& encoder();
  [[nodiscard]] const EncoderHandle& backbone() const;
  [[nodiscard]] const PrecomputedFeatures* precomputed() const { return features_.get(); }
  ActivationHead& head() { return head_; }
  [[nodiscard]] const ActivationHead& head() const { return head_; }

  // Parameters updated by the optimizer (encoder excluded when frozen).
  std::vector<Parameter*> trainable_parameters();
  // Every named array that makes up the model state, running statistics included.
  std::vector<std::pair<std::string, std::vector<double>*>> state();

  // Eval-mode maps for a batch of images.
  [[nodiscard]] std::vector<ActivationMap> infer(const ImageBatch& batch) const;

 private:
  Config config_;
  std::optional<BuiltinEncoder> encoder_;
  std::unique_ptr<PrecomputedFeatures> features_;
  ActivationHead head_;
};

// Channel count of the first `*.c2am` file in a feature directory.
int probe_feature_channels(const std::filesystem::path& dir);

// Mean breakdown of one epoch.
struct EpochSummary {
  int epoch = 0;
  LossBreakdown mean;
};

struct Checkpoint {
  Config config;
  int epoch = 0;
  std::vector<EpochSummary> history;
};

// Layout:
//   "C2CK", u8 version, u32 LE header length, JSON header
//   then, for every state array listed in the header, float64 LE values.
inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, C2amModel& model, const Checkpoint& meta);

struct LoadedCheckpoint {
  Checkpoint meta;
  std::unique_ptr<C2amModel> model;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace c2am
