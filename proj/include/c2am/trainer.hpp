#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "c2am/contrastive.hpp"
#include "c2am/dataset.hpp"
#include "c2am/model.hpp"

namespace c2am {

struct StepRecord {
  int epoch = 0;
  int step = 0;
  LossBreakdown loss;
};

struct TrainOptions {
  // CSV log `epoch,step,l_neg,l_pos_f,l_pos_b,l_total`; empty disables it.
  std::filesystem::path log_path;
  // Receives epoch_<k>.ckpt and last.ckpt; empty disables checkpointing.
  std::filesystem::path checkpoint_dir;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochSummary> epochs;
  std::filesystem::path last_checkpoint;
};

// Computes the loss for one batch, backpropagates and applies one SGD step.
// Throws DivergenceError on a non-finite loss.
class Trainer {
 public:
  explicit Trainer(C2amModel& model);

  // images: n×3×H×W normalized; ids only matter for precomputed features.
  LossBreakdown step(const Tensor4& images, std::span<const std::string> ids);
  // Loss and gradients without the parameter update.
  LossBreakdown forward_backward(const Tensor4& images, std::span<const std::string> ids);
  void apply_update();
  void set_encoder_frozen(bool frozen) { encoder_frozen_ = frozen; }

 private:
  std::vector<Parameter*> updated_parameters();

  C2amModel& model_;
  bool encoder_frozen_ = false;
};

TrainResult train(C2amModel& model, const Dataset& dataset, const TrainOptions& options = {});

// Trailing moving average with window `window` (shorter at the start).
std::vector<double> smooth(std::span<const double> values, int window);

}  // namespace c2am
