#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2am/postprocess.hpp"
#include "c2am/types.hpp"

namespace c2am {

using PredBoxTable = std::map<std::string, BoundingBox>;
using GtBoxTable = std::map<std::string, std::vector<BoundingBox>>;
using ClassTable = std::map<std::string, int>;
// Ranked class predictions per image, best first.
using RankedClassTable = std::map<std::string, std::vector<int>>;

inline constexpr double kLocIouThreshold = 0.5;
inline constexpr std::array<double, 3> kMaxBoxAccIouThresholds = {0.3, 0.5, 0.7};

struct LocResult {
  double gt_known = 0.0;
  std::optional<double> top1;
  std::optional<double> top5;
  int n_images = 0;
};

// Inclusive-coordinate IoU.
double box_iou(const BoundingBox& a, const BoundingBox& b);

// Highest IoU between `pred` and any box in `gts` (0 for an empty list).
double best_iou(const BoundingBox& pred, std::span<const BoundingBox> gts);

// Fraction of predicted images whose best IoU is ≥ 0.5.
double gt_known_loc(const PredBoxTable& preds, const GtBoxTable& gts);

// Correct iff the GT class is among the first k predictions and best IoU ≥ 0.5.
double topk_loc(const PredBoxTable& preds, const GtBoxTable& gts, const ClassTable& gt_classes,
                const RankedClassTable& predictions, int k);

LocResult localization_accuracy(const PredBoxTable& preds, const GtBoxTable& gts,
                                const ClassTable* gt_classes = nullptr,
                                const RankedClassTable* predictions = nullptr);

// Thresholds 0.00, 0.05, ..., 0.95.
std::vector<double> max_box_acc_thresholds();

struct MaxBoxAccResult {
  double score = 0.0;
  // Best accuracy per IoU threshold and the map threshold that achieved it.
  std::array<double, 3> best_accuracy{};
  std::array<double, 3> best_threshold{};
};

// Maps are min-max normalized internally; each entry's `image` gives the box
// coordinate frame.
MaxBoxAccResult max_box_acc_v2(std::span<const NamedMap> maps, const GtBoxTable& gts);

// (K+1)×(K+1) pixel counts, rows = ground truth, cols = prediction.
struct SegConfusion {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  SegConfusion() = default;
  explicit SegConfusion(int classes);

  std::int64_t& at(int gt, int pred) { return counts[static_cast<std::size_t>(gt) * num_classes + pred]; }
  [[nodiscard]] std::int64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  [[nodiscard]] std::int64_t total() const;

  // Labels equal to `ignore_label` in the ground truth are skipped; any other
  // label ≥ num_classes throws InputError.
  void accumulate(const Grid<int>& gt, const Grid<int>& pred, int ignore_label = 255);
};

struct SegIouResult {
  // nullopt for classes absent from both GT and prediction.
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
};

SegIouResult seg_iou(const SegConfusion& confusion);

}  // namespace c2am
