#include "c2am/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "c2am/errors.hpp"

namespace c2am {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const int ix0 = std::max(a.xmin, b.xmin);
  const int iy0 = std::max(a.ymin, b.ymin);
  const int ix1 = std::min(a.xmax, b.xmax);
  const int iy1 = std::min(a.ymax, b.ymax);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  const long long inter = static_cast<long long>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
  const long long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double best_iou(const BoundingBox& pred, std::span<const BoundingBox> gts) {
  double best = 0.0;
  for (const auto& gt : gts) best = std::max(best, box_iou(pred, gt));
  return best;
}

namespace {

const std::vector<BoundingBox>& gt_boxes_for(const GtBoxTable& gts, const std::string& id) {
  const auto it = gts.find(id);
  if (it == gts.end() || it->second.empty()) {
    throw InputError("no ground-truth box for image '" + id + "'");
  }
  return it->second;
}

}  // namespace

double gt_known_loc(const PredBoxTable& preds, const GtBoxTable& gts) {
  if (preds.empty()) throw InputError("gt_known_loc on an empty prediction table");
  int correct = 0;
  for (const auto& [id, box] : preds) {
    if (best_iou(box, gt_boxes_for(gts, id)) >= kLocIouThreshold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double topk_loc(const PredBoxTable& preds, const GtBoxTable& gts, const ClassTable& gt_classes,
                const RankedClassTable& predictions, int k) {
  if (preds.empty()) throw InputError("topk_loc on an empty prediction table");
  if (k < 1) throw InputError("top-k needs k ≥ 1");
  int correct = 0;
  for (const auto& [id, box] : preds) {
    const auto cls = gt_classes.find(id);
    if (cls == gt_classes.end()) throw InputError("no ground-truth class for image '" + id + "'");
    const auto ranked = predictions.find(id);
    if (ranked == predictions.end()) throw InputError("missing class predictions for image '" + id + "'");
    const auto& list = ranked->second;
    const auto end = list.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(list.size()));
    const bool class_ok = std::find(list.begin(), end, cls->second) != end;
    if (class_ok && best_iou(box, gt_boxes_for(gts, id)) >= kLocIouThreshold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

LocResult localization_accuracy(const PredBoxTable& preds, const GtBoxTable& gts, const ClassTable* gt_classes,
                                const RankedClassTable* predictions) {
  LocResult result;
  result.n_images = static_cast<int>(preds.size());
  result.gt_known = gt_known_loc(preds, gts);
  if (gt_classes != nullptr && predictions != nullptr) {
    result.top1 = topk_loc(preds, gts, *gt_classes, *predictions, 1);
    result.top5 = topk_loc(preds, gts, *gt_classes, *predictions, 5);
  }
  return result;
}

std::vector<double> max_box_acc_thresholds() {
  std::vector<double> taus;
  for (int i = 0; i < 20; ++i) taus.push_back(i * 0.05);
  return taus;
}

MaxBoxAccResult max_box_acc_v2(std::span<const NamedMap> maps, const GtBoxTable& gts) {
  if (maps.empty()) throw InputError("max_box_acc_v2 on an empty map set");
  const std::vector<double> taus = max_box_acc_thresholds();
  // hits[t][d]: images whose box at tau t reaches IoU threshold d.
  std::vector<std::array<int, 3>> hits(taus.size(), {0, 0, 0});
  for (const auto& entry : maps) {
    const auto& gt = gt_boxes_for(gts, entry.id);
    ImageSize image = entry.image;
    if (image.height <= 0 || image.width <= 0) image = {entry.map.height, entry.map.width};
    const BoundingBox full{0, 0, image.width - 1, image.height - 1};
    bool constant = false;
    const ActivationMap normalized = min_max_normalize(entry.map, &constant);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      BoundingBox box = full;
      if (!constant) {
        BinaryMask mask{Grid<std::uint8_t>(normalized.height, normalized.width, 0), taus[t], false};
        for (std::size_t k = 0; k < normalized.values.size(); ++k) {
          mask.pixels.values[k] = normalized.values[k] >= taus[t] ? 1 : 0;
        }
        if (mask.any()) box = extract_bbox(largest_component(mask), image);
      }
      const double iou = best_iou(box, gt);
      for (std::size_t d = 0; d < kMaxBoxAccIouThresholds.size(); ++d) {
        if (iou >= kMaxBoxAccIouThresholds[d]) ++hits[t][d];
      }
    }
  }
  MaxBoxAccResult result;
  const double n = static_cast<double>(maps.size());
  for (std::size_t d = 0; d < kMaxBoxAccIouThresholds.size(); ++d) {
    int best = -1;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (hits[t][d] > best) {
        best = hits[t][d];
        result.best_threshold[d] = taus[t];
      }
    }
    result.best_accuracy[d] = best / n;
  }
  result.score = (result.best_accuracy[0] + result.best_accuracy[1] + result.best_accuracy[2]) / 3.0;
  return result;
}

SegConfusion::SegConfusion(int classes)
    : num_classes(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {
  if (classes < 1) throw InputError("confusion matrix needs at least one class");
}

std::int64_t SegConfusion::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

void SegConfusion::accumulate(const Grid<int>& gt, const Grid<int>& pred, int ignore_label) {
  if (!gt.same_shape(pred)) throw ShapeError("ground-truth and predicted label maps differ in size");
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const int g = gt.values[i];
    if (g == ignore_label) continue;
    const int p = pred.values[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
      throw InputError("label " + std::to_string(g < 0 || g >= num_classes ? g : p) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++at(g, p);
  }
}

SegIouResult seg_iou(const SegConfusion& confusion) {
  if (confusion.total() == 0) throw InputError("seg_iou on an empty confusion matrix");
  const int k = confusion.num_classes;
  SegIouResult result;
  result.per_class.assign(k, std::nullopt);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = confusion.at(c, c);
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += confusion.at(o, c);
      fn += confusion.at(c, o);
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    result.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  result.miou = sum / present;
  return result;
}

}  // namespace c2am
