#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2am/dataset.hpp"
#include "c2am/metrics.hpp"
#include "c2am/model.hpp"
#include "c2am/postprocess.hpp"
#include "c2am/refine.hpp"

namespace c2am {

// Eval-mode maps at feature resolution; `image` holds the original image size.
std::vector<NamedMap> infer_maps(const C2amModel& model, const Dataset& dataset,
                                 std::span<const std::string> ids, int batch_size = 32);

// <dir>/<id>.c2am per map plus <dir>/index.csv (image_id,height,width).
void write_maps(const std::filesystem::path& dir, std::span<const NamedMap> maps);
std::vector<NamedMap> read_maps(const std::filesystem::path& dir);

// Map resampled to its image size.
ActivationMap upsample_to_image(const NamedMap& entry);

// Border-contact vote on image-resolution maps.
PolarityDecision calibrate_polarity(std::span<const NamedMap> calib, double theta);

// θ from the MaxBoxAccV2 grid maximizing GT-known localization on a labelled split.
struct ThetaCalibration {
  double theta = 0.5;
  double gt_known = 0.0;
};
ThetaCalibration calibrate_theta(std::span<const NamedMap> calib, const PolarityDecision& polarity,
                                 const GtBoxTable& gts);

nlohmann::json polarity_json(const PolarityDecision& decision);
PolarityDecision polarity_from_json(const nlohmann::json& j);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// IoU between the polarity-corrected map binarized at θ and the nonzero GT pixels.
double mask_iou(const NamedMap& entry, const PolarityDecision& polarity, double theta, const Grid<int>& gt);

struct MaskIouSummary {
  std::vector<double> per_image;
  double median = 0.0;
  double mean = 0.0;
};
MaskIouSummary mask_iou_summary(std::span<const NamedMap> maps, const PolarityDecision& polarity, double theta,
                                const Dataset& dataset);

double median(std::vector<double> values);

// Polarity-corrected maps for MaxBoxAccV2 and pseudo boxes.
std::vector<NamedMap> corrected(std::span<const NamedMap> maps, const PolarityDecision& polarity);

nlohmann::json loc_result_json(const LocResult& r);
nlohmann::json max_box_acc_json(const MaxBoxAccResult& r);
nlohmann::json seg_iou_json(const SegIouResult& r);

// CamStack from <dir>/<id>.c2am (K×H×W) and <dir>/<id>.json {"class_ids": [...]}.
CamStack read_cam_stack(const std::filesystem::path& dir, const std::string& id);

struct WsssOutcome {
  SegConfusion refined;
  SegConfusion baseline;
};
// Refines every image's CAM with its background cue and accumulates confusions
// against the GT masks; the baseline uses a constant cue of `baseline_cue`.
// Refined label maps and cue PNGs are written under `out_dir` when it is set.
WsssOutcome run_wsss(std::span<const NamedMap> maps, const PolarityDecision& polarity, const Dataset& dataset,
                     const std::filesystem::path& cam_dir, double baseline_cue,
                     const std::filesystem::path& out_dir = {});

}  // namespace c2am
