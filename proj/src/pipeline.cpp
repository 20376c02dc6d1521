#include "c2am/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "c2am/errors.hpp"
#include "c2am/tensor_io.hpp"

namespace c2am {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<NamedMap> infer_maps(const C2amModel& model, const Dataset& dataset, std::span<const std::string> ids,
                                 int batch_size) {
  if (batch_size < 1) throw InputError("inference batch size must be ≥ 1");
  const int size = model.config().image_size;
  std::vector<NamedMap> out;
  out.reserve(ids.size());
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const std::size_t count = std::min<std::size_t>(batch_size, ids.size() - start);
    ImageBatch batch{Tensor4(static_cast<int>(count), 3, size, size), {}};
    std::vector<ImageSize> sizes;
    for (std::size_t i = 0; i < count; ++i) {
      const std::string& id = ids[start + i];
      const RgbImage image = dataset.image(id);
      sizes.push_back({image.height, image.width});
      write_normalized(image, size, batch.data.sample(static_cast<int>(i)));
      batch.ids.push_back(id);
    }
    std::vector<ActivationMap> maps = model.infer(batch);
    for (std::size_t i = 0; i < count; ++i) out.push_back({batch.ids[i], std::move(maps[i]), sizes[i]});
  }
  return out;
}

void write_maps(const fs::path& dir, std::span<const NamedMap> maps) {
  fs::create_directories(dir);
  std::ofstream index(dir / "index.csv", std::ios::binary | std::ios::trunc);
  if (!index) throw IoError("cannot write " + (dir / "index.csv").string());
  index << "image_id,height,width\n";
  for (const auto& m : maps) {
    write_tensor(dir / (m.id + ".c2am"), to_stored(m.map));
    index << m.id << "," << m.image.height << "," << m.image.width << "\n";
  }
}

std::vector<NamedMap> read_maps(const fs::path& dir) {
  const fs::path index_path = dir / "index.csv";
  std::ifstream index(index_path);
  if (!index) throw IoError("no map index at " + index_path.string() + " (run `c2am infer` first)");
  std::vector<NamedMap> maps;
  std::string line;
  std::getline(index, line);
  if (line.rfind("image_id,height,width", 0) != 0) throw FormatError(index_path.string() + ": bad header");
  while (std::getline(index, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw FormatError(index_path.string() + ": bad row '" + line + "'");
    NamedMap m;
    m.id = line.substr(0, a);
    try {
      m.image = {std::stoi(line.substr(a + 1, b - a - 1)), std::stoi(line.substr(b + 1))};
    } catch (const std::exception&) {
      throw FormatError(index_path.string() + ": bad size in row '" + line + "'");
    }
    m.map = map_from_stored(read_tensor(dir / (m.id + ".c2am")));
    maps.push_back(std::move(m));
  }
  return maps;
}

ActivationMap upsample_to_image(const NamedMap& entry) {
  if (entry.image.height <= 0 || entry.image.width <= 0) return entry.map;
  return resize_bilinear(entry.map, entry.image.height, entry.image.width);
}

PolarityDecision calibrate_polarity(std::span<const NamedMap> calib, double theta) {
  std::vector<ActivationMap> maps;
  maps.reserve(calib.size());
  for (const auto& m : calib) maps.push_back(upsample_to_image(m));
  return resolve_polarity(maps, theta);
}

std::vector<NamedMap> corrected(std::span<const NamedMap> maps, const PolarityDecision& polarity) {
  std::vector<NamedMap> out;
  out.reserve(maps.size());
  for (const auto& m : maps) out.push_back({m.id, foreground_map(upsample_to_image(m), polarity), m.image});
  return out;
}

ThetaCalibration calibrate_theta(std::span<const NamedMap> calib, const PolarityDecision& polarity,
                                 const GtBoxTable& gts) {
  const std::vector<NamedMap> maps = corrected(calib, polarity);
  ThetaCalibration best{kDefaultTheta, -1.0};
  for (double theta : max_box_acc_thresholds()) {
    if (theta <= 0.0) continue;
    PredBoxTable preds;
    for (const auto& m : maps) preds[m.id] = box_from_map(m.map, theta, m.image).box;
    const double acc = gt_known_loc(preds, gts);
    if (acc > best.gt_known) best = {theta, acc};
  }
  return best;
}

json polarity_json(const PolarityDecision& d) {
  return {{"flipped", d.flipped},
          {"votes_for", d.votes_for},
          {"votes_against", d.votes_against},
          {"calibration_size", d.calibration_size},
          {"tie", d.tie}};
}

PolarityDecision polarity_from_json(const json& j) {
  PolarityDecision d;
  d.flipped = j.at("flipped").get<bool>();
  d.votes_for = j.value("votes_for", 0);
  d.votes_against = j.value("votes_against", 0);
  d.calibration_size = j.value("calibration_size", 0);
  d.tie = j.value("tie", false);
  return d;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

double mask_iou(const NamedMap& entry, const PolarityDecision& polarity, double theta, const Grid<int>& gt) {
  const ActivationMap fg = foreground_map(upsample_to_image(entry), polarity);
  if (fg.height != gt.height || fg.width != gt.width) {
    throw ShapeError("map for '" + entry.id + "' does not match its mask size");
  }
  const BinaryMask mask = binarize(fg, theta);
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (std::size_t k = 0; k < gt.values.size(); ++k) {
    const bool g = gt.values[k] != 0 && gt.values[k] != 255;
    const bool p = mask.pixels.values[k] != 0;
    inter += (g && p) ? 1 : 0;
    uni += (g || p) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

MaskIouSummary mask_iou_summary(std::span<const NamedMap> maps, const PolarityDecision& polarity, double theta,
                                const Dataset& dataset) {
  MaskIouSummary s;
  for (const auto& m : maps) {
    const auto gt = dataset.mask(m.id);
    if (!gt) throw IoError("no GT mask for '" + m.id + "' in " + dataset.root().string());
    s.per_image.push_back(mask_iou(m, polarity, theta, *gt));
  }
  s.median = median(s.per_image);
  s.mean = std::accumulate(s.per_image.begin(), s.per_image.end(), 0.0) / static_cast<double>(s.per_image.size());
  return s;
}

json loc_result_json(const LocResult& r) {
  json j{{"gt_known", r.gt_known}, {"n_images", r.n_images}};
  j["top1"] = r.top1 ? json(*r.top1) : json(nullptr);
  j["top5"] = r.top5 ? json(*r.top5) : json(nullptr);
  return j;
}

json max_box_acc_json(const MaxBoxAccResult& r) {
  json per = json::array();
  for (std::size_t d = 0; d < kMaxBoxAccIouThresholds.size(); ++d) {
    per.push_back({{"iou_threshold", kMaxBoxAccIouThresholds[d]},
                   {"best_accuracy", r.best_accuracy[d]},
                   {"best_map_threshold", r.best_threshold[d]}});
  }
  return {{"score", r.score}, {"per_iou_threshold", per}};
}

json seg_iou_json(const SegIouResult& r) {
  json per = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    per.push_back({{"class_id", c}, {"iou", r.per_class[c] ? json(*r.per_class[c]) : json(nullptr)}});
  }
  return {{"miou", r.miou}, {"per_class", per}};
}

CamStack read_cam_stack(const fs::path& dir, const std::string& id) {
  const fs::path tensor_path = dir / (id + ".c2am");
  const fs::path sidecar_path = dir / (id + ".json");
  if (!fs::exists(tensor_path)) throw IoError("missing CAM file " + tensor_path.string());
  const StoredTensor t = read_tensor(tensor_path);
  const json sidecar = read_json(sidecar_path);
  CamStack stack;
  stack.class_ids = sidecar.at("class_ids").get<std::vector<int>>();
  if (t.dims.size() != 3 && !(t.dims.size() == 2 && stack.class_ids.size() == 1)) {
    throw FormatError(tensor_path.string() + ": CAM tensor must be K×H×W");
  }
  const std::size_t k = t.dims.size() == 3 ? t.dims[0] : 1;
  const int h = static_cast<int>(t.dims[t.dims.size() - 2]);
  const int w = static_cast<int>(t.dims.back());
  if (k != stack.class_ids.size()) {
    throw FormatError(tensor_path.string() + ": " + std::to_string(k) + " maps but " +
                      std::to_string(stack.class_ids.size()) + " class ids in the sidecar");
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t m = 0; m < k; ++m) {
    Grid<double> g(h, w);
    for (std::size_t i = 0; i < plane; ++i) g.values[i] = t.values[m * plane + i];
    stack.maps.push_back(std::move(g));
  }
  return stack;
}

WsssOutcome run_wsss(std::span<const NamedMap> maps, const PolarityDecision& polarity, const Dataset& dataset,
                     const fs::path& cam_dir, double baseline_cue, const fs::path& out_dir) {
  if (maps.empty()) throw InputError("no activation maps to refine");
  if (!out_dir.empty()) {
    fs::create_directories(out_dir / "labels");
    fs::create_directories(out_dir / "bg_cues");
  }
  struct Item {
    Grid<int> gt;
    LabelMap refined;
    LabelMap baseline;
  };
  std::vector<Item> items;
  int max_label = 0;
  for (const auto& m : maps) {
    const ImageSize image = m.image.height > 0 ? m.image : ImageSize{m.map.height, m.map.width};
    CamStack stack = read_cam_stack(cam_dir, m.id);
    for (auto& g : stack.maps) {
      if (g.height != image.height || g.width != image.width) g = resize_bilinear(g, image.height, image.width);
    }
    stack = normalize_cam_stack(std::move(stack));
    const BackgroundCue cue = extract_bg_cues(m.map, polarity, image, true);
    const auto gt = dataset.mask(m.id);
    if (!gt) throw IoError("no GT mask for '" + m.id + "' in " + dataset.root().string());
    if (gt->height != image.height || gt->width != image.width) {
      throw ShapeError("GT mask for '" + m.id + "' does not match the image size");
    }
    Item item{*gt, refine_cam(stack, cue), refine_cam(stack, BackgroundCue(image.height, image.width, baseline_cue))};
    for (int v : item.gt.values) {
      if (v != 255) max_label = std::max(max_label, v);
    }
    for (int id : stack.class_ids) max_label = std::max(max_label, id);
    if (!out_dir.empty()) {
      write_label_png(out_dir / "labels" / (m.id + ".png"), item.refined);
      export_bg_png(cue, out_dir / "bg_cues" / (m.id + ".png"));
    }
    items.push_back(std::move(item));
  }
  WsssOutcome outcome{SegConfusion(max_label + 1), SegConfusion(max_label + 1)};
  for (const auto& item : items) {
    outcome.refined.accumulate(item.gt, item.refined);
    outcome.baseline.accumulate(item.gt, item.baseline);
  }
  return outcome;
}

}  // namespace c2am
