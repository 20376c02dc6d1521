#include "c2am/refine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "c2am/errors.hpp"
#include "c2am/image_io.hpp"

namespace c2am {

void CamStack::validate() const {
  if (class_ids.empty()) throw InputError("CAM stack has no classes");
  if (class_ids.size() != maps.size()) {
    throw ShapeError("CAM stack lists " + std::to_string(class_ids.size()) + " classes but has " +
                     std::to_string(maps.size()) + " maps");
  }
  std::set<int> seen;
  for (int id : class_ids) {
    if (id <= 0) throw InputError("CAM class ids must be positive (0 is background)");
    if (!seen.insert(id).second) throw InputError("duplicate CAM class id " + std::to_string(id));
  }
  for (const auto& m : maps) {
    if (!m.same_shape(maps.front())) throw ShapeError("CAM maps differ in size");
    for (double v : m.values) {
      if (!(v >= 0.0 && v <= 1.0)) throw InputError("CAM values must lie in [0,1]; normalize the stack first");
    }
  }
}

CamStack normalize_cam_stack(CamStack stack) {
  for (auto& m : stack.maps) m = min_max_normalize(m);
  return stack;
}

BackgroundCue extract_bg_cues(const ActivationMap& p, const PolarityDecision& polarity, ImageSize image,
                              bool normalize_foreground) {
  if (p.empty()) throw InputError("activation map is empty");
  if (image.height <= 0 || image.width <= 0) throw InputError("image dimensions are required for the cue");
  ActivationMap fg = foreground_map(p, polarity);
  if (normalize_foreground) {
    bool constant = false;
    ActivationMap normalized = min_max_normalize(fg, &constant);
    if (!constant) fg = std::move(normalized);
  }
  BackgroundCue cue = resize_bilinear(invert(fg), image.height, image.width);
  for (auto& v : cue.values) v = std::clamp(v, 0.0, 1.0);
  return cue;
}

LabelMap refine_cam(const CamStack& cam, const BackgroundCue& cue) {
  cam.validate();
  if (!cam.maps.front().same_shape(cue)) {
    throw ShapeError("background cue is " + std::to_string(cue.height) + "×" + std::to_string(cue.width) +
                     " but CAMs are " + std::to_string(cam.maps.front().height) + "×" +
                     std::to_string(cam.maps.front().width));
  }
  LabelMap labels(cue.height, cue.width, 0);
  for (std::size_t k = 0; k < cue.values.size(); ++k) {
    int best_id = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < cam.class_ids.size(); ++c) {
      const double v = cam.maps[c].values[k];
      if (v > best || (v == best && cam.class_ids[c] < best_id)) {
        best = v;
        best_id = cam.class_ids[c];
      }
    }
    labels.values[k] = best > cue.values[k] ? best_id : 0;
  }
  return labels;
}

void export_bg_png(const BackgroundCue& cue, const std::filesystem::path& path) {
  Grid<std::uint8_t> gray(cue.height, cue.width, 0);
  for (std::size_t k = 0; k < cue.values.size(); ++k) {
    const double v = std::clamp(cue.values[k], 0.0, 1.0);
    gray.values[k] = static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
  }
  write_png_gray(path, gray);
}

BackgroundCue read_bg_png(const std::filesystem::path& path) {
  const Grid<std::uint8_t> gray = read_png_gray(path);
  BackgroundCue cue(gray.height, gray.width);
  for (std::size_t k = 0; k < gray.values.size(); ++k) cue.values[k] = gray.values[k] / 255.0;
  return cue;
}

}  // namespace c2am
