#pragma once

#include <filesystem>
#include <vector>

#include "c2am/postprocess.hpp"
#include "c2am/types.hpp"

namespace c2am {

// Per-pixel backgroundness in [0,1] at image resolution.
using BackgroundCue = Grid<double>;
// 0 = background, otherwise a class id.
using LabelMap = Grid<int>;

// Class activation maps for the classes present in one image.
struct CamStack {
  std::vector<int> class_ids;
  std::vector<Grid<double>> maps;

  // Throws unless ids and maps line up, ids are positive and unique, and all
  // maps share one size with values in [0,1].
  void validate() const;
};

// Min-max normalizes every map in place (constant maps become zero).
CamStack normalize_cam_stack(CamStack stack);

// 1 - P_fg, bilinearly resized to `image` and clipped to [0,1]. With
// `normalize_foreground` the foreground map is min-max normalized first.
BackgroundCue extract_bg_cues(const ActivationMap& p, const PolarityDecision& polarity, ImageSize image,
                              bool normalize_foreground = false);

// Argmax over [cue, class maps...]. Background wins ties with the cue; the
// lowest class id wins ties among classes.
LabelMap refine_cam(const CamStack& cam, const BackgroundCue& cue);

// Grayscale PNG with pixel = round-half-up(255 · cue): 255 background, 0 foreground.
void export_bg_png(const BackgroundCue& cue, const std::filesystem::path& path);
BackgroundCue read_bg_png(const std::filesystem::path& path);

}  // namespace c2am
