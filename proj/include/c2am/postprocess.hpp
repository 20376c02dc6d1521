#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "c2am/types.hpp"

namespace c2am {

inline constexpr double kDefaultTheta = 0.5;
inline constexpr int kMinCalibrationSize = 16;

struct BinaryMask {
  Grid<std::uint8_t> pixels;
  double threshold_used = 0.0;
  // Set when the source map was constant and could not be normalized.
  bool degenerate = false;

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool any() const { return count() > 0; }
};

struct PolarityDecision {
  // true: the foreground is 1 - P.
  bool flipped = false;
  // Maps voting for P as foreground / for 1 - P as foreground. Maps whose
  // candidates tie or are both empty abstain.
  int votes_for = 0;
  int votes_against = 0;
  int calibration_size = 0;
  bool tie = false;
};

// Per-map (x - min) / (max - min). Sets *constant when max == min, in which
// case the result is all zeros.
ActivationMap min_max_normalize(const ActivationMap& map, bool* constant = nullptr);

// 1 where the normalized map is ≥ theta.
BinaryMask binarize(const ActivationMap& p, double theta);

// Keeps the largest 8-connected component; ties go to the component whose
// first pixel comes first in row-major order. Throws InputError on an empty mask.
BinaryMask largest_component(const BinaryMask& mask);

// Tight box at mask resolution, scaled to `image` (pixel c covers
// [c·s, (c+1)·s - 1] with s = image / mask), rounded and clipped.
BoundingBox extract_bbox(const BinaryMask& mask, ImageSize image);

// Fraction of the mask's pixels lying on the outer border of the grid.
double border_contact_ratio(const BinaryMask& mask);

// Border-contact majority vote over a calibration set of at least 16 maps.
PolarityDecision resolve_polarity(std::span<const ActivationMap> maps, double theta);

// P or 1 - P depending on the decision.
ActivationMap foreground_map(const ActivationMap& p, const PolarityDecision& polarity);

ActivationMap invert(const ActivationMap& p);

// Half-pixel-centred bilinear resampling (edges clamped).
ActivationMap resize_bilinear(const ActivationMap& map, int height, int width);

struct BoxExtraction {
  BoundingBox box;
  // Empty mask: the box covers the whole image.
  bool fallback = false;
};

// binarize -> largest_component -> extract_bbox, with the full-image fallback.
BoxExtraction box_from_map(const ActivationMap& map, double theta, ImageSize image);

struct NamedMap {
  std::string id;
  ActivationMap map;
  ImageSize image;
};

struct BoxRow {
  std::string image_id;
  BoundingBox box;
};

struct PseudoBoxTable {
  std::vector<BoxRow> rows;
  std::vector<std::string> warnings;
};

// One box per map after polarity correction; rows keep the input order.
PseudoBoxTable generate_pseudo_boxes(std::span<const NamedMap> maps, const PolarityDecision& polarity,
                                     double theta);

}  // namespace c2am
