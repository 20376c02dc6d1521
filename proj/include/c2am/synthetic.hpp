#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "c2am/image_io.hpp"
#include "c2am/refine.hpp"
#include "c2am/types.hpp"

namespace c2am {

// Two background texture families and two foreground shape families with
// distinct color statistics, so that foregrounds resemble each other across
// images and so do backgrounds.
enum class BackgroundFamily : int { kStripedSky = 0, kSpeckledGrass = 1 };
enum class ForegroundFamily : int { kEllipse = 0, kRectangle = 1 };

struct SyntheticSample {
  std::string id;
  RgbImage image;
  Grid<std::uint8_t> gt_mask;
  BoundingBox gt_box;
  ForegroundFamily fg_family = ForegroundFamily::kEllipse;
  BackgroundFamily bg_family = BackgroundFamily::kStripedSky;
  // Classifier-style activation for the sample's class (fg family + 1): peaks
  // on part of the object and leaks onto a background patch.
  CamStack cam;

  [[nodiscard]] int class_id() const { return static_cast<int>(fg_family) + 1; }
};

struct SyntheticOptions {
  int n_train = 256;
  int n_calib = 32;
  int n_test = 64;
  std::uint64_t seed = 7;
  int image_size = 64;
  bool with_cams = true;
};

// Deterministic in (seed, index).
SyntheticSample make_synthetic_sample(std::uint64_t seed, int index, int image_size, const std::string& id);

// Writes images/, masks/ (indexed PNG, class ids), cams/, gt_boxes.csv,
// gt_classes.csv, samples.csv and splits/{train,calib,test}.txt.
void generate_synthetic(const SyntheticOptions& options, const std::filesystem::path& out_dir);

// Tight box around the nonzero pixels.
BoundingBox tight_box(const Grid<std::uint8_t>& mask);

}  // namespace c2am
