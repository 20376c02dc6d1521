#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2am/image_io.hpp"
#include "c2am/layers.hpp"
#include "c2am/metrics.hpp"
#include "c2am/types.hpp"

namespace c2am {

// Directory of images plus optional indexed-PNG masks and box tables.
//
//   <root>/images/<id>.{png,jpg,jpeg}    (or JPEGImages/)
//   <root>/masks/<id>.png                (or SegmentationClass/), 0 = background
//   <root>/gt_boxes.csv, gt_classes.csv  optional
//   <root>/splits/<split>.txt            optional; one id per line
class Dataset {
 public:
  explicit Dataset(std::filesystem::path root);

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }
  [[nodiscard]] bool has_split(const std::string& split) const;
  // Ids listed in splits/<split>.txt; without split files, every image for "train".
  [[nodiscard]] std::vector<std::string> split_ids(const std::string& split) const;

  [[nodiscard]] std::filesystem::path image_path(const std::string& id) const;
  [[nodiscard]] std::optional<std::filesystem::path> mask_path(const std::string& id) const;
  [[nodiscard]] RgbImage image(const std::string& id) const;
  [[nodiscard]] std::optional<Grid<int>> mask(const std::string& id) const;

  [[nodiscard]] bool has_gt_boxes() const;
  [[nodiscard]] GtBoxTable gt_boxes() const;
  [[nodiscard]] bool has_gt_classes() const;
  [[nodiscard]] ClassTable gt_classes() const;

 private:
  std::filesystem::path root_;
  std::filesystem::path image_dir_;
  std::filesystem::path mask_dir_;
};

// (pixel/255 - 0.5) / 0.25 per channel.
inline constexpr double kPixelMean = 0.5;
inline constexpr double kPixelStd = 0.25;

// Bilinear RGB resize.
RgbImage resize_image(const RgbImage& image, int height, int width);

// 3×size×size normalized tensor per id, stacked into one batch.
Tensor4 load_image_batch(const Dataset& dataset, std::span<const std::string> ids, int size);
void write_normalized(const RgbImage& image, int size, double* dst);

}  // namespace c2am
