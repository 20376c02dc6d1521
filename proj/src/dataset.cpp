#include "c2am/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "c2am/errors.hpp"
#include "c2am/tables.hpp"

namespace c2am {

namespace fs = std::filesystem;

namespace {

fs::path first_existing(const fs::path& root, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (fs::is_directory(root / name)) return root / name;
  }
  return {};
}

bool is_image_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG" || ext == ".JPG" || ext == ".JPEG";
}

}  // namespace

Dataset::Dataset(fs::path root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) throw IoError("dataset directory not found: " + root_.string());
  image_dir_ = first_existing(root_, {"images", "JPEGImages"});
  if (image_dir_.empty()) {
    throw IoError("dataset " + root_.string() + " has no images/ (or JPEGImages/) directory");
  }
  mask_dir_ = first_existing(root_, {"masks", "SegmentationClass"});
}

bool Dataset::has_split(const std::string& split) const {
  return fs::exists(root_ / "splits" / (split + ".txt"));
}

std::vector<std::string> Dataset::split_ids(const std::string& split) const {
  std::vector<std::string> ids;
  const fs::path list = root_ / "splits" / (split + ".txt");
  if (fs::exists(list)) {
    std::ifstream in(list);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
    return ids;
  }
  if (split != "train") return ids;
  for (const auto& entry : fs::directory_iterator(image_dir_)) {
    if (entry.is_regular_file() && is_image_extension(entry.path())) ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

fs::path Dataset::image_path(const std::string& id) const {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"}) {
    fs::path p = image_dir_ / (id + ext);
    if (fs::exists(p)) return p;
  }
  throw IoError("missing image for id '" + id + "' in " + image_dir_.string());
}

std::optional<fs::path> Dataset::mask_path(const std::string& id) const {
  if (mask_dir_.empty()) return std::nullopt;
  fs::path p = mask_dir_ / (id + ".png");
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

RgbImage Dataset::image(const std::string& id) const { return read_image(image_path(id)); }

std::optional<Grid<int>> Dataset::mask(const std::string& id) const {
  const auto p = mask_path(id);
  if (!p) return std::nullopt;
  return read_label_png(*p);
}

bool Dataset::has_gt_boxes() const { return fs::exists(root_ / "gt_boxes.csv"); }
GtBoxTable Dataset::gt_boxes() const { return read_gt_boxes(root_ / "gt_boxes.csv"); }
bool Dataset::has_gt_classes() const { return fs::exists(root_ / "gt_classes.csv"); }
ClassTable Dataset::gt_classes() const { return read_class_table(root_ / "gt_classes.csv"); }

RgbImage resize_image(const RgbImage& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  RgbImage out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch);
        const double bottom = (1 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch);
        out.at(y, x, ch) = static_cast<std::uint8_t>(std::lround((1 - wy) * top + wy * bottom));
      }
    }
  }
  return out;
}

void write_normalized(const RgbImage& image, int size, double* dst) {
  const RgbImage resized = resize_image(image, size, size);
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        dst[ch * plane + static_cast<std::size_t>(r) * size + c] =
            (resized.at(r, c, ch) / 255.0 - kPixelMean) / kPixelStd;
      }
    }
  }
}

Tensor4 load_image_batch(const Dataset& dataset, std::span<const std::string> ids, int size) {
  Tensor4 batch(static_cast<int>(ids.size()), 3, size, size);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    write_normalized(dataset.image(ids[i]), size, batch.sample(static_cast<int>(i)));
  }
  return batch;
}

}  // namespace c2am
