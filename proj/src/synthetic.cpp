#include "c2am/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "c2am/errors.hpp"
#include "c2am/tensor_io.hpp"

namespace c2am {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Portable draws: the standard distributions are implementation-defined, so
// datasets would differ across standard libraries.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * unit;
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform(0.0, 1.0) * (hi - lo + 1)); }
  double normal(double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return sigma * spare_;
    }
    const double u1 = std::max(uniform(0.0, 1.0), 1e-300);
    const double u2 = uniform(0.0, 1.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

using Color = std::array<double, 3>;

Color jitter(SampleRng& rng, Color base, double amount) {
  for (auto& c : base) c += rng.uniform(-amount, amount);
  return base;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void paint_background(SampleRng& rng, BackgroundFamily family, std::vector<Color>& canvas, int size) {
  if (family == BackgroundFamily::kStripedSky) {
    const Color base = jitter(rng, {60.0, 110.0, 200.0}, 20.0);
    const double period = rng.uniform(6.0, 12.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gradient = rng.uniform(-25.0, 25.0);
    for (int r = 0; r < size; ++r) {
      const double stripe = 18.0 * std::sin(2.0 * std::numbers::pi * r / period + phase);
      const double shade = gradient * (static_cast<double>(r) / size - 0.5);
      for (int c = 0; c < size; ++c) {
        Color& px = canvas[static_cast<std::size_t>(r) * size + c];
        for (int ch = 0; ch < 3; ++ch) px[ch] = base[ch] + stripe + shade + rng.normal(8.0);
      }
    }
  } else {
    const Color base = jitter(rng, {70.0, 150.0, 60.0}, 20.0);
    const double fx = rng.uniform(0.15, 0.35);
    const double fy = rng.uniform(0.15, 0.35);
    const double px0 = rng.uniform(0.0, 6.3);
    const double py0 = rng.uniform(0.0, 6.3);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double blotch = 14.0 * std::sin(fx * c + px0) * std::sin(fy * r + py0);
        const double speckle = rng.uniform(0.0, 1.0) < 0.08 ? rng.uniform(-40.0, 40.0) : 0.0;
        Color& px = canvas[static_cast<std::size_t>(r) * size + c];
        for (int ch = 0; ch < 3; ++ch) px[ch] = base[ch] + blotch + speckle + rng.normal(10.0);
      }
    }
  }
}

struct ShapeGeometry {
  double cy = 0.0;
  double cx = 0.0;
  double ry = 0.0;
  double rx = 0.0;
};

bool inside_shape(ForegroundFamily family, const ShapeGeometry& g, int r, int c) {
  const double dy = (r + 0.5 - g.cy) / g.ry;
  const double dx = (c + 0.5 - g.cx) / g.rx;
  if (family == ForegroundFamily::kEllipse) return dx * dx + dy * dy <= 1.0;
  return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

double gaussian(double dy, double dx, double sigma) { return std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma)); }

}  // namespace

BoundingBox tight_box(const Grid<std::uint8_t>& mask) {
  BoundingBox box{mask.width, mask.height, -1, -1};
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (mask(r, c) == 0) continue;
      box.xmin = std::min(box.xmin, c);
      box.ymin = std::min(box.ymin, r);
      box.xmax = std::max(box.xmax, c);
      box.ymax = std::max(box.ymax, r);
    }
  }
  if (box.xmax < 0) throw InputError("tight_box on an empty mask");
  return box;
}

SyntheticSample make_synthetic_sample(std::uint64_t seed, int index, int image_size, const std::string& id) {
  if (image_size < 32) throw InputError("synthetic images must be at least 32 pixels");
  SampleRng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
  SyntheticSample sample;
  sample.id = id;
  sample.bg_family = static_cast<BackgroundFamily>(rng.integer(0, 1));
  sample.fg_family = static_cast<ForegroundFamily>(rng.integer(0, 1));

  const int size = image_size;
  std::vector<Color> canvas(static_cast<std::size_t>(size) * size);
  paint_background(rng, sample.bg_family, canvas, size);

  const double scale = size / 64.0;
  ShapeGeometry g;
  g.ry = rng.uniform(10.0, 21.0) * scale;
  g.rx = rng.uniform(10.0, 21.0) * scale;
  const double margin = 2.0 * scale;
  g.cy = rng.uniform(g.ry + margin, size - g.ry - margin);
  g.cx = rng.uniform(g.rx + margin, size - g.rx - margin);

  const Color fg_base = sample.fg_family == ForegroundFamily::kEllipse ? jitter(rng, {220.0, 70.0, 40.0}, 20.0)
                                                                       : jitter(rng, {235.0, 135.0, 45.0}, 20.0);
  const double checker = rng.uniform(3.0, 6.0) * scale;
  sample.gt_mask = Grid<std::uint8_t>(size, size, 0);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (!inside_shape(sample.fg_family, g, r, c)) continue;
      sample.gt_mask(r, c) = 1;
      double texture = 0.0;
      if (sample.fg_family == ForegroundFamily::kEllipse) {
        const double dy = (r + 0.5 - g.cy) / g.ry;
        const double dx = (c + 0.5 - g.cx) / g.rx;
        texture = -30.0 * (dx * dx + dy * dy);
      } else {
        texture = ((static_cast<int>(r / checker) + static_cast<int>(c / checker)) % 2 == 0) ? 12.0 : -12.0;
      }
      Color& px = canvas[static_cast<std::size_t>(r) * size + c];
      for (int ch = 0; ch < 3; ++ch) px[ch] = fg_base[ch] + texture + rng.normal(8.0);
    }
  }
  sample.gt_box = tight_box(sample.gt_mask);

  sample.image = RgbImage(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        sample.image.at(r, c, ch) = to_byte(canvas[static_cast<std::size_t>(r) * size + c][ch]);
      }
    }
  }

  // Part-focused CAM with a background leak.
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double part_y = g.cy + 0.45 * g.ry * std::sin(angle);
  const double part_x = g.cx + 0.45 * g.rx * std::cos(angle);
  const double part_sigma = 0.4 * std::min(g.ry, g.rx);
  int leak_r = 0;
  int leak_c = 0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    leak_r = rng.integer(0, size - 1);
    leak_c = rng.integer(0, size - 1);
    if (sample.gt_mask(leak_r, leak_c) == 0) break;
  }
  const double leak_amp = rng.uniform(0.4, 0.7);
  const double leak_sigma = rng.uniform(4.0, 7.0) * scale;
  Grid<double> cam(size, size, 0.0);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double part = gaussian(r + 0.5 - part_y, c + 0.5 - part_x, part_sigma);
      const double leak = leak_amp * gaussian(r - leak_r, c - leak_c, leak_sigma);
      cam(r, c) = std::max(part, leak) + std::abs(rng.normal(0.03));
    }
  }
  sample.cam = normalize_cam_stack(CamStack{{sample.class_id()}, {cam}});
  return sample;
}

void generate_synthetic(const SyntheticOptions& options, const std::filesystem::path& out_dir) {
  if (options.n_train < 0 || options.n_calib < 0 || options.n_test < 0) {
    throw InputError("split sizes must be nonnegative");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"images", "masks", "cams", "splits"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  std::ofstream boxes(out_dir / "gt_boxes.csv", std::ios::binary);
  std::ofstream classes(out_dir / "gt_classes.csv", std::ios::binary);
  std::ofstream samples(out_dir / "samples.csv", std::ios::binary);
  if (!boxes || !classes || !samples) throw IoError("cannot write index files in " + out_dir.string());
  boxes << "image_id,xmin,ymin,xmax,ymax\n";
  classes << "image_id,class_id\n";
  samples << "image_id,split,fg_family,bg_family\n";

  const std::array<std::pair<const char*, int>, 3> splits = {
      {{"train", options.n_train}, {"calib", options.n_calib}, {"test", options.n_test}}};
  int global = 0;
  for (const auto& [split, count] : splits) {
    std::ofstream list(out_dir / "splits" / (std::string(split) + ".txt"), std::ios::binary);
    if (!list) throw IoError("cannot write split list for " + std::string(split));
    for (int i = 0; i < count; ++i, ++global) {
      std::ostringstream id;
      id << split << "_" << std::setw(4) << std::setfill('0') << i;
      const SyntheticSample s = make_synthetic_sample(options.seed, global, options.image_size, id.str());
      write_png_rgb(out_dir / "images" / (s.id + ".png"), s.image);
      Grid<int> labels(s.gt_mask.height, s.gt_mask.width, 0);
      for (std::size_t k = 0; k < labels.values.size(); ++k) labels.values[k] = s.gt_mask.values[k] ? s.class_id() : 0;
      write_label_png(out_dir / "masks" / (s.id + ".png"), labels);
      if (options.with_cams) {
        write_tensor(out_dir / "cams" / (s.id + ".c2am"), to_stored(s.cam.maps.front()));
        std::ofstream sidecar(out_dir / "cams" / (s.id + ".json"), std::ios::binary);
        sidecar << nlohmann::json{{"class_ids", s.cam.class_ids}}.dump() << "\n";
      }
      list << s.id << "\n";
      boxes << s.id << "," << s.gt_box.xmin << "," << s.gt_box.ymin << "," << s.gt_box.xmax << ","
            << s.gt_box.ymax << "\n";
      classes << s.id << "," << s.class_id() << "\n";
      samples << s.id << "," << split << "," << static_cast<int>(s.fg_family) << ","
              << static_cast<int>(s.bg_family) << "\n";
    }
  }
}

}  // namespace c2am
