#include "c2am/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "c2am/errors.hpp"

namespace c2am {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(pixels.values.begin(), pixels.values.end(), std::uint8_t{1}));
}

ActivationMap min_max_normalize(const ActivationMap& map, bool* constant) {
  if (map.empty()) throw InputError("cannot normalize an empty map");
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  ActivationMap out(map.height, map.width, 0.0);
  const bool flat = !(hi > lo);
  if (constant != nullptr) *constant = flat;
  if (flat) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < map.values.size(); ++i) out.values[i] = (map.values[i] - lo) / range;
  return out;
}

BinaryMask binarize(const ActivationMap& p, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw InputError("binarization threshold must lie in (0, 1)");
  bool constant = false;
  const ActivationMap normalized = min_max_normalize(p, &constant);
  BinaryMask mask{Grid<std::uint8_t>(p.height, p.width, 0), theta, constant};
  if (constant) return mask;
  for (std::size_t i = 0; i < normalized.values.size(); ++i) {
    mask.pixels.values[i] = normalized.values[i] >= theta ? 1 : 0;
  }
  return mask;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const int h = mask.pixels.height;
  const int w = mask.pixels.width;
  if (!mask.any()) throw InputError("largest_component on an empty mask");
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> stack;
  int best_label = -1;
  std::size_t best_size = 0;
  int next_label = 0;
  for (int start = 0; start < h * w; ++start) {
    if (mask.pixels.values[start] == 0 || label[start] >= 0) continue;
    const int current = next_label++;
    std::size_t size = 0;
    stack.assign(1, start);
    label[start] = current;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      ++size;
      const int r = idx / w;
      const int c = idx % w;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const int nidx = rr * w + cc;
          if (mask.pixels.values[nidx] == 1 && label[nidx] < 0) {
            label[nidx] = current;
            stack.push_back(nidx);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = current;
    }
  }
  BinaryMask out{Grid<std::uint8_t>(h, w, 0), mask.threshold_used, mask.degenerate};
  for (std::size_t i = 0; i < label.size(); ++i) out.pixels.values[i] = label[i] == best_label ? 1 : 0;
  return out;
}

BoundingBox extract_bbox(const BinaryMask& mask, ImageSize image) {
  const int h = mask.pixels.height;
  const int w = mask.pixels.width;
  int rmin = std::numeric_limits<int>::max();
  int cmin = std::numeric_limits<int>::max();
  int rmax = -1;
  int cmax = -1;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask.pixels(r, c) == 0) continue;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }
  if (rmax < 0) throw InputError("extract_bbox on an empty mask");
  if (image.height <= 0 || image.width <= 0) image = {h, w};
  const double sy = static_cast<double>(image.height) / h;
  const double sx = static_cast<double>(image.width) / w;
  auto scale_lo = [](int v, double s) { return static_cast<int>(std::lround(v * s)); };
  auto scale_hi = [](int v, double s) { return static_cast<int>(std::lround((v + 1) * s)) - 1; };
  BoundingBox box;
  box.xmin = std::clamp(scale_lo(cmin, sx), 0, image.width - 1);
  box.ymin = std::clamp(scale_lo(rmin, sy), 0, image.height - 1);
  box.xmax = std::clamp(scale_hi(cmax, sx), box.xmin, image.width - 1);
  box.ymax = std::clamp(scale_hi(rmax, sy), box.ymin, image.height - 1);
  return box;
}

double border_contact_ratio(const BinaryMask& mask) {
  const int h = mask.pixels.height;
  const int w = mask.pixels.width;
  std::size_t total = 0;
  std::size_t border = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (mask.pixels(r, c) == 0) continue;
      ++total;
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) ++border;
    }
  }
  if (total == 0) throw InputError("border contact ratio of an empty mask");
  return static_cast<double>(border) / static_cast<double>(total);
}

ActivationMap invert(const ActivationMap& p) {
  ActivationMap out(p.height, p.width);
  for (std::size_t i = 0; i < p.values.size(); ++i) out.values[i] = 1.0 - p.values[i];
  return out;
}

PolarityDecision resolve_polarity(std::span<const ActivationMap> maps, double theta) {
  if (static_cast<int>(maps.size()) < kMinCalibrationSize) {
    throw InputError("polarity calibration needs at least " + std::to_string(kMinCalibrationSize) +
                     " maps, got " + std::to_string(maps.size()));
  }
  PolarityDecision decision;
  decision.calibration_size = static_cast<int>(maps.size());
  constexpr double kNoCandidate = std::numeric_limits<double>::infinity();
  for (const auto& p : maps) {
    auto ratio_of = [&](const ActivationMap& candidate) {
      const BinaryMask mask = binarize(candidate, theta);
      if (!mask.any()) return kNoCandidate;
      return border_contact_ratio(largest_component(mask));
    };
    const double keep = ratio_of(p);
    const double flip = ratio_of(invert(p));
    if (keep < flip) {
      ++decision.votes_for;
    } else if (flip < keep) {
      ++decision.votes_against;
    }
  }
  decision.tie = decision.votes_for == decision.votes_against;
  decision.flipped = decision.votes_against > decision.votes_for;
  return decision;
}

ActivationMap foreground_map(const ActivationMap& p, const PolarityDecision& polarity) {
  return polarity.flipped ? invert(p) : p;
}

ActivationMap resize_bilinear(const ActivationMap& map, int height, int width) {
  if (map.empty()) throw InputError("cannot resize an empty map");
  if (height <= 0 || width <= 0) throw InputError("target size must be positive");
  if (map.height == height && map.width == width) return map;
  ActivationMap out(height, width);
  const double sy = static_cast<double>(map.height) / height;
  const double sx = static_cast<double>(map.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(map.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, map.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(map.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, map.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * map(y0, x0) + wx * map(y0, x1);
      const double bottom = (1.0 - wx) * map(y1, x0) + wx * map(y1, x1);
      out(y, x) = (1.0 - wy) * top + wy * bottom;
    }
  }
  return out;
}

BoxExtraction box_from_map(const ActivationMap& map, double theta, ImageSize image) {
  if (image.height <= 0 || image.width <= 0) image = {map.height, map.width};
  const BinaryMask mask = binarize(map, theta);
  if (!mask.any()) return {BoundingBox{0, 0, image.width - 1, image.height - 1}, true};
  return {extract_bbox(largest_component(mask), image), false};
}

PseudoBoxTable generate_pseudo_boxes(std::span<const NamedMap> maps, const PolarityDecision& polarity,
                                     double theta) {
  PseudoBoxTable table;
  table.rows.reserve(maps.size());
  for (const auto& entry : maps) {
    const BoxExtraction extraction = box_from_map(foreground_map(entry.map, polarity), theta, entry.image);
    table.rows.push_back({entry.id, extraction.box});
    if (extraction.fallback) {
      std::ostringstream os;
      os << entry.id << ": empty mask at theta=" << theta << ", using the full-image box";
      table.warnings.push_back(os.str());
    }
  }
  return table;
}

}  // namespace c2am
