#include "c2am/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "c2am/errors.hpp"
#include "c2am/image_io.hpp"

namespace c2am {

namespace {

// Rows top to bottom, 3 columns each.
const std::map<char, std::array<const char*, 5>>& font() {
  static const std::map<char, std::array<const char*, 5>> glyphs = {
      {'0', {"###", "#.#", "#.#", "#.#", "###"}}, {'1', {".#.", "##.", ".#.", ".#.", "###"}},
      {'2', {"###", "..#", "###", "#..", "###"}}, {'3', {"###", "..#", ".##", "..#", "###"}},
      {'4', {"#.#", "#.#", "###", "..#", "..#"}}, {'5', {"###", "#..", "###", "..#", "###"}},
      {'6', {"###", "#..", "###", "#.#", "###"}}, {'7', {"###", "..#", ".#.", ".#.", ".#."}},
      {'8', {"###", "#.#", "###", "#.#", "###"}}, {'9', {"###", "#.#", "###", "..#", "###"}},
      {'A', {".#.", "#.#", "###", "#.#", "#.#"}}, {'B', {"##.", "#.#", "##.", "#.#", "##."}},
      {'C', {".##", "#..", "#..", "#..", ".##"}}, {'D', {"##.", "#.#", "#.#", "#.#", "##."}},
      {'E', {"###", "#..", "##.", "#..", "###"}}, {'F', {"###", "#..", "##.", "#..", "#.."}},
      {'G', {".##", "#..", "#.#", "#.#", ".##"}}, {'H', {"#.#", "#.#", "###", "#.#", "#.#"}},
      {'I', {"###", ".#.", ".#.", ".#.", "###"}}, {'J', {"..#", "..#", "..#", "#.#", ".#."}},
      {'K', {"#.#", "#.#", "##.", "#.#", "#.#"}}, {'L', {"#..", "#..", "#..", "#..", "###"}},
      {'M', {"#.#", "###", "###", "#.#", "#.#"}}, {'N', {"##.", "#.#", "#.#", "#.#", "#.#"}},
      {'O', {".#.", "#.#", "#.#", "#.#", ".#."}}, {'P', {"##.", "#.#", "##.", "#..", "#.."}},
      {'Q', {".#.", "#.#", "#.#", "##.", ".##"}}, {'R', {"##.", "#.#", "##.", "#.#", "#.#"}},
      {'S', {".##", "#..", ".#.", "..#", "##."}}, {'T', {"###", ".#.", ".#.", ".#.", ".#."}},
      {'U', {"#.#", "#.#", "#.#", "#.#", "###"}}, {'V', {"#.#", "#.#", "#.#", "#.#", ".#."}},
      {'W', {"#.#", "#.#", "###", "###", "#.#"}}, {'X', {"#.#", "#.#", ".#.", "#.#", "#.#"}},
      {'Y', {"#.#", "#.#", ".#.", ".#.", ".#."}}, {'Z', {"###", "..#", ".#.", "#..", "###"}},
      {'.', {"...", "...", "...", "...", ".#."}}, {'-', {"...", "...", "###", "...", "..."}},
      {'_', {"...", "...", "...", "...", "###"}}, {'=', {"...", "###", "...", "###", "..."}},
      {':', {"...", ".#.", "...", ".#.", "..."}}, {'(', {"..#", ".#.", ".#.", ".#.", "..#"}},
      {')', {"#..", ".#.", ".#.", ".#.", "#.."}}, {'/', {"..#", "..#", ".#.", "#..", "#.."}},
      {'+', {"...", ".#.", "###", ".#.", "..."}}, {',', {"...", "...", "...", ".#.", "#.."}},
  };
  return glyphs;
}

class Canvas {
 public:
  Canvas(int w, int h) : image_(h, w) { std::fill(image_.pixels.begin(), image_.pixels.end(), 255); }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= image_.width || y >= image_.height) return;
    for (int ch = 0; ch < 3; ++ch) image_.at(y, x, ch) = c[ch];
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      for (int dy = 0; dy < thickness; ++dy) {
        for (int dx = 0; dx < thickness; ++dx) set(x + dx - thickness / 2, y + dy - thickness / 2, c);
      }
    }
  }

  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) set(x, y, c);
    }
  }

  // Returns the rendered width in pixels.
  int text(int x, int y, const std::string& s, Rgb c, int scale = 2, bool measure_only = false) {
    int cursor = x;
    for (char raw : s) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
      const auto it = font().find(ch);
      if (it != font().end() && !measure_only) {
        for (int r = 0; r < 5; ++r) {
          for (int col = 0; col < 3; ++col) {
            if (it->second[r][col] == '#') rect(cursor + col * scale, y + r * scale, cursor + (col + 1) * scale - 1,
                                                y + (r + 1) * scale - 1, c);
          }
        }
      }
      cursor += 4 * scale;
    }
    return cursor - x;
  }

  const RgbImage& image() const { return image_; }

 private:
  RgbImage image_;
};

std::string tick_label(double v, double step) {
  char buf[32];
  const int decimals = step >= 1.0 ? 0 : std::min(6, static_cast<int>(std::ceil(-std::log10(step))));
  if (std::abs(v) < step * 1e-6) v = 0.0;
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

double nice_step(double range, int target) {
  const double raw = range / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec) {
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw InputError("plot series '" + s.label + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) throw InputError("nothing to plot");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  Canvas canvas(spec.width, spec.height);
  const int left = 80;
  const int right = spec.width - 20;
  const int top = 40;
  const int bottom = spec.height - 60;
  const Rgb black{0, 0, 0};
  const Rgb grid{225, 225, 225};
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  const double ystep = nice_step(ymax - ymin, 6);
  for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax; v += ystep) {
    canvas.line(left, py(v), right, py(v), grid);
    const std::string label = tick_label(v, ystep);
    const int w = canvas.text(0, 0, label, black, 2, true);
    canvas.text(left - 8 - w, static_cast<int>(py(v)) - 5, label, black);
  }
  const double xstep = nice_step(xmax - xmin, 8);
  for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-12; v += xstep) {
    canvas.line(px(v), top, px(v), bottom, grid);
    const std::string label = tick_label(v, xstep);
    const int w = canvas.text(0, 0, label, black, 2, true);
    canvas.text(static_cast<int>(px(v)) - w / 2, bottom + 8, label, black);
  }
  canvas.line(left, bottom, right, bottom, black);
  canvas.line(left, top, left, bottom, black);

  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) canvas.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color, 2);
      if (s.markers) {
        const int cx = static_cast<int>(std::lround(px(s.x[i])));
        const int cy = static_cast<int>(std::lround(py(s.y[i])));
        canvas.rect(cx - 3, cy - 3, cx + 3, cy + 3, s.color);
      }
    }
  }

  const int title_w = canvas.text(0, 0, spec.title, black, 3, true);
  canvas.text((spec.width - title_w) / 2, 8, spec.title, black, 3);
  const int xl_w = canvas.text(0, 0, spec.x_label, black, 2, true);
  canvas.text((left + right - xl_w) / 2, spec.height - 28, spec.x_label, black);
  canvas.text(6, top - 20, spec.y_label, black);

  int ly = top + 8;
  for (const auto& s : spec.series) {
    if (s.label.empty()) continue;
    const int w = canvas.text(0, 0, s.label, black, 2, true);
    canvas.rect(right - w - 34, ly + 3, right - w - 18, ly + 6, s.color);
    canvas.text(right - w - 10, ly, s.label, black);
    ly += 16;
  }
  write_png_rgb(path, canvas.image());
}

}  // namespace c2am
