#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace c2am {

using Rgb = std::array<std::uint8_t, 3>;

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{31, 119, 180};
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 440;
};

// Axes, ticks, polylines and a legend rendered to an RGB PNG. Text uses a
// built-in 3×5 pixel font (letters are drawn uppercase).
void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace c2am
