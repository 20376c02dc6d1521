#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "c2am/errors.hpp"

namespace c2am {

// Row-major H×W array.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int h, int w, T fill = T{})
      : height(h), width(w), values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
    if (h < 0 || w < 0) {
      throw ShapeError("grid dimensions must be nonnegative");
    }
  }

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] bool empty() const { return values.empty(); }

  T& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  const T& operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }

  [[nodiscard]] bool same_shape(const Grid& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const Grid&) const = default;
};

// Class-agnostic activation map P, one value in [0,1] per feature-map cell.
using ActivationMap = Grid<double>;

struct ImageSize {
  int height = 0;
  int width = 0;
  bool operator==(const ImageSize&) const = default;
};

// Encoder output Z for a single image, C×H×W row-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  // Ratio image height / feature height.
  int stride = 1;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, int stride_ = 1)
      : channels(c), height(h), width(w), stride(stride_),
        values(static_cast<std::size_t>(c) * h * w, 0.0) {}

  [[nodiscard]] int spatial() const { return height * width; }
  double& at(int c, int hw) { return values[static_cast<std::size_t>(c) * spatial() + hw]; }
  [[nodiscard]] double at(int c, int hw) const {
    return values[static_cast<std::size_t>(c) * spatial() + hw];
  }
};

// Foreground / background representation pair (v_f, v_b), each of length C.
struct FgBgRepresentation {
  std::vector<double> foreground;
  std::vector<double> background;
};

// Inclusive pixel rectangle.
struct BoundingBox {
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;

  [[nodiscard]] long long area() const {
    return static_cast<long long>(xmax - xmin + 1) * (ymax - ymin + 1);
  }
  bool operator==(const BoundingBox&) const = default;
};

}  // namespace c2am
