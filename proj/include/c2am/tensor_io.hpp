#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "c2am/types.hpp"

namespace c2am {

// On-disk tensor layout:
//   bytes 0..3   "C2AM"
//   byte  4      version (1)
//   byte  5      rank r (≥ 1)
//   r × u32 LE   dims, each ≥ 1
//   payload      prod(dims) × float32 LE, row-major
struct StoredTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  [[nodiscard]] std::size_t element_count() const;
  bool operator==(const StoredTensor&) const = default;
};

inline constexpr std::uint8_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const StoredTensor& tensor);
StoredTensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const StoredTensor& tensor);
StoredTensor read_tensor(const std::filesystem::path& path);

// Maps are stored as 1×H×W, feature maps as C×H×W.
StoredTensor to_stored(const ActivationMap& map);
StoredTensor to_stored(const FeatureMap& features);
ActivationMap map_from_stored(const StoredTensor& tensor);
FeatureMap features_from_stored(const StoredTensor& tensor, int stride = 1);

}  // namespace c2am
