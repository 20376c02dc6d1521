#include "c2am/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "c2am/errors.hpp"

namespace c2am {

namespace {

constexpr char kMagic[4] = {'C', '2', 'A', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::size_t checked_count(std::span<const std::uint32_t> dims) {
  if (dims.empty()) throw FormatError("tensor has no dimensions");
  std::size_t count = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw FormatError("tensor dimension of size zero");
    if (count > std::numeric_limits<std::size_t>::max() / d) throw FormatError("tensor too large");
    count *= d;
  }
  return count;
}

}  // namespace

std::size_t StoredTensor::element_count() const { return checked_count(dims); }

std::vector<std::uint8_t> encode_tensor(const StoredTensor& tensor) {
  const std::size_t count = checked_count(tensor.dims);
  if (tensor.dims.size() > 255) throw FormatError("tensor rank exceeds 255");
  if (tensor.values.size() != count) {
    throw ShapeError("tensor payload has " + std::to_string(tensor.values.size()) +
                     " values, dims imply " + std::to_string(count));
  }
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * tensor.dims.size() + 4 * count);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) put_u32(out, d);
  for (float f : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

StoredTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6) throw FormatError("tensor file truncated in header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad tensor magic (expected C2AM)");
  if (bytes[4] != kTensorFormatVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(bytes[4]));
  }
  const std::size_t rank = bytes[5];
  if (rank == 0) throw FormatError("tensor has no dimensions");
  if (bytes.size() < 6 + 4 * rank) throw FormatError("tensor file truncated in dims");
  StoredTensor tensor;
  tensor.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) tensor.dims[i] = get_u32(bytes, 6 + 4 * i);
  const std::size_t count = checked_count(tensor.dims);
  const std::size_t offset = 6 + 4 * rank;
  if ((bytes.size() - offset) / 4 < count) throw FormatError("tensor file truncated in payload");
  if (bytes.size() - offset != 4 * count) throw FormatError("trailing bytes after tensor payload");
  tensor.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    tensor.values[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
  }
  return tensor;
}

void write_tensor(const std::filesystem::path& path, const StoredTensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

StoredTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

StoredTensor to_stored(const ActivationMap& map) {
  StoredTensor t;
  t.dims = {1u, static_cast<std::uint32_t>(map.height), static_cast<std::uint32_t>(map.width)};
  t.values.assign(map.values.begin(), map.values.end());
  return t;
}

StoredTensor to_stored(const FeatureMap& features) {
  StoredTensor t;
  t.dims = {static_cast<std::uint32_t>(features.channels), static_cast<std::uint32_t>(features.height),
            static_cast<std::uint32_t>(features.width)};
  t.values.assign(features.values.begin(), features.values.end());
  return t;
}

ActivationMap map_from_stored(const StoredTensor& tensor) {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  if (tensor.dims.size() == 3 && tensor.dims[0] == 1) {
    h = tensor.dims[1];
    w = tensor.dims[2];
  } else if (tensor.dims.size() == 2) {
    h = tensor.dims[0];
    w = tensor.dims[1];
  } else {
    throw ShapeError("activation map tensor must be 1×H×W or H×W");
  }
  ActivationMap map(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = tensor.values[i];
  return map;
}

FeatureMap features_from_stored(const StoredTensor& tensor, int stride) {
  if (tensor.dims.size() != 3) throw ShapeError("feature tensor must be C×H×W");
  FeatureMap z(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]),
               static_cast<int>(tensor.dims[2]), stride);
  for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] = tensor.values[i];
  return z;
}

}  // namespace c2am
