#include "c2am/manifest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "c2am/errors.hpp"

namespace c2am {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Digest {
 public:
  Digest() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  }
  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_.get(), data, size) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1) throw Error("SHA-256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s.push_back(kHex[out[i] >> 4]);
      s.push_back(kHex[out[i] & 15]);
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  Digest d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  Digest d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

std::string sha256_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
  }
  std::sort(files.begin(), files.end());
  Digest d;
  for (const auto& rel : files) {
    const std::string line = rel.generic_string() + "\t" + sha256_file(dir / rel) + "\n";
    d.update(line.data(), line.size());
  }
  return d.hex();
}

json make_manifest(const std::string& command, std::span<const std::string> args, const Config& config,
                   std::span<const fs::path> inputs) {
  json j;
  j["command"] = command;
  j["args"] = std::vector<std::string>(args.begin(), args.end());
  j["config"] = config.to_map();
  j["inputs"] = json::array();
  for (const auto& p : inputs) {
    if (p.empty() || !fs::exists(p)) continue;
    const bool is_dir = fs::is_directory(p);
    j["inputs"].push_back({{"path", p.generic_string()},
                           {"kind", is_dir ? "directory" : "file"},
                           {"sha256", is_dir ? sha256_tree(p) : sha256_file(p)}});
  }
  return j;
}

void write_manifest(const fs::path& out_dir, const json& manifest) {
  fs::create_directories(out_dir);
  const fs::path path = out_dir / ("manifest_" + manifest.at("command").get<std::string>() + ".json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.dump(2) << "\n";
}

}  // namespace c2am
