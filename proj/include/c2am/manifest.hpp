#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "c2am/config.hpp"

namespace c2am {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);
// Digest over (relative path, file digest) for every regular file, sorted by path.
std::string sha256_tree(const std::filesystem::path& dir);

// Command, arguments, full config snapshot and a digest per existing input.
nlohmann::json make_manifest(const std::string& command, std::span<const std::string> args, const Config& config,
                             std::span<const std::filesystem::path> inputs);
void write_manifest(const std::filesystem::path& out_dir, const nlohmann::json& manifest);

}  // namespace c2am
