#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace c2am {

// Run configuration. Every field is addressable by its key name in config
// files and through `--set key=value`.
struct Config {
  // "builtin" or "features-dir:<path>".
  std::string backbone = "builtin";
  int batch_size = 16;
  double alpha = 0.2;
  double theta = 0.5;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int epochs = 10;
  std::uint64_t seed = 7;
  int image_size = 128;
  std::vector<int> encoder_channels = {16, 32, 32, 32};
  std::string encoder_init = "kaiming-normal";
  std::string head_init = "kaiming-normal";
  // Border handling of every 3×3 convolution: "circular" or "zeros".
  std::string padding = "circular";
  // Standard deviation (normal) or half-width (uniform) for the plain schemes.
  double head_init_scale = 0.01;
  double bn_momentum = 0.1;
  bool augment_flip = true;
  bool freeze_encoder = false;
  // Epochs at the start during which only the head is updated.
  int encoder_warmup_epochs = 0;
  bool save_every_epoch = true;
  std::string data_dir = "data/synth";
  std::string output_dir = "runs/c2am";
  std::string train_split = "train";
  std::string calib_split = "calib";
  std::string test_split = "test";

  // Throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] std::map<std::string, std::string> to_map() const;
  // Checks the value invariants (n ≥ 2, alpha ≥ 0, theta in (0,1), ...).
  void validate() const;

  [[nodiscard]] bool uses_precomputed_features() const;
  [[nodiscard]] std::filesystem::path features_dir() const;
};

// Reads `key = value` lines; '#'/';' start comments, `[section]` headers are
// ignored, values may be quoted.
std::map<std::string, std::string> parse_config_text(const std::string& text);
Config load_config(const std::filesystem::path& path, Config base = {});
void apply_config_values(Config& config, const std::map<std::string, std::string>& values);

// C2AM_OUT replaces output_dir when set.
void apply_environment(Config& config);

std::string format_config(const Config& config);

}  // namespace c2am
