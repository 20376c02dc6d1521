#include "c2am/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "c2am/errors.hpp"
#include "c2am/layers.hpp"

namespace c2am {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "' expects a comma-separated list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void Config::set(const std::string& raw_key, const std::string& value) {
  const std::string key = normalize_key(raw_key);
  if (key == "backbone") backbone = value;
  else if (key == "batch_size" || key == "n") batch_size = parse_int(key, value);
  else if (key == "alpha") alpha = parse_double(key, value);
  else if (key == "theta") theta = parse_double(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "momentum") momentum = parse_double(key, value);
  else if (key == "weight_decay") weight_decay = parse_double(key, value);
  else if (key == "epochs") epochs = parse_int(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "image_size") image_size = parse_int(key, value);
  else if (key == "encoder_channels") encoder_channels = parse_int_list(key, value);
  else if (key == "encoder_init") encoder_init = value;
  else if (key == "head_init") head_init = value;
  else if (key == "padding") padding = value;
  else if (key == "head_init_scale") head_init_scale = parse_double(key, value);
  else if (key == "bn_momentum") bn_momentum = parse_double(key, value);
  else if (key == "augment_flip") augment_flip = parse_bool(key, value);
  else if (key == "freeze_encoder") freeze_encoder = parse_bool(key, value);
  else if (key == "encoder_warmup_epochs") encoder_warmup_epochs = parse_int(key, value);
  else if (key == "save_every_epoch") save_every_epoch = parse_bool(key, value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "output_dir") output_dir = value;
  else if (key == "train_split") train_split = value;
  else if (key == "calib_split") calib_split = value;
  else if (key == "test_split") test_split = value;
  else throw ConfigError("unknown config key '" + raw_key + "'");
}

std::map<std::string, std::string> Config::to_map() const {
  return {
      {"backbone", backbone},
      {"batch_size", std::to_string(batch_size)},
      {"alpha", format_double(alpha)},
      {"theta", format_double(theta)},
      {"lr", format_double(lr)},
      {"momentum", format_double(momentum)},
      {"weight_decay", format_double(weight_decay)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"image_size", std::to_string(image_size)},
      {"encoder_channels", join(encoder_channels)},
      {"encoder_init", encoder_init},
      {"head_init", head_init},
      {"padding", padding},
      {"head_init_scale", format_double(head_init_scale)},
      {"bn_momentum", format_double(bn_momentum)},
      {"augment_flip", augment_flip ? "true" : "false"},
      {"freeze_encoder", freeze_encoder ? "true" : "false"},
      {"encoder_warmup_epochs", std::to_string(encoder_warmup_epochs)},
      {"save_every_epoch", save_every_epoch ? "true" : "false"},
      {"data_dir", data_dir},
      {"output_dir", output_dir},
      {"train_split", train_split},
      {"calib_split", calib_split},
      {"test_split", test_split},
  };
}

void Config::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be ≥ 2 (positive pairs need two images)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be ≥ 0");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be ≥ 1");
  if (encoder_warmup_epochs < 0) throw ConfigError("encoder_warmup_epochs must be ≥ 0");
  if (image_size < 32) throw ConfigError("image_size must be ≥ 32");
  for (int c : encoder_channels) {
    if (c <= 0) throw ConfigError("encoder_channels entries must be positive");
  }
  parse_padding_mode(padding);
  parse_init_scheme(encoder_init);
  parse_init_scheme(head_init);
  if (backbone != "builtin" && !uses_precomputed_features()) {
    throw ConfigError("backbone must be 'builtin' or 'features-dir:<path>', got '" + backbone + "'");
  }
}

bool Config::uses_precomputed_features() const { return backbone.rfind("features-dir:", 0) == 0; }

std::filesystem::path Config::features_dir() const {
  if (!uses_precomputed_features()) return {};
  return backbone.substr(std::string("features-dir:").size());
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string content = trim(line);
    if (content.empty() || content[0] == '#' || content[0] == ';') continue;
    if (content.front() == '[' && content.back() == ']') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(content.substr(0, eq));
    std::string value = trim(content.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    } else {
      const auto comment = std::min(value.find(" #"), value.find(" ;"));
      if (comment != std::string::npos) value = trim(value.substr(0, comment));
    }
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    values[normalize_key(key)] = value;
  }
  return values;
}

void apply_config_values(Config& config, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) config.set(key, value);
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_values(base, parse_config_text(buffer.str()));
  return base;
}

void apply_environment(Config& config) {
  if (const char* out = std::getenv("C2AM_OUT"); out != nullptr && *out != '\0') config.output_dir = out;
}

std::string format_config(const Config& config) {
  std::ostringstream os;
  for (const auto& [key, value] : config.to_map()) os << key << " = " << value << "\n";
  return os.str();
}

}  // namespace c2am
