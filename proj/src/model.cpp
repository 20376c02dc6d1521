#include "c2am/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "c2am/errors.hpp"
#include "c2am/tensor_io.hpp"

namespace c2am {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) h = (h ^ c) * 16777619u;
  return h;
}

}  // namespace

int probe_feature_channels(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("precomputed feature directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".c2am") files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("no .c2am feature files in " + dir.string());
  std::sort(files.begin(), files.end());
  return features_from_stored(read_tensor(files.front())).channels;
}

C2amModel::C2amModel(const Config& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  int channels = 0;
  if (config_.uses_precomputed_features()) {
    features_ = std::make_unique<PrecomputedFeatures>(config_.features_dir());
    channels = probe_feature_channels(config_.features_dir());
  } else {
    encoder_.emplace(config_.encoder_channels, parse_init_scheme(config_.encoder_init), rng);
    encoder_->set_padding_mode(parse_padding_mode(config_.padding));
    channels = encoder_->out_channels();
  }
  // Separate stream per scheme: the encoder draw is unaffected by the head
  // choice, and schemes that differ only in scale do not share weight directions.
  std::seed_seq head_seed{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                          fnv1a(config_.head_init)};
  std::mt19937_64 head_rng(head_seed);
  head_ = ActivationHead(channels, parse_init_scheme(config_.head_init), config_.head_init_scale, head_rng);
  head_.conv().set_padding_mode(parse_padding_mode(config_.padding));
  head_.norm().set_momentum(config_.bn_momentum);
}

BuiltinEncoder& C2amModel::encoder() {
  if (!encoder_) throw ConfigError("model uses precomputed features and has no built-in encoder");
  return *encoder_;
}

const EncoderHandle& C2amModel::backbone() const {
  if (encoder_) return *encoder_;
  return *features_;
}

std::vector<Parameter*> C2amModel::trainable_parameters() {
  std::vector<Parameter*> params;
  if (encoder_ && !config_.freeze_encoder) params = encoder_->parameters();
  for (Parameter* p : head_.parameters()) params.push_back(p);
  return params;
}

std::vector<std::pair<std::string, std::vector<double>*>> C2amModel::state() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  if (encoder_) {
    for (Parameter* p : encoder_->parameters()) out.emplace_back(p->name, &p->value);
  }
  for (Parameter* p : head_.parameters()) out.emplace_back(p->name, &p->value);
  out.emplace_back("head.bn.running_mean", &head_.norm().running_mean());
  out.emplace_back("head.bn.running_var", &head_.norm().running_var());
  return out;
}

std::vector<ActivationMap> C2amModel::infer(const ImageBatch& batch) const {
  const std::vector<FeatureMap> features = encode(batch, backbone());
  const Tensor4 stacked = stack_features(features);
  if (stacked.c != head_.channels()) {
    throw ShapeError("activation head expects " + std::to_string(head_.channels()) + " channels, got " +
                     std::to_string(stacked.c));
  }
  const Tensor4 logits = head_.logits(stacked);
  std::vector<ActivationMap> maps;
  maps.reserve(logits.n);
  for (int i = 0; i < logits.n; ++i) {
    ActivationMap p = activation_map_from(logits, i);
    for (auto& v : p.values) v = sigmoid(v);
    maps.push_back(std::move(p));
  }
  return maps;
}

namespace {

constexpr char kMagic[4] = {'C', '2', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

json breakdown_json(const LossBreakdown& b) {
  return {{"l_neg", b.l_neg}, {"l_pos_f", b.l_pos_f}, {"l_pos_b", b.l_pos_b}, {"l_pos", b.l_pos},
          {"l_total", b.l_total}};
}

LossBreakdown breakdown_from(const json& j) {
  return {j.at("l_neg").get<double>(), j.at("l_pos_f").get<double>(), j.at("l_pos_b").get<double>(),
          j.at("l_pos").get<double>(), j.at("l_total").get<double>()};
}

}  // namespace

void save_checkpoint(const fs::path& path, C2amModel& model, const Checkpoint& meta) {
  json header;
  header["config"] = model.config().to_map();
  header["epoch"] = meta.epoch;
  header["history"] = json::array();
  for (const auto& e : meta.history) header["history"].push_back({{"epoch", e.epoch}, {"mean", breakdown_json(e.mean)}});
  header["arrays"] = json::array();
  const auto state = model.state();
  for (const auto& [name, values] : state) header["arrays"].push_back({{"name", name}, {"size", values->size()}});

  const std::string text = header.dump();
  std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
  bytes.push_back(kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const auto& [name, values] : state) {
    for (double v : *values) put_f64(bytes, v);
  }

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { throw FormatError(path.string() + ": " + why); };
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail("not a checkpoint file");
  if (bytes[4] != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(bytes[4]));
  std::uint32_t header_len = 0;
  for (int i = 0; i < 4; ++i) header_len |= static_cast<std::uint32_t>(bytes[5 + i]) << (8 * i);
  if (bytes.size() < 9 + static_cast<std::size_t>(header_len)) fail("truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 9, bytes.begin() + 9 + header_len);
  } catch (const json::exception& e) {
    fail(std::string("bad header: ") + e.what());
  }

  LoadedCheckpoint loaded;
  Config config;
  apply_config_values(config, header.at("config").get<std::map<std::string, std::string>>());
  loaded.meta.config = config;
  loaded.meta.epoch = header.at("epoch").get<int>();
  for (const auto& e : header.at("history")) {
    loaded.meta.history.push_back({e.at("epoch").get<int>(), breakdown_from(e.at("mean"))});
  }
  loaded.model = std::make_unique<C2amModel>(config);

  auto state = loaded.model->state();
  const auto& arrays = header.at("arrays");
  if (arrays.size() != state.size()) fail("array count does not match the configured architecture");
  std::size_t offset = 9 + header_len;
  for (std::size_t a = 0; a < state.size(); ++a) {
    const auto& [name, values] = state[a];
    if (arrays[a].at("name").get<std::string>() != name || arrays[a].at("size").get<std::size_t>() != values->size()) {
      fail("array '" + arrays[a].at("name").get<std::string>() + "' does not match '" + name + "'");
    }
    if (offset + values->size() * 8 > bytes.size()) fail("truncated parameter payload");
    for (auto& v : *values) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
      v = std::bit_cast<double>(bits);
      offset += 8;
    }
  }
  if (offset != bytes.size()) fail("trailing bytes after parameter payload");
  return loaded;
}

}  // namespace c2am
