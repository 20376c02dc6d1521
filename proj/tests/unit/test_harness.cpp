#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>

#include "c2am/config.hpp"
#include "c2am/dataset.hpp"
#include "c2am/errors.hpp"
#include "c2am/image_io.hpp"
#include "c2am/manifest.hpp"
#include "c2am/plot.hpp"
#include "c2am/synthetic.hpp"
#include "c2am/tables.hpp"
#include "c2am/tensor_io.hpp"
#include "temp_dir.hpp"

using namespace c2am;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Minimum per-image distance between mean foreground and mean background RGB.
constexpr double kColorMargin = 100.0;

}  // namespace

TEST_CASE("tensor format round trip and layout") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0.0f, 10.0f);
  StoredTensor t;
  t.dims = {3, 4, 5};
  for (int k = 0; k < 60; ++k) t.values.push_back(g(rng));
  const auto bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 6 + 12 + 240);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "C2AM");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 3);
  CHECK(bytes[6] == 3);
  CHECK(bytes[7] == 0);
  CHECK(decode_tensor(bytes) == t);

  TempDir dir("tensor");
  write_tensor(dir.path() / "t.c2am", t);
  const StoredTensor back = read_tensor(dir.path() / "t.c2am");
  CHECK(back == t);
  for (std::size_t k = 0; k < t.values.size(); ++k) {
    CHECK(std::memcmp(&back.values[k], &t.values[k], sizeof(float)) == 0);
  }
}

TEST_CASE("tensor format errors") {
  StoredTensor t;
  t.dims = {2, 2};
  t.values = {1, 2, 3, 4};
  auto bytes = encode_tensor(t);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_tensor(truncated), FormatError);
  CHECK_THROWS_AS(decode_tensor(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 7)), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_tensor(version), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_tensor(trailing), FormatError);
  auto rank0 = bytes;
  rank0[5] = 0;
  CHECK_THROWS_AS(decode_tensor(rank0), FormatError);
  CHECK_THROWS_AS(encode_tensor(StoredTensor{}), FormatError);
  StoredTensor zero_dim;
  zero_dim.dims = {0, 3};
  CHECK_THROWS_AS(encode_tensor(zero_dim), FormatError);
  CHECK_THROWS_AS(read_tensor("/nonexistent/x.c2am"), IoError);
}

TEST_CASE("config parsing, overrides and validation") {
  TempDir dir("cfg");
  spit(dir.path() / "run.ini",
       "# comment\n[train]\nbatch_size = 8\nalpha = 0.5 ; inline\nbackbone = \"builtin\"\noutput_dir = from_file\n");
  Config cfg = load_config(dir.path() / "run.ini");
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.alpha == 0.5);
  CHECK(cfg.output_dir == "from_file");

  ::setenv("C2AM_OUT", "from_env", 1);
  apply_environment(cfg);
  CHECK(cfg.output_dir == "from_env");
  ::unsetenv("C2AM_OUT");
  cfg.set("output_dir", "from_flag");
  CHECK(cfg.output_dir == "from_flag");

  cfg.set("encoder_channels", "8,16");
  CHECK(cfg.encoder_channels == std::vector<int>{8, 16});
  cfg.set("augment_flip", "false");
  CHECK_FALSE(cfg.augment_flip);

  Config round;
  apply_config_values(round, cfg.to_map());
  CHECK(round.to_map() == cfg.to_map());

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("epochs", "ten"), ConfigError);
  CHECK_THROWS_AS(cfg.set("lr", "1e-3x"), ConfigError);
  auto invalid = [](const std::string& key, const std::string& value) {
    Config c;
    c.set(key, value);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  invalid("batch_size", "1");
  invalid("alpha", "-0.1");
  invalid("theta", "1");
  invalid("backbone", "resnet50");
  invalid("padding", "reflect");
  invalid("head_init", "xavier");
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path() / "missing.ini"), IoError);
}

TEST_CASE("box and class tables") {
  TempDir dir("tables");
  const std::vector<BoxRow> rows{{"a", {1, 2, 3, 4}}, {"b", {0, 0, 9, 9}}, {"a", {5, 5, 6, 6}}};
  write_box_csv(dir.path() / "boxes.csv", rows);
  CHECK(slurp(dir.path() / "boxes.csv") == "image_id,xmin,ymin,xmax,ymax\na,1,2,3,4\nb,0,0,9,9\na,5,5,6,6\n");
  const auto back = read_box_rows(dir.path() / "boxes.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[2].box == BoundingBox{5, 5, 6, 6});
  const GtBoxTable gts = read_gt_boxes(dir.path() / "boxes.csv");
  CHECK(gts.at("a").size() == 2);
  CHECK_THROWS_AS(read_pred_boxes(dir.path() / "boxes.csv"), FormatError);

  spit(dir.path() / "bad.csv", "image_id,xmin,ymin,xmax,ymax\na,5,0,1,1\n");
  CHECK_THROWS_AS(read_box_rows(dir.path() / "bad.csv"), FormatError);
  spit(dir.path() / "ranks.csv", "image_id,class_rank_1,class_rank_2\nx,3,1\n");
  CHECK(read_ranked_classes(dir.path() / "ranks.csv").at("x") == std::vector<int>{3, 1});
  spit(dir.path() / "cls.csv", "image_id,class_id\nx,3\n");
  CHECK(read_class_table(dir.path() / "cls.csv").at("x") == 3);
}

TEST_CASE("image and label PNG round trips") {
  TempDir dir("png");
  RgbImage img(5, 7);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(k * 37);
  write_png_rgb(dir.path() / "i.png", img);
  const RgbImage back = read_image(dir.path() / "i.png");
  CHECK(back.pixels == img.pixels);

  Grid<int> labels(4, 4, 0);
  labels(1, 2) = 3;
  labels(3, 3) = 255;
  write_label_png(dir.path() / "l.png", labels);
  CHECK(read_label_png(dir.path() / "l.png") == labels);
  CHECK_THROWS_AS(read_image(dir.path() / "none.png"), IoError);
}

TEST_CASE("synthetic samples: tight boxes and color separation") {
  for (int i = 0; i < 200; ++i) {
    const SyntheticSample s = make_synthetic_sample(7, i, 64, "s");
    CHECK(s.gt_box == tight_box(s.gt_mask));
    std::size_t on = 0;
    double fg[3] = {0, 0, 0}, bg[3] = {0, 0, 0};
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        const bool in = s.gt_mask(r, c) != 0;
        on += in;
        for (int ch = 0; ch < 3; ++ch) (in ? fg : bg)[ch] += s.image.at(r, c, ch);
      }
    }
    REQUIRE(on > 0);
    double d2 = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      const double diff = fg[ch] / on - bg[ch] / (64.0 * 64.0 - on);
      d2 += diff * diff;
    }
    CHECK(std::sqrt(d2) > kColorMargin);
    CHECK(s.cam.class_ids == std::vector<int>{s.class_id()});
  }
}

TEST_CASE("synthetic dataset is byte-identical per seed and loads as a dataset") {
  TempDir a("synA"), b("synB"), c("synC");
  SyntheticOptions o;
  o.n_train = 6;
  o.n_calib = 2;
  o.n_test = 2;
  generate_synthetic(o, a.path());
  generate_synthetic(o, b.path());
  CHECK(sha256_tree(a.path()) == sha256_tree(b.path()));
  o.seed = 8;
  generate_synthetic(o, c.path());
  CHECK(sha256_tree(a.path()) != sha256_tree(c.path()));

  const Dataset ds(a.path());
  CHECK(ds.split_ids("train").size() == 6);
  CHECK(ds.split_ids("test").size() == 2);
  const auto id = ds.split_ids("test").front();
  CHECK(ds.image(id).height == 64);
  REQUIRE(ds.mask(id).has_value());
  CHECK(ds.gt_boxes().count(id) == 1);
  CHECK(ds.has_gt_classes());

  const Tensor4 batch = load_image_batch(ds, ds.split_ids("train"), 128);
  CHECK(batch.n == 6);
  CHECK(batch.h == 128);
  CHECK_THROWS_AS((void)ds.image("nope"), IoError);
  CHECK_THROWS_AS(Dataset(a.path() / "missing"), IoError);
}

TEST_CASE("dataset without split files uses every image for training") {
  TempDir dir("voc");
  fs::create_directories(dir.path() / "JPEGImages");
  write_png_rgb(dir.path() / "JPEGImages" / "b.png", RgbImage(40, 40));
  write_png_rgb(dir.path() / "JPEGImages" / "a.png", RgbImage(40, 40));
  const Dataset ds(dir.path());
  CHECK(ds.split_ids("train") == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(ds.mask_path("a").has_value());
}

TEST_CASE("digests and manifests") {
  const std::string abc = "abc";
  CHECK(sha256_hex(std::vector<std::uint8_t>(abc.begin(), abc.end())) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir dir("manifest");
  spit(dir.path() / "in.txt", "abc");
  Config cfg;
  const std::vector<std::string> args{"train", "--epochs", "3"};
  const std::vector<fs::path> inputs{dir.path() / "in.txt", dir.path() / "absent"};
  const auto m = make_manifest("train", args, cfg, inputs);
  write_manifest(dir.path() / "out", m);
  const std::string text = slurp(dir.path() / "out" / "manifest_train.json");
  CHECK(text.find("ba7816bf") != std::string::npos);
  CHECK(text.find("\"epochs\"") != std::string::npos);
  CHECK(m.at("inputs").size() == 1);
}

TEST_CASE("line plot writes a PNG of the requested size") {
  TempDir dir("plot");
  PlotSpec spec;
  spec.title = "loss";
  spec.series.push_back({"a", {0, 1, 2}, {3.0, 2.0, 2.5}});
  write_line_plot(dir.path() / "p.png", spec);
  const RgbImage img = read_image(dir.path() / "p.png");
  CHECK(img.width == spec.width);
  CHECK(img.height == spec.height);
}
