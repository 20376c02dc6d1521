#include <doctest.h>

#include <random>

#include "c2am/errors.hpp"
#include "c2am/postprocess.hpp"
#include "oracles.hpp"

using namespace c2am;

namespace {

ActivationMap grid_of(int h, int w, std::vector<double> values) {
  ActivationMap m(h, w);
  m.values = std::move(values);
  return m;
}

BinaryMask mask_from(const std::vector<std::vector<int>>& rows) {
  BinaryMask m;
  m.pixels = Grid<std::uint8_t>(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), 0);
  for (int r = 0; r < m.pixels.height; ++r) {
    for (int c = 0; c < m.pixels.width; ++c) m.pixels(r, c) = static_cast<std::uint8_t>(rows[r][c]);
  }
  return m;
}

oracle::Mask to_rows(const BinaryMask& m) {
  oracle::Mask rows(m.pixels.height, std::vector<int>(m.pixels.width));
  for (int r = 0; r < m.pixels.height; ++r) {
    for (int c = 0; c < m.pixels.width; ++c) rows[r][c] = m.pixels(r, c);
  }
  return rows;
}

// Gaussian bump centred in the map: its superlevel sets avoid the border.
ActivationMap centred_blob(int size, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> noise(-jitter, jitter);
  ActivationMap m(size, size);
  const double mid = (size - 1) / 2.0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double d2 = (r - mid) * (r - mid) + (c - mid) * (c - mid);
      m(r, c) = std::exp(-d2 / (size * 0.6)) + noise(rng);
    }
  }
  return m;
}

ActivationMap random_map(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ActivationMap m(h, w);
  for (auto& v : m.values) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("binarize normalizes before thresholding") {
  const BinaryMask m = binarize(grid_of(2, 2, {0.6, 0.4, 0.7, 0.2}), 0.5);
  CHECK(m.pixels.values == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(m.threshold_used == 0.5);
  CHECK_FALSE(m.degenerate);
}

TEST_CASE("binarize: constant map is empty and flagged") {
  const BinaryMask m = binarize(ActivationMap(3, 3, 0.4), 0.5);
  CHECK(m.count() == 0);
  CHECK(m.degenerate);
}

TEST_CASE("binarize: tiny threshold keeps all but the minimum") {
  std::mt19937_64 rng(1);
  const ActivationMap m = random_map(rng, 5, 6);
  const BinaryMask b = binarize(m, 1e-12);
  CHECK(b.count() == m.size() - 1);
  const auto lo = std::min_element(m.values.begin(), m.values.end()) - m.values.begin();
  CHECK(b.pixels.values[lo] == 0);
  CHECK_THROWS_AS(binarize(m, 0.0), InputError);
  CHECK_THROWS_AS(binarize(m, 1.0), InputError);
}

TEST_CASE("binarize is invariant to positive affine transforms") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    // Dyadic values keep every affine image exactly representable.
    std::uniform_int_distribution<int> q(0, 64);
    ActivationMap m(6, 6);
    for (auto& v : m.values) v = q(rng) / 64.0;
    ActivationMap t = m;
    for (auto& v : t.values) v = 4.0 * v + 2.0;
    for (double theta : {0.25, 0.5, 0.75}) {
      CHECK(binarize(m, theta).pixels == binarize(t, theta).pixels);
    }
  }
}

TEST_CASE("largest component examples") {
  const BinaryMask two = mask_from({{1, 1, 0, 0}, {0, 1, 0, 1}, {0, 0, 0, 0}});
  CHECK(largest_component(two).pixels == mask_from({{1, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}}).pixels);

  const BinaryMask single = mask_from({{0, 1, 0}, {1, 1, 1}, {0, 1, 0}});
  CHECK(largest_component(single).pixels == single.pixels);

  const BinaryMask tie = mask_from({{0, 0, 0, 1}, {1, 0, 0, 1}, {1, 0, 0, 0}});
  CHECK(largest_component(tie).pixels == mask_from({{0, 0, 0, 1}, {0, 0, 0, 1}, {0, 0, 0, 0}}).pixels);

  // Diagonal neighbours connect.
  const BinaryMask diag = mask_from({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(largest_component(diag).count() == 3);

  CHECK_THROWS_AS(largest_component(mask_from({{0, 0}, {0, 0}})), InputError);
}

TEST_CASE("largest component matches the flood-fill oracle") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.4);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = dim(rng), w = dim(rng);
    oracle::Mask rows(h, std::vector<int>(w));
    bool any = false;
    for (auto& row : rows) {
      for (auto& v : row) {
        v = on(rng);
        any = any || v;
      }
    }
    if (!any) rows[0][0] = 1;
    CHECK(to_rows(largest_component(mask_from(rows))) == oracle::largest_component(rows));
  }
}

TEST_CASE("extract bbox examples") {
  BinaryMask block;
  block.pixels = Grid<std::uint8_t>(8, 10, 0);
  for (int r = 2; r <= 4; ++r) {
    for (int c = 5; c <= 7; ++c) block.pixels(r, c) = 1;
  }
  CHECK(extract_bbox(block, {8, 10}) == BoundingBox{5, 2, 7, 4});

  BinaryMask dot;
  dot.pixels = Grid<std::uint8_t>(6, 6, 0);
  dot.pixels(3, 1) = 1;
  CHECK(extract_bbox(dot, {6, 6}) == BoundingBox{1, 3, 1, 3});

  BinaryMask coarse;
  coarse.pixels = Grid<std::uint8_t>(4, 4, 0);
  for (int r = 1; r <= 2; ++r) {
    for (int c = 1; c <= 2; ++c) coarse.pixels(r, c) = 1;
  }
  CHECK(extract_bbox(coarse, {64, 64}) == BoundingBox{16, 16, 47, 47});

  CHECK_THROWS_AS(extract_bbox(mask_from({{0}}), {4, 4}), InputError);
}

TEST_CASE("extract bbox covers every rescaled set pixel") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution on(0.2);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_int_distribution<int> scale(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = dim(rng), w = dim(rng), s = scale(rng);
    BinaryMask m;
    m.pixels = Grid<std::uint8_t>(h, w, 0);
    for (auto& v : m.pixels.values) v = on(rng);
    m.pixels(h / 2, w / 2) = 1;
    const BoundingBox box = extract_bbox(m, {h * s, w * s});
    CHECK(box.xmin >= 0);
    CHECK(box.ymin >= 0);
    CHECK(box.xmax < w * s);
    CHECK(box.ymax < h * s);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!m.pixels(r, c)) continue;
        CHECK(box.xmin <= c * s);
        CHECK(box.xmax >= (c + 1) * s - 1);
        CHECK(box.ymin <= r * s);
        CHECK(box.ymax >= (r + 1) * s - 1);
      }
    }
  }
}

TEST_CASE("polarity: centred blobs, inverted blobs and ties") {
  std::mt19937_64 rng(5);
  std::vector<ActivationMap> centred, inverted;
  for (int i = 0; i < 16; ++i) {
    centred.push_back(centred_blob(12, 0.02, rng));
    inverted.push_back(invert(centred.back()));
  }
  const PolarityDecision keep = resolve_polarity(centred, 0.5);
  CHECK_FALSE(keep.flipped);
  CHECK(keep.votes_for == 16);
  CHECK(keep.votes_against == 0);
  CHECK(keep.calibration_size == 16);

  const PolarityDecision flip = resolve_polarity(inverted, 0.5);
  CHECK(flip.flipped);
  CHECK(flip.votes_against == 16);

  std::vector<ActivationMap> mixed(centred.begin(), centred.begin() + 8);
  mixed.insert(mixed.end(), inverted.begin(), inverted.begin() + 8);
  const PolarityDecision tie = resolve_polarity(mixed, 0.5);
  CHECK(tie.tie);
  CHECK_FALSE(tie.flipped);
  CHECK(tie.votes_for + tie.votes_against <= tie.calibration_size);

  CHECK_THROWS_AS(resolve_polarity(std::vector<ActivationMap>(centred.begin(), centred.begin() + 15), 0.5),
                  InputError);
}

TEST_CASE("polarity of complemented maps is opposite") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ActivationMap> maps, complements;
    for (int i = 0; i < 17; ++i) {
      ActivationMap m = i % 3 == 0 ? invert(centred_blob(10, 0.05, rng)) : centred_blob(10, 0.05, rng);
      complements.push_back(invert(m));
      maps.push_back(std::move(m));
    }
    const PolarityDecision a = resolve_polarity(maps, 0.5);
    const PolarityDecision b = resolve_polarity(complements, 0.5);
    CHECK(a.flipped != b.flipped);
    CHECK(a.votes_for == b.votes_against);
  }
}

TEST_CASE("bilinear resize helper") {
  const ActivationMap m = grid_of(2, 2, {0.0, 1.0, 1.0, 0.0});
  const ActivationMap up = resize_bilinear(m, 4, 4);
  // Half-pixel centres: output sample y maps to (y + 0.5) / 2 - 0.5.
  const double expected[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                 {0.25, 0.375, 0.625, 0.75},
                                 {0.75, 0.625, 0.375, 0.25},
                                 {1.0, 0.75, 0.25, 0.0}};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) CHECK(up(r, c) == doctest::Approx(expected[r][c]).epsilon(1e-12));
  }
}

TEST_CASE("pseudo boxes: constant maps fall back to full-image boxes with warnings") {
  std::vector<NamedMap> maps;
  for (int i = 0; i < 3; ++i) maps.push_back({"m" + std::to_string(i), ActivationMap(4, 4, 0.5), {64, 48}});
  const PseudoBoxTable t = generate_pseudo_boxes(maps, PolarityDecision{}, 0.5);
  REQUIRE(t.rows.size() == 3);
  for (const auto& row : t.rows) CHECK(row.box == BoundingBox{0, 0, 47, 63});
  CHECK(t.warnings.size() == 3);
}

TEST_CASE("pseudo boxes follow polarity and are deterministic") {
  std::mt19937_64 rng(7);
  std::vector<NamedMap> maps;
  for (int i = 0; i < 5; ++i) maps.push_back({"m" + std::to_string(i), random_map(rng, 8, 8), {32, 32}});
  const PseudoBoxTable a = generate_pseudo_boxes(maps, PolarityDecision{}, 0.5);
  const PseudoBoxTable b = generate_pseudo_boxes(maps, PolarityDecision{}, 0.5);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].image_id == maps[k].id);
    CHECK(a.rows[k].box == b.rows[k].box);
  }
  PolarityDecision flipped;
  flipped.flipped = true;
  std::vector<NamedMap> inverted = maps;
  for (auto& m : inverted) m.map = invert(m.map);
  const PseudoBoxTable c = generate_pseudo_boxes(inverted, flipped, 0.5);
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(c.rows[k].box == a.rows[k].box);
}
