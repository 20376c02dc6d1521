// Acceptance checks: one PASS/FAIL line per criterion. Exit status is nonzero
// when any hard criterion fails; the init-sensitivity table only warns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "c2am/config.hpp"
#include "c2am/contrastive.hpp"
#include "c2am/disentangler.hpp"
#include "c2am/metrics.hpp"
#include "c2am/model.hpp"
#include "c2am/pipeline.hpp"
#include "c2am/refine.hpp"
#include "c2am/synthetic.hpp"
#include "c2am/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace c2am;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradRuntimeSeconds = 30.0;
constexpr double kSymmetryTolerance = 1e-9;
constexpr double kSumIdentityTolerance = 1e-6;
constexpr double kUniformFormTolerance = 1e-12;
constexpr double kMedianIouFloor = 0.5;
constexpr double kTrainingBudgetSeconds = 600.0;
constexpr double kInitSpreadCeiling = 0.1;

int hard_failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail, bool soft = false) {
  const char* status = pass ? "PASS" : (soft ? "WARN" : "FAIL");
  std::cout << "[" << status << "] " << id << ". " << name << ": " << detail << std::endl;
  if (!pass && !soft) ++hard_failures;
}

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

using Vec = std::vector<double>;

Vec random_vec(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(c);
  for (auto& x : v) x = u(rng);
  return v;
}

void gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = gradcheck::random_instance(rng, 3, 6, 4, 4, kDefaultAlpha);
    worst = std::max(worst, gradcheck::max_relative_error(inst, 1e-5));
  }
  const double elapsed = seconds_since(t0);
  report(1, worst < kGradTolerance && elapsed < kGradRuntimeSeconds, "gradient check",
         "max relative error " + num(worst) + " over 10 instances (n=3, C=6, 4x4), tol " + num(kGradTolerance) +
             ", " + num(elapsed, 3) + " s");
}

void polarity_symmetry() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(2, 6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng), c = dim(rng) + 2, hw = dim(rng);
    std::vector<Vec> fg, bg, fg_swapped, bg_swapped;
    for (int i = 0; i < n; ++i) {
      FeatureMap z(c, hw, hw);
      for (auto& v : z.values) v = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
      ActivationMap p(hw, hw);
      for (auto& v : p.values) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      ActivationMap q = p;
      for (auto& v : q.values) v = 1.0 - v;
      const auto a = disentangle(z, p);
      const auto b = disentangle(z, q);
      fg.push_back(a.foreground);
      bg.push_back(a.background);
      // With 1 - P the background vector takes the foreground role.
      fg_swapped.push_back(b.background);
      bg_swapped.push_back(b.foreground);
    }
    const double lhs = total_loss(fg, bg, kDefaultAlpha).l_total;
    const double rhs = total_loss(bg_swapped, fg_swapped, kDefaultAlpha).l_total;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  report(2, worst < kSymmetryTolerance, "polarity symmetry",
         "max |dl_total| " + num(worst) + " over 100 instances, tol " + num(kSymmetryTolerance));
}

void sum_identity() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 16);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = dim(rng), h = dim(rng), w = dim(rng);
    FeatureMap z(c, h, w);
    for (auto& v : z.values) v = std::exponential_distribution<double>(1.0)(rng);
    ActivationMap p(h, w);
    for (auto& v : p.values) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto rep = disentangle(z, p);
    for (int ch = 0; ch < c; ++ch) {
      double total = 0.0;
      for (int k = 0; k < h * w; ++k) total += z.at(ch, k);
      const double err = std::abs(rep.foreground[ch] + rep.background[ch] - total) / std::max(total, 1e-12);
      worst = std::max(worst, err);
    }
  }
  report(3, worst < kSumIdentityTolerance, "foreground+background sum identity",
         "max relative error " + num(worst) + " over 1000 random shapes, tol " + num(kSumIdentityTolerance));
}

void alpha_zero() {
  std::mt19937_64 rng(4);
  bool all_ones = true;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 15;
    std::vector<Vec> reps;
    for (int i = 0; i < n; ++i) reps.push_back(random_vec(rng, 5));
    const RankWeightSet w = rank_weights(similarity_matrix(reps, reps, SimilarityKind::kForeground), 0.0);
    for (double v : w.weights) all_ones = all_ones && v == 1.0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) sum += std::log(oracle::clamp_sim(oracle::cosine(reps[i], reps[j])));
      }
    }
    const double uniform_form = -sum / (static_cast<double>(n) * (n - 1));
    worst = std::max(worst, std::abs(positive_loss(reps, 0.0) - uniform_form));
  }
  report(4, all_ones && worst < kUniformFormTolerance, "alpha=0 degeneracy",
         std::string("weights all exactly 1: ") + (all_ones ? "yes" : "no") + ", max |positive loss - mean form| " +
             num(worst) + ", tol " + num(kUniformFormTolerance));
}

void rank_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(2, 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0, tied_sets = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    const double alpha = u(rng);
    // Every other set is quantized to a handful of levels to force ties.
    const bool quantize = trial % 2 == 1;
    SimilarityMatrix sims;
    sims.n = n;
    sims.kind = trial % 3 == 0 ? SimilarityKind::kBackground : SimilarityKind::kForeground;
    sims.values.assign(static_cast<std::size_t>(n) * n, 1.0);
    Vec pairs;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double s = u(rng);
        if (quantize) s = std::floor(s * 4.0) / 4.0;
        sims.values[i * n + j] = sims.values[j * n + i] = s;
        pairs.push_back(s);
      }
    }
    Vec sorted = pairs;
    std::sort(sorted.begin(), sorted.end());
    tied_sets += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    const Vec expected = oracle::rank_weights(pairs, alpha);
    const RankWeightSet got = rank_weights(sims, alpha);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++k) {
        mismatches += got.at(i, j) != expected[k];
        mismatches += got.at(j, i) != expected[k];
      }
    }
  }
  report(5, mismatches == 0, "rank-weight oracle",
         std::to_string(mismatches) + " mismatching weights over 1000 sets (n<=16, " + std::to_string(tied_sets) +
             " with ties), exact comparison");
}

BoundingBox random_box(std::mt19937_64& rng, int size) {
  std::uniform_int_distribution<int> u(0, size - 1);
  const int x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
  return {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
}

void metric_oracles() {
  std::mt19937_64 rng(6);
  int box_bad = 0, loc_bad = 0, mba_bad = 0, seg_bad = 0;

  // Crafted cases first.
  box_bad += box_iou({0, 0, 9, 9}, {5, 0, 14, 9}) != oracle::raster_iou({0, 0, 9, 9}, {5, 0, 14, 9}, 20);
  box_bad += box_iou({0, 0, 9, 9}, {0, 0, 9, 9}) != 1.0;
  box_bad += box_iou({0, 0, 3, 3}, {10, 10, 12, 12}) != 0.0;

  for (int trial = 0; trial < 2000; ++trial) {
    const BoundingBox a = random_box(rng, 20), b = random_box(rng, 20);
    box_bad += box_iou(a, b) != oracle::raster_iou(a, b, 20);
  }

  for (int trial = 0; trial < 300; ++trial) {
    GtBoxTable gts;
    PredBoxTable preds;
    int correct = 0;
    const int n = 1 + trial % 7;
    for (int i = 0; i < n; ++i) {
      const std::string id = "i" + std::to_string(i);
      const int k = 1 + (trial + i) % 3;
      double best = 0.0;
      preds[id] = random_box(rng, 20);
      for (int g = 0; g < k; ++g) {
        gts[id].push_back(random_box(rng, 20));
        best = std::max(best, oracle::raster_iou(preds[id], gts[id].back(), 20));
      }
      correct += best >= 0.5;
    }
    loc_bad += gt_known_loc(preds, gts) != static_cast<double>(correct) / n;
  }

  std::uniform_int_distribution<int> dim(2, 20);
  std::uniform_int_distribution<int> level(0, 12);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = dim(rng), w = dim(rng), n = 1 + trial % 4;
    std::vector<NamedMap> maps;
    GtBoxTable gts;
    std::vector<std::vector<Vec>> o_maps;
    std::vector<std::vector<BoundingBox>> o_gts;
    for (int i = 0; i < n; ++i) {
      ActivationMap m(h, w);
      for (auto& v : m.values) v = trial % 10 == 0 ? 0.5 : level(rng) / 12.0;
      const std::string id = "m" + std::to_string(i);
      maps.push_back({id, m, {h, w}});
      gts[id] = {random_box(rng, std::min(h, w))};
      std::vector<Vec> rows(h, Vec(w));
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) rows[r][c] = m(r, c);
      }
      o_maps.push_back(rows);
      o_gts.push_back(gts[id]);
    }
    mba_bad += max_box_acc_v2(maps, gts).score != oracle::max_box_acc(o_maps, o_gts, 20);
  }

  std::uniform_int_distribution<int> side(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = side(rng), w = side(rng), classes = 2 + trial % 4;
    std::uniform_int_distribution<int> label(0, classes - 1);
    Grid<int> gt(h, w), pred(h, w);
    for (auto& v : gt.values) v = label(rng);
    for (auto& v : pred.values) v = trial % 5 == 0 ? 0 : label(rng);
    SegConfusion conf(classes);
    conf.accumulate(gt, pred);
    const SegIouResult r = seg_iou(conf);
    const auto expected = oracle::seg_iou(gt.values, pred.values);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const auto it = expected.find(c);
      if (it == expected.end()) {
        seg_bad += r.per_class[c].has_value();
      } else {
        seg_bad += !r.per_class[c].has_value() || *r.per_class[c] != it->second;
        sum += it->second;
      }
    }
    seg_bad += r.miou != sum / static_cast<double>(expected.size());
  }
  const int total = box_bad + loc_bad + mba_bad + seg_bad;
  report(6, total == 0, "metric oracles",
         "mismatches box_iou " + std::to_string(box_bad) + ", gt_known " + std::to_string(loc_bad) +
             ", max_box_acc_v2 " + std::to_string(mba_bad) + ", seg_iou " + std::to_string(seg_bad) +
             " (exact comparison)");
}

struct RunOutcome {
  double median_iou = 0.0;
  PolarityDecision polarity;
};

RunOutcome evaluate(const C2amModel& model, const Dataset& ds, const Config& cfg) {
  const auto calib = infer_maps(model, ds, ds.split_ids(cfg.calib_split));
  const auto test = infer_maps(model, ds, ds.split_ids(cfg.test_split));
  const PolarityDecision polarity = calibrate_polarity(calib, cfg.theta);
  return {mask_iou_summary(test, polarity, cfg.theta, ds).median, polarity};
}

void refinement_property() {
  std::mt19937_64 rng(8);
  int crafted_bad = 0, random_bad = 0, monotone_bad = 0;
  auto brute = [](const CamStack& s, const BackgroundCue& cue) {
    LabelMap out(cue.height, cue.width);
    for (std::size_t k = 0; k < cue.values.size(); ++k) {
      std::vector<std::pair<int, double>> classes;
      for (std::size_t c = 0; c < s.class_ids.size(); ++c) classes.emplace_back(s.class_ids[c], s.maps[c].values[k]);
      out.values[k] = oracle::refine_pixel(cue.values[k], classes);
    }
    return out;
  };

  // Crafted: crossing maps with class-class and cue-class ties.
  CamStack cross;
  cross.class_ids = {2, 1};
  Grid<double> a(2, 3), b(2, 3);
  a.values = {0.1, 0.5, 0.9, 0.3, 0.3, 1.0};
  b.values = {0.9, 0.5, 0.1, 0.3, 0.2, 1.0};
  cross.maps = {a, b};
  BackgroundCue cue(2, 3);
  cue.values = {0.5, 0.4, 0.5, 0.3, 0.1, 0.99};
  const LabelMap got = refine_cam(cross, cue);
  crafted_bad += got != brute(cross, cue);
  crafted_bad += got.values != std::vector<int>{1, 1, 2, 0, 2, 1};

  std::uniform_int_distribution<int> side(1, 8), count(1, 4), q(0, 5);
  std::uniform_real_distribution<double> lift(0.0, 0.6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = side(rng), w = side(rng), k = count(rng);
    CamStack s;
    for (int c = 0; c < k; ++c) {
      s.class_ids.push_back(c * 3 + 1);
      Grid<double> m(h, w);
      for (auto& v : m.values) v = q(rng) / 5.0;
      s.maps.push_back(m);
    }
    BackgroundCue base(h, w);
    for (auto& v : base.values) v = q(rng) / 5.0;
    BackgroundCue higher = base;
    for (auto& v : higher.values) v = std::min(1.0, v + lift(rng));
    const LabelMap before = refine_cam(s, base);
    const LabelMap after = refine_cam(s, higher);
    random_bad += before != brute(s, base);
    for (std::size_t p = 0; p < before.values.size(); ++p) monotone_bad += before.values[p] == 0 && after.values[p] != 0;
  }
  report(8, crafted_bad + random_bad + monotone_bad == 0, "refinement property",
         "crafted mismatches " + std::to_string(crafted_bad) + ", random brute-force mismatches " +
             std::to_string(random_bad) + ", monotonicity violations " + std::to_string(monotone_bad) +
             " over 1000 fixtures");
}

void end_to_end_and_init(const fs::path& scratch) {
  const auto t_data = Clock::now();
  SyntheticOptions opts;
  opts.n_train = 256;
  opts.n_calib = 32;
  opts.n_test = 64;
  opts.seed = 7;
  opts.image_size = 64;
  const fs::path data_dir = scratch / "synthetic";
  generate_synthetic(opts, data_dir);
  const Dataset ds(data_dir);
  std::cout << "  synthetic data: 256/32/64 images at 64x64 in " << num(seconds_since(t_data), 3) << " s"
            << std::endl;

  Config base;
  base.data_dir = data_dir.string();
  base.batch_size = 16;
  base.epochs = 10;
  base.seed = 7;

  struct InitRun {
    std::string label;
    std::string scheme;
    double untrained = 0.0;
    double trained = 0.0;
  };
  std::vector<InitRun> runs{{"kaiming-normal", "kaiming-normal"},
                            {"normal(0.01)", "normal"},
                            {"kaiming-uniform", "kaiming-uniform"},
                            {"uniform(0.01)", "uniform"}};

  for (std::size_t r = 0; r < runs.size(); ++r) {
    Config cfg = base;
    cfg.head_init = runs[r].scheme;
    cfg.head_init_scale = 0.01;
    C2amModel model(cfg);
    runs[r].untrained = evaluate(model, ds, cfg).median_iou;
    const auto t0 = Clock::now();
    const TrainResult result = train(model, ds);
    const double elapsed = seconds_since(t0);
    const RunOutcome outcome = evaluate(model, ds, cfg);
    runs[r].trained = outcome.median_iou;

    if (r == 0) {
      Vec totals;
      for (const auto& s : result.steps) totals.push_back(s.loss.l_total);
      const int per_epoch = static_cast<int>(totals.size()) / cfg.epochs;
      const Vec smoothed = smooth(totals, per_epoch);
      const double first = smoothed[per_epoch - 1];
      const double last = smoothed.back();
      const double first_mean = result.epochs.front().mean.l_total;
      const double last_mean = result.epochs.back().mean.l_total;
      const bool pass = outcome.median_iou >= kMedianIouFloor && last < first && last_mean < first_mean &&
                        elapsed <= kTrainingBudgetSeconds;
      report(7, pass, "end-to-end synthetic separation",
             "held-out median IoU " + num(outcome.median_iou) + " (floor " + num(kMedianIouFloor) +
                 "), untrained checkpoint " + num(runs[r].untrained) + "; smoothed l_total epoch 1 " + num(first) +
                 " -> epoch 10 " + num(last) + " (epoch means " + num(first_mean) + " -> " + num(last_mean) +
                 "); polarity " + (outcome.polarity.flipped ? "1-P" : "P") + " (votes " +
                 std::to_string(outcome.polarity.votes_for) + "/" + std::to_string(outcome.polarity.votes_against) +
                 "); training " + num(elapsed, 3) + " s (budget " + num(kTrainingBudgetSeconds, 3) + " s)");
    }
  }

  double lo = 1.0, hi = 0.0;
  std::cout << "  head init          untrained  trained" << std::endl;
  for (const auto& run : runs) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-18s %9.3f  %7.3f", run.label.c_str(), run.untrained, run.trained);
    std::cout << line << std::endl;
    lo = std::min(lo, run.trained);
    hi = std::max(hi, run.trained);
  }
  report(9, hi - lo <= kInitSpreadCeiling, "head-init insensitivity",
         "spread of held-out median IoU " + num(hi - lo) + " across 4 inits (ceiling " + num(kInitSpreadCeiling) + ")",
         /*soft=*/true);
}

void full_scale_documented(const fs::path& readme) {
  std::ifstream in(readme);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const bool documented = text.find("## Full-scale reproduction") != std::string::npos &&
                          text.find("features-dir:") != std::string::npos &&
                          text.find("eval-wsol") != std::string::npos && text.find("eval-wsss") != std::string::npos;
  report(10, documented, "full-scale numbers",
         std::string("not reproducible at desk scale (needs full datasets and pretrained backbones); ") +
             (documented ? "reproduction commands documented in README" : "README reproduction section missing"));
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = Clock::now();
  std::cout << "acceptance checks" << std::endl;
  gradient_check();
  polarity_symmetry();
  sum_identity();
  alpha_zero();
  rank_oracle();
  metric_oracles();
  refinement_property();
  {
    TempDir scratch("acceptance");
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : scratch.path();
    end_to_end_and_init(dir);
  }
  full_scale_documented(fs::path(C2AM_SOURCE_DIR) / "README.md");
  std::cout << "total " << num(seconds_since(t0), 4) << " s, " << hard_failures << " hard failure(s)" << std::endl;
  return hard_failures == 0 ? 0 : 1;
}
