// Command-line driver: synth, train, infer, extract-boxes, refine-cam,
// eval-wsol, eval-wsss, report.

#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "c2am/config.hpp"
#include "c2am/dataset.hpp"
#include "c2am/errors.hpp"
#include "c2am/manifest.hpp"
#include "c2am/metrics.hpp"
#include "c2am/model.hpp"
#include "c2am/pipeline.hpp"
#include "c2am/plot.hpp"
#include "c2am/synthetic.hpp"
#include "c2am/tables.hpp"
#include "c2am/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace c2am;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string data;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Key-value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "Override a config key (key=value); repeatable");
  cmd->add_option("--data", o.data, "Dataset directory (config key data_dir)");
  cmd->add_option("--out", o.out, "Output directory (config key output_dir; env C2AM_OUT)");
}

// file < environment < --set < dedicated flags.
Config resolve_config(const CommonOptions& o, const std::map<std::string, std::string>& flags) {
  Config cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  apply_environment(cfg);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : flags) cfg.set(k, v);
  if (!o.data.empty()) cfg.data_dir = o.data;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

Dataset open_dataset(const Config& cfg) {
  if (!fs::is_directory(cfg.data_dir)) {
    throw IoError("dataset directory '" + cfg.data_dir + "' not found. Generate one with `c2am synth --out " +
                  cfg.data_dir + "` or point --data at an existing dataset.");
  }
  return Dataset(cfg.data_dir);
}

fs::path out_dir(const Config& cfg) { return cfg.output_dir; }
fs::path default_checkpoint(const Config& cfg) { return out_dir(cfg) / "checkpoints" / "last.ckpt"; }
fs::path default_maps(const Config& cfg, const std::string& split) { return out_dir(cfg) / "maps" / split; }
fs::path default_polarity(const Config& cfg) { return out_dir(cfg) / "polarity.json"; }

std::unique_ptr<C2amModel> open_model(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) {
    throw IoError("checkpoint '" + checkpoint.string() + "' not found. Run `c2am train` first or pass --checkpoint.");
  }
  return load_checkpoint(checkpoint).model;
}

// Maps for `split`, computed from the checkpoint and cached when absent.
std::vector<NamedMap> ensure_maps(const Config& cfg, const std::string& split, const fs::path& maps_dir,
                                  const fs::path& checkpoint) {
  if (fs::exists(maps_dir / "index.csv")) return read_maps(maps_dir);
  const Dataset ds = open_dataset(cfg);
  const auto model = open_model(checkpoint);
  const std::vector<std::string> ids = ds.split_ids(split);
  if (ids.empty()) throw InputError("split '" + split + "' of " + cfg.data_dir + " is empty");
  auto maps = infer_maps(*model, ds, ids);
  write_maps(maps_dir, maps);
  return maps;
}

PolarityDecision ensure_polarity(const Config& cfg, const fs::path& polarity_path, const fs::path& checkpoint) {
  if (fs::exists(polarity_path)) return polarity_from_json(read_json(polarity_path));
  const auto calib = ensure_maps(cfg, cfg.calib_split, default_maps(cfg, cfg.calib_split), checkpoint);
  const PolarityDecision d = calibrate_polarity(calib, cfg.theta);
  write_json(polarity_path, polarity_json(d));
  return d;
}

void finish(const std::string& command, const std::vector<std::string>& args, const Config& cfg,
            const std::vector<fs::path>& inputs) {
  write_manifest(out_dir(cfg), make_manifest(command, args, cfg, inputs));
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- subcommands

struct SynthArgs {
  CommonOptions common;
  int n_train = 256;
  int n_calib = 32;
  int n_test = 64;
  std::uint64_t seed = 7;
  int size = 64;
  bool no_cams = false;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& args) {
  // For synth, --out names the dataset to create.
  CommonOptions common = a.common;
  if (!common.out.empty()) common.data = common.out;
  common.out.clear();
  const Config cfg = resolve_config(common, {});
  SyntheticOptions o;
  o.n_train = a.n_train;
  o.n_calib = a.n_calib;
  o.n_test = a.n_test;
  o.seed = a.seed;
  o.image_size = a.size;
  o.with_cams = !a.no_cams;
  generate_synthetic(o, cfg.data_dir);
  std::cout << "wrote " << (o.n_train + o.n_calib + o.n_test) << " images to " << cfg.data_dir << "\n";
  Config snapshot = cfg;
  snapshot.seed = a.seed;
  write_manifest(cfg.data_dir, make_manifest("synth", args, snapshot, {}));
  return 0;
}

struct TrainArgs {
  CommonOptions common;
  std::map<std::string, std::string> flags;
  bool quiet = false;
};

int run_train(const TrainArgs& a, const std::vector<std::string>& args) {
  const Config cfg = resolve_config(a.common, a.flags);
  const Dataset ds = open_dataset(cfg);
  C2amModel model(cfg);
  TrainOptions opts;
  opts.log_path = out_dir(cfg) / "train_log.csv";
  opts.checkpoint_dir = out_dir(cfg) / "checkpoints";
  const TrainResult result = train(model, ds, opts);
  json summary;
  summary["epochs"] = json::array();
  for (const auto& e : result.epochs) {
    summary["epochs"].push_back({{"epoch", e.epoch}, {"l_neg", e.mean.l_neg}, {"l_pos_f", e.mean.l_pos_f},
                                 {"l_pos_b", e.mean.l_pos_b}, {"l_total", e.mean.l_total}});
    if (!a.quiet) {
      std::cout << "epoch " << e.epoch << "  l_total " << fmt(e.mean.l_total) << "  l_neg " << fmt(e.mean.l_neg)
                << "  l_pos " << fmt(e.mean.l_pos, 6) << "\n";
    }
  }
  summary["checkpoint"] = result.last_checkpoint.generic_string();
  summary["steps"] = result.steps.size();
  write_json(out_dir(cfg) / "train_summary.json", summary);
  std::cout << "checkpoint: " << result.last_checkpoint.string() << "\n";
  finish("train", args, cfg, {cfg.data_dir});
  return 0;
}

struct InferArgs {
  CommonOptions common;
  std::string checkpoint;
  std::vector<std::string> splits;
};

int run_infer(const InferArgs& a, const std::vector<std::string>& args) {
  const Config cfg = resolve_config(a.common, {});
  const Dataset ds = open_dataset(cfg);
  const fs::path ckpt = a.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(a.checkpoint);
  const auto model = open_model(ckpt);
  std::vector<std::string> splits = a.splits;
  if (splits.empty()) splits = {cfg.calib_split, cfg.test_split};
  for (const auto& split : splits) {
    const auto ids = ds.split_ids(split);
    if (ids.empty()) throw InputError("split '" + split + "' of " + cfg.data_dir + " is empty");
    const auto maps = infer_maps(*model, ds, ids);
    write_maps(default_maps(cfg, split), maps);
    std::cout << split << ": " << maps.size() << " maps (" << maps.front().map.height << "×"
              << maps.front().map.width << ") -> " << default_maps(cfg, split).string() << "\n";
  }
  finish("infer", args, cfg, {ckpt, cfg.data_dir});
  return 0;
}

struct BoxArgs {
  CommonOptions common;
  std::string checkpoint;
  std::string maps;
  std::string calib_maps;
  std::string output;
  std::optional<double> theta;
  bool calibrate_theta = false;
};

int run_extract_boxes(const BoxArgs& a, const std::vector<std::string>& args) {
  const Config cfg = resolve_config(a.common, {});
  const fs::path ckpt = a.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(a.checkpoint);
  const fs::path calib_dir = a.calib_maps.empty() ? default_maps(cfg, cfg.calib_split) : fs::path(a.calib_maps);
  const fs::path maps_dir = a.maps.empty() ? default_maps(cfg, cfg.test_split) : fs::path(a.maps);
  const auto calib = ensure_maps(cfg, cfg.calib_split, calib_dir, ckpt);
  const auto maps = ensure_maps(cfg, cfg.test_split, maps_dir, ckpt);

  double theta = a.theta.value_or(cfg.theta);
  const PolarityDecision polarity = calibrate_polarity(calib, theta);
  json pol = polarity_json(polarity);
  if (a.calibrate_theta) {
    const Dataset ds = open_dataset(cfg);
    if (!ds.has_gt_boxes()) throw IoError("θ calibration needs gt_boxes.csv in " + cfg.data_dir);
    const ThetaCalibration tc = calibrate_theta(calib, polarity, ds.gt_boxes());
    theta = tc.theta;
    pol["theta_calibration"] = {{"theta", tc.theta}, {"calib_gt_known", tc.gt_known}};
  }
  pol["theta"] = theta;
  write_json(default_polarity(cfg), pol);

  const PseudoBoxTable table = generate_pseudo_boxes(corrected(maps, polarity), PolarityDecision{}, theta);
  const fs::path output = a.output.empty() ? out_dir(cfg) / "pseudo_boxes.csv" : fs::path(a.output);
  write_box_csv(output, table.rows);
  write_lines(fs::path(output).replace_extension(".warnings.txt"), table.warnings);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "polarity: " << (polarity.flipped ? "1-P is foreground" : "P is foreground") << " (votes "
            << polarity.votes_for << "/" << polarity.votes_against << (polarity.tie ? ", tie" : "") << ")\n";
  std::cout << "theta: " << theta << "\n" << table.rows.size() << " boxes -> " << output.string() << "\n";
  finish("extract-boxes", args, cfg, {calib_dir, maps_dir});
  return 0;
}

struct RefineArgs {
  CommonOptions common;
  std::string checkpoint;
  std::string maps;
  std::string polarity;
  std::string cams;
  double baseline_cue = 0.5;
};

int run_refine(const RefineArgs& a, const std::vector<std::string>& args, bool evaluate) {
  const Config cfg = resolve_config(a.common, {});
  const Dataset ds = open_dataset(cfg);
  const fs::path ckpt = a.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(a.checkpoint);
  const fs::path maps_dir = a.maps.empty() ? default_maps(cfg, cfg.test_split) : fs::path(a.maps);
  const fs::path pol_path = a.polarity.empty() ? default_polarity(cfg) : fs::path(a.polarity);
  const fs::path cam_dir = a.cams.empty() ? fs::path(cfg.data_dir) / "cams" : fs::path(a.cams);
  if (!fs::is_directory(cam_dir)) throw IoError("CAM directory '" + cam_dir.string() + "' not found (pass --cams)");
  const auto maps = ensure_maps(cfg, cfg.test_split, maps_dir, ckpt);
  const PolarityDecision polarity = ensure_polarity(cfg, pol_path, ckpt);
  const fs::path wsss_dir = out_dir(cfg) / "wsss";
  const WsssOutcome outcome = run_wsss(maps, polarity, ds, cam_dir, a.baseline_cue, evaluate ? fs::path{} : wsss_dir);
  const SegIouResult refined = seg_iou(outcome.refined);
  const SegIouResult baseline = seg_iou(outcome.baseline);
  json report{{"refined", seg_iou_json(refined)},
              {"baseline_constant_cue", seg_iou_json(baseline)},
              {"baseline_cue", a.baseline_cue},
              {"miou_gain", refined.miou - baseline.miou},
              {"n_images", maps.size()},
              {"polarity", polarity_json(polarity)}};
  const std::string name = evaluate ? "eval_wsss.json" : "refine_summary.json";
  write_json(out_dir(cfg) / name, report);
  if (!evaluate) std::cout << "refined labels -> " << (wsss_dir / "labels").string() << "\n";
  std::cout << "mIoU refined " << fmt(refined.miou) << "  constant cue " << a.baseline_cue << ": "
            << fmt(baseline.miou) << "\n";
  finish(evaluate ? "eval-wsss" : "refine-cam", args, cfg, {maps_dir, pol_path, cam_dir});
  return 0;
}

struct EvalWsolArgs {
  CommonOptions common;
  std::string checkpoint;
  std::string boxes;
  std::string maps;
  std::string gt;
  std::string gt_classes;
  std::string class_predictions;
};

int run_eval_wsol(const EvalWsolArgs& a, const std::vector<std::string>& args) {
  const Config cfg = resolve_config(a.common, {});
  const fs::path ckpt = a.checkpoint.empty() ? default_checkpoint(cfg) : fs::path(a.checkpoint);
  const fs::path gt_path = a.gt.empty() ? fs::path(cfg.data_dir) / "gt_boxes.csv" : fs::path(a.gt);
  if (!fs::exists(gt_path)) {
    throw IoError("GT boxes '" + gt_path.string() + "' not found. Pass --gt or --data pointing at a dataset.");
  }
  const GtBoxTable gts = read_gt_boxes(gt_path);
  const fs::path maps_dir = a.maps.empty() ? default_maps(cfg, cfg.test_split) : fs::path(a.maps);
  const auto maps = ensure_maps(cfg, cfg.test_split, maps_dir, ckpt);
  const PolarityDecision polarity = ensure_polarity(cfg, default_polarity(cfg), ckpt);
  double theta = cfg.theta;
  if (fs::exists(default_polarity(cfg))) theta = read_json(default_polarity(cfg)).value("theta", cfg.theta);

  PredBoxTable preds;
  fs::path boxes_path = a.boxes;
  if (!boxes_path.empty()) {
    preds = read_pred_boxes(boxes_path);
  } else {
    for (const auto& row : generate_pseudo_boxes(corrected(maps, polarity), PolarityDecision{}, theta).rows) {
      preds[row.image_id] = row.box;
    }
  }
  std::optional<ClassTable> classes;
  std::optional<RankedClassTable> ranked;
  const fs::path classes_path = a.gt_classes.empty() ? fs::path(cfg.data_dir) / "gt_classes.csv" : fs::path(a.gt_classes);
  if (!a.class_predictions.empty()) {
    ranked = read_ranked_classes(a.class_predictions);
    classes = read_class_table(classes_path);
  }
  const LocResult loc = localization_accuracy(preds, gts, classes ? &*classes : nullptr, ranked ? &*ranked : nullptr);
  const MaxBoxAccResult mba = max_box_acc_v2(corrected(maps, polarity), gts);
  json report{{"localization", loc_result_json(loc)},
              {"max_box_acc_v2", max_box_acc_json(mba)},
              {"theta", theta},
              {"polarity", polarity_json(polarity)}};
  std::cout << "GT-known Loc " << fmt(loc.gt_known) << "  MaxBoxAccV2 " << fmt(mba.score);
  if (loc.top1) std::cout << "  Top-1 Loc " << fmt(*loc.top1) << "  Top-5 Loc " << fmt(*loc.top5);
  if (fs::is_directory(cfg.data_dir)) {
    const Dataset ds(cfg.data_dir);
    if (!maps.empty() && ds.mask_path(maps.front().id)) {
      const MaskIouSummary iou = mask_iou_summary(maps, polarity, theta, ds);
      report["mask_iou"] = {{"median", iou.median}, {"mean", iou.mean}};
      std::cout << "  median mask IoU " << fmt(iou.median);
    }
  }
  std::cout << "\n";
  write_json(out_dir(cfg) / "eval_wsol.json", report);
  finish("eval-wsol", args, cfg, {gt_path, maps_dir, boxes_path});
  return 0;
}

struct ReportArgs {
  CommonOptions common;
  std::string run;
  std::vector<double> alphas;
  int smooth_window = 8;
};

std::vector<StepRecord> read_train_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("training log '" + path.string() + "' not found (run `c2am train` first or pass --run)");
  std::vector<StepRecord> steps;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 6) throw FormatError(path.string() + ": bad row '" + line + "'");
    StepRecord r;
    r.epoch = std::stoi(fields[0]);
    r.step = std::stoi(fields[1]);
    r.loss = combine_losses(std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4]));
    steps.push_back(r);
  }
  return steps;
}

int run_report(const ReportArgs& a, const std::vector<std::string>& args) {
  const Config cfg = resolve_config(a.common, {});
  const fs::path run = a.run.empty() ? out_dir(cfg) : fs::path(a.run);
  const fs::path report_dir = out_dir(cfg) / "report";
  fs::create_directories(report_dir);
  json summary;

  const auto steps = read_train_log(run / "train_log.csv");
  if (steps.empty()) throw InputError("training log in " + run.string() + " has no steps");
  std::vector<double> x, total, neg, pos;
  for (const auto& s : steps) {
    x.push_back(s.step);
    total.push_back(s.loss.l_total);
    neg.push_back(s.loss.l_neg);
    pos.push_back(s.loss.l_pos);
  }
  PlotSpec loss_plot;
  loss_plot.title = "training loss";
  loss_plot.x_label = "step";
  loss_plot.y_label = "loss";
  loss_plot.series.push_back({"l_total", x, total, {200, 200, 200}});
  loss_plot.series.push_back({"l_total smoothed", x, smooth(total, a.smooth_window), {31, 119, 180}});
  loss_plot.series.push_back({"l_neg smoothed", x, smooth(neg, a.smooth_window), {214, 39, 40}});
  loss_plot.series.push_back({"l_pos smoothed", x, smooth(pos, a.smooth_window), {44, 160, 44}});
  write_line_plot(report_dir / "loss_curve.png", loss_plot);
  summary["loss_curve"] = (report_dir / "loss_curve.png").generic_string();
  std::cout << "loss curve -> " << (report_dir / "loss_curve.png").string() << "\n";

  if (!a.alphas.empty()) {
    const Dataset ds = open_dataset(cfg);
    std::vector<double> medians, mbas;
    json rows = json::array();
    for (double alpha : a.alphas) {
      Config c = cfg;
      c.alpha = alpha;
      c.save_every_epoch = false;
      c.output_dir = (report_dir / "alpha_sweep" / ("alpha_" + fmt(alpha, 2))).string();
      C2amModel model(c);
      TrainOptions opts;
      opts.log_path = fs::path(c.output_dir) / "train_log.csv";
      const TrainResult tr = train(model, ds, opts);
      const auto calib = infer_maps(model, ds, ds.split_ids(c.calib_split));
      const auto test = infer_maps(model, ds, ds.split_ids(c.test_split));
      const PolarityDecision pol = calibrate_polarity(calib, c.theta);
      const MaskIouSummary iou = mask_iou_summary(test, pol, c.theta, ds);
      const double mba = ds.has_gt_boxes() ? max_box_acc_v2(corrected(test, pol), ds.gt_boxes()).score : 0.0;
      medians.push_back(iou.median);
      mbas.push_back(mba);
      rows.push_back({{"alpha", alpha},
                      {"median_mask_iou", iou.median},
                      {"max_box_acc_v2", mba},
                      {"final_epoch_l_total", tr.epochs.back().mean.l_total}});
      std::cout << "alpha " << fmt(alpha, 2) << "  median IoU " << fmt(iou.median) << "  MaxBoxAccV2 " << fmt(mba)
                << "\n";
    }
    PlotSpec sweep;
    sweep.title = "alpha sweep";
    sweep.x_label = "alpha";
    sweep.y_label = "score";
    sweep.series.push_back({"median mask iou", a.alphas, medians, {31, 119, 180}, true});
    sweep.series.push_back({"maxboxaccv2", a.alphas, mbas, {255, 127, 14}, true});
    write_line_plot(report_dir / "alpha_sweep.png", sweep);
    summary["alpha_sweep"] = rows;
    summary["alpha_sweep_plot"] = (report_dir / "alpha_sweep.png").generic_string();
    std::cout << "alpha sweep -> " << (report_dir / "alpha_sweep.png").string() << "\n";
  }
  for (const char* name : {"eval_wsol.json", "eval_wsss.json", "train_summary.json"}) {
    if (fs::exists(run / name)) summary[fs::path(name).stem().string()] = read_json(run / name);
  }
  write_json(report_dir / "report.json", summary);
  finish("report", args, cfg, {run / "train_log.csv"});
  return 0;
}

void add_numeric_flag(CLI::App* cmd, std::map<std::string, std::string>& flags, const std::string& name,
                      const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      "--" + name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-agnostic activation maps: training, box extraction, CAM refinement and evaluation"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv + 1, argv + argc);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic shapes dataset");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--n", synth.n_train, "Training images")->capture_default_str();
  synth_cmd->add_option("--n-calib", synth.n_calib, "Calibration images")->capture_default_str();
  synth_cmd->add_option("--n-test", synth.n_test, "Held-out test images")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--size", synth.size, "Image side length in pixels")->capture_default_str();
  synth_cmd->add_flag("--no-cams", synth.no_cams, "Skip the per-image class activation maps");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the activation head (and built-in encoder)");
  add_common(train_cmd, train_args.common);
  add_numeric_flag(train_cmd, train_args.flags, "n", "batch_size", "Batch size");
  add_numeric_flag(train_cmd, train_args.flags, "epochs", "epochs", "Epochs");
  add_numeric_flag(train_cmd, train_args.flags, "seed", "seed", "Seed for initialization and shuffling");
  add_numeric_flag(train_cmd, train_args.flags, "lr", "lr", "Learning rate");
  add_numeric_flag(train_cmd, train_args.flags, "alpha", "alpha", "Rank-weight smoothness");
  add_numeric_flag(train_cmd, train_args.flags, "backbone", "backbone", "builtin | features-dir:<path>");
  train_cmd->add_flag("--quiet", train_args.quiet, "Suppress per-epoch output");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Write activation maps for dataset splits");
  add_common(infer_cmd, infer.common);
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "Checkpoint (default <out>/checkpoints/last.ckpt)");
  infer_cmd->add_option("--split", infer.splits, "Split(s) to process (default calib and test)");

  BoxArgs boxes;
  auto* boxes_cmd = app.add_subcommand("extract-boxes", "Resolve polarity and write class-agnostic pseudo boxes");
  add_common(boxes_cmd, boxes.common);
  boxes_cmd->add_option("--checkpoint", boxes.checkpoint, "Checkpoint used when maps are missing");
  boxes_cmd->add_option("--maps", boxes.maps, "Map directory (default <out>/maps/<test split>)");
  boxes_cmd->add_option("--calib-maps", boxes.calib_maps, "Calibration map directory");
  boxes_cmd->add_option("--output", boxes.output, "Box CSV (default <out>/pseudo_boxes.csv)");
  boxes_cmd->add_option("--theta", boxes.theta, "Binarization threshold");
  boxes_cmd->add_flag("--calibrate-theta", boxes.calibrate_theta, "Pick theta on the calibration split");

  RefineArgs refine;
  auto* refine_cmd = app.add_subcommand("refine-cam", "Refine CAMs with background cues; writes label PNGs");
  add_common(refine_cmd, refine.common);
  refine_cmd->add_option("--checkpoint", refine.checkpoint, "Checkpoint used when maps are missing");
  refine_cmd->add_option("--maps", refine.maps, "Map directory");
  refine_cmd->add_option("--polarity", refine.polarity, "Polarity JSON (default <out>/polarity.json)");
  refine_cmd->add_option("--cams", refine.cams, "CAM directory (default <data>/cams)");
  refine_cmd->add_option("--baseline-cue", refine.baseline_cue, "Constant cue of the comparison run")
      ->capture_default_str();

  RefineArgs eval_wsss = {};
  auto* wsss_cmd = app.add_subcommand("eval-wsss", "mIoU of refined CAMs versus a constant-cue baseline");
  add_common(wsss_cmd, eval_wsss.common);
  wsss_cmd->add_option("--checkpoint", eval_wsss.checkpoint, "Checkpoint used when maps are missing");
  wsss_cmd->add_option("--maps", eval_wsss.maps, "Map directory");
  wsss_cmd->add_option("--polarity", eval_wsss.polarity, "Polarity JSON");
  wsss_cmd->add_option("--cams", eval_wsss.cams, "CAM directory (default <data>/cams)");
  wsss_cmd->add_option("--baseline-cue", eval_wsss.baseline_cue, "Constant cue of the comparison run")
      ->capture_default_str();

  EvalWsolArgs wsol;
  auto* wsol_cmd = app.add_subcommand("eval-wsol", "GT-known / Top-k localization and MaxBoxAccV2");
  add_common(wsol_cmd, wsol.common);
  wsol_cmd->add_option("--checkpoint", wsol.checkpoint, "Checkpoint used when maps are missing");
  wsol_cmd->add_option("--boxes", wsol.boxes, "Predicted box CSV (default: boxes from the maps)");
  wsol_cmd->add_option("--maps", wsol.maps, "Map directory");
  wsol_cmd->add_option("--gt", wsol.gt, "GT box CSV (default <data>/gt_boxes.csv)");
  wsol_cmd->add_option("--gt-classes", wsol.gt_classes, "GT class CSV (default <data>/gt_classes.csv)");
  wsol_cmd->add_option("--class-predictions", wsol.class_predictions,
                       "Ranked class CSV image_id,class_rank_1..5 (enables Top-1/Top-5 Loc)");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Loss-curve and alpha-sweep plots plus a JSON summary");
  add_common(report_cmd, report.common);
  report_cmd->add_option("--run", report.run, "Run directory holding train_log.csv (default <out>)");
  report_cmd->add_option("--alphas", report.alphas, "Train and evaluate once per alpha, e.g. --alphas 0 0.2 0.5")
      ->delimiter(',');
  report_cmd->add_option("--smooth", report.smooth_window, "Moving-average window in steps")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) return run_synth(synth, args);
    if (*train_cmd) return run_train(train_args, args);
    if (*infer_cmd) return run_infer(infer, args);
    if (*boxes_cmd) return run_extract_boxes(boxes, args);
    if (*refine_cmd) return run_refine(refine, args, false);
    if (*wsss_cmd) return run_refine(eval_wsss, args, true);
    if (*wsol_cmd) return run_eval_wsol(wsol, args);
    if (*report_cmd) return run_report(report, args);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
