#include "c2am/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "c2am/errors.hpp"

namespace c2am {

namespace fs = std::filesystem;

namespace {

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.l_neg) && std::isfinite(b.l_pos_f) && std::isfinite(b.l_pos_b) &&
         std::isfinite(b.l_total);
}

void flip_horizontal(double* sample, int channels, int height, int width) {
  for (int ch = 0; ch < channels; ++ch) {
    for (int r = 0; r < height; ++r) {
      double* row = sample + (static_cast<std::size_t>(ch) * height + r) * width;
      std::reverse(row, row + width);
    }
  }
}

}  // namespace

Trainer::Trainer(C2amModel& model) : model_(model), encoder_frozen_(model.config().freeze_encoder) {}

std::vector<Parameter*> Trainer::updated_parameters() {
  if (!encoder_frozen_ || !model_.has_builtin_encoder()) return model_.trainable_parameters();
  return model_.head().parameters();
}

LossBreakdown Trainer::forward_backward(const Tensor4& images, std::span<const std::string> ids) {
  const Config& cfg = model_.config();
  for (Parameter* p : updated_parameters()) p->zero_grad();
  const bool train_encoder = model_.has_builtin_encoder() && !encoder_frozen_;

  Tensor4 features;
  int stride = 1;
  if (model_.has_builtin_encoder()) {
    BuiltinEncoder& enc = model_.encoder();
    features = train_encoder ? enc.forward_train(images) : enc.forward(images);
    stride = enc.stride();
  } else {
    std::vector<FeatureMap> maps;
    for (const auto& id : ids) maps.push_back(model_.precomputed()->load(id, {images.h, images.w}));
    stride = maps.front().stride;
    features = stack_features(maps);
  }
  const int n = features.n;
  if (n < 2) throw InputError("training batches need at least two images");

  const Tensor4 maps = model_.head().forward_train(features);
  std::vector<FeatureMap> zs;
  std::vector<ActivationMap> ps;
  std::vector<std::vector<double>> fg;
  std::vector<std::vector<double>> bg;
  for (int i = 0; i < n; ++i) {
    zs.push_back(feature_map_from(features, i, stride));
    ps.push_back(activation_map_from(maps, i));
    FgBgRepresentation rep = disentangle(zs.back(), ps.back());
    fg.push_back(std::move(rep.foreground));
    bg.push_back(std::move(rep.background));
  }

  const LossGradient lg = total_loss_with_gradient(fg, bg, cfg.alpha);
  if (!finite(lg.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss (l_neg=" << lg.loss.l_neg << ", l_pos_f=" << lg.loss.l_pos_f
        << ", l_pos_b=" << lg.loss.l_pos_b << "); lower lr (currently " << cfg.lr << ")";
    throw DivergenceError(msg.str());
  }

  Tensor4 d_maps(n, 1, maps.h, maps.w);
  Tensor4 d_features(n, features.c, features.h, features.w);
  for (int i = 0; i < n; ++i) {
    const DisentangleGradient g = disentangle_backward(zs[i], ps[i], lg.d_foreground[i], lg.d_background[i]);
    std::copy(g.d_map.values.begin(), g.d_map.values.end(), d_maps.sample(i));
    std::copy(g.d_features.values.begin(), g.d_features.values.end(), d_features.sample(i));
  }
  const Tensor4 through_head = model_.head().backward(d_maps);
  for (std::size_t k = 0; k < d_features.data.size(); ++k) d_features.data[k] += through_head.data[k];
  if (train_encoder) model_.encoder().backward(d_features);
  return lg.loss;
}

void Trainer::apply_update() {
  const Config& cfg = model_.config();
  for (Parameter* p : updated_parameters()) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad[k] + cfg.weight_decay * p->value[k];
      p->velocity[k] = cfg.momentum * p->velocity[k] + g;
      p->value[k] -= cfg.lr * p->velocity[k];
    }
  }
}

LossBreakdown Trainer::step(const Tensor4& images, std::span<const std::string> ids) {
  const LossBreakdown loss = forward_backward(images, ids);
  apply_update();
  return loss;
}

TrainResult train(C2amModel& model, const Dataset& dataset, const TrainOptions& options) {
  const Config& cfg = model.config();
  const std::vector<std::string> ids = dataset.split_ids(cfg.train_split);
  if (static_cast<int>(ids.size()) < cfg.batch_size) {
    throw InputError("split '" + cfg.train_split + "' of " + dataset.root().string() + " has " +
                     std::to_string(ids.size()) + " images, fewer than batch_size=" +
                     std::to_string(cfg.batch_size));
  }
  const int size = cfg.image_size;
  const Tensor4 all = load_image_batch(dataset, ids, size);
  const bool flip = cfg.augment_flip && model.has_builtin_encoder();

  std::ofstream log;
  if (!options.log_path.empty()) {
    if (options.log_path.has_parent_path()) fs::create_directories(options.log_path.parent_path());
    log.open(options.log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write training log " + options.log_path.string());
    log << "epoch,step,l_neg,l_pos_f,l_pos_b,l_total\n" << std::setprecision(10);
  }
  if (!options.checkpoint_dir.empty()) fs::create_directories(options.checkpoint_dir);

  Trainer trainer(model);
  TrainResult result;
  std::mt19937_64 rng(cfg.seed ^ 0xC2A3ull);
  std::vector<std::size_t> order(ids.size());
  const int steps_per_epoch = static_cast<int>(ids.size()) / cfg.batch_size;
  int global_step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    trainer.set_encoder_frozen(cfg.freeze_encoder || epoch <= cfg.encoder_warmup_epochs);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    for (int s = 0; s < steps_per_epoch; ++s) {
      Tensor4 batch(cfg.batch_size, 3, size, size);
      std::vector<std::string> batch_ids;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t src = order[static_cast<std::size_t>(s) * cfg.batch_size + b];
        std::copy(all.sample(static_cast<int>(src)), all.sample(static_cast<int>(src)) + all.sample_size(),
                  batch.sample(b));
        if (flip && (rng() & 1u)) flip_horizontal(batch.sample(b), 3, size, size);
        batch_ids.push_back(ids[src]);
      }
      const LossBreakdown loss = trainer.step(batch, batch_ids);
      ++global_step;
      const StepRecord record{epoch, global_step, loss};
      result.steps.push_back(record);
      if (log) {
        log << epoch << "," << global_step << "," << loss.l_neg << "," << loss.l_pos_f << "," << loss.l_pos_b
            << "," << loss.l_total << "\n";
      }
      if (options.on_step) options.on_step(record);
      sum.l_neg += loss.l_neg;
      sum.l_pos_f += loss.l_pos_f;
      sum.l_pos_b += loss.l_pos_b;
    }
    const double k = steps_per_epoch;
    result.epochs.push_back({epoch, combine_losses(sum.l_neg / k, sum.l_pos_f / k, sum.l_pos_b / k)});
    if (!options.checkpoint_dir.empty()) {
      const Checkpoint meta{cfg, epoch, result.epochs};
      if (cfg.save_every_epoch) {
        save_checkpoint(options.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"), model, meta);
      }
      result.last_checkpoint = options.checkpoint_dir / "last.ckpt";
      save_checkpoint(result.last_checkpoint, model, meta);
    }
  }
  return result;
}

std::vector<double> smooth(std::span<const double> values, int window) {
  if (window < 1) throw InputError("smoothing window must be ≥ 1");
  std::vector<double> out(values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= static_cast<std::size_t>(window)) running -= values[i - window];
    out[i] = running / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

}  // namespace c2am
