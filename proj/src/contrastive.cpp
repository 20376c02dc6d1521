#include "c2am/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2am/errors.hpp"

namespace c2am {

namespace {

double norm_of(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

double dot_of(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] * b[k];
  return d;
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine similarity between vectors of length " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
}

// Adds upstream · d sim(a,b)/da to da and upstream · d sim(a,b)/db to db.
void accumulate_cosine_gradient(std::span<const double> a, std::span<const double> b, double upstream,
                                std::vector<double>& da, std::vector<double>& db) {
  const double raw_na = norm_of(a);
  const double raw_nb = norm_of(b);
  const double na = std::max(raw_na, kNormEpsilon);
  const double nb = std::max(raw_nb, kNormEpsilon);
  const double raw = dot_of(a, b) / (na * nb);
  if (raw > 1.0 || raw < -1.0) return;
  const double inv = 1.0 / (na * nb);
  const bool a_scaled = raw_na > kNormEpsilon;
  const bool b_scaled = raw_nb > kNormEpsilon;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double ga = b[k] * inv;
    double gb = a[k] * inv;
    if (a_scaled) ga -= raw * a[k] / (na * na);
    if (b_scaled) gb -= raw * b[k] / (nb * nb);
    da[k] += upstream * ga;
    db[k] += upstream * gb;
  }
}

bool inside_clamp(double s) { return s >= kLogClamp && s <= 1.0 - kLogClamp; }

double clamp_sim(double s) { return std::clamp(s, kLogClamp, 1.0 - kLogClamp); }

void check_batch(Representations foreground, Representations background) {
  if (foreground.size() != background.size()) {
    throw ShapeError("foreground and background batches differ in size");
  }
  for (std::size_t i = 1; i < foreground.size(); ++i) {
    if (foreground[i].size() != foreground[0].size()) throw ShapeError("ragged foreground representations");
  }
  for (const auto& v : background) {
    if (!foreground.empty() && v.size() != foreground[0].size()) {
      throw ShapeError("background representation length differs from foreground");
    }
  }
}

std::vector<double> upper_triangle(const SimilarityMatrix& sims) {
  std::vector<double> pairs;
  pairs.reserve(static_cast<std::size_t>(sims.n) * (sims.n - 1) / 2);
  for (int i = 0; i < sims.n; ++i) {
    for (int j = i + 1; j < sims.n; ++j) pairs.push_back(sims.at(i, j));
  }
  return pairs;
}

// Shared by positive_loss() and the gradient path.
double positive_loss_impl(Representations reps, double alpha, std::vector<std::vector<double>>* grads) {
  const int n = static_cast<int>(reps.size());
  if (n < 2) throw InputError("positive loss needs at least 2 representations, got " + std::to_string(n));
  const SimilarityMatrix sims = similarity_matrix(reps, reps, SimilarityKind::kForeground);
  const RankWeightSet weights = rank_weights(sims, alpha);
  const double scale = 1.0 / (static_cast<double>(n) * (n - 1));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double s = sims.at(i, j);
      const double w = weights.at(i, j);
      sum += w * std::log(clamp_sim(s));
      if (grads != nullptr && inside_clamp(s)) {
        accumulate_cosine_gradient(reps[i], reps[j], -w * scale / s, (*grads)[i], (*grads)[j]);
      }
    }
  }
  return -scale * sum;
}

double negative_loss_impl(Representations foreground, Representations background,
                          std::vector<std::vector<double>>* d_fg, std::vector<std::vector<double>>* d_bg) {
  const int n = static_cast<int>(foreground.size());
  if (n < 1) throw InputError("negative loss needs at least 1 image");
  const double scale = 1.0 / (static_cast<double>(n) * n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = cosine_sim(foreground[i], background[j]);
      sum += std::log(1.0 - clamp_sim(s));
      if (d_fg != nullptr && inside_clamp(s)) {
        accumulate_cosine_gradient(foreground[i], background[j], scale / (1.0 - s), (*d_fg)[i], (*d_bg)[j]);
      }
    }
  }
  return -scale * sum;
}

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b);
  const double na = std::max(norm_of(a), kNormEpsilon);
  const double nb = std::max(norm_of(b), kNormEpsilon);
  return std::clamp(dot_of(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(Representations rows, Representations cols, SimilarityKind kind) {
  if (rows.size() != cols.size()) throw ShapeError("similarity matrix needs equally sized batches");
  SimilarityMatrix m;
  m.n = static_cast<int>(rows.size());
  m.kind = kind;
  m.values.assign(static_cast<std::size_t>(m.n) * m.n, 0.0);
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j) m.values[static_cast<std::size_t>(i) * m.n + j] = cosine_sim(rows[i], cols[j]);
  }
  return m;
}

double negative_loss(Representations foreground, Representations background) {
  check_batch(foreground, background);
  return negative_loss_impl(foreground, background, nullptr, nullptr);
}

std::vector<double> rank_weights_for_pairs(std::span<const double> pair_similarities, double alpha) {
  if (alpha < 0.0 || !std::isfinite(alpha)) throw InputError("rank weighting alpha must be finite and ≥ 0");
  if (pair_similarities.empty()) throw InputError("rank weighting needs at least one pair");
  std::vector<std::size_t> order(pair_similarities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pair_similarities[a] > pair_similarities[b];
  });
  std::vector<double> weights(pair_similarities.size(), 1.0);
  std::size_t rank = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (pos > 0 && pair_similarities[order[pos]] != pair_similarities[order[pos - 1]]) rank = pos;
    weights[order[pos]] = std::exp(-alpha * static_cast<double>(rank));
  }
  return weights;
}

RankWeightSet rank_weights(const SimilarityMatrix& sims, double alpha) {
  if (sims.kind == SimilarityKind::kNegative) {
    throw InputError("rank weights are defined for foreground/background similarity sets only");
  }
  if (sims.n < 2) throw InputError("rank weighting needs n ≥ 2");
  const std::vector<double> pair_weights = rank_weights_for_pairs(upper_triangle(sims), alpha);
  RankWeightSet set;
  set.n = sims.n;
  set.alpha = alpha;
  set.weights.assign(static_cast<std::size_t>(sims.n) * sims.n, 1.0);
  std::size_t k = 0;
  for (int i = 0; i < sims.n; ++i) {
    for (int j = i + 1; j < sims.n; ++j, ++k) {
      set.weights[static_cast<std::size_t>(i) * sims.n + j] = pair_weights[k];
      set.weights[static_cast<std::size_t>(j) * sims.n + i] = pair_weights[k];
    }
  }
  return set;
}

double positive_loss(Representations reps, double alpha) { return positive_loss_impl(reps, alpha, nullptr); }

LossBreakdown combine_losses(double l_neg, double l_pos_f, double l_pos_b) {
  LossBreakdown b;
  b.l_neg = l_neg;
  b.l_pos_f = l_pos_f;
  b.l_pos_b = l_pos_b;
  b.l_pos = l_pos_f + l_pos_b;
  b.l_total = b.l_pos + l_neg;
  return b;
}

LossBreakdown total_loss(Representations foreground, Representations background, double alpha) {
  check_batch(foreground, background);
  if (foreground.size() < 2) throw InputError("total loss needs n ≥ 2");
  return combine_losses(negative_loss_impl(foreground, background, nullptr, nullptr),
                        positive_loss_impl(foreground, alpha, nullptr),
                        positive_loss_impl(background, alpha, nullptr));
}

LossGradient total_loss_with_gradient(Representations foreground, Representations background, double alpha) {
  check_batch(foreground, background);
  if (foreground.size() < 2) throw InputError("total loss needs n ≥ 2");
  const std::size_t n = foreground.size();
  const std::size_t c = foreground[0].size();
  LossGradient g;
  g.d_foreground.assign(n, std::vector<double>(c, 0.0));
  g.d_background.assign(n, std::vector<double>(c, 0.0));
  const double l_neg = negative_loss_impl(foreground, background, &g.d_foreground, &g.d_background);
  const double l_pos_f = positive_loss_impl(foreground, alpha, &g.d_foreground);
  const double l_pos_b = positive_loss_impl(background, alpha, &g.d_background);
  g.loss = combine_losses(l_neg, l_pos_f, l_pos_b);
  return g;
}

}  // namespace c2am
