#pragma once

#include <span>
#include <vector>

namespace c2am {

// Guard applied to vector norms inside cosine similarity.
inline constexpr double kNormEpsilon = 1e-8;
// Similarities are clamped to [kLogClamp, 1 - kLogClamp] before every log.
inline constexpr double kLogClamp = 1e-7;
inline constexpr double kDefaultAlpha = 0.2;

using Representations = std::span<const std::vector<double>>;

enum class SimilarityKind { kNegative, kForeground, kBackground };

// n×n cosine similarities. For the foreground/background kinds the matrix is
// symmetric and the diagonal is never read.
struct SimilarityMatrix {
  int n = 0;
  SimilarityKind kind = SimilarityKind::kForeground;
  std::vector<double> values;

  [[nodiscard]] double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

// Symmetric weight per unordered pair, stored as an n×n matrix with a unit diagonal.
struct RankWeightSet {
  int n = 0;
  double alpha = 0.0;
  std::vector<double> weights;

  [[nodiscard]] double at(int i, int j) const { return weights[static_cast<std::size_t>(i) * n + j]; }
};

struct LossBreakdown {
  double l_neg = 0.0;
  double l_pos_f = 0.0;
  double l_pos_b = 0.0;
  double l_pos = 0.0;
  double l_total = 0.0;
};

// Loss value plus d(l_total)/dv_f and d(l_total)/dv_b per image. Rank weights
// are held constant when differentiating.
struct LossGradient {
  LossBreakdown loss;
  std::vector<std::vector<double>> d_foreground;
  std::vector<std::vector<double>> d_background;
};

// a·b / (max(|a|,eps) max(|b|,eps)), clamped to [-1, 1].
double cosine_sim(std::span<const double> a, std::span<const double> b);

// rows[i] against cols[j]; `kind` only labels the result.
SimilarityMatrix similarity_matrix(Representations rows, Representations cols, SimilarityKind kind);

// -(1/n²) Σ_i Σ_j log(1 - sim(v_f[i], v_b[j])) over all ordered pairs, including i = j.
double negative_loss(Representations foreground, Representations background);

// exp(-alpha · rank) per unordered pair, rank = number of pairs with strictly
// higher similarity (0-based competition ranking).
RankWeightSet rank_weights(const SimilarityMatrix& sims, double alpha);
std::vector<double> rank_weights_for_pairs(std::span<const double> pair_similarities, double alpha);

// -(1/(n(n-1))) Σ_{i≠j} w_ij log sim(v_i, v_j).
double positive_loss(Representations reps, double alpha);

LossBreakdown combine_losses(double l_neg, double l_pos_f, double l_pos_b);

LossBreakdown total_loss(Representations foreground, Representations background, double alpha);
LossGradient total_loss_with_gradient(Representations foreground, Representations background, double alpha);

}  // namespace c2am
