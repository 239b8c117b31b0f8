#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pharl/matrix.hpp"
#include "pharl/relations.hpp"

namespace pharl {

struct LossConfig {
  double tau = 0.2;          // trajectory-contrast temperature
  double tau_p = 0.2;        // physics-attraction temperature
  double lambda_phys = 1.0;  // weight of the attraction term (post-warmup value)
  double lambda_var = 0.1;   // weight of the variance regularizer
  double var_gamma = 1.0;    // per-dimension std target
  double var_eps = 1e-4;
  bool use_masking = true;   // false gives the plain unmasked trajectory loss

  void validate() const;
};

struct LossBreakdown {
  double motion = 0.0;    // mean over non-skipped anchors
  double physics = 0.0;   // mean over non-skipped anchors (unweighted)
  double variance = 0.0;
  double total = 0.0;     // motion + lambda_phys * physics + lambda_var * variance
  int skipped_motion_anchors = 0;
  int skipped_physics_anchors = 0;
};

struct LossGradient {
  LossBreakdown value;
  Matrix d_pool_z;          // one row per pool embedding (batch rows first, then bank)
  Matrix d_pre_projection;  // one row per batch window
};

// Cosine similarity of two unit vectors. Inputs must be normalized within
// 1e-6; everything below computes raw dot products on the rows it is given,
// so the losses stay smooth functions of free rows.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Masked trajectory term (one anchor). Returns nullopt when the anchor has no
// trajectory positives (skip). Throws on an empty denominator.
std::optional<double> motion_loss(const AnchorRelations& rel, const Matrix& pool_z,
                                  const LossConfig& config);

// Physics attraction term (one anchor). Returns nullopt for non-contact
// anchors and anchors without cross-trajectory same-class partners.
std::optional<double> physics_loss(const AnchorRelations& rel, const Matrix& pool_z,
                                   const LossConfig& config);

// Hinge on per-dimension standard deviation of the pre-normalization
// projector outputs: mean_d max(0, gamma - sqrt(Var_d + eps)). Population
// variance; needs at least two rows.
double variance_loss(const Matrix& pre_projection, const LossConfig& config);

// Full objective over a batch. Anchors are relations[i] over pool_z rows; the
// first relations.size() rows of pool_z are the batch, the rest are bank
// snapshots. Throws when every anchor skips the motion branch.
LossBreakdown composite_loss(std::span<const AnchorRelations> relations,
                             const Matrix& pool_z, const Matrix& pre_projection,
                             const LossConfig& config);

// Exact partial derivatives of composite_loss's total with respect to every
// pool embedding row and every pre-projection row, treating both as free
// variables. Per-anchor coefficient passes run in parallel; accumulation
// order is fixed so results are bit-identical across thread counts.
LossGradient loss_gradient(std::span<const AnchorRelations> relations,
                           const Matrix& pool_z, const Matrix& pre_projection,
                           const LossConfig& config);

namespace detail {

// Shared per-anchor machinery: one InfoNCE-style ratio with numerator set
// `positives` (must be a subset of the denominator) evaluated with
// max-subtracted log-sum-exp. When with_grad, alphas holds
// (pool index, d loss / d sim) per denominator member in ascending order.
struct TermCoeffs {
  double loss = 0.0;
  std::vector<std::pair<int, double>> alphas;
};

TermCoeffs info_nce_term(const Matrix& pool_z, int anchor,
                         std::span<const int> positives,
                         std::span<const int> denominator, double temperature,
                         bool with_grad);

// Denominator of the motion term: every pool row except the anchor, minus the
// mask when masking is enabled. Ascending order.
std::vector<int> motion_denominator(const AnchorRelations& rel, int pool_size,
                                    bool use_masking);

// Per-dimension hinge coefficients for the variance gradient. Returns
// (mean_d, factor_d) where d variance / d u_rd = factor_d * (u_rd - mean_d).
struct VarianceCoeffs {
  double loss = 0.0;
  std::vector<double> mean;
  std::vector<double> factor;
};
VarianceCoeffs variance_coeffs(const Matrix& pre_projection, const LossConfig& config);

}  // namespace detail

}  // namespace pharl
