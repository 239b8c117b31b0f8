#include "pharl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "pharl/errors.hpp"

namespace pharl {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ValidationError("loss.tau must be > 0");
  if (!(tau_p > 0.0)) throw ValidationError("loss.tau_p must be > 0");
  if (lambda_phys < 0.0) throw ValidationError("loss.lambda_phys must be >= 0");
  if (lambda_var < 0.0) throw ValidationError("loss.lambda_var must be >= 0");
  if (!(var_gamma > 0.0)) throw ValidationError("loss.var_gamma must be > 0");
  if (!(var_eps > 0.0)) throw ValidationError("loss.var_eps must be > 0");
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("cosine_sim: dimension mismatch");
  const double na = norm2(a.data(), int(a.size()));
  const double nb = norm2(b.data(), int(b.size()));
  if (std::abs(na - 1.0) > 1e-6 || std::abs(nb - 1.0) > 1e-6)
    throw ValidationError("cosine_sim: input not unit-normalized within 1e-6");
  return dot(a, b);
}

namespace detail {

std::vector<int> motion_denominator(const AnchorRelations& rel, int pool_size,
                                    bool use_masking) {
  std::vector<int> denom;
  denom.reserve(pool_size - 1);
  std::size_t mi = 0;
  for (int k = 0; k < pool_size; ++k) {
    if (k == rel.anchor) continue;
    if (use_masking) {
      while (mi < rel.mask.size() && rel.mask[mi] < k) ++mi;
      if (mi < rel.mask.size() && rel.mask[mi] == k) continue;
    }
    denom.push_back(k);
  }
  return denom;
}

TermCoeffs info_nce_term(const Matrix& pool_z, int anchor,
                         std::span<const int> positives,
                         std::span<const int> denominator, double temperature,
                         bool with_grad) {
  const int d = pool_z.cols;
  const double* za = pool_z.row(anchor);

  std::vector<double> t_den(denominator.size());
  double max_den = -HUGE_VAL;
  for (std::size_t i = 0; i < denominator.size(); ++i) {
    t_den[i] = dot(za, pool_z.row(denominator[i]), d) / temperature;
    max_den = std::max(max_den, t_den[i]);
  }
  double sum_den = 0.0;
  for (double t : t_den) sum_den += std::exp(t - max_den);
  const double lse_den = max_den + std::log(sum_den);

  std::vector<double> t_pos(positives.size());
  double max_pos = -HUGE_VAL;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    t_pos[i] = dot(za, pool_z.row(positives[i]), d) / temperature;
    max_pos = std::max(max_pos, t_pos[i]);
  }
  double sum_pos = 0.0;
  for (double t : t_pos) sum_pos += std::exp(t - max_pos);
  const double lse_pos = max_pos + std::log(sum_pos);

  TermCoeffs out;
  out.loss = lse_den - lse_pos;
  if (!with_grad) return out;

  out.alphas.reserve(denominator.size());
  std::size_t pi = 0;
  for (std::size_t i = 0; i < denominator.size(); ++i) {
    double alpha = std::exp(t_den[i] - lse_den) / temperature;
    while (pi < positives.size() && positives[pi] < denominator[i]) ++pi;
    if (pi < positives.size() && positives[pi] == denominator[i]) {
      alpha -= std::exp(t_pos[pi] - lse_pos) / temperature;
    }
    out.alphas.emplace_back(denominator[i], alpha);
  }
  return out;
}

VarianceCoeffs variance_coeffs(const Matrix& pre_projection, const LossConfig& config) {
  const int n = pre_projection.rows;
  const int d = pre_projection.cols;
  if (n < 2) throw ValidationError("variance_loss needs at least 2 rows");

  VarianceCoeffs out;
  out.mean.assign(d, 0.0);
  out.factor.assign(d, 0.0);
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += pre_projection.at(r, j);
    mean /= n;
    double var = 0.0;
    for (int r = 0; r < n; ++r) {
      double c = pre_projection.at(r, j) - mean;
      var += c * c;
    }
    var /= n;  // population variance
    const double sd = std::sqrt(var + config.var_eps);
    out.mean[j] = mean;
    if (sd < config.var_gamma) {
      total += config.var_gamma - sd;
      // d/du of mean_j max(0, gamma - sqrt(Var + eps))
      out.factor[j] = -1.0 / (double(d) * double(n) * sd);
    }
  }
  out.loss = total / d;
  return out;
}

}  // namespace detail

std::optional<double> motion_loss(const AnchorRelations& rel, const Matrix& pool_z,
                                  const LossConfig& config) {
  config.validate();
  if (rel.skip_motion) return std::nullopt;
  std::vector<int> denom = detail::motion_denominator(rel, pool_z.rows, config.use_masking);
  if (denom.empty()) throw ComputeError("motion_loss: empty denominator set");
  return detail::info_nce_term(pool_z, rel.anchor, rel.traj_positives, denom,
                               config.tau, false)
      .loss;
}

std::optional<double> physics_loss(const AnchorRelations& rel, const Matrix& pool_z,
                                   const LossConfig& config) {
  config.validate();
  if (rel.skip_physics) return std::nullopt;
  if (rel.cross_traj.empty()) throw ComputeError("physics_loss: empty candidate set Q");
  return detail::info_nce_term(pool_z, rel.anchor, rel.phys_positives, rel.cross_traj,
                               config.tau_p, false)
      .loss;
}

double variance_loss(const Matrix& pre_projection, const LossConfig& config) {
  config.validate();
  return detail::variance_coeffs(pre_projection, config).loss;
}

namespace {

struct BranchValues {
  std::vector<double> per_anchor;  // NaN where skipped
  double mean = 0.0;
  int active = 0;
};

// Per-anchor values computed in parallel, reduced in anchor order. Exceptions
// raised inside the loop are captured and rethrown after it; letting one
// escape an OpenMP region would terminate the process.
template <class TermFn>
BranchValues branch_values(std::span<const AnchorRelations> rels, TermFn term) {
  const int n = int(rels.size());
  BranchValues out;
  out.per_anchor.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> active(n, 0);
  std::exception_ptr err = nullptr;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      auto v = term(rels[i]);
      if (v) {
        out.per_anchor[i] = *v;
        active[i] = 1;
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (active[i]) {
      sum += out.per_anchor[i];
      ++out.active;
    }
  }
  out.mean = out.active > 0 ? sum / out.active : 0.0;
  return out;
}

LossBreakdown assemble(std::span<const AnchorRelations> rels, const Matrix& pool_z,
                       const Matrix& pre_projection, const LossConfig& config,
                       BranchValues& motion, BranchValues& physics) {
  motion = branch_values(rels, [&](const AnchorRelations& r) {
    if (r.skip_motion) return std::optional<double>();
    std::vector<int> denom = detail::motion_denominator(r, pool_z.rows, config.use_masking);
    if (denom.empty()) throw ComputeError("motion_loss: empty denominator set");
    return std::optional<double>(
        detail::info_nce_term(pool_z, r.anchor, r.traj_positives, denom, config.tau, false).loss);
  });
  if (motion.active == 0)
    throw ComputeError("composite_loss: every anchor skipped the motion branch");

  physics = branch_values(rels, [&](const AnchorRelations& r) {
    if (r.skip_physics) return std::optional<double>();
    if (r.cross_traj.empty()) throw ComputeError("physics_loss: empty candidate set Q");
    return std::optional<double>(
        detail::info_nce_term(pool_z, r.anchor, r.phys_positives, r.cross_traj, config.tau_p, false)
            .loss);
  });

  LossBreakdown out;
  out.motion = motion.mean;
  out.physics = physics.mean;
  out.variance =
      pre_projection.rows >= 2 ? variance_loss(pre_projection, config)
      : config.lambda_var > 0.0
          ? throw ValidationError("variance_loss needs at least 2 rows")
          : 0.0;
  out.total = out.motion + config.lambda_phys * out.physics + config.lambda_var * out.variance;
  out.skipped_motion_anchors = int(rels.size()) - motion.active;
  out.skipped_physics_anchors = int(rels.size()) - physics.active;
  return out;
}

}  // namespace

LossBreakdown composite_loss(std::span<const AnchorRelations> relations,
                             const Matrix& pool_z, const Matrix& pre_projection,
                             const LossConfig& config) {
  config.validate();
  BranchValues motion, physics;
  return assemble(relations, pool_z, pre_projection, config, motion, physics);
}

namespace {

struct RowAddend {
  // One deferred addition to a gradient row, in global anchor order: either
  // alpha * z[src] or the anchor's own precomputed sum vector.
  int src = -1;        // pool row whose embedding is scaled, -1 for self-sum
  double alpha = 0.0;
  int anchor = -1;     // index into the per-anchor self-sum table when src < 0
};

// Runs one branch (motion or physics) of the gradient: computes per-anchor
// softmax coefficients in parallel, transposes them into per-row addend lists
// in anchor order, then fills rows in parallel. The addition sequence per row
// matches the serial anchor-major loop exactly, so results are bit-identical
// to the reference implementation and across thread counts.
void accumulate_branch(std::span<const AnchorRelations> rels, const Matrix& pool_z,
                       double scale, bool physics_branch, const LossConfig& config,
                       Matrix& d_pool_z) {
  const int n = int(rels.size());
  const int d = pool_z.cols;

  std::vector<detail::TermCoeffs> coeffs(n);
  std::vector<char> active(n, 0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const AnchorRelations& r = rels[i];
    if (physics_branch) {
      if (r.skip_physics) continue;
      coeffs[i] = detail::info_nce_term(pool_z, r.anchor, r.phys_positives, r.cross_traj,
                                        config.tau_p, true);
    } else {
      if (r.skip_motion) continue;
      std::vector<int> denom = detail::motion_denominator(r, pool_z.rows, config.use_masking);
      coeffs[i] = detail::info_nce_term(pool_z, r.anchor, r.traj_positives, denom,
                                        config.tau, true);
    }
    active[i] = 1;
  }

  // Self-sums: d z_anchor gets scale * sum_k alpha_k z_k, accumulated from
  // zero in candidate order (the serial reference uses the same convention).
  Matrix self_sum(n, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    double* acc = self_sum.row(i);
    for (const auto& [k, alpha] : coeffs[i].alphas) {
      const double* zk = pool_z.row(k);
      const double a = scale * alpha;
      for (int j = 0; j < d; ++j) acc[j] += a * zk[j];
    }
  }

  std::vector<std::vector<RowAddend>> incoming(pool_z.rows);
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    incoming[rels[i].anchor].push_back(RowAddend{-1, 0.0, i});
    for (const auto& [k, alpha] : coeffs[i].alphas)
      incoming[k].push_back(RowAddend{rels[i].anchor, scale * alpha, i});
  }

#pragma omp parallel for schedule(static)
  for (int r = 0; r < pool_z.rows; ++r) {
    double* out = d_pool_z.row(r);
    for (const RowAddend& a : incoming[r]) {
      if (a.src < 0) {
        const double* v = self_sum.row(a.anchor);
        for (int j = 0; j < d; ++j) out[j] += v[j];
      } else {
        const double* zi = pool_z.row(a.src);
        for (int j = 0; j < d; ++j) out[j] += a.alpha * zi[j];
      }
    }
  }
}

}  // namespace

LossGradient loss_gradient(std::span<const AnchorRelations> relations,
                           const Matrix& pool_z, const Matrix& pre_projection,
                           const LossConfig& config) {
  config.validate();
  LossGradient out;
  BranchValues motion, physics;
  out.value = assemble(relations, pool_z, pre_projection, config, motion, physics);
  out.d_pool_z = Matrix(pool_z.rows, pool_z.cols);
  out.d_pre_projection = Matrix(pre_projection.rows, pre_projection.cols);

  accumulate_branch(relations, pool_z, 1.0 / motion.active, false, config, out.d_pool_z);
  if (config.lambda_phys > 0.0 && physics.active > 0) {
    accumulate_branch(relations, pool_z, config.lambda_phys / physics.active, true, config,
                      out.d_pool_z);
  }

  if (config.lambda_var > 0.0 && pre_projection.rows >= 2) {
    auto vc = detail::variance_coeffs(pre_projection, config);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < pre_projection.rows; ++r) {
      for (int j = 0; j < pre_projection.cols; ++j) {
        out.d_pre_projection.at(r, j) =
            config.lambda_var * vc.factor[j] * (pre_projection.at(r, j) - vc.mean[j]);
      }
    }
  }
  return out;
}

}  // namespace pharl
