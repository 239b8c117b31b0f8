#include "pharl/reference.hpp"

#include <algorithm>
#include <cmath>

#include "pharl/errors.hpp"
#include "pharl/rng.hpp"

namespace pharl::ref {

std::vector<PhysicsLabel> label_windows(const Dataset& ds, const DatasetIndex& idx,
                                        const LabelingConfig& config) {
  config.validate();
  std::vector<PhysicsLabel> labels(ds.windows.size(), PhysicsLabel::Supported);
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const WindowRecord& w = ds.windows[i];
    int traj = idx.traj_by_id.at(w.traj_id);
    std::vector<ContactDescriptor> descs;
    for (int ci : idx.contacts_of_traj[traj]) descs.push_back(ds.contacts[ci]);
    labels[i] = assign_label(collect_evidence(w, descs, config));
  }
  return labels;
}

std::vector<AnchorRelations> build_relations(std::span<const PoolEntry> pool,
                                             int num_anchors,
                                             const RelationOptions& options) {
  if (num_anchors < 0 || num_anchors > int(pool.size()))
    throw ValidationError("build_relations: num_anchors out of range");
  std::vector<AnchorRelations> rels(num_anchors);
  for (int i = 0; i < num_anchors; ++i) {
    const PoolEntry& a = pool[i];
    AnchorRelations& r = rels[i];
    r.anchor = i;
    const bool anchor_contact = is_contact(a.label);
    for (int k = 0; k < int(pool.size()); ++k) {
      if (k == i) continue;
      const PoolEntry& e = pool[k];
      const bool cross = e.traj != a.traj;
      if (!cross) r.traj_positives.push_back(k);
      if (cross) r.cross_traj.push_back(k);
      if (anchor_contact && cross && is_contact(e.label)) r.mask.push_back(k);
      if (anchor_contact && cross &&
          (options.exact_class_attraction ? e.label == a.label : is_contact(e.label)))
        r.phys_positives.push_back(k);
    }
    r.skip_motion = r.traj_positives.empty();
    r.skip_physics = !anchor_contact || r.phys_positives.empty();
  }
  return rels;
}

namespace {

struct Branches {
  double motion_sum = 0.0;
  double physics_sum = 0.0;
  int motion_active = 0;
  int physics_active = 0;
};

Branches branch_sums(std::span<const AnchorRelations> rels, const Matrix& pool_z,
                     const LossConfig& config) {
  Branches b;
  for (const AnchorRelations& r : rels) {
    if (!r.skip_motion) {
      auto denom = detail::motion_denominator(r, pool_z.rows, config.use_masking);
      if (denom.empty()) throw ComputeError("motion_loss: empty denominator set");
      b.motion_sum +=
          detail::info_nce_term(pool_z, r.anchor, r.traj_positives, denom, config.tau, false).loss;
      b.motion_active += 1;
    }
    if (!r.skip_physics) {
      if (r.cross_traj.empty()) throw ComputeError("physics_loss: empty candidate set Q");
      b.physics_sum +=
          detail::info_nce_term(pool_z, r.anchor, r.phys_positives, r.cross_traj, config.tau_p, false)
              .loss;
      b.physics_active += 1;
    }
  }
  if (b.motion_active == 0)
    throw ComputeError("composite_loss: every anchor skipped the motion branch");
  return b;
}

}  // namespace

LossBreakdown composite_loss(std::span<const AnchorRelations> relations,
                             const Matrix& pool_z, const Matrix& pre_projection,
                             const LossConfig& config) {
  config.validate();
  Branches b = branch_sums(relations, pool_z, config);
  LossBreakdown out;
  out.motion = b.motion_sum / b.motion_active;
  out.physics = b.physics_active > 0 ? b.physics_sum / b.physics_active : 0.0;
  out.variance = pre_projection.rows >= 2 ? variance_loss(pre_projection, config)
                 : config.lambda_var > 0.0
                     ? throw ValidationError("variance_loss needs at least 2 rows")
                     : 0.0;
  out.total = out.motion + config.lambda_phys * out.physics + config.lambda_var * out.variance;
  out.skipped_motion_anchors = int(relations.size()) - b.motion_active;
  out.skipped_physics_anchors = int(relations.size()) - b.physics_active;
  return out;
}

LossGradient loss_gradient(std::span<const AnchorRelations> relations,
                           const Matrix& pool_z, const Matrix& pre_projection,
                           const LossConfig& config) {
  config.validate();
  LossGradient out;
  out.value = composite_loss(relations, pool_z, pre_projection, config);
  out.d_pool_z = Matrix(pool_z.rows, pool_z.cols);
  out.d_pre_projection = Matrix(pre_projection.rows, pre_projection.cols);
  const int d = pool_z.cols;

  const int motion_active = int(relations.size()) - out.value.skipped_motion_anchors;
  const int physics_active = int(relations.size()) - out.value.skipped_physics_anchors;

  // Anchor-major accumulation; each anchor's own-row contribution is summed
  // into a fresh buffer first, mirroring the parallel kernel's convention.
  auto accumulate = [&](bool physics_branch, double scale) {
    std::vector<double> self(d);
    for (const AnchorRelations& r : relations) {
      detail::TermCoeffs coeffs;
      if (physics_branch) {
        if (r.skip_physics) continue;
        coeffs = detail::info_nce_term(pool_z, r.anchor, r.phys_positives, r.cross_traj,
                                       config.tau_p, true);
      } else {
        if (r.skip_motion) continue;
        auto denom = detail::motion_denominator(r, pool_z.rows, config.use_masking);
        coeffs = detail::info_nce_term(pool_z, r.anchor, r.traj_positives, denom, config.tau, true);
      }
      std::fill(self.begin(), self.end(), 0.0);
      const double* za = pool_z.row(r.anchor);
      for (const auto& [k, alpha] : coeffs.alphas) {
        const double a = scale * alpha;
        const double* zk = pool_z.row(k);
        for (int j = 0; j < d; ++j) self[j] += a * zk[j];
        double* gk = out.d_pool_z.row(k);
        for (int j = 0; j < d; ++j) gk[j] += a * za[j];
      }
      double* ga = out.d_pool_z.row(r.anchor);
      for (int j = 0; j < d; ++j) ga[j] += self[j];
    }
  };

  accumulate(false, 1.0 / motion_active);
  if (config.lambda_phys > 0.0 && physics_active > 0)
    accumulate(true, config.lambda_phys / physics_active);

  if (config.lambda_var > 0.0 && pre_projection.rows >= 2) {
    auto vc = detail::variance_coeffs(pre_projection, config);
    for (int r = 0; r < pre_projection.rows; ++r)
      for (int j = 0; j < pre_projection.cols; ++j)
        out.d_pre_projection.at(r, j) =
            config.lambda_var * vc.factor[j] * (pre_projection.at(r, j) - vc.mean[j]);
  }
  return out;
}

ForwardResult forward(const EncoderParams& params, const Matrix& features) {
  const auto& cfg = params.cfg;
  if (features.cols != cfg.feature_dim)
    throw ValidationError("encoder: feature dimension mismatch");
  const int n = features.rows;
  ForwardResult out;
  out.hidden = Matrix(n, cfg.hidden_dim);
  out.pre_projection = Matrix(n, cfg.embed_dim);
  out.embeddings = Matrix(n, cfg.embed_dim);
  out.pre_norm.assign(n, 0.0);
  for (int r = 0; r < n; ++r) {
    const double* x = features.row(r);
    double* h = out.hidden.row(r);
    for (int j = 0; j < cfg.hidden_dim; ++j)
      h[j] = std::tanh(params.b1[j] + dot(params.w1.row(j), x, cfg.feature_dim));
    double* u = out.pre_projection.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j)
      u[j] = params.b2[j] + dot(params.w2.row(j), h, cfg.hidden_dim);
    double nrm = norm2(u, cfg.embed_dim);
    if (nrm < 1e-12) nrm = 1e-12;
    out.pre_norm[r] = nrm;
    double* z = out.embeddings.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j) z[j] = u[j] / nrm;
  }
  return out;
}

ParamGrads backward(const EncoderParams& params, const Matrix& features,
                    const ForwardResult& fwd, const Matrix& d_embeddings,
                    const Matrix& d_pre_projection) {
  const auto& cfg = params.cfg;
  const int n = features.rows;
  Matrix du(n, cfg.embed_dim);
  Matrix da(n, cfg.hidden_dim);
  for (int r = 0; r < n; ++r) {
    const double* dz = d_embeddings.row(r);
    const double* z = fwd.embeddings.row(r);
    const double proj = dot(dz, z, cfg.embed_dim);
    double* durow = du.row(r);
    for (int j = 0; j < cfg.embed_dim; ++j)
      durow[j] = (dz[j] - proj * z[j]) / fwd.pre_norm[r] + d_pre_projection.at(r, j);
    const double* h = fwd.hidden.row(r);
    double* darow = da.row(r);
    for (int k = 0; k < cfg.hidden_dim; ++k) {
      double s = 0.0;
      for (int j = 0; j < cfg.embed_dim; ++j) s += durow[j] * params.w2.at(j, k);
      darow[k] = s * (1.0 - h[k] * h[k]);
    }
  }
  ParamGrads g;
  g.w1 = Matrix(cfg.hidden_dim, cfg.feature_dim);
  g.b1.assign(cfg.hidden_dim, 0.0);
  g.w2 = Matrix(cfg.embed_dim, cfg.hidden_dim);
  g.b2.assign(cfg.embed_dim, 0.0);
  for (int j = 0; j < cfg.embed_dim; ++j) {
    for (int k = 0; k < cfg.hidden_dim; ++k) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += du.at(r, j) * fwd.hidden.at(r, k);
      g.w2.at(j, k) = s;
    }
    double sb = 0.0;
    for (int r = 0; r < n; ++r) sb += du.at(r, j);
    g.b2[j] = sb;
  }
  for (int k = 0; k < cfg.hidden_dim; ++k) {
    for (int f = 0; f < cfg.feature_dim; ++f) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += da.at(r, k) * features.at(r, f);
      g.w1.at(k, f) = s;
    }
    double sb = 0.0;
    for (int r = 0; r < n; ++r) sb += da.at(r, k);
    g.b1[k] = sb;
  }
  return g;
}

PcrResult pcr(const Matrix& embeddings, std::span<const PhysicsLabel> labels) {
  const int n = embeddings.rows;
  if (int(labels.size()) != n) throw ValidationError("pcr: labels / embeddings size mismatch");
  std::map<PhysicsLabel, int> counts;
  for (auto y : labels) counts[y] += 1;
  if (counts.size() < 2) throw ComputeError("pcr undefined: fewer than two classes present");
  bool any_intra = false;
  for (auto& [y, c] : counts) any_intra |= c >= 2;
  if (!any_intra) throw ComputeError("pcr undefined: no intra-class pairs");

  double inter = 0.0, intra = 0.0;
  long long n_inter = 0, n_intra = 0;
  for (int i = 0; i < n; ++i) {
    double inter_i = 0.0, intra_i = 0.0;
    long long ci = 0, cj = 0;
    for (int j = i + 1; j < n; ++j) {
      double dist =
          std::sqrt(squared_distance(embeddings.row(i), embeddings.row(j), embeddings.cols));
      if (labels[i] == labels[j]) {
        intra_i += dist;
        ++cj;
      } else {
        inter_i += dist;
        ++ci;
      }
    }
    inter += inter_i;
    intra += intra_i;
    n_inter += ci;
    n_intra += cj;
  }
  if (n_inter == 0) throw ComputeError("pcr undefined: no inter-class pairs");
  const double inter_mean = inter / double(n_inter);
  const double intra_mean = intra / double(n_intra);
  PcrResult out;
  out.degenerate = intra_mean < 1e-12;
  out.value = inter_mean / std::max(intra_mean, 1e-12);
  return out;
}

NeighborhoodResult neighborhood_consistency(const Matrix& embeddings,
                                            std::span<const PhysicsLabel> labels,
                                            std::span<const int> video_ids, int k,
                                            std::uint64_t seed) {
  const int n = embeddings.rows;
  if (int(labels.size()) != n || int(video_ids.size()) != n)
    throw ValidationError("neighborhood: labels / video_ids size mismatch");
  if (k < 1) throw ValidationError("neighborhood: k must be >= 1");

  const PhysicsLabel all_classes[3] = {PhysicsLabel::Supported, PhysicsLabel::Trunk,
                                       PhysicsLabel::Head};
  std::map<PhysicsLabel, std::vector<int>> members;
  for (int i = 0; i < n; ++i) members[labels[i]].push_back(i);
  for (auto y : all_classes)
    if (members[y].empty())
      throw ComputeError(std::string("neighborhood undefined: class absent: ") + to_string(y));

  std::size_t minority = members.begin()->second.size();
  for (auto& [y, v] : members) minority = std::min(minority, v.size());

  std::vector<int> database;
  for (auto y : all_classes) {
    std::vector<int> pool = members[y];
    Rng rng = Rng::substream(seed, "neighborhood-db", std::uint64_t(int(y)));
    rng.shuffle(pool);
    pool.resize(minority);
    std::sort(pool.begin(), pool.end());
    database.insert(database.end(), pool.begin(), pool.end());
  }

  NeighborhoodResult out;
  std::map<PhysicsLabel, long long> same_total, retrieved_total;
  for (auto y : all_classes) {
    same_total[y] = 0;
    retrieved_total[y] = 0;
    out.skipped_queries[y] = 0;
  }
  std::vector<std::pair<double, int>> cands;
  for (int q = 0; q < n; ++q) {
    cands.clear();
    bool any_same_class = false;
    for (int dbi : database) {
      if (video_ids[dbi] == video_ids[q]) continue;
      double sim = dot(embeddings.row(q), embeddings.row(dbi), embeddings.cols);
      cands.emplace_back(sim, dbi);
      any_same_class |= labels[dbi] == labels[q];
    }
    if (!any_same_class) {
      out.skipped_queries[labels[q]] += 1;
      continue;
    }
    const int take = std::min<int>(k, int(cands.size()));
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (int t = 0; t < take; ++t) {
      retrieved_total[labels[q]] += 1;
      same_total[labels[q]] += labels[cands[t].second] == labels[q];
    }
  }
  for (auto y : all_classes) {
    out.diagonal[y] =
        retrieved_total[y] > 0 ? double(same_total[y]) / double(retrieved_total[y]) : 0.0;
  }
  return out;
}

}  // namespace pharl::ref
