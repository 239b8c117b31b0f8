#include "pharl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pharl/errors.hpp"
#include "pharl/rng.hpp"

namespace pharl {

void EvalConfig::validate() const {
  if (k_neighbors < 1) throw ValidationError("eval.k_neighbors must be >= 1");
  if (poa_pair_cap < 1) throw ValidationError("eval.poa_pair_cap must be >= 1");
  if (probe.steps < 1) throw ValidationError("eval.probe_steps must be >= 1");
  if (probe.l2 < 0.0) throw ValidationError("eval.probe_l2 must be >= 0");
  if (!(probe.learning_rate > 0.0)) throw ValidationError("eval.probe_lr must be > 0");
}

SeverityAxis severity_axis(const Matrix& train_embeddings,
                           std::span<const PhysicsLabel> train_labels) {
  if (int(train_labels.size()) != train_embeddings.rows)
    throw ValidationError("severity_axis: labels / embeddings size mismatch");
  const int d = train_embeddings.cols;
  std::vector<double> mu_head(d, 0.0), mu_sup(d, 0.0);
  int n_head = 0, n_sup = 0;
  for (int i = 0; i < train_embeddings.rows; ++i) {
    if (train_labels[i] == PhysicsLabel::Head) {
      ++n_head;
      for (int j = 0; j < d; ++j) mu_head[j] += train_embeddings.at(i, j);
    } else if (train_labels[i] == PhysicsLabel::Supported) {
      ++n_sup;
      for (int j = 0; j < d; ++j) mu_sup[j] += train_embeddings.at(i, j);
    }
  }
  if (n_head == 0 || n_sup == 0)
    throw ComputeError("severity_axis undefined: train split lacks a Head or Supported window");
  SeverityAxis axis;
  axis.v.resize(d);
  for (int j = 0; j < d; ++j) axis.v[j] = mu_head[j] / n_head - mu_sup[j] / n_sup;
  double nrm = norm2(axis.v.data(), d);
  if (nrm < 1e-12)
    throw ComputeError("severity_axis undefined: Head and Supported centroids coincide");
  for (double& x : axis.v) x /= nrm;
  return axis;
}

std::vector<double> project(const Matrix& embeddings, const SeverityAxis& axis) {
  if (int(axis.v.size()) != embeddings.cols)
    throw ValidationError("project: axis dimension mismatch");
  std::vector<double> s(embeddings.rows);
  for (int i = 0; i < embeddings.rows; ++i)
    s[i] = dot(embeddings.row(i), axis.v.data(), embeddings.cols);
  return s;
}

namespace {

// Average ranks, 1-based; tied values share the mean of their rank range.
template <class T>
std::vector<double> average_ranks(std::span<const T> values) {
  const int n = int(values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = 0.5 * double(i + 1 + j + 1);
    for (int k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const int n = int(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw ComputeError("rank correlation undefined: constant input vector");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size() || labels.size() < 2)
    throw ValidationError("spearman: need two aligned vectors of length >= 2");
  auto rx = average_ranks(labels);
  auto ry = average_ranks(scores);
  return pearson(rx, ry);
}

namespace {

// Merge sort on y counting inversions; input comes sorted by (x, y).
long long count_inversions(std::vector<double>& y, std::vector<double>& tmp, int lo, int hi) {
  if (hi - lo <= 1) return 0;
  int mid = (lo + hi) / 2;
  long long inv = count_inversions(y, tmp, lo, mid) + count_inversions(y, tmp, mid, hi);
  int a = lo, b = mid, o = lo;
  while (a < mid && b < hi) {
    if (y[b] < y[a]) {
      inv += mid - a;
      tmp[o++] = y[b++];
    } else {
      tmp[o++] = y[a++];
    }
  }
  while (a < mid) tmp[o++] = y[a++];
  while (b < hi) tmp[o++] = y[b++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, y.begin() + lo);
  return inv;
}

template <class T>
long long tie_pairs(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  long long total = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    auto t = (long long)(j - i + 1);
    total += t * (t - 1) / 2;
    i = j + 1;
  }
  return total;
}

}  // namespace

double kendall_tau_b(std::span<const int> labels, std::span<const double> scores) {
  const int n = int(labels.size());
  if (labels.size() != scores.size() || n < 2)
    throw ValidationError("kendall: need two aligned vectors of length >= 2");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (labels[a] != labels[b]) return labels[a] < labels[b];
    return scores[a] < scores[b];
  });

  const long long n0 = (long long)n * (n - 1) / 2;
  long long n1 = tie_pairs(std::vector<int>(labels.begin(), labels.end()));
  long long n2 = tie_pairs(std::vector<double>(scores.begin(), scores.end()));

  // Joint ties.
  long long n3 = 0;
  {
    std::vector<std::pair<int, double>> xy(n);
    for (int i = 0; i < n; ++i) xy[i] = {labels[i], scores[i]};
    std::sort(xy.begin(), xy.end());
    std::size_t i = 0;
    while (i < xy.size()) {
      std::size_t j = i;
      while (j + 1 < xy.size() && xy[j + 1] == xy[i]) ++j;
      auto t = (long long)(j - i + 1);
      n3 += t * (t - 1) / 2;
      i = j + 1;
    }
  }

  std::vector<double> y(n), tmp(n);
  for (int i = 0; i < n; ++i) y[i] = scores[order[i]];
  long long discordant = count_inversions(y, tmp, 0, n);

  if (n0 == n1 || n0 == n2)
    throw ComputeError("kendall undefined: all pairs tied on one variable");

  const long long c_minus_d = n0 - n1 - n2 + n3 - 2 * discordant;
  return double(c_minus_d) / std::sqrt(double(n0 - n1) * double(n0 - n2));
}

double poa_macro(std::span<const int> labels, std::span<const double> scores,
                 std::uint64_t seed, long long pair_cap) {
  if (labels.size() != scores.size())
    throw ValidationError("poa_macro: labels / scores size mismatch");

  std::map<int, std::vector<double>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(scores[i]);
  if (by_class.size() < 2)
    throw ComputeError("poa_macro undefined: fewer than two classes present");

  std::vector<int> classes;
  for (auto& [c, v] : by_class) {
    classes.push_back(c);
    std::sort(v.begin(), v.end());
  }

  double total = 0.0;
  int pair_count = 0;
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      const auto& lo = by_class[classes[a]];
      const auto& hi = by_class[classes[b]];
      const long long pairs = (long long)lo.size() * (long long)hi.size();
      double acc;
      if (pairs <= pair_cap) {
        // Exhaustive: for every hi score, count lo scores below it (sorted
        // lo makes this a pair of binary searches).
        double s = 0.0;
        for (double sh : hi) {
          auto lt = std::lower_bound(lo.begin(), lo.end(), sh) - lo.begin();
          auto le = std::upper_bound(lo.begin(), lo.end(), sh) - lo.begin();
          s += double(lt) + 0.5 * double(le - lt);
        }
        acc = s / double(pairs);
      } else {
        Rng rng = Rng::substream(seed, "poa-pairs", (std::uint64_t(a) << 16) | b);
        double s = 0.0;
        for (long long t = 0; t < pair_cap; ++t) {
          double sl = lo[rng.uniform_int(lo.size())];
          double sh = hi[rng.uniform_int(hi.size())];
          s += sh > sl ? 1.0 : sh == sl ? 0.5 : 0.0;
        }
        acc = s / double(pair_cap);
      }
      total += acc;
      ++pair_count;
    }
  }
  return total / pair_count;
}

double auc(std::span<const int> binary_labels, std::span<const double> scores) {
  if (binary_labels.size() != scores.size())
    throw ValidationError("auc: labels / scores size mismatch");
  long long pos = 0, neg = 0;
  for (int y : binary_labels) (y != 0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw ComputeError("auc undefined: single-class labels");

  auto ranks = average_ranks(scores);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (binary_labels[i] != 0) rank_sum_pos += ranks[i];
  return (rank_sum_pos - double(pos) * (pos + 1) / 2.0) / (double(pos) * double(neg));
}

double average_precision(std::span<const int> binary_labels,
                         std::span<const double> scores) {
  if (binary_labels.size() != scores.size())
    throw ValidationError("average_precision: labels / scores size mismatch");
  const int n = int(scores.size());
  long long pos = 0;
  for (int y : binary_labels) pos += y != 0;
  if (pos == 0) throw ComputeError("average_precision undefined: no positives");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // documented deterministic tie order
  });
  double ap = 0.0;
  long long hits = 0;
  for (int k = 0; k < n; ++k) {
    if (binary_labels[order[k]] != 0) {
      ++hits;
      ap += double(hits) / double(k + 1);
    }
  }
  return ap / double(pos);
}

std::vector<double> linear_probe_scores(const Matrix& train_embeddings,
                                        std::span<const int> train_binary_labels,
                                        const Matrix& eval_embeddings,
                                        const ProbeConfig& config) {
  if (int(train_binary_labels.size()) != train_embeddings.rows)
    throw ValidationError("linear_probe: labels / embeddings size mismatch");
  if (eval_embeddings.cols != train_embeddings.cols)
    throw ValidationError("linear_probe: train / eval dimension mismatch");
  bool has_pos = false, has_neg = false;
  for (int y : train_binary_labels) (y != 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ComputeError("linear_probe undefined: single-class training data");

  const int n = train_embeddings.rows;
  const int d = train_embeddings.cols;
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  std::vector<double> gw(d);
  for (int step = 0; step < config.steps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* x = train_embeddings.row(i);
      double f = b + dot(w.data(), x, d);
      double p = 1.0 / (1.0 + std::exp(-f));
      double delta = p - double(train_binary_labels[i] != 0);
      for (int j = 0; j < d; ++j) gw[j] += delta * x[j];
      gb += delta;
    }
    for (int j = 0; j < d; ++j) w[j] = w[j] - config.learning_rate * (gw[j] / n + config.l2 * w[j]);
    b -= config.learning_rate * gb / n;
  }

  std::vector<double> out(eval_embeddings.rows);
  for (int i = 0; i < eval_embeddings.rows; ++i)
    out[i] = b + dot(w.data(), eval_embeddings.row(i), d);
  return out;
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

  // Pairwise sums partitioned by row; per-row partials reduced in row order.
  std::vector<double> inter_sum(n, 0.0), intra_sum(n, 0.0);
  std::vector<long long> inter_cnt(n, 0), intra_cnt(n, 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double dist = std::sqrt(squared_distance(embeddings.row(i), embeddings.row(j), embeddings.cols));
      if (labels[i] == labels[j]) {
        intra_sum[i] += dist;
        intra_cnt[i] += 1;
      } else {
        inter_sum[i] += dist;
        inter_cnt[i] += 1;
      }
    }
  }
  double inter = 0.0, intra = 0.0;
  long long n_inter = 0, n_intra = 0;
  for (int i = 0; i < n; ++i) {
    inter += inter_sum[i];
    intra += intra_sum[i];
    n_inter += inter_cnt[i];
    n_intra += intra_cnt[i];
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

  // Class-balanced database, subsampled with the seeded stream.
  std::vector<int> database;
  for (auto y : all_classes) {
    std::vector<int> pool = members[y];
    Rng rng = Rng::substream(seed, "neighborhood-db", std::uint64_t(int(y)));
    rng.shuffle(pool);
    pool.resize(minority);
    std::sort(pool.begin(), pool.end());
    database.insert(database.end(), pool.begin(), pool.end());
  }

  struct QueryOut {
    int same = 0;
    int retrieved = 0;
    bool skipped = false;
  };
  std::vector<QueryOut> per_query(n);

#pragma omp parallel for schedule(dynamic, 16)
  for (int q = 0; q < n; ++q) {
    std::vector<std::pair<double, int>> cands;  // (similarity, database index)
    bool any_same_class = false;
    for (int dbi : database) {
      if (video_ids[dbi] == video_ids[q]) continue;  // same-video exclusion
      double sim = dot(embeddings.row(q), embeddings.row(dbi), embeddings.cols);
      cands.emplace_back(sim, dbi);
      any_same_class |= labels[dbi] == labels[q];
    }
    if (!any_same_class) {
      per_query[q].skipped = true;
      continue;
    }
    const int take = std::min<int>(k, int(cands.size()));
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (int t = 0; t < take; ++t) {
      per_query[q].retrieved += 1;
      per_query[q].same += labels[cands[t].second] == labels[q];
    }
  }

  NeighborhoodResult out;
  for (auto y : all_classes) {
    long long same = 0, retrieved = 0;
    int skipped = 0;
    for (int q : members[y]) {
      if (per_query[q].skipped) {
        ++skipped;
        continue;
      }
      same += per_query[q].same;
      retrieved += per_query[q].retrieved;
    }
    out.diagonal[y] = retrieved > 0 ? double(same) / double(retrieved) : 0.0;
    out.skipped_queries[y] = skipped;
  }
  return out;
}

void MetricsReport::validate_ranges() const {
  auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  if (!in(spearman_rho, -1.0, 1.0)) throw ComputeError("metrics: spearman_rho out of range");
  if (!in(poa_macro, 0.0, 1.0)) throw ComputeError("metrics: poa_macro out of range");
  if (!in(contact_ap, 0.0, 1.0)) throw ComputeError("metrics: contact_ap out of range");
  if (!in(contact_auc, 0.0, 1.0)) throw ComputeError("metrics: contact_auc out of range");
  if (!in(fall_auc, 0.0, 1.0)) throw ComputeError("metrics: fall_auc out of range");
  if (!(std::isfinite(pcr) && pcr > 0.0)) throw ComputeError("metrics: pcr out of range");
  if (!in(kendall_tau, -1.0, 1.0)) throw ComputeError("metrics: kendall_tau out of range");
  for (const auto& [y, v] : neighborhood_diagonal)
    if (!in(v, 0.0, 1.0)) throw ComputeError("metrics: neighborhood diagonal out of range");
  for (const auto& [y, v] : category_mean_projection)
    if (!std::isfinite(v)) throw ComputeError("metrics: category mean projection not finite");
}

ReportBundle full_report(const EncoderParams& params, const Dataset& labeled,
                         const EvalConfig& config) {
  config.validate();
  DatasetIndex idx = build_index(labeled);

  std::vector<int> train_idx, split_idx;
  for (int i = 0; i < int(labeled.windows.size()); ++i) {
    const auto& w = labeled.windows[i];
    if (!w.phys_label)
      throw ValidationError("window " + w.window_id + " is unlabeled; run the label stage first");
    Split s = labeled.trajectories[idx.traj_by_id.at(w.traj_id)].split;
    if (s == Split::Train) train_idx.push_back(i);
    if (s == config.split) split_idx.push_back(i);
  }
  if (train_idx.empty()) throw ValidationError("train split is empty");
  if (split_idx.empty()) throw ValidationError("requested split is empty");

  auto gather = [&](const std::vector<int>& which) {
    Matrix m(int(which.size()), idx.feature_dim);
    for (int r = 0; r < m.rows; ++r) {
      const auto& f = labeled.windows[which[r]].features;
      std::copy(f.begin(), f.end(), m.row(r));
    }
    return m;
  };
  Matrix train_z = embed(params, gather(train_idx));
  Matrix split_z = embed(params, gather(split_idx));

  std::vector<PhysicsLabel> train_labels, split_labels;
  std::vector<int> train_ord, split_ord, split_contact, train_contact, train_fall, split_fall;
  std::vector<int> split_video;
  for (int i : train_idx) {
    PhysicsLabel y = *labeled.windows[i].phys_label;
    train_labels.push_back(y);
    train_ord.push_back(int(y));
    train_contact.push_back(is_contact(y) ? 1 : 0);
    train_fall.push_back(labeled.windows[i].fall_flag ? 1 : 0);
  }
  for (int i : split_idx) {
    PhysicsLabel y = *labeled.windows[i].phys_label;
    split_labels.push_back(y);
    split_ord.push_back(int(y));
    split_contact.push_back(is_contact(y) ? 1 : 0);
    split_fall.push_back(labeled.windows[i].fall_flag ? 1 : 0);
    split_video.push_back(idx.traj_by_id.at(labeled.windows[i].traj_id));
  }

  SeverityAxis axis = severity_axis(train_z, train_labels);
  std::vector<double> scores = project(split_z, axis);

  ReportBundle out;
  out.report.spearman_rho = spearman(split_ord, scores);
  out.report.kendall_tau = kendall_tau_b(split_ord, scores);
  out.report.poa_macro = poa_macro(split_ord, scores, config.seed, config.poa_pair_cap);

  auto contact_scores = linear_probe_scores(train_z, train_contact, split_z, config.probe);
  out.report.contact_ap = average_precision(split_contact, contact_scores);
  out.report.contact_auc = auc(split_contact, contact_scores);

  auto fall_scores = linear_probe_scores(train_z, train_fall, split_z, config.probe);
  out.report.fall_auc = auc(split_fall, fall_scores);

  PcrResult p = pcr(split_z, split_labels);
  out.report.pcr = p.value;
  out.report.pcr_degenerate = p.degenerate;

  NeighborhoodResult nb = neighborhood_consistency(split_z, split_labels, split_video,
                                                   config.k_neighbors, config.seed);
  out.report.neighborhood_diagonal = nb.diagonal;
  out.report.neighborhood_skipped = nb.skipped_queries;

  std::map<PhysicsLabel, std::pair<double, int>> proj_sums;
  for (std::size_t i = 0; i < split_labels.size(); ++i) {
    auto& [sum, cnt] = proj_sums[split_labels[i]];
    sum += scores[i];
    cnt += 1;
  }
  for (const auto& [y, sc] : proj_sums)
    out.report.category_mean_projection[y] = sc.first / sc.second;

  out.projections.reserve(split_idx.size());
  for (std::size_t i = 0; i < split_idx.size(); ++i) {
    out.projections.push_back(
        ProjectionRow{labeled.windows[split_idx[i]].window_id, split_labels[i], scores[i]});
  }
  out.report.validate_ranges();
  return out;
}

}  // namespace pharl
