#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pharl/encoder.hpp"
#include "pharl/matrix.hpp"
#include "pharl/types.hpp"

namespace pharl {

// Post-hoc severity direction: unit vector from the Supported centroid to the
// Head centroid, computed on the train split.
struct SeverityAxis {
  std::vector<double> v;
};

SeverityAxis severity_axis(const Matrix& train_embeddings,
                           std::span<const PhysicsLabel> train_labels);

std::vector<double> project(const Matrix& embeddings, const SeverityAxis& axis);

// Spearman's rho: Pearson correlation of average ranks (ties share the mean
// rank). Throws when either input is constant.
double spearman(std::span<const int> labels, std::span<const double> scores);

// Kendall's tau-b via merge-sort inversion counting with tie corrections.
double kendall_tau_b(std::span<const int> labels, std::span<const double> scores);

// Macro-averaged pairwise ordering accuracy. Each ordered class pair is
// enumerated exhaustively while the pair count fits in pair_cap, sampled with
// the seeded stream above it. Ties count 0.5.
double poa_macro(std::span<const int> labels, std::span<const double> scores,
                 std::uint64_t seed, long long pair_cap = 100000);

// Mann-Whitney AUC, exact under ties (computed from average ranks).
double auc(std::span<const int> binary_labels, std::span<const double> scores);

// Average precision. Ties broken by (descending score, ascending index).
double average_precision(std::span<const int> binary_labels,
                         std::span<const double> scores);

struct ProbeConfig {
  double l2 = 1e-3;
  int steps = 500;
  double learning_rate = 1.0;
};

// Logistic probe fit by deterministic full-batch gradient descent from zero
// initialization; returns raw decision values on the eval rows.
std::vector<double> linear_probe_scores(const Matrix& train_embeddings,
                                        std::span<const int> train_binary_labels,
                                        const Matrix& eval_embeddings,
                                        const ProbeConfig& config = {});

struct PcrResult {
  double value = 0.0;
  bool degenerate = false;  // intra-class mean hit the 1e-12 guard
};

// Mean inter-class over mean intra-class Euclidean distance, pooled over
// classes; classes with fewer than two members contribute no intra pairs.
PcrResult pcr(const Matrix& embeddings, std::span<const PhysicsLabel> labels);

struct NeighborhoodResult {
  std::map<PhysicsLabel, double> diagonal;     // row-normalized same-class rate
  std::map<PhysicsLabel, int> skipped_queries; // no same-class candidate after exclusion
};

// Cross-video retrieval consistency: class-balanced database (seeded
// subsample to the minority size), cosine top-k per query after excluding
// same-video entries.
NeighborhoodResult neighborhood_consistency(const Matrix& embeddings,
                                            std::span<const PhysicsLabel> labels,
                                            std::span<const int> video_ids, int k,
                                            std::uint64_t seed);

struct EvalConfig {
  Split split = Split::Test;
  int k_neighbors = 10;
  long long poa_pair_cap = 100000;
  ProbeConfig probe;
  std::uint64_t seed = 7;

  void validate() const;
};

struct MetricsReport {
  double spearman_rho = 0.0;
  double poa_macro = 0.0;
  double contact_ap = 0.0;
  double contact_auc = 0.0;
  double fall_auc = 0.0;
  double pcr = 0.0;
  double kendall_tau = 0.0;
  std::map<PhysicsLabel, double> category_mean_projection;
  std::map<PhysicsLabel, double> neighborhood_diagonal;
  std::map<PhysicsLabel, int> neighborhood_skipped;
  bool pcr_degenerate = false;

  void validate_ranges() const;  // every field inside its stated range
};

struct ProjectionRow {
  std::string window_id;
  PhysicsLabel label;
  double score;
};

struct ReportBundle {
  MetricsReport report;
  std::vector<ProjectionRow> projections;
};

// Axis and probes fit on the train split; everything else measured on the
// requested split of the labeled dataset.
ReportBundle full_report(const EncoderParams& params, const Dataset& labeled,
                         const EvalConfig& config);

}  // namespace pharl
