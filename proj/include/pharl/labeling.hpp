#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pharl/types.hpp"

namespace pharl {

struct LabelingConfig {
  double min_impulse = 0.0;            // inclusive threshold: impulse >= min_impulse survives
  bool use_window_source = true;
  bool use_continuation_source = true;
  int continuation_horizon = 30;       // continuation accepted when t_s in [t1, t1 + horizon)

  void validate() const;
};

// Per-category maximum impulse among the surviving descriptors. A missing
// category means no evidence for it.
struct CategoryImpulseSet {
  std::map<PhysicsLabel, double> max_impulse;

  bool has(PhysicsLabel y) const { return max_impulse.count(y) != 0; }
  bool empty() const { return max_impulse.empty(); }
};

// Half-open interval overlap: (t_s < t1) and (t_e > t0).
inline bool overlaps(int t0, int t1, int t_s, int t_e) {
  return t_s < t1 && t_e > t0;
}

// Filters the window's descriptors (temporal alignment for in-window sources,
// boundary completion for continuation sources, reliability threshold) and
// merges survivors by per-category maximum impulse. Descriptors from another
// trajectory are a hard error.
CategoryImpulseSet collect_evidence(const WindowRecord& window,
                                    std::span<const ContactDescriptor> descriptors,
                                    const LabelingConfig& config);

// Hierarchical dominance: Head if present, else Trunk if present, else
// Supported (also the empty-evidence default).
PhysicsLabel assign_label(const CategoryImpulseSet& evidence);

// Labels every window from its trajectory's descriptors. Pure function of
// (windows, descriptors, config); windows are processed independently so the
// loop is parallelized.
std::vector<PhysicsLabel> label_windows(const Dataset& ds, const DatasetIndex& idx,
                                        const LabelingConfig& config);

// Convenience wrapper that returns a copy of the dataset with phys_label set.
Dataset label_dataset(const Dataset& ds, const LabelingConfig& config);

// Trajectory-level broadcast used by the "denoising off" ablation: every
// window of a trajectory inherits the most dominant category among all of the
// trajectory's descriptors that pass the source/threshold filters.
Dataset label_dataset_broadcast(const Dataset& ds, const LabelingConfig& config);

}  // namespace pharl
