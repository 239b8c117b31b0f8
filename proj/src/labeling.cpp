#include "pharl/labeling.hpp"

#include <algorithm>

#include "pharl/errors.hpp"

namespace pharl {

void LabelingConfig::validate() const {
  if (min_impulse < 0.0) throw ValidationError("label.min_impulse must be >= 0");
  if (!use_window_source && !use_continuation_source)
    throw ValidationError("at least one of label.use_window_source / label.use_continuation_source must be true");
  if (continuation_horizon < 0) throw ValidationError("label.continuation_horizon must be >= 0");
}

namespace {

bool descriptor_survives(const WindowRecord& w, const ContactDescriptor& c,
                         const LabelingConfig& cfg) {
  if (c.impulse < cfg.min_impulse) return false;
  if (c.source == ContactSource::InWindow) {
    return cfg.use_window_source && overlaps(w.t0, w.t1, c.t_s, c.t_e);
  }
  return cfg.use_continuation_source && c.t_s >= w.t1 &&
         c.t_s < w.t1 + cfg.continuation_horizon;
}

}  // namespace

CategoryImpulseSet collect_evidence(const WindowRecord& window,
                                    std::span<const ContactDescriptor> descriptors,
                                    const LabelingConfig& config) {
  config.validate();
  CategoryImpulseSet out;
  for (const auto& c : descriptors) {
    if (c.traj_id != window.traj_id)
      throw ValidationError("descriptor from trajectory " + c.traj_id +
                            " offered to window " + window.window_id + " of trajectory " +
                            window.traj_id);
    if (!descriptor_survives(window, c, config)) continue;
    PhysicsLabel cat = category_of(c.region);
    auto [it, inserted] = out.max_impulse.emplace(cat, c.impulse);
    if (!inserted) it->second = std::max(it->second, c.impulse);
  }
  return out;
}

PhysicsLabel assign_label(const CategoryImpulseSet& evidence) {
  if (evidence.has(PhysicsLabel::Head)) return PhysicsLabel::Head;
  if (evidence.has(PhysicsLabel::Trunk)) return PhysicsLabel::Trunk;
  return PhysicsLabel::Supported;
}

std::vector<PhysicsLabel> label_windows(const Dataset& ds, const DatasetIndex& idx,
                                        const LabelingConfig& config) {
  config.validate();
  const int n = int(ds.windows.size());
  std::vector<PhysicsLabel> labels(n, PhysicsLabel::Supported);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const WindowRecord& w = ds.windows[i];
    int traj = idx.traj_by_id.at(w.traj_id);
    CategoryImpulseSet ev;
    for (int ci : idx.contacts_of_traj[traj]) {
      const ContactDescriptor& c = ds.contacts[ci];
      if (!descriptor_survives(w, c, config)) continue;
      PhysicsLabel cat = category_of(c.region);
      auto [it, inserted] = ev.max_impulse.emplace(cat, c.impulse);
      if (!inserted) it->second = std::max(it->second, c.impulse);
    }
    labels[i] = assign_label(ev);
  }
  return labels;
}

Dataset label_dataset(const Dataset& ds, const LabelingConfig& config) {
  DatasetIndex idx = build_index(ds);
  std::vector<PhysicsLabel> labels = label_windows(ds, idx, config);
  Dataset out = ds;
  for (int i = 0; i < int(out.windows.size()); ++i) out.windows[i].phys_label = labels[i];
  return out;
}

Dataset label_dataset_broadcast(const Dataset& ds, const LabelingConfig& config) {
  config.validate();
  DatasetIndex idx = build_index(ds);

  // Dominant category per trajectory over every descriptor that passes the
  // source and threshold filters, ignoring temporal alignment entirely.
  std::vector<PhysicsLabel> traj_label(ds.trajectories.size(), PhysicsLabel::Supported);
  for (int t = 0; t < int(ds.trajectories.size()); ++t) {
    PhysicsLabel best = PhysicsLabel::Supported;
    for (int ci : idx.contacts_of_traj[t]) {
      const ContactDescriptor& c = ds.contacts[ci];
      if (c.impulse < config.min_impulse) continue;
      if (c.source == ContactSource::InWindow && !config.use_window_source) continue;
      if (c.source == ContactSource::Continuation && !config.use_continuation_source) continue;
      PhysicsLabel cat = category_of(c.region);
      if (int(cat) > int(best)) best = cat;
    }
    traj_label[t] = best;
  }

  Dataset out = ds;
  for (auto& w : out.windows) w.phys_label = traj_label[idx.traj_by_id.at(w.traj_id)];
  return out;
}

}  // namespace pharl
