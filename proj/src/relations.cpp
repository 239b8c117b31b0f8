#include "pharl/relations.hpp"

#include <algorithm>

#include "pharl/errors.hpp"
#include "pharl/rng.hpp"

namespace pharl {

std::vector<AnchorRelations> build_relations(std::span<const PoolEntry> pool,
                                             int num_anchors,
                                             const RelationOptions& options) {
  if (num_anchors < 0 || num_anchors > int(pool.size()))
    throw ValidationError("build_relations: num_anchors out of range");

  std::vector<AnchorRelations> rels(num_anchors);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < num_anchors; ++i) {
    const PoolEntry& a = pool[i];
    AnchorRelations& r = rels[i];
    r.anchor = i;
    const bool anchor_contact = is_contact(a.label);
    for (int k = 0; k < int(pool.size()); ++k) {
      if (k == i) continue;  // self-comparison excluded
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

std::vector<PoolEntry> build_pool(const Dataset& ds, const DatasetIndex& idx,
                                  std::span<const int> window_indices) {
  std::vector<PoolEntry> pool;
  pool.reserve(window_indices.size());
  for (int wi : window_indices) {
    const WindowRecord& w = ds.windows[wi];
    if (!w.phys_label)
      throw ValidationError("window " + w.window_id + " is unlabeled; run the label stage first");
    pool.push_back(PoolEntry{w.window_id, idx.traj_by_id.at(w.traj_id), *w.phys_label, false});
  }
  return pool;
}

std::vector<std::vector<int>> stratified_batches(std::span<const PhysicsLabel> labels,
                                                 std::span<const int> window_indices,
                                                 int batch_size, BatchQuota quota,
                                                 std::uint64_t seed) {
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (quota.head < 0 || quota.trunk < 0) throw ValidationError("quotas must be >= 0");
  if (quota.head + quota.trunk > batch_size)
    throw ValidationError("quota sum (" + std::to_string(quota.head + quota.trunk) +
                          ") exceeds batch_size (" + std::to_string(batch_size) + ")");

  const int n = int(window_indices.size());
  if (n == 0) return {};

  std::vector<int> head_pool, trunk_pool, rest_pool;
  for (int i = 0; i < n; ++i) {
    int wi = window_indices[i];
    switch (labels[wi]) {
      case PhysicsLabel::Head:
        head_pool.push_back(wi);
        break;
      case PhysicsLabel::Trunk:
        trunk_pool.push_back(wi);
        break;
      default:
        rest_pool.push_back(wi);
        break;
    }
  }

  Rng rng = Rng::substream(seed, "stratified_batches");
  rng.shuffle(head_pool);
  rng.shuffle(trunk_pool);
  rng.shuffle(rest_pool);

  const int num_batches = (n + batch_size - 1) / batch_size;
  std::vector<std::vector<int>> batches(num_batches);

  // Reserve quota picks while classes last; quotas are best effort once a
  // class runs out, and no window is ever dropped.
  std::size_t hp = 0, tp = 0;
  for (int b = 0; b < num_batches; ++b) {
    for (int q = 0; q < quota.head && hp < head_pool.size(); ++q) batches[b].push_back(head_pool[hp++]);
    for (int q = 0; q < quota.trunk && tp < trunk_pool.size(); ++q) batches[b].push_back(trunk_pool[tp++]);
  }

  std::vector<int> filler(head_pool.begin() + hp, head_pool.end());
  filler.insert(filler.end(), trunk_pool.begin() + tp, trunk_pool.end());
  filler.insert(filler.end(), rest_pool.begin(), rest_pool.end());
  rng.shuffle(filler);

  std::size_t fp = 0;
  for (int b = 0; b < num_batches; ++b) {
    int cap = std::min(batch_size, n - b * batch_size);
    while (int(batches[b].size()) < cap && fp < filler.size()) batches[b].push_back(filler[fp++]);
  }
  // Any leftovers (quota picks shrank an earlier batch below capacity) go to
  // the first batches with room.
  for (int b = 0; fp < filler.size() && b < num_batches; ++b) {
    while (int(batches[b].size()) < batch_size && fp < filler.size()) batches[b].push_back(filler[fp++]);
  }
  return batches;
}

}  // namespace pharl
