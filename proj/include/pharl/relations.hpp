#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pharl/types.hpp"

namespace pharl {

// One comparison candidate: a batch window or a memory-bank snapshot.
// Trajectories are interned to ints by the caller so set construction never
// touches strings.
struct PoolEntry {
  std::string id;        // window_id for batch entries, slot tag for bank entries
  int traj = -1;
  PhysicsLabel label = PhysicsLabel::Supported;
  bool from_bank = false;
};

// Relation sets for one anchor, as indices into the pool. The candidate set
// is implicit: every pool index except the anchor itself. The denominator of
// the masked trajectory loss is candidates minus `mask`.
struct AnchorRelations {
  int anchor = -1;
  std::vector<int> traj_positives;   // same trajectory
  std::vector<int> mask;             // cross-trajectory contact windows, contact anchors only
  std::vector<int> phys_positives;   // cross-trajectory same-class, contact anchors only
  std::vector<int> cross_traj;       // all cross-trajectory candidates
  bool skip_motion = false;          // no trajectory positives available
  bool skip_physics = false;         // non-contact anchor or no physics positives
};

struct RelationOptions {
  // When false ("binary grouping" ablation) the attraction positives are all
  // cross-trajectory contact windows rather than exact class matches.
  bool exact_class_attraction = true;
};

// Builds relations for anchors pool[0..num_anchors); entries at and beyond
// num_anchors are bank candidates. Anchors must carry labels already (the
// caller guarantees this by construction; see build_pool below).
std::vector<AnchorRelations> build_relations(std::span<const PoolEntry> pool,
                                             int num_anchors,
                                             const RelationOptions& options = {});

// Assembles a pool from labeled dataset windows (by window index). Throws if
// any referenced window is unlabeled.
std::vector<PoolEntry> build_pool(const Dataset& ds, const DatasetIndex& idx,
                                  std::span<const int> window_indices);

struct BatchQuota {
  int head = 0;
  int trunk = 0;
};

// Partitions window indices into batches of at most batch_size, each batch
// carrying at least the quota of Head / Trunk windows while any remain.
// Every index appears exactly once; the whole layout is a pure function of
// the seed.
std::vector<std::vector<int>> stratified_batches(std::span<const PhysicsLabel> labels,
                                                 std::span<const int> window_indices,
                                                 int batch_size, BatchQuota quota,
                                                 std::uint64_t seed);

}  // namespace pharl
