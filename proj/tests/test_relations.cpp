#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "pharl/errors.hpp"
#include "pharl/reference.hpp"
#include "pharl/relations.hpp"
#include "pharl/rng.hpp"
#include "test_support.hpp"

using namespace pharl;

namespace {

// Direct evaluation of the set predicates over all pairs.
struct OracleSets {
  std::set<int> traj_pos, mask, phys_pos, cross;
};

OracleSets oracle_relations(const std::vector<PoolEntry>& pool, int anchor, bool exact_class) {
  OracleSets o;
  const PoolEntry& a = pool[anchor];
  for (int k = 0; k < int(pool.size()); ++k) {
    if (k == anchor) continue;
    const PoolEntry& e = pool[k];
    if (e.traj == a.traj) o.traj_pos.insert(k);
    if (e.traj != a.traj) o.cross.insert(k);
    if (is_contact(a.label) && is_contact(e.label) && e.traj != a.traj) o.mask.insert(k);
    bool label_ok = exact_class ? e.label == a.label : is_contact(e.label);
    if (is_contact(a.label) && label_ok && e.traj != a.traj) o.phys_pos.insert(k);
  }
  return o;
}

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("four-window fixture matches the worked example") {
  // T1 = {w1 Head, w2 Supported}, T2 = {w3 Head, w4 Trunk}
  std::vector<PoolEntry> pool = {
      {"w1", 1, PhysicsLabel::Head, false},
      {"w2", 1, PhysicsLabel::Supported, false},
      {"w3", 2, PhysicsLabel::Head, false},
      {"w4", 2, PhysicsLabel::Trunk, false},
  };
  auto rels = build_relations(pool, 4);

  CHECK(as_set(rels[0].traj_positives) == std::set<int>{1});
  CHECK(as_set(rels[0].mask) == std::set<int>{2, 3});
  CHECK(as_set(rels[0].phys_positives) == std::set<int>{2});
  CHECK(as_set(rels[0].cross_traj) == std::set<int>{2, 3});
  CHECK_FALSE(rels[0].skip_motion);
  CHECK_FALSE(rels[0].skip_physics);

  // Supported anchor: empty mask, empty physics positives.
  CHECK(rels[1].mask.empty());
  CHECK(rels[1].phys_positives.empty());
  CHECK(rels[1].skip_physics);
}

TEST_CASE("single-trajectory batch has no cross-trajectory structure") {
  std::vector<PoolEntry> pool = {
      {"a", 7, PhysicsLabel::Head, false},
      {"b", 7, PhysicsLabel::Trunk, false},
      {"c", 7, PhysicsLabel::Supported, false},
  };
  for (const auto& r : build_relations(pool, 3)) {
    CHECK(r.mask.empty());
    CHECK(r.phys_positives.empty());
    CHECK(r.cross_traj.empty());
    CHECK(r.skip_physics);
  }
}

TEST_CASE("builder equals pairwise predicate oracle on random batches") {
  Rng rng(777);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 2 + int(rng.uniform_int(11));
    auto pool = test_support::random_pool(rng, n, 1 + int(rng.uniform_int(5)));
    bool exact = rng.uniform() < 0.8;
    int anchors = 1 + int(rng.uniform_int(std::uint64_t(n)));
    auto rels = build_relations(pool, anchors, RelationOptions{exact});
    for (int i = 0; i < anchors; ++i) {
      OracleSets o = oracle_relations(pool, i, exact);
      CHECK(as_set(rels[i].traj_positives) == o.traj_pos);
      CHECK(as_set(rels[i].mask) == o.mask);
      CHECK(as_set(rels[i].phys_positives) == o.phys_pos);
      CHECK(as_set(rels[i].cross_traj) == o.cross);
      CHECK(rels[i].skip_motion == o.traj_pos.empty());
      CHECK(rels[i].skip_physics == (!is_contact(pool[i].label) || o.phys_pos.empty()));
    }
  }
}

TEST_CASE("structural invariants on random batches") {
  Rng rng(888);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 3 + int(rng.uniform_int(20));
    auto pool = test_support::random_pool(rng, n, 1 + int(rng.uniform_int(6)));
    auto rels = build_relations(pool, n);
    for (const auto& r : rels) {
      auto mask = as_set(r.mask);
      for (int k : r.traj_positives) CHECK(mask.count(k) == 0);
      // Physics positives are mask-eligible.
      for (int k : r.phys_positivesittest) (void)k;
      for (int k : r.phys_positives) CHECK(mask.count(k) == 1);
      for (int k : r.mask) CHECK(std::count(r.cross_traj.begin(), r.cross_traj.end(), k) == 1);
    }
  }
}

TEST_CASE("parallel and serial relation builders agree exactly") {
  Rng rng(999);
  auto pool = test_support::random_pool(rng, 120, 12);
  auto a = build_relations(pool, 60);
  auto b = ref::build_relations(pool, 60);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].traj_positives == b[i].traj_positives);
    CHECK(a[i].mask == b[i].mask);
    CHECK(a[i].phys_positives == b[i].phys_positives);
    CHECK(a[i].cross_traj == b[i].cross_traj);
  }
}

TEST_CASE("unlabeled window rejected when building a pool") {
  Dataset ds = test_support::tiny_dataset();
  DatasetIndex idx = build_index(ds);
  std::vector<int> batch = {0, 1};
  CHECK_THROWS_AS(build_pool(ds, idx, batch), ValidationError);
}

TEST_CASE("stratified batches honor quotas and cover every window once") {
  Rng rng(2024);
  std::vector<PhysicsLabel> labels;
  std::vector<int> indices;
  for (int i = 0; i < 100; ++i) {
    labels.push_back(i < 10 ? PhysicsLabel::Head
                            : i < 40 ? PhysicsLabel::Trunk : PhysicsLabel::Supported);
    indices.push_back(i);
  }
  auto batches = stratified_batches(labels, indices, 20, BatchQuota{2, 2}, 7);
  CHECK(batches.size() == 5);
  std::set<int> seen;
  for (const auto& b : batches) {
    CHECK(int(b.size()) <= 20);
    int heads = 0;
    for (int wi : b) {
      heads += labels[wi] == PhysicsLabel::Head;
      CHECK(seen.insert(wi).second);
    }
    CHECK(heads >= 2);
  }
  CHECK(seen.size() == 100);

  // Pure function of the seed.
  auto again = stratified_batches(labels, indices, 20, BatchQuota{2, 2}, 7);
  CHECK(batches == again);
  auto other = stratified_batches(labels, indices, 20, BatchQuota{2, 2}, 8);
  CHECK(batches != other);
}

TEST_CASE("zero quota degenerates to a seeded shuffle partition") {
  std::vector<PhysicsLabel> labels(30, PhysicsLabel::Supported);
  std::vector<int> indices;
  for (int i = 0; i < 30; ++i) indices.push_back(i);
  auto batches = stratified_batches(labels, indices, 10, BatchQuota{0, 0}, 3);
  CHECK(batches.size() == 3);
  std::set<int> seen;
  for (const auto& b : batches)
    for (int wi : b) seen.insert(wi);
  CHECK(seen.size() == 30);
}

TEST_CASE("quota exceeding batch size is rejected") {
  std::vector<PhysicsLabel> labels(10, PhysicsLabel::Head);
  std::vector<int> indices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_THROWS_AS(stratified_batches(labels, indices, 4, BatchQuota{3, 2}, 1), ValidationError);
}

TEST_CASE("no singleton trailing batch when avoidable") {
  std::vector<PhysicsLabel> labels(21, PhysicsLabel::Supported);
  std::vector<int> indices;
  for (int i = 0; i < 21; ++i) indices.push_back(i);
  auto batches = stratified_batches(labels, indices, 10, BatchQuota{0, 0}, 5);
  for (const auto& b : batches) CHECK(b.size() >= 2);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  CHECK(total == 21);
}
