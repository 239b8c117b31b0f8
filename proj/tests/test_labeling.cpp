#include <doctest.h>

#include "pharl/errors.hpp"
#include "pharl/labeling.hpp"
#include "pharl/reference.hpp"
#include "pharl/rng.hpp"
#include "test_support.hpp"

using namespace pharl;

namespace {

// Independent oracle: scan descriptors one by one, apply the filter rules
// literally, then pick the first matching dominance case.
PhysicsLabel oracle_label(const WindowRecord& w, const std::vector<ContactDescriptor>& descs,
                          const LabelingConfig& cfg) {
  bool head = false, trunk = false;
  for (const auto& c : descs) {
    if (c.impulse < cfg.min_impulse) continue;
    bool kept = false;
    if (c.source == ContactSource::InWindow && cfg.use_window_source)
      kept = c.t_s < w.t1 && c.t_e > w.t0;
    if (c.source == ContactSource::Continuation && cfg.use_continuation_source)
      kept = c.t_s >= w.t1 && c.t_s < w.t1 + cfg.continuation_horizon;
    if (!kept) continue;
    if (c.region == BodyRegion::Head) head = true;
    if (c.region == BodyRegion::Torso || c.region == BodyRegion::Hip) trunk = true;
  }
  if (head) return PhysicsLabel::Head;
  if (trunk) return PhysicsLabel::Trunk;
  return PhysicsLabel::Supported;
}

std::vector<ContactDescriptor> random_descriptors(Rng& rng, const std::string& traj_id, int count) {
  std::vector<ContactDescriptor> out;
  for (int i = 0; i < count; ++i) {
    ContactDescriptor c;
    c.traj_id = traj_id;
    c.region = BodyRegion(int(rng.uniform_int(7)));
    c.t_s = int(rng.uniform_int(120)) - 10;
    c.t_e = c.t_s + 1 + int(rng.uniform_int(40));
    c.impulse = rng.uniform() * 6.0;
    c.source = rng.uniform() < 0.5 ? ContactSource::InWindow : ContactSource::Continuation;
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_CASE("half-open interval overlap") {
  CHECK(overlaps(0, 32, 31, 40));
  CHECK_FALSE(overlaps(0, 32, 32, 40));
  CHECK(overlaps(0, 32, 0, 1));
  CHECK_FALSE(overlaps(0, 32, -5, 0));
}

TEST_CASE("collect_evidence merges by per-category maximum") {
  WindowRecord w{"W", "T", 0, 32, {}, false, std::nullopt};
  std::vector<ContactDescriptor> descs = {
      {"T", BodyRegion::Head, 10, 14, 5.0, ContactSource::InWindow},
      {"T", BodyRegion::Torso, 33, 36, 3.0, ContactSource::Continuation},
  };
  LabelingConfig cfg;  // both sources, threshold 0, horizon 30

  auto ev = collect_evidence(w, descs, cfg);
  CHECK(ev.max_impulse.size() == 2);
  CHECK(ev.max_impulse.at(PhysicsLabel::Head) == 5.0);
  CHECK(ev.max_impulse.at(PhysicsLabel::Trunk) == 3.0);

  cfg.use_continuation_source = false;
  auto ev2 = collect_evidence(w, descs, cfg);
  CHECK(ev2.max_impulse.size() == 1);
  CHECK(ev2.max_impulse.at(PhysicsLabel::Head) == 5.0);

  CHECK(collect_evidence(w, {}, LabelingConfig{}).empty());
}

TEST_CASE("continuation evidence requires t_s in [t1, t1+H)") {
  WindowRecord w{"W", "T", 0, 32, {}, false, std::nullopt};
  LabelingConfig cfg;
  cfg.continuation_horizon = 30;
  std::vector<ContactDescriptor> at_boundary = {
      {"T", BodyRegion::Torso, 32, 36, 3.0, ContactSource::Continuation}};
  std::vector<ContactDescriptor> at_horizon = {
      {"T", BodyRegion::Torso, 62, 66, 3.0, ContactSource::Continuation}};
  std::vector<ContactDescriptor> inside = {
      {"T", BodyRegion::Torso, 10, 14, 3.0, ContactSource::Continuation}};
  CHECK(collect_evidence(w, at_boundary, cfg).has(PhysicsLabel::Trunk));
  CHECK_FALSE(collect_evidence(w, at_horizon, cfg).has(PhysicsLabel::Trunk));
  CHECK_FALSE(collect_evidence(w, inside, cfg).has(PhysicsLabel::Trunk));
}

TEST_CASE("foreign-trajectory descriptor is a hard error") {
  WindowRecord w{"W", "T", 0, 32, {}, false, std::nullopt};
  std::vector<ContactDescriptor> descs = {
      {"OTHER", BodyRegion::Head, 10, 14, 5.0, ContactSource::InWindow}};
  CHECK_THROWS_AS(collect_evidence(w, descs, LabelingConfig{}), ValidationError);
}

TEST_CASE("hierarchical dominance ignores magnitude") {
  CategoryImpulseSet ev;
  ev.max_impulse = {{PhysicsLabel::Head, 0.5},
                    {PhysicsLabel::Trunk, 9.0},
                    {PhysicsLabel::Supported, 20.0}};
  CHECK(assign_label(ev) == PhysicsLabel::Head);

  CategoryImpulseSet sup;
  sup.max_impulse = {{PhysicsLabel::Supported, 50.0}};
  CHECK(assign_label(sup) == PhysicsLabel::Supported);

  CHECK(assign_label(CategoryImpulseSet{}) == PhysicsLabel::Supported);
}

TEST_CASE("config requires at least one source") {
  LabelingConfig cfg;
  cfg.use_window_source = false;
  cfg.use_continuation_source = false;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("oracle equivalence over randomized cases") {
  Rng rng(4242);
  for (int trial = 0; trial < 2000; ++trial) {
    WindowRecord w{"W", "T", 0, 0, {}, false, std::nullopt};
    w.t0 = int(rng.uniform_int(60));
    w.t1 = w.t0 + 1 + int(rng.uniform_int(40));
    auto descs = random_descriptors(rng, "T", int(rng.uniform_int(8)));
    LabelingConfig cfg;
    cfg.min_impulse = rng.uniform() * 4.0;
    cfg.use_window_source = rng.uniform() < 0.7;
    cfg.use_continuation_source = !cfg.use_window_source || rng.uniform() < 0.7;
    cfg.continuation_horizon = int(rng.uniform_int(60));
    CHECK(assign_label(collect_evidence(w, descs, cfg)) == oracle_label(w, descs, cfg));
  }
}

TEST_CASE("threshold monotonicity: raising min_impulse never promotes") {
  Rng rng(515);
  for (int trial = 0; trial < 500; ++trial) {
    WindowRecord w{"W", "T", 0, 32, {}, false, std::nullopt};
    auto descs = random_descriptors(rng, "T", 6);
    LabelingConfig lo, hi;
    lo.min_impulse = rng.uniform() * 2.0;
    hi.min_impulse = lo.min_impulse + rng.uniform() * 4.0;
    int y_lo = int(assign_label(collect_evidence(w, descs, lo)));
    int y_hi = int(assign_label(collect_evidence(w, descs, hi)));
    CHECK(y_hi <= y_lo);
  }
}

TEST_CASE("source-union dominance") {
  Rng rng(616);
  for (int trial = 0; trial < 500; ++trial) {
    WindowRecord w{"W", "T", 0, 32, {}, false, std::nullopt};
    auto descs = random_descriptors(rng, "T", 6);
    LabelingConfig both, win_only, cont_only;
    win_only.use_continuation_source = false;
    cont_only.use_window_source = false;
    int y_both = int(assign_label(collect_evidence(w, descs, both)));
    CHECK(y_both >= int(assign_label(collect_evidence(w, descs, win_only))));
    CHECK(y_both >= int(assign_label(collect_evidence(w, descs, cont_only))));
  }
}

TEST_CASE("label_dataset is deterministic and matches the serial reference") {
  Dataset ds = test_support::tiny_dataset();
  LabelingConfig cfg;
  Dataset a = label_dataset(ds, cfg);
  Dataset b = label_dataset(ds, cfg);
  CHECK(a == b);

  DatasetIndex idx = build_index(ds);
  auto parallel = label_windows(ds, idx, cfg);
  auto serial = ref::label_windows(ds, idx, cfg);
  CHECK(parallel == serial);

  // T0_w1 overlaps the torso contact; T2_w1 picks up the continuation head
  // contact at t_s=70 (t1=64, horizon 30). Everything else is Supported.
  CHECK(*a.windows[0].phys_label == PhysicsLabel::Supported);
  CHECK(*a.windows[1].phys_label == PhysicsLabel::Trunk);
  CHECK(*a.windows[4].phys_label == PhysicsLabel::Supported);
  CHECK(*a.windows[5].phys_label == PhysicsLabel::Head);
}

TEST_CASE("all descriptors below a large threshold gives all Supported") {
  Dataset ds = test_support::tiny_dataset();
  LabelingConfig cfg;
  cfg.min_impulse = 100.0;
  Dataset labeled = label_dataset(ds, cfg);
  for (const auto& w : labeled.windows) CHECK(*w.phys_label == PhysicsLabel::Supported);
}

TEST_CASE("broadcast labeling assigns the trajectory-dominant label everywhere") {
  Dataset ds = test_support::tiny_dataset();
  Dataset labeled = label_dataset_broadcast(ds, LabelingConfig{});
  CHECK(*labeled.windows[0].phys_label == PhysicsLabel::Trunk);  // T0 has a torso contact
  CHECK(*labeled.windows[1].phys_label == PhysicsLabel::Trunk);
  CHECK(*labeled.windows[2].phys_label == PhysicsLabel::Supported);  // T1 has none
  CHECK(*labeled.windows[4].phys_label == PhysicsLabel::Head);  // T2's head contact
  CHECK(*labeled.windows[5].phys_label == PhysicsLabel::Head);
}
