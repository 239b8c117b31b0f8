#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <set>

#include "pharl/dataset_io.hpp"
#include "pharl/errors.hpp"
#include "pharl/rng.hpp"
#include "test_support.hpp"

using namespace pharl;
using test_support::TempDir;

TEST_CASE("round-trip of a small fixture") {
  TempDir dir("io_fixture");
  Dataset ds = test_support::tiny_dataset();
  auto paths = write_dataset(ds, dir.path());
  Dataset loaded = load_dataset(paths.manifest);
  CHECK(loaded == ds);
  CHECK(loaded.trajectories.size() == 3);
  CHECK(loaded.windows.size() == 6);
  CHECK(loaded.contacts.size() == 3);
}

TEST_CASE("round-trip of a random 50-window dataset is exact") {
  Rng rng(99);
  Dataset ds;
  const int n_traj = 10;
  for (int t = 0; t < n_traj; ++t) {
    ds.trajectories.push_back(TrajectoryRecord{
        "T" + std::to_string(t), rng.uniform() < 0.5, 100,
        t < 6 ? Split::Train : t < 8 ? Split::Val : Split::Test});
  }
  for (int w = 0; w < 50; ++w) {
    WindowRecord rec;
    rec.window_id = "W" + std::to_string(w);
    rec.traj_id = "T" + std::to_string(rng.uniform_int(n_traj));
    rec.t0 = int(rng.uniform_int(50));
    rec.t1 = rec.t0 + 1 + int(rng.uniform_int(50 - std::uint64_t(rec.t0)));
    for (int f = 0; f < 16; ++f) rec.features.push_back(rng.normal() * 1e3);
    rec.fall_flag = rng.uniform() < 0.5;
    if (rng.uniform() < 0.5)
      rec.phys_label = PhysicsLabel(int(rng.uniform_int(3)));
    ds.windows.push_back(std::move(rec));
  }
  for (int c = 0; c < 30; ++c) {
    ContactDescriptor d;
    d.traj_id = "T" + std::to_string(rng.uniform_int(n_traj));
    d.region = BodyRegion(int(rng.uniform_int(7)));
    d.t_s = int(rng.uniform_int(200));
    d.t_e = d.t_s + 1 + int(rng.uniform_int(20));
    d.impulse = rng.uniform() * 10.0;
    d.source = rng.uniform() < 0.5 ? ContactSource::InWindow : ContactSource::Continuation;
    ds.contacts.push_back(std::move(d));
  }

  TempDir dir("io_random");
  auto paths = write_dataset(ds, dir.path());
  CHECK(load_dataset(paths.manifest) == ds);
}

TEST_CASE("empty dataset round-trips") {
  TempDir dir("io_empty");
  Dataset ds;
  auto paths = write_dataset(ds, dir.path());
  CHECK(load_dataset(paths.manifest) == ds);
}

TEST_CASE("dangling trajectory reference is rejected") {
  Dataset ds = test_support::tiny_dataset();
  ds.windows[0].traj_id = "NOPE";
  CHECK_THROWS_AS(build_index(ds), ValidationError);
}

TEST_CASE("inconsistent feature dimension is rejected") {
  Dataset ds = test_support::tiny_dataset();
  ds.windows[1].features.push_back(4.0);
  CHECK_THROWS_WITH_AS(build_index(ds), doctest::Contains("feature dimension"), ValidationError);
}

TEST_CASE("writer refuses invalid descriptor interval") {
  TempDir dir("io_badcontact");
  Dataset ds = test_support::tiny_dataset();
  ds.contacts[0].t_s = 44;
  ds.contacts[0].t_e = 40;
  CHECK_THROWS_AS(write_dataset(ds, dir.path()), ValidationError);
}

TEST_CASE("malformed record reports file and line number") {
  TempDir dir("io_malformed");
  Dataset ds = test_support::tiny_dataset();
  auto paths = write_dataset(ds, dir.path());
  {
    std::ofstream out(paths.windows, std::ios::app);
    out << "{not json\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(paths.manifest), doctest::Contains(":7:"), ValidationError);
}

TEST_CASE("duplicate ids are rejected") {
  Dataset ds = test_support::tiny_dataset();
  ds.windows[1].window_id = ds.windows[0].window_id;
  CHECK_THROWS_AS(build_index(ds), ValidationError);

  Dataset ds2 = test_support::tiny_dataset();
  ds2.trajectories[1].traj_id = "T0";
  CHECK_THROWS_AS(build_index(ds2), ValidationError);
}

TEST_CASE("window bounds must sit inside the trajectory") {
  Dataset ds = test_support::tiny_dataset();
  ds.windows[0].t1 = 200;
  CHECK_THROWS_AS(build_index(ds), ValidationError);
}

TEST_CASE("manifest split lists must match trajectory records") {
  TempDir dir("io_splits");
  Dataset ds = test_support::tiny_dataset();
  auto paths = write_dataset(ds, dir.path());
  // Move T0 into the wrong split list.
  nlohmann::json m;
  {
    std::ifstream in(paths.manifest);
    in >> m;
  }
  m["splits"]["train"] = nlohmann::json::array();
  m["splits"]["val"].push_back("T0");
  {
    std::ofstream out(paths.manifest, std::ios::binary);
    out << m.dump(2);
  }
  CHECK_THROWS_AS(load_dataset(paths.manifest), ValidationError);
}

TEST_CASE("split disjointness holds for any valid dataset") {
  Dataset ds = test_support::tiny_dataset();
  build_index(ds);
  std::set<std::string> train, val, test;
  for (const auto& t : ds.trajectories) {
    if (t.split == Split::Train) train.insert(t.traj_id);
    if (t.split == Split::Val) val.insert(t.traj_id);
    if (t.split == Split::Test) test.insert(t.traj_id);
  }
  for (const auto& id : train) {
    CHECK(val.count(id) == 0);
    CHECK(test.count(id) == 0);
  }
  for (const auto& id : val) CHECK(test.count(id) == 0);
}
