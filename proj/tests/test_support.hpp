#pragma once

// Shared fixtures and generators for the unit suites.

#include <filesystem>
#include <string>
#include <vector>

#include "pharl/matrix.hpp"
#include "pharl/rng.hpp"
#include "pharl/types.hpp"

namespace test_support {

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pharl_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Three trajectories (train/val/test), two windows each, a couple of contacts.
inline pharl::Dataset tiny_dataset() {
  using namespace pharl;
  Dataset ds;
  ds.trajectories = {
      {"T0", true, 64, Split::Train},
      {"T1", false, 64, Split::Val},
      {"T2", true, 64, Split::Test},
  };
  auto window = [](const std::string& wid, const std::string& tid, int t0, int t1, bool fall) {
    return WindowRecord{wid, tid, t0, t1, {0.1, 0.2, 0.3}, fall, std::nullopt};
  };
  ds.windows = {
      window("T0_w0", "T0", 0, 32, true),  window("T0_w1", "T0", 32, 64, true),
      window("T1_w0", "T1", 0, 32, false), window("T1_w1", "T1", 32, 64, false),
      window("T2_w0", "T2", 0, 32, true),  window("T2_w1", "T2", 32, 64, true),
  };
  ds.contacts = {
      {"T0", BodyRegion::Torso, 40, 44, 3.5, ContactSource::InWindow},
      {"T0", BodyRegion::Foot, 10, 12, 0.8, ContactSource::InWindow},
      {"T2", BodyRegion::Head, 70, 74, 5.0, ContactSource::Continuation},
  };
  return ds;
}

inline pharl::Matrix random_unit_rows(pharl::Rng& rng, int rows, int cols) {
  pharl::Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double n = 0.0;
    do {
      n = 0.0;
      for (int j = 0; j < cols; ++j) {
        m.at(r, j) = rng.normal();
        n += m.at(r, j) * m.at(r, j);
      }
    } while (n < 1e-12);
    n = std::sqrt(n);
    for (int j = 0; j < cols; ++j) m.at(r, j) /= n;
  }
  return m;
}

inline std::vector<pharl::PoolEntry> random_pool(pharl::Rng& rng, int n, int num_traj) {
  std::vector<pharl::PoolEntry> pool(n);
  for (int i = 0; i < n; ++i) {
    pool[i].id = "w" + std::to_string(i);
    pool[i].traj = int(rng.uniform_int(num_traj));
    double u = rng.uniform();
    pool[i].label = u < 0.5    ? pharl::PhysicsLabel::Supported
                    : u < 0.85 ? pharl::PhysicsLabel::Trunk
                               : pharl::PhysicsLabel::Head;
  }
  return pool;
}

}  // namespace test_support
