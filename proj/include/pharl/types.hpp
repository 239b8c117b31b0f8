#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pharl/errors.hpp"

namespace pharl {

enum class Split { Train, Val, Test };

enum class BodyRegion { Head, Torso, Hip, Arm, Hand, Leg, Foot };

// Coarse contact category per window. The integer values double as the
// ordinal ranks used by the evaluation suite; the training losses only ever
// compare labels for equality or membership in {Trunk, Head}.
enum class PhysicsLabel : int { Supported = 0, Trunk = 1, Head = 2 };

enum class ContactSource { InWindow, Continuation };

inline PhysicsLabel category_of(BodyRegion r) {
  switch (r) {
    case BodyRegion::Head:
      return PhysicsLabel::Head;
    case BodyRegion::Torso:
    case BodyRegion::Hip:
      return PhysicsLabel::Trunk;
    default:
      return PhysicsLabel::Supported;
  }
}

// True for the contact classes; this is the binary contact indicator used by
// denominator masking.
inline bool is_contact(PhysicsLabel y) {
  return y == PhysicsLabel::Trunk || y == PhysicsLabel::Head;
}

struct TrajectoryRecord {
  std::string traj_id;
  bool fall_flag = false;
  int num_frames = 0;
  Split split = Split::Train;

  bool operator==(const TrajectoryRecord&) const = default;
};

// One temporal window [t0, t1) of a trajectory. phys_label stays empty until
// the labeling stage runs.
struct WindowRecord {
  std::string window_id;
  std::string traj_id;
  int t0 = 0;
  int t1 = 0;
  std::vector<double> features;
  bool fall_flag = false;
  std::optional<PhysicsLabel> phys_label;

  bool operator==(const WindowRecord&) const = default;
};

// One simulated contact event on the trajectory timeline, half-open interval
// [t_s, t_e). InWindow descriptors come from observed frames; Continuation
// descriptors from a short-horizon rollout starting at a window boundary.
struct ContactDescriptor {
  std::string traj_id;
  BodyRegion region = BodyRegion::Torso;
  int t_s = 0;
  int t_e = 0;
  double impulse = 0.0;
  ContactSource source = ContactSource::InWindow;

  bool operator==(const ContactDescriptor&) const = default;
};

struct Dataset {
  std::vector<TrajectoryRecord> trajectories;
  std::vector<WindowRecord> windows;
  std::vector<ContactDescriptor> contacts;

  bool operator==(const Dataset&) const = default;
};

// Cross-reference index built after load. Construction validates referential
// integrity, id uniqueness, feature-dimension consistency, and window bounds.
struct DatasetIndex {
  std::unordered_map<std::string, int> traj_by_id;
  std::unordered_map<std::string, int> window_by_id;
  std::vector<std::vector<int>> windows_of_traj;
  std::vector<std::vector<int>> contacts_of_traj;
  int feature_dim = 0;
};

DatasetIndex build_index(const Dataset& ds);

// Enum <-> string names used by every file format.
const char* to_string(Split s);
const char* to_string(BodyRegion r);
const char* to_string(PhysicsLabel y);
const char* to_string(ContactSource s);
Split split_from_string(const std::string& s);
BodyRegion region_from_string(const std::string& s);
PhysicsLabel label_from_string(const std::string& s);
ContactSource source_from_string(const std::string& s);

}  // namespace pharl
