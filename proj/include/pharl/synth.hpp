#pragma once

#include <cstdint>
#include <vector>

#include "pharl/types.hpp"

namespace pharl {

struct SynthConfig {
  int num_trajectories = 200;
  int frames_per_trajectory = 128;
  int window_len = 32;
  int window_stride = 32;
  int feature_dim = 16;
  double mix_supported = 0.56;
  double mix_trunk = 0.34;
  double mix_head = 0.10;
  // How strongly features encode the planted contact category.
  double signal_strength = 0.8;
  // Fraction/intensity of Supported windows that receive a trunk-like feature
  // component without any qualifying descriptor.
  double confuser_strength = 0.5;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthResult {
  Dataset dataset;                      // phys_label left empty; labeling is a separate stage
  std::vector<PhysicsLabel> planted;    // intended label per window, aligned with dataset.windows
};

// Seeded generator: trajectories with contact-event plans, descriptors that
// realize the planted labels under the default labeling config, and feature
// vectors mixing trajectory signature, phase, class components, confusers,
// and noise. Split assignment is trajectory-level, stratified so head-contact
// trajectories reach every split.
SynthResult generate(const SynthConfig& config);

}  // namespace pharl
