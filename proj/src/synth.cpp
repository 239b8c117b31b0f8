#include "pharl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "pharl/errors.hpp"
#include "pharl/matrix.hpp"
#include "pharl/rng.hpp"

namespace pharl {

namespace {

// The planted-label planner mirrors the default labeling rules (both sources,
// zero threshold, 30-frame continuation horizon) with its own direct scan, so
// the label-recovery check compares two independently written rule readings.
constexpr int kPlannerHorizon = 30;

enum class Archetype { NoFall, ProtectiveFall, TrunkFall, HeadFall, ContTrunk, ContHead };

struct ArchetypeCounts {
  int head_fall = 0;
  int cont_head = 0;
  int trunk_fall = 0;
  int cont_trunk = 0;
  int protective = 0;
  int no_fall = 0;
};

// Windows each archetype template contributes per class, as realized with the
// default non-overlapping grid.
struct TemplateYield {
  int head_from_hf, trunk_from_hf;
  int trunk_from_tf;
};

TemplateYield template_yield(int windows_per_traj) {
  if (windows_per_traj >= 3) return {2, 1, 3};
  if (windows_per_traj == 2) return {1, 1, 2};
  return {1, 0, 1};
}

ArchetypeCounts solve_mix(const SynthConfig& cfg, int windows_per_traj) {
  const long long total = (long long)cfg.num_trajectories * windows_per_traj;
  const int head_target = int(std::llround(cfg.mix_head * double(total)));
  const int trunk_target = int(std::llround(cfg.mix_trunk * double(total)));
  const TemplateYield y = template_yield(windows_per_traj);

  ArchetypeCounts c;
  const int contact_target = head_target + trunk_target;
  if (contact_target == 0) {
    c.no_fall = cfg.num_trajectories / 2;
    c.protective = cfg.num_trajectories - c.no_fall;
    return c;
  }

  // Enough continuation-only trajectories that a clear share of contact
  // windows carries evidence purely via boundary completion.
  const int cont_target = std::max(2, (contact_target * 3 + 19) / 20);  // ~15%
  int ch = head_target > 0
               ? std::max(1, int(std::llround(double(cont_target) * head_target / contact_target)))
               : 0;
  ch = std::min(ch, head_target);
  c.head_fall = (head_target - ch) / y.head_from_hf;
  c.cont_head = head_target - c.head_fall * y.head_from_hf;  // absorbs rounding

  int ct = std::max(0, cont_target - c.cont_head);
  int trunk_left = trunk_target - c.head_fall * y.trunk_from_hf;
  if (trunk_left < 0) throw ValidationError("synth: class_mix infeasible (trunk share too small)");
  ct = std::min(ct, trunk_left);
  c.trunk_fall = (trunk_left - ct) / y.trunk_from_tf;
  c.cont_trunk = trunk_left - c.trunk_fall * y.trunk_from_tf;

  const int used = c.head_fall + c.cont_head + c.trunk_fall + c.cont_trunk;
  const int leftover = cfg.num_trajectories - used;
  if (leftover < 3)
    throw ValidationError("synth: class_mix infeasible for " + std::to_string(cfg.num_trajectories) +
                          " trajectories (needs " + std::to_string(used + 3) + ")");
  c.protective = std::max(1, int(std::llround(0.3 * leftover)));
  c.no_fall = leftover - c.protective;
  if (cfg.mix_head > 0.0 && c.head_fall + c.cont_head == 0)
    throw ValidationError("synth: head proportion > 0 but no head-contact trajectory fits");
  return c;
}

struct TrajectoryPlan {
  Archetype archetype = Archetype::NoFall;
  int impact_window = -1;  // first contact window (grid index), -1 when none
};

std::vector<double> random_unit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = norm2(v.data(), dim);
  } while (n < 1e-9);
  for (double& x : v) x /= n;
  return v;
}

void axpy(std::vector<double>& acc, double a, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += a * v[i];
}

}  // namespace

void SynthConfig::validate() const {
  if (num_trajectories < 1) throw ValidationError("synth.num_trajectories must be >= 1");
  if (frames_per_trajectory < 1) throw ValidationError("synth.frames_per_trajectory must be >= 1");
  if (window_len < 1 || window_len > frames_per_trajectory)
    throw ValidationError("synth.window_len must lie in [1, frames_per_trajectory]");
  if (window_stride < 1) throw ValidationError("synth.window_stride must be >= 1");
  if (feature_dim < 4) throw ValidationError("synth.feature_dim must be >= 4");
  if (mix_supported < 0 || mix_trunk < 0 || mix_head < 0 ||
      std::abs(mix_supported + mix_trunk + mix_head - 1.0) > 1e-6)
    throw ValidationError("synth.class_mix must be nonnegative and sum to 1");
  if (signal_strength < 0.0 || signal_strength > 1.0)
    throw ValidationError("synth.signal_strength must lie in [0, 1]");
  if (confuser_strength < 0.0 || confuser_strength > 1.0)
    throw ValidationError("synth.confuser_strength must lie in [0, 1]");
  if (train_fraction <= 0.0 || val_fraction <= 0.0 || train_fraction + val_fraction >= 1.0)
    throw ValidationError("synth split fractions must be positive with train+val < 1");
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const int W = (cfg.frames_per_trajectory - cfg.window_len) / cfg.window_stride + 1;
  const int N = cfg.num_trajectories;
  ArchetypeCounts counts = solve_mix(cfg, W);

  // Archetype per trajectory, shuffled so ids carry no ordering hint.
  std::vector<Archetype> archetypes;
  auto add = [&](Archetype a, int n) { archetypes.insert(archetypes.end(), n, a); };
  add(Archetype::HeadFall, counts.head_fall);
  add(Archetype::ContHead, counts.cont_head);
  add(Archetype::TrunkFall, counts.trunk_fall);
  add(Archetype::ContTrunk, counts.cont_trunk);
  add(Archetype::ProtectiveFall, counts.protective);
  add(Archetype::NoFall, counts.no_fall);
  {
    Rng rng = Rng::substream(cfg.seed, "archetypes");
    rng.shuffle(archetypes);
  }

  // Trajectory-level splits, stratified per archetype group with head-contact
  // trajectories guaranteed in every split once three exist.
  std::vector<Split> splits(N, Split::Train);
  {
    std::array<std::vector<int>, 4> strata;  // head-contact, trunk-contact, protective, no-fall
    for (int t = 0; t < N; ++t) {
      switch (archetypes[t]) {
        case Archetype::HeadFall:
        case Archetype::ContHead:
          strata[0].push_back(t);
          break;
        case Archetype::TrunkFall:
        case Archetype::ContTrunk:
          strata[1].push_back(t);
          break;
        case Archetype::ProtectiveFall:
          strata[2].push_back(t);
          break;
        default:
          strata[3].push_back(t);
          break;
      }
    }
    for (int s = 0; s < 4; ++s) {
      auto& group = strata[s];
      Rng rng = Rng::substream(cfg.seed, "splits", std::uint64_t(s));
      rng.shuffle(group);
      const int m = int(group.size());
      int n_val = int(std::llround(cfg.val_fraction * m));
      int n_test = int(std::llround((1.0 - cfg.train_fraction - cfg.val_fraction) * m));
      if (m >= 3) {
        n_val = std::max(n_val, 1);
        n_test = std::max(n_test, 1);
      }
      n_val = std::min(n_val, m);
      n_test = std::min(n_test, m - n_val);
      for (int i = 0; i < m; ++i)
        splits[group[i]] = i < n_val            ? Split::Val
                           : i < n_val + n_test ? Split::Test
                                                : Split::Train;
    }
  }

  // Fixed semantic directions in feature space.
  Rng dir_rng = Rng::substream(cfg.seed, "directions");
  const int F = cfg.feature_dim;
  auto g_supported = random_unit(dir_rng, F);
  auto g_trunk = random_unit(dir_rng, F);
  auto g_head_extra = random_unit(dir_rng, F);
  auto g_cue = random_unit(dir_rng, F);   // protective-response micro-cue, contact only
  auto g_fall = random_unit(dir_rng, F);  // fall dynamics, any fall archetype
  auto g_phase = random_unit(dir_rng, F);
  // Head shares the trunk component: head impacts carry trunk-like kinematics
  // plus their own signature, which seeds the ordinal layout.
  std::vector<double> g_head(F, 0.0);
  axpy(g_head, 0.6, g_trunk);
  axpy(g_head, 0.8, g_head_extra);
  {
    double n = norm2(g_head.data(), F);
    for (double& x : g_head) x /= n;
  }

  SynthResult out;
  Dataset& ds = out.dataset;
  const double s = cfg.signal_strength;
  const double noise_sigma = 0.35;
  const double traj_sig = 0.9;

  for (int t = 0; t < N; ++t) {
    Rng rng = Rng::substream(cfg.seed, "trajectory", std::uint64_t(t));
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "T%04d", t);
    const std::string traj_id = idbuf;
    const Archetype arch = archetypes[t];
    const bool fall = arch != Archetype::NoFall;
    ds.trajectories.push_back(TrajectoryRecord{traj_id, fall, cfg.frames_per_trajectory, splits[t]});

    TrajectoryPlan plan;
    plan.archetype = arch;
    // Contact-phase length on the window grid.
    int span = 0;
    switch (arch) {
      case Archetype::HeadFall:
        span = std::min(3, W);
        break;
      case Archetype::TrunkFall:
        span = std::min(3, W);
        break;
      case Archetype::ProtectiveFall:
        span = 1;
        break;
      case Archetype::ContTrunk:
      case Archetype::ContHead:
        plan.impact_window = W - 1;  // evidence arrives after the last boundary
        break;
      default:
        break;
    }
    if (span > 0) plan.impact_window = span >= W ? 0 : int(rng.uniform_int(W - span + 1));

    auto window_start = [&](int w) { return w * cfg.window_stride; };
    auto window_end = [&](int w) { return w * cfg.window_stride + cfg.window_len; };
    const std::size_t contacts_begin = ds.contacts.size();
    auto emit = [&](BodyRegion region, int ts, int te, double lo, double hi, ContactSource src) {
      ds.contacts.push_back(ContactDescriptor{traj_id, region, ts, te, rng.uniform(lo, hi), src});
    };

    // Ground contact during locomotion: every window gets a foot descriptor.
    for (int w = 0; w < W; ++w) {
      int mid = window_start(w) + cfg.window_len / 2;
      emit(BodyRegion::Foot, mid - 1, mid + 1, 0.3, 1.0, ContactSource::InWindow);
    }

    const int wi = plan.impact_window;
    switch (arch) {
      case Archetype::ProtectiveFall: {
        int mid = window_start(wi) + cfg.window_len / 2;
        emit(BodyRegion::Arm, mid, mid + 3, 0.8, 2.5, ContactSource::InWindow);
        emit(BodyRegion::Hand, mid + 1, mid + 4, 0.5, 1.8, ContactSource::InWindow);
        break;
      }
      case Archetype::TrunkFall: {
        BodyRegion trunk_part = rng.uniform() < 0.5 ? BodyRegion::Torso : BodyRegion::Hip;
        int mid = window_start(wi) + cfg.window_len / 2;
        emit(BodyRegion::Leg, mid - 4, mid - 1, 0.5, 1.5, ContactSource::InWindow);
        emit(trunk_part, mid, mid + 4, 2.5, 6.0, ContactSource::InWindow);
        for (int w = wi + 1; w < std::min(wi + 3, W); ++w) {
          emit(BodyRegion::Torso, window_start(w) + 2, window_end(w) - 2, 0.6, 1.8,
               ContactSource::InWindow);
        }
        break;
      }
      case Archetype::HeadFall: {
        int mid = window_start(wi) + cfg.window_len / 2;
        if (W == 1) {
          emit(BodyRegion::Head, mid, mid + 3, 3.0, 8.0, ContactSource::InWindow);
          break;
        }
        emit(BodyRegion::Torso, mid, mid + 4, 2.5, 6.0, ContactSource::InWindow);
        if (wi + 1 < W) {
          int m2 = window_start(wi + 1) + cfg.window_len / 2;
          emit(BodyRegion::Head, m2, m2 + 3, 3.0, 8.0, ContactSource::InWindow);
          emit(BodyRegion::Torso, window_start(wi + 1) + 2, window_end(wi + 1) - 2, 0.6, 1.8,
               ContactSource::InWindow);
        }
        if (wi + 2 < W) {
          emit(BodyRegion::Head, window_start(wi + 2) + 2, window_end(wi + 2) - 2, 0.6, 1.8,
               ContactSource::InWindow);
        }
        break;
      }
      case Archetype::ContTrunk:
      case Archetype::ContHead: {
        // Impact lands just past the final window boundary: observed frames
        // show only the brace attempt, the rollout supplies the contact.
        int boundary = window_end(W - 1);
        emit(BodyRegion::Arm, boundary - 5, boundary - 2, 0.8, 2.0, ContactSource::InWindow);
        int ts = boundary + int(rng.uniform_int(kPlannerHorizon - 6));
        if (arch == Archetype::ContHead) {
          emit(BodyRegion::Head, ts, ts + 4, 3.0, 8.0, ContactSource::Continuation);
        } else {
          BodyRegion trunk_part = rng.uniform() < 0.5 ? BodyRegion::Torso : BodyRegion::Hip;
          emit(trunk_part, ts, ts + 4, 2.5, 6.0, ContactSource::Continuation);
        }
        break;
      }
      default:
        break;
    }

    // Planted labels: direct rule scan over this trajectory's descriptors.
    std::vector<PhysicsLabel> planted_traj(W, PhysicsLabel::Supported);
    for (int w = 0; w < W; ++w) {
      const int t0 = window_start(w), t1 = window_end(w);
      PhysicsLabel best = PhysicsLabel::Supported;
      for (std::size_t ci = contacts_begin; ci < ds.contacts.size(); ++ci) {
        const auto& c = ds.contacts[ci];
        bool hit = c.source == ContactSource::InWindow
                       ? (c.t_s < t1 && c.t_e > t0)
                       : (c.t_s >= t1 && c.t_s < t1 + kPlannerHorizon);
        if (!hit) continue;
        PhysicsLabel cat = category_of(c.region);
        if (int(cat) > int(best)) best = cat;
      }
      planted_traj[w] = best;
    }

    // Features.
    auto m_traj = random_unit(rng, F);
    for (int w = 0; w < W; ++w) {
      const PhysicsLabel y = planted_traj[w];
      std::vector<double> x(F, 0.0);
      axpy(x, traj_sig, m_traj);
      double phase = W > 1 ? (double(w) / double(W - 1) - 0.5) * 0.6 : 0.0;
      axpy(x, phase, g_phase);
      switch (y) {
        case PhysicsLabel::Supported:
          axpy(x, 0.35 * s, g_supported);
          break;
        case PhysicsLabel::Trunk:
          axpy(x, s, g_trunk);
          axpy(x, 0.5 * s, g_cue);
          break;
        case PhysicsLabel::Head:
          axpy(x, s, g_head);
          axpy(x, 0.5 * s, g_cue);
          break;
      }
      if (fall && plan.impact_window >= 0 && w >= plan.impact_window) axpy(x, 0.5 * s, g_fall);
      if (y == PhysicsLabel::Supported && rng.uniform() < 0.5 * cfg.confuser_strength) {
        // Looks like a trunk event, lacks the protective-response cue and any
        // qualifying descriptor.
        axpy(x, 0.9 * s, g_trunk);
      }
      for (double& v : x) v += noise_sigma * rng.normal();

      char wid[24];
      std::snprintf(wid, sizeof(wid), "%s_w%02d", traj_id.c_str(), w);
      ds.windows.push_back(WindowRecord{wid, traj_id, window_start(w), window_end(w), std::move(x),
                                        fall, std::nullopt});
      out.planted.push_back(y);
    }
  }
  return out;
}

}  // namespace pharl
