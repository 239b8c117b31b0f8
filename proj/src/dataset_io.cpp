#include "pharl/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pharl/errors.hpp"

namespace pharl {

using nlohmann::json;

const char* to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    default:
      return "test";
  }
}

const char* to_string(BodyRegion r) {
  switch (r) {
    case BodyRegion::Head:
      return "Head";
    case BodyRegion::Torso:
      return "Torso";
    case BodyRegion::Hip:
      return "Hip";
    case BodyRegion::Arm:
      return "Arm";
    case BodyRegion::Hand:
      return "Hand";
    case BodyRegion::Leg:
      return "Leg";
    default:
      return "Foot";
  }
}

const char* to_string(PhysicsLabel y) {
  switch (y) {
    case PhysicsLabel::Supported:
      return "Supported";
    case PhysicsLabel::Trunk:
      return "Trunk";
    default:
      return "Head";
  }
}

const char* to_string(ContactSource s) {
  return s == ContactSource::InWindow ? "in_window" : "continuation";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split value: " + s);
}

BodyRegion region_from_string(const std::string& s) {
  if (s == "Head") return BodyRegion::Head;
  if (s == "Torso") return BodyRegion::Torso;
  if (s == "Hip") return BodyRegion::Hip;
  if (s == "Arm") return BodyRegion::Arm;
  if (s == "Hand") return BodyRegion::Hand;
  if (s == "Leg") return BodyRegion::Leg;
  if (s == "Foot") return BodyRegion::Foot;
  throw ValidationError("unknown body region: " + s);
}

PhysicsLabel label_from_string(const std::string& s) {
  if (s == "Supported") return PhysicsLabel::Supported;
  if (s == "Trunk") return PhysicsLabel::Trunk;
  if (s == "Head") return PhysicsLabel::Head;
  throw ValidationError("unknown physics label: " + s);
}

ContactSource source_from_string(const std::string& s) {
  if (s == "in_window") return ContactSource::InWindow;
  if (s == "continuation") return ContactSource::Continuation;
  throw ValidationError("unknown contact source: " + s);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

DatasetIndex build_index(const Dataset& ds) {
  DatasetIndex idx;
  idx.windows_of_traj.resize(ds.trajectories.size());
  idx.contacts_of_traj.resize(ds.trajectories.size());

  for (int i = 0; i < int(ds.trajectories.size()); ++i) {
    const auto& t = ds.trajectories[i];
    if (t.num_frames <= 0)
      throw ValidationError("trajectory " + t.traj_id + ": num_frames must be positive");
    if (!idx.traj_by_id.emplace(t.traj_id, i).second)
      throw ValidationError("duplicate traj_id: " + t.traj_id);
  }

  idx.feature_dim = -1;
  for (int i = 0; i < int(ds.windows.size()); ++i) {
    const auto& w = ds.windows[i];
    if (!idx.window_by_id.emplace(w.window_id, i).second)
      throw ValidationError("duplicate window_id: " + w.window_id);
    auto it = idx.traj_by_id.find(w.traj_id);
    if (it == idx.traj_by_id.end())
      throw ValidationError("window " + w.window_id + " references unknown traj_id: " + w.traj_id);
    const auto& t = ds.trajectories[it->second];
    if (!(0 <= w.t0 && w.t0 < w.t1 && w.t1 <= t.num_frames))
      throw ValidationError("window " + w.window_id + ": interval [" + std::to_string(w.t0) +
                            ", " + std::to_string(w.t1) + ") out of bounds for trajectory with " +
                            std::to_string(t.num_frames) + " frames");
    if (idx.feature_dim < 0) {
      idx.feature_dim = int(w.features.size());
    } else if (int(w.features.size()) != idx.feature_dim) {
      throw ValidationError("window " + w.window_id + ": feature dimension " +
                            std::to_string(w.features.size()) + " does not match dataset dimension " +
                            std::to_string(idx.feature_dim));
    }
    idx.windows_of_traj[it->second].push_back(i);
  }
  if (idx.feature_dim < 0) idx.feature_dim = 0;

  for (int i = 0; i < int(ds.contacts.size()); ++i) {
    const auto& c = ds.contacts[i];
    auto it = idx.traj_by_id.find(c.traj_id);
    if (it == idx.traj_by_id.end())
      throw ValidationError("contact descriptor references unknown traj_id: " + c.traj_id);
    if (c.t_s >= c.t_e)
      throw ValidationError("contact descriptor on " + c.traj_id + ": t_s (" +
                            std::to_string(c.t_s) + ") must be < t_e (" + std::to_string(c.t_e) + ")");
    if (c.impulse < 0.0)
      throw ValidationError("contact descriptor on " + c.traj_id + ": negative impulse");
    idx.contacts_of_traj[it->second].push_back(i);
  }
  return idx;
}

namespace {

json parse_line(const std::filesystem::path& file, int lineno, const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object())
      throw ValidationError("expected a JSON object");
    return j;
  } catch (const std::exception& e) {
    throw ValidationError(file.string() + ":" + std::to_string(lineno) +
                          ": malformed record: " + e.what());
  }
}

template <class Fn>
void for_each_record(const std::filesystem::path& file, Fn fn) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(file, lineno, line);
    try {
      fn(j);
    } catch (const std::exception& e) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const json& require_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field: ") + key);
  return *it;
}

std::string get_string(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field ") + key + " must be a string");
  return v.get<std::string>();
}

int get_int(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number_integer()) throw ValidationError(std::string("field ") + key + " must be an integer");
  return v.get<int>();
}

double get_real(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number()) throw ValidationError(std::string("field ") + key + " must be a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_boolean()) throw ValidationError(std::string("field ") + key + " must be a boolean");
  return v.get<bool>();
}

void write_lines(const std::filesystem::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ComputeError("cannot write " + file.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw ComputeError("write failed for " + file.string());
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw ValidationError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  auto dir = manifest_path.parent_path();

  Dataset ds;
  for_each_record(dir / get_string(m, "trajectories"), [&](const json& j) {
    TrajectoryRecord t;
    t.traj_id = get_string(j, "traj_id");
    t.fall_flag = get_bool(j, "fall_flag");
    t.num_frames = get_int(j, "num_frames");
    t.split = split_from_string(get_string(j, "split"));
    ds.trajectories.push_back(std::move(t));
  });

  for_each_record(dir / get_string(m, "windows"), [&](const json& j) {
    WindowRecord w;
    w.window_id = get_string(j, "window_id");
    w.traj_id = get_string(j, "traj_id");
    w.t0 = get_int(j, "t0");
    w.t1 = get_int(j, "t1");
    const json& f = require_field(j, "features");
    if (!f.is_array()) throw ValidationError("field features must be an array");
    for (const auto& v : f) {
      if (!v.is_number()) throw ValidationError("features entries must be numbers");
      w.features.push_back(v.get<double>());
    }
    w.fall_flag = get_bool(j, "fall_flag");
    if (j.contains("phys_label"))
      w.phys_label = label_from_string(get_string(j, "phys_label"));
    ds.windows.push_back(std::move(w));
  });

  for_each_record(dir / get_string(m, "contacts"), [&](const json& j) {
    ContactDescriptor c;
    c.traj_id = get_string(j, "traj_id");
    c.region = region_from_string(get_string(j, "region"));
    c.t_s = get_int(j, "t_s");
    c.t_e = get_int(j, "t_e");
    c.impulse = get_real(j, "impulse");
    c.source = source_from_string(get_string(j, "source"));
    ds.contacts.push_back(std::move(c));
  });

  DatasetIndex idx = build_index(ds);

  // The manifest's split assignment must agree with the trajectory records.
  const json& splits = require_field(m, "splits");
  for (auto split : {Split::Train, Split::Val, Split::Test}) {
    const json& ids = require_field(splits, to_string(split));
    if (!ids.is_array())
      throw ValidationError(std::string("manifest splits.") + to_string(split) + " must be an array");
    for (const auto& idj : ids) {
      std::string id = idj.get<std::string>();
      auto it = idx.traj_by_id.find(id);
      if (it == idx.traj_by_id.end())
        throw ValidationError("manifest split lists unknown traj_id: " + id);
      if (ds.trajectories[it->second].split != split)
        throw ValidationError("manifest split assignment disagrees with trajectory record for " + id);
    }
  }
  std::size_t listed = splits["train"].size() + splits["val"].size() + splits["test"].size();
  if (listed != ds.trajectories.size())
    throw ValidationError("manifest splits cover " + std::to_string(listed) + " trajectories, dataset has " +
                          std::to_string(ds.trajectories.size()));

  return ds;
}

ManifestPaths write_dataset(const Dataset& ds, const std::filesystem::path& dir,
                            const std::string& windows_filename) {
  build_index(ds);  // refuse to write anything that violates an invariant

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  std::vector<std::string> lines;
  lines.reserve(ds.trajectories.size());
  for (const auto& t : ds.trajectories) {
    json j{{"traj_id", t.traj_id},
           {"fall_flag", t.fall_flag},
           {"num_frames", t.num_frames},
           {"split", to_string(t.split)}};
    lines.push_back(j.dump());
  }
  write_lines(dir / "trajectories.jsonl", lines);

  lines.clear();
  for (const auto& w : ds.windows) {
    json j{{"window_id", w.window_id}, {"traj_id", w.traj_id}, {"t0", w.t0},
           {"t1", w.t1},               {"features", w.features}, {"fall_flag", w.fall_flag}};
    if (w.phys_label) j["phys_label"] = to_string(*w.phys_label);
    lines.push_back(j.dump());
  }
  write_lines(dir / windows_filename, lines);

  lines.clear();
  for (const auto& c : ds.contacts) {
    json j{{"traj_id", c.traj_id}, {"region", to_string(c.region)}, {"t_s", c.t_s},
           {"t_e", c.t_e},         {"impulse", c.impulse},          {"source", to_string(c.source)}};
    lines.push_back(j.dump());
  }
  write_lines(dir / "contacts.jsonl", lines);

  json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (const auto& t : ds.trajectories) splits[to_string(t.split)].push_back(t.traj_id);
  json manifest{{"format_version", 1},
                {"trajectories", "trajectories.jsonl"},
                {"windows", windows_filename},
                {"contacts", "contacts.jsonl"},
                {"splits", splits}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw ComputeError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';

  return ManifestPaths{dir / "manifest.json", dir / "trajectories.jsonl",
                       dir / windows_filename, dir / "contacts.jsonl"};
}

}  // namespace pharl
