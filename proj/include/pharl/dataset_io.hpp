#pragma once

#include <filesystem>
#include <string>

#include "pharl/types.hpp"

namespace pharl {

// File names inside a dataset directory. The manifest records which windows
// file is current (raw or labeled) plus the trajectory-level split assignment.
struct ManifestPaths {
  std::filesystem::path manifest;
  std::filesystem::path trajectories;
  std::filesystem::path windows;
  std::filesystem::path contacts;
};

// Reads a dataset manifest plus the three record files it names. Malformed
// lines are reported with file name and line number; cross-reference and
// dimension problems are reported with the offending ids.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes trajectories.jsonl, windows file (name configurable so labeled
// datasets live alongside raw ones), contacts.jsonl, and manifest.json into
// `dir`. Validates every record invariant before touching the filesystem.
// Returns the manifest path. load_dataset(write_dataset(x)) == x.
ManifestPaths write_dataset(const Dataset& ds, const std::filesystem::path& dir,
                            const std::string& windows_filename = "windows.jsonl");

// Shortest decimal form that round-trips the exact double. Shared by every
// CSV writer so reruns are byte-identical.
std::string format_double(double v);

}  // namespace pharl
