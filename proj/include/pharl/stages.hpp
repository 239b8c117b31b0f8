#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pharl/labeling.hpp"
#include "pharl/metrics.hpp"
#include "pharl/synth.hpp"
#include "pharl/trainer.hpp"

namespace pharl {

// One config file drives every stage; sections hold the per-stage settings.
struct PipelineConfig {
  SynthConfig synth;
  LabelingConfig label;
  TrainConfig train;
  EvalConfig eval;
};

// Parses the JSON config file (all sections optional, defaults applied) after
// applying dotted-path overrides like "train.loss.tau=0.25". Unknown keys are
// rejected with their full path.
PipelineConfig load_config(const std::filesystem::path& config_path,
                           const std::vector<std::string>& overrides);
PipelineConfig default_config();
PipelineConfig parse_config_json(const std::string& text,
                                 const std::vector<std::string>& overrides,
                                 const std::string& origin);

// Stage runners. Each writes its artifacts plus run_manifest.json into
// out_dir and returns the main output path.
std::filesystem::path stage_synth(const PipelineConfig& cfg,
                                  const std::filesystem::path& out_dir);

std::filesystem::path stage_label(const PipelineConfig& cfg,
                                  const std::filesystem::path& manifest,
                                  const std::filesystem::path& out_dir);

void stage_graph(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                 const std::vector<std::string>& window_ids, Split split, int batch_index,
                 std::ostream& out);

struct TrainArtifacts {
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path history;
};
TrainArtifacts stage_train(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                           const std::filesystem::path& out_dir);

// Returns false when --assert checks fail (CLI exit code 3).
bool stage_eval(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& out_dir, bool run_asserts);

void stage_report(const std::filesystem::path& metrics_json, std::ostream& out);

// Component grid on a self-generated synthetic dataset: the five supervision
// configurations plus the vanilla control, evaluated against the canonical
// labels. Writes one subdirectory per row and a summary table.
void stage_ablate(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

// Reviewer-facing text rendering of a MetricsReport in priority order.
void render_report(const MetricsReport& report, std::ostream& out);

std::string fnv1a_file_digest(const std::filesystem::path& path);

}  // namespace pharl
