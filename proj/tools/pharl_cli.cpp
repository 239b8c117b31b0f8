#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "pharl/errors.hpp"
#include "pharl/stages.hpp"
#include "pharl/version.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file with per-stage sections");
  cmd->add_option("--set", opts.overrides,
                  "dotted-path override, e.g. --set train.epochs=50 (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("pharl ") + pharl::kToolVersion +
               " - physics-regularized contrastive pipeline on windowed motion features"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string manifest, out_dir = "out", checkpoint, metrics, ids_arg, split_arg = "train";
  int batch_index = 0;
  bool run_asserts = false;

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  add_common(synth, opts);
  synth->add_option("--out", out_dir, "output directory");

  auto* label = app.add_subcommand("label", "derive window physics labels from contact descriptors");
  add_common(label, opts);
  label->add_option("--manifest", manifest, "dataset manifest")->required();
  label->add_option("--out", out_dir, "output directory");

  auto* graph = app.add_subcommand("graph", "dump contrastive relation sets for one batch");
  add_common(graph, opts);
  graph->add_option("--manifest", manifest, "labeled dataset manifest")->required();
  graph->add_option("--ids", ids_arg, "comma-separated window ids forming the batch");
  graph->add_option("--split", split_arg, "split to sample a batch from (with --batch-index)");
  graph->add_option("--batch-index", batch_index, "which sampled batch to dump");

  auto* train = app.add_subcommand("train", "train the encoder under the composite objective");
  add_common(train, opts);
  train->add_option("--manifest", manifest, "labeled dataset manifest")->required();
  train->add_option("--out", out_dir, "output directory");

  auto* eval = app.add_subcommand("eval", "compute the metrics report for a checkpoint");
  add_common(eval, opts);
  eval->add_option("--manifest", manifest, "labeled dataset manifest")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--out", out_dir, "output directory");
  eval->add_flag("--assert", run_asserts, "verify report invariants; exit 3 on failure");

  auto* report = app.add_subcommand("report", "render a metrics.json as a text table");
  report->add_option("--metrics", metrics, "metrics.json path")->required();

  auto* ablate = app.add_subcommand("ablate", "run the component grid on synthetic data");
  add_common(ablate, opts);
  ablate->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      pharl::stage_report(metrics, std::cout);
      return 0;
    }
    pharl::PipelineConfig cfg = pharl::load_config(opts.config_path, opts.overrides);
    if (synth->parsed()) {
      auto path = pharl::stage_synth(cfg, out_dir);
      std::cout << "wrote " << path.string() << '\n';
    } else if (label->parsed()) {
      auto path = pharl::stage_label(cfg, manifest, out_dir);
      std::cout << "wrote " << path.string() << '\n';
    } else if (graph->parsed()) {
      std::vector<std::string> ids;
      std::string cur;
      for (char c : ids_arg) {
        if (c == ',') {
          if (!cur.empty()) ids.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) ids.push_back(cur);
      pharl::stage_graph(cfg, manifest, ids, pharl::split_from_string(split_arg), batch_index,
                         std::cout);
    } else if (train->parsed()) {
      auto art = pharl::stage_train(cfg, manifest, out_dir);
      std::cout << "wrote " << art.best_checkpoint.string() << '\n'
                << "wrote " << art.final_checkpoint.string() << '\n'
                << "wrote " << art.history.string() << '\n';
    } else if (eval->parsed()) {
      bool ok = pharl::stage_eval(cfg, manifest, checkpoint, out_dir, run_asserts);
      std::cout << "wrote " << (std::filesystem::path(out_dir) / "metrics.json").string() << '\n';
      if (!ok) return 3;
    } else if (ablate->parsed()) {
      pharl::stage_ablate(cfg, out_dir);
      std::cout << "wrote " << (std::filesystem::path(out_dir) / "ablation_summary.csv").string()
                << '\n';
    }
  } catch (const pharl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
