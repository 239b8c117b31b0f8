#include "pharl/stages.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "pharl/dataset_io.hpp"
#include "pharl/errors.hpp"
#include "pharl/version.hpp"

namespace pharl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Maps one config section onto a struct, tracking which keys were consumed so
// that typos and unknown keys fail loudly with their full path.
class Section {
 public:
  Section(const json* j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {}

  template <class T>
  void get(const char* key, T& out) {
    if (!j_) return;
    auto it = j_->find(key);
    if (it == j_->end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ValidationError("config key " + prefix_ + key + " has the wrong type");
    }
  }

  const json* sub(const char* key) {
    if (!j_) return nullptr;
    auto it = j_->find(key);
    if (it == j_->end()) return nullptr;
    seen_.insert(key);
    if (!it->is_object()) throw ValidationError("config key " + prefix_ + key + " must be an object");
    return &*it;
  }

  void finish() {
    if (!j_) return;
    for (const auto& [key, value] : j_->items()) {
      if (!seen_.count(key)) throw ValidationError("unknown config key: " + prefix_ + key);
    }
  }

 private:
  const json* j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

PipelineConfig from_json(const json& root, const std::string& origin) {
  if (!root.is_object()) throw ValidationError(origin + ": config must be a JSON object");
  PipelineConfig cfg;

  std::set<std::string> known = {"synth", "label", "train", "eval"};
  for (const auto& [key, value] : root.items()) {
    if (!known.count(key)) throw ValidationError("unknown config key: " + key);
  }

  {
    auto it = root.find("synth");
    Section s(it != root.end() ? &*it : nullptr, "synth.");
    s.get("num_trajectories", cfg.synth.num_trajectories);
    s.get("frames_per_trajectory", cfg.synth.frames_per_trajectory);
    s.get("window_len", cfg.synth.window_len);
    s.get("window_stride", cfg.synth.window_stride);
    s.get("feature_dim", cfg.synth.feature_dim);
    std::vector<double> mix = {cfg.synth.mix_supported, cfg.synth.mix_trunk, cfg.synth.mix_head};
    s.get("class_mix", mix);
    if (mix.size() != 3) throw ValidationError("synth.class_mix must have 3 entries");
    cfg.synth.mix_supported = mix[0];
    cfg.synth.mix_trunk = mix[1];
    cfg.synth.mix_head = mix[2];
    s.get("signal_strength", cfg.synth.signal_strength);
    s.get("confuser_strength", cfg.synth.confuser_strength);
    s.get("train_fraction", cfg.synth.train_fraction);
    s.get("val_fraction", cfg.synth.val_fraction);
    s.get("seed", cfg.synth.seed);
    s.finish();
  }
  {
    auto it = root.find("label");
    Section s(it != root.end() ? &*it : nullptr, "label.");
    s.get("min_impulse", cfg.label.min_impulse);
    s.get("use_window_source", cfg.label.use_window_source);
    s.get("use_continuation_source", cfg.label.use_continuation_source);
    s.get("continuation_horizon", cfg.label.continuation_horizon);
    s.finish();
  }
  {
    auto it = root.find("train");
    Section s(it != root.end() ? &*it : nullptr, "train.");
    s.get("epochs", cfg.train.epochs);
    s.get("learning_rate", cfg.train.learning_rate);
    s.get("batch_size", cfg.train.batch_size);
    s.get("seed", cfg.train.seed);
    s.get("bank_capacity", cfg.train.bank_capacity);
    s.get("warmup_epochs", cfg.train.warmup_epochs);
    s.get("hidden_dim", cfg.train.hidden_dim);
    s.get("embed_dim", cfg.train.embed_dim);
    s.get("quota_head", cfg.train.quota_head);
    s.get("quota_trunk", cfg.train.quota_trunk);
    s.get("exact_class_attraction", cfg.train.exact_class_attraction);
    std::string variant = to_string(cfg.train.variant);
    s.get("variant", variant);
    cfg.train.variant = variant_from_string(variant);
    Section l(s.sub("loss"), "train.loss.");
    l.get("tau", cfg.train.loss.tau);
    l.get("tau_p", cfg.train.loss.tau_p);
    l.get("lambda_phys", cfg.train.loss.lambda_phys);
    l.get("lambda_var", cfg.train.loss.lambda_var);
    l.get("var_gamma", cfg.train.loss.var_gamma);
    l.get("var_eps", cfg.train.loss.var_eps);
    l.get("use_masking", cfg.train.loss.use_masking);
    l.finish();
    s.finish();
  }
  {
    auto it = root.find("eval");
    Section s(it != root.end() ? &*it : nullptr, "eval.");
    std::string split = to_string(cfg.eval.split);
    s.get("split", split);
    cfg.eval.split = split_from_string(split);
    s.get("k_neighbors", cfg.eval.k_neighbors);
    s.get("poa_pair_cap", cfg.eval.poa_pair_cap);
    s.get("probe_l2", cfg.eval.probe.l2);
    s.get("probe_steps", cfg.eval.probe.steps);
    s.get("probe_lr", cfg.eval.probe.learning_rate);
    s.get("seed", cfg.eval.seed);
    s.finish();
  }
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  return json{
      {"synth",
       {{"num_trajectories", cfg.synth.num_trajectories},
        {"frames_per_trajectory", cfg.synth.frames_per_trajectory},
        {"window_len", cfg.synth.window_len},
        {"window_stride", cfg.synth.window_stride},
        {"feature_dim", cfg.synth.feature_dim},
        {"class_mix", {cfg.synth.mix_supported, cfg.synth.mix_trunk, cfg.synth.mix_head}},
        {"signal_strength", cfg.synth.signal_strength},
        {"confuser_strength", cfg.synth.confuser_strength},
        {"train_fraction", cfg.synth.train_fraction},
        {"val_fraction", cfg.synth.val_fraction},
        {"seed", cfg.synth.seed}}},
      {"label",
       {{"min_impulse", cfg.label.min_impulse},
        {"use_window_source", cfg.label.use_window_source},
        {"use_continuation_source", cfg.label.use_continuation_source},
        {"continuation_horizon", cfg.label.continuation_horizon}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"seed", cfg.train.seed},
        {"bank_capacity", cfg.train.bank_capacity},
        {"warmup_epochs", cfg.train.warmup_epochs},
        {"hidden_dim", cfg.train.hidden_dim},
        {"embed_dim", cfg.train.embed_dim},
        {"quota_head", cfg.train.quota_head},
        {"quota_trunk", cfg.train.quota_trunk},
        {"exact_class_attraction", cfg.train.exact_class_attraction},
        {"variant", to_string(cfg.train.variant)},
        {"loss",
         {{"tau", cfg.train.loss.tau},
          {"tau_p", cfg.train.loss.tau_p},
          {"lambda_phys", cfg.train.loss.lambda_phys},
          {"lambda_var", cfg.train.loss.lambda_var},
          {"var_gamma", cfg.train.loss.var_gamma},
          {"var_eps", cfg.train.loss.var_eps},
          {"use_masking", cfg.train.loss.use_masking}}}}},
      {"eval",
       {{"split", to_string(cfg.eval.split)},
        {"k_neighbors", cfg.eval.k_neighbors},
        {"poa_pair_cap", cfg.eval.poa_pair_cap},
        {"probe_l2", cfg.eval.probe.l2},
        {"probe_steps", cfg.eval.probe.steps},
        {"probe_lr", cfg.eval.probe.learning_rate},
        {"seed", cfg.eval.seed}}}};
}

void apply_override(json& root, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override must look like section.key=value, got: " + spec);
  std::string path = spec.substr(0, eq);
  std::string value = spec.substr(eq + 1);

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    auto dotpos = path.find('.', start);
    std::string part = path.substr(start, dotpos == std::string::npos ? std::string::npos
                                                                      : dotpos - start);
    if (part.empty()) throw ValidationError("override has an empty path segment: " + spec);
    if (dotpos == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const std::exception&) {
        parsed = value;  // unquoted strings pass through
      }
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null())
      throw ValidationError("override path crosses a non-object key: " + path);
    start = dotpos + 1;
  }
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputeError("cannot write " + path.string());
  out << text;
  if (!out) throw ComputeError("write failed for " + path.string());
}

void write_run_manifest(const fs::path& out_dir, const std::string& stage,
                        const PipelineConfig& cfg, const std::vector<fs::path>& inputs,
                        const std::vector<std::string>& outputs) {
  json in = json::array();
  for (const auto& p : inputs)
    in.push_back(json{{"path", p.string()}, {"fnv1a64", fnv1a_file_digest(p)}});
  json j{{"tool", kToolName},    {"version", kToolVersion},     {"stage", stage},
         {"config", config_to_json(cfg)}, {"inputs", in},      {"outputs", outputs},
         {"written_utc", utc_now()}};
  write_text(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

std::string label_key(PhysicsLabel y) { return to_string(y); }

json report_to_json(const MetricsReport& r) {
  json cat = json::object(), diag = json::object(), skipped = json::object();
  for (const auto& [y, v] : r.category_mean_projection) cat[label_key(y)] = v;
  for (const auto& [y, v] : r.neighborhood_diagonal) diag[label_key(y)] = v;
  for (const auto& [y, v] : r.neighborhood_skipped) skipped[label_key(y)] = v;
  return json{{"spearman_rho", r.spearman_rho},
              {"poa_macro", r.poa_macro},
              {"contact_ap", r.contact_ap},
              {"contact_auc", r.contact_auc},
              {"fall_auc", r.fall_auc},
              {"pcr", r.pcr},
              {"kendall_tau", r.kendall_tau},
              {"category_mean_projection", cat},
              {"neighborhood_diagonal", diag},
              {"neighborhood_skipped_queries", skipped},
              {"pcr_degenerate", r.pcr_degenerate}};
}

}  // namespace

std::string fnv1a_file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string() + " for digest");
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)h);
  return hex;
}

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig parse_config_json(const std::string& text,
                                 const std::vector<std::string>& overrides,
                                 const std::string& origin) {
  json root;
  try {
    root = text.empty() ? json::object() : json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(origin + ": malformed config: " + e.what());
  }
  for (const auto& o : overrides) apply_override(root, o);
  return from_json(root, origin);
}

PipelineConfig load_config(const fs::path& config_path,
                           const std::vector<std::string>& overrides) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot open config " + config_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_json(text, overrides, config_path.empty() ? "<defaults>" : config_path.string());
}

fs::path stage_synth(const PipelineConfig& cfg, const fs::path& out_dir) {
  SynthResult result = generate(cfg.synth);
  fs::create_directories(out_dir);
  ManifestPaths paths = write_dataset(result.dataset, out_dir);

  std::ostringstream planted;
  for (std::size_t i = 0; i < result.dataset.windows.size(); ++i) {
    json j{{"window_id", result.dataset.windows[i].window_id},
           {"phys_label", to_string(result.planted[i])}};
    planted << j.dump() << '\n';
  }
  write_text(out_dir / "planted.jsonl", planted.str());

  write_run_manifest(out_dir, "synth", cfg, {},
                     {"trajectories.jsonl", "windows.jsonl", "contacts.jsonl", "manifest.json",
                      "planted.jsonl"});
  return paths.manifest;
}

fs::path stage_label(const PipelineConfig& cfg, const fs::path& manifest,
                     const fs::path& out_dir) {
  Dataset ds = load_dataset(manifest);
  Dataset labeled = label_dataset(ds, cfg.label);
  fs::create_directories(out_dir);
  ManifestPaths paths = write_dataset(labeled, out_dir, "windows.labeled.jsonl");

  // Class counts per split.
  DatasetIndex idx = build_index(labeled);
  std::map<std::string, std::map<std::string, int>> counts;
  for (auto split : {Split::Train, Split::Val, Split::Test}) {
    for (auto y : {PhysicsLabel::Supported, PhysicsLabel::Trunk, PhysicsLabel::Head})
      counts[to_string(split)][to_string(y)] = 0;
  }
  for (const auto& w : labeled.windows) {
    Split s = labeled.trajectories[idx.traj_by_id.at(w.traj_id)].split;
    counts[to_string(s)][to_string(*w.phys_label)] += 1;
  }
  write_text(out_dir / "label_summary.json", json(counts).dump(2) + "\n");

  write_run_manifest(out_dir, "label", cfg, {manifest},
                     {"trajectories.jsonl", "windows.labeled.jsonl", "contacts.jsonl",
                      "manifest.json", "label_summary.json"});
  return paths.manifest;
}

void stage_graph(const PipelineConfig& cfg, const fs::path& manifest,
                 const std::vector<std::string>& window_ids, Split split, int batch_index,
                 std::ostream& out) {
  Dataset ds = load_dataset(manifest);
  DatasetIndex idx = build_index(ds);

  std::vector<int> batch;
  if (!window_ids.empty()) {
    for (const auto& id : window_ids) {
      auto it = idx.window_by_id.find(id);
      if (it == idx.window_by_id.end()) throw ValidationError("unknown window_id: " + id);
      batch.push_back(it->second);
    }
  } else {
    std::vector<int> split_idx;
    std::vector<PhysicsLabel> labels(ds.windows.size(), PhysicsLabel::Supported);
    for (int i = 0; i < int(ds.windows.size()); ++i) {
      if (!ds.windows[i].phys_label)
        throw ValidationError("window " + ds.windows[i].window_id + " is unlabeled");
      labels[i] = *ds.windows[i].phys_label;
      if (ds.trajectories[idx.traj_by_id.at(ds.windows[i].traj_id)].split == split)
        split_idx.push_back(i);
    }
    BatchQuota quota{cfg.train.quota_head, cfg.train.quota_trunk};
    auto batches = stratified_batches(labels, split_idx, cfg.train.batch_size, quota,
                                      Rng::substream(cfg.train.seed, "epoch-batches", 0).raw());
    if (batch_index < 0 || batch_index >= int(batches.size()))
      throw ValidationError("batch index " + std::to_string(batch_index) + " out of range (" +
                            std::to_string(batches.size()) + " batches)");
    batch = batches[batch_index];
  }

  auto pool = build_pool(ds, idx, batch);
  auto rels = build_relations(pool, int(pool.size()),
                              RelationOptions{cfg.train.exact_class_attraction});

  auto names = [&](const std::vector<int>& ids) {
    std::vector<std::string> v;
    v.reserve(ids.size());
    for (int k : ids) v.push_back(pool[k].id);
    std::sort(v.begin(), v.end());
    return v;
  };
  for (const auto& r : rels) {
    std::vector<int> candidates;
    for (int k = 0; k < int(pool.size()); ++k)
      if (k != r.anchor) candidates.push_back(k);
    json j{{"anchor", pool[r.anchor].id},
           {"candidates", names(candidates)},
           {"traj_positives", names(r.traj_positives)},
           {"mask", names(r.mask)},
           {"phys_positives", names(r.phys_positives)},
           {"cross_traj_candidates", names(r.cross_traj)},
           {"skip_motion", r.skip_motion},
           {"skip_physics", r.skip_physics}};
    out << j.dump() << '\n';
  }
}

namespace {

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream os;
  os << "epoch,train_motion,train_physics,train_var,train_total,val_total,effective_lambda_phys\n";
  for (const auto& e : history) {
    os << e.epoch << ',' << format_double(e.train_motion) << ',' << format_double(e.train_physics)
       << ',' << format_double(e.train_var) << ',' << format_double(e.train_total) << ','
       << format_double(e.val_total) << ',' << format_double(e.effective_lambda_phys) << '\n';
  }
  return os.str();
}

}  // namespace

TrainArtifacts stage_train(const PipelineConfig& cfg, const fs::path& manifest,
                           const fs::path& out_dir) {
  Dataset labeled = load_dataset(manifest);
  TrainResult result = train(labeled, cfg.train);
  fs::create_directories(out_dir);

  TrainArtifacts art;
  art.best_checkpoint = out_dir / "checkpoint_best.json";
  art.final_checkpoint = out_dir / "checkpoint_final.json";
  art.history = out_dir / "loss_history.csv";
  save_checkpoint(result.best, art.best_checkpoint);
  save_checkpoint(result.final_, art.final_checkpoint);
  write_text(art.history, history_csv(result.history));

  write_run_manifest(out_dir, "train", cfg, {manifest},
                     {"checkpoint_best.json", "checkpoint_final.json", "loss_history.csv"});
  return art;
}

bool stage_eval(const PipelineConfig& cfg, const fs::path& manifest,
                const fs::path& checkpoint_path, const fs::path& out_dir, bool run_asserts) {
  Dataset labeled = load_dataset(manifest);
  Checkpoint cp = load_checkpoint(checkpoint_path);
  ReportBundle bundle = full_report(cp.params, labeled, cfg.eval);
  fs::create_directories(out_dir);

  write_text(out_dir / "metrics.json", report_to_json(bundle.report).dump(2) + "\n");

  std::ostringstream proj;
  proj << "window_id,label,score\n";
  for (const auto& row : bundle.projections)
    proj << row.window_id << ',' << to_string(row.label) << ',' << format_double(row.score) << '\n';
  write_text(out_dir / "projections.csv", proj.str());

  std::ostringstream nb;
  nb << "class,diagonal_rate,skipped_queries\n";
  for (const auto& [y, v] : bundle.report.neighborhood_diagonal) {
    nb << to_string(y) << ',' << format_double(v) << ','
       << bundle.report.neighborhood_skipped.at(y) << '\n';
  }
  write_text(out_dir / "neighborhood.csv", nb.str());

  write_run_manifest(out_dir, "eval", cfg, {manifest, checkpoint_path},
                     {"metrics.json", "projections.csv", "neighborhood.csv"});

  if (!run_asserts) return true;

  // Assertions beyond the range checks already enforced by full_report: the
  // train-split axis ordering that Eq.-style centroid construction forces.
  bool ok = true;
  {
    DatasetIndex idx = build_index(labeled);
    std::vector<int> train_idx;
    for (int i = 0; i < int(labeled.windows.size()); ++i)
      if (labeled.trajectories[idx.traj_by_id.at(labeled.windows[i].traj_id)].split == Split::Train)
        train_idx.push_back(i);
    Matrix feats(int(train_idx.size()), idx.feature_dim);
    std::vector<PhysicsLabel> train_labels;
    for (int r = 0; r < feats.rows; ++r) {
      const auto& w = labeled.windows[train_idx[r]];
      std::copy(w.features.begin(), w.features.end(), feats.row(r));
      train_labels.push_back(*w.phys_label);
    }
    Matrix train_z = embed(cp.params, feats);
    SeverityAxis axis = severity_axis(train_z, train_labels);
    auto scores = project(train_z, axis);
    double head_sum = 0.0, sup_sum = 0.0;
    int head_n = 0, sup_n = 0;
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
      if (train_labels[i] == PhysicsLabel::Head) {
        head_sum += scores[i];
        ++head_n;
      } else if (train_labels[i] == PhysicsLabel::Supported) {
        sup_sum += scores[i];
        ++sup_n;
      }
    }
    if (!(head_sum / head_n > sup_sum / sup_n)) {
      std::cerr << "assert failed: train-split Head mean projection does not exceed Supported\n";
      ok = false;
    }
  }
  return ok;
}

void render_report(const MetricsReport& r, std::ostream& out) {
  auto line = [&](const char* name, double v) {
    out << "  " << std::left << std::setw(22) << name << format_double(v) << '\n';
  };
  out << "metric                  value\n";
  out << "-----------------------------\n";
  line("spearman_rho", r.spearman_rho);
  line("poa_macro", r.poa_macro);
  line("contact_ap", r.contact_ap);
  line("contact_auc", r.contact_auc);
  line("fall_auc", r.fall_auc);
  line("pcr", r.pcr);
  line("kendall_tau", r.kendall_tau);
  out << "category mean projection:\n";
  for (const auto& [y, v] : r.category_mean_projection)
    out << "  " << std::left << std::setw(22) << to_string(y) << format_double(v) << '\n';
  out << "neighborhood diagonal (skipped queries):\n";
  for (const auto& [y, v] : r.neighborhood_diagonal) {
    out << "  " << std::left << std::setw(22) << to_string(y) << format_double(v) << " ("
        << r.neighborhood_skipped.at(y) << ")\n";
  }
}

void stage_report(const fs::path& metrics_json, std::ostream& out) {
  std::ifstream in(metrics_json);
  if (!in) throw ValidationError("cannot open " + metrics_json.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("malformed metrics file: " + std::string(e.what()));
  }
  MetricsReport r;
  r.spearman_rho = j.at("spearman_rho").get<double>();
  r.poa_macro = j.at("poa_macro").get<double>();
  r.contact_ap = j.at("contact_ap").get<double>();
  r.contact_auc = j.at("contact_auc").get<double>();
  r.fall_auc = j.at("fall_auc").get<double>();
  r.pcr = j.at("pcr").get<double>();
  r.kendall_tau = j.at("kendall_tau").get<double>();
  for (const auto& [k, v] : j.at("category_mean_projection").items())
    r.category_mean_projection[label_from_string(k)] = v.get<double>();
  for (const auto& [k, v] : j.at("neighborhood_diagonal").items())
    r.neighborhood_diagonal[label_from_string(k)] = v.get<double>();
  for (const auto& [k, v] : j.at("neighborhood_skipped_queries").items())
    r.neighborhood_skipped[label_from_string(k)] = v.get<int>();
  render_report(r, out);
}

void stage_ablate(const PipelineConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  SynthResult synth = generate(cfg.synth);
  write_dataset(synth.dataset, out_dir / "data");

  // Canonical labels: full pipeline with the configured label settings.
  Dataset canonical = label_dataset(synth.dataset, cfg.label);

  struct Row {
    std::string name;
    bool denoising;
    bool multi_class;
    bool window_source;
    bool continuation_source;
    bool vanilla;
  };
  const std::vector<Row> rows = {
      {"no_denoising", false, true, true, true, false},
      {"binary_grouping", true, false, true, true, false},
      {"continuation_only", true, true, false, true, false},
      {"window_only", true, true, true, false, false},
      {"full", true, true, true, true, false},
      {"vanilla", true, true, true, true, true},
  };

  json summary = json::array();
  std::ostringstream csv;
  csv << "config,denoising,multi_class,window,continuation,spearman_rho,poa_macro,contact_ap,"
         "contact_auc,fall_auc,pcr,kendall_tau\n";

  for (const Row& row : rows) {
    LabelingConfig label_cfg = cfg.label;
    label_cfg.use_window_source = row.window_source;
    label_cfg.use_continuation_source = row.continuation_source;
    Dataset supervision = row.denoising ? label_dataset(synth.dataset, label_cfg)
                                        : label_dataset_broadcast(synth.dataset, label_cfg);

    TrainConfig train_cfg = cfg.train;
    train_cfg.exact_class_attraction = row.multi_class;
    train_cfg.variant = row.vanilla ? Variant::Vanilla : Variant::Pharl;

    TrainResult result = train(supervision, train_cfg);
    fs::path row_dir = out_dir / row.name;
    fs::create_directories(row_dir);
    save_checkpoint(result.best, row_dir / "checkpoint_best.json");
    save_checkpoint(result.final_, row_dir / "checkpoint_final.json");
    write_text(row_dir / "loss_history.csv", history_csv(result.history));

    ReportBundle bundle = full_report(result.best.params, canonical, cfg.eval);
    write_text(row_dir / "metrics.json", report_to_json(bundle.report).dump(2) + "\n");

    const MetricsReport& r = bundle.report;
    csv << row.name << ',' << (row.denoising ? 1 : 0) << ',' << (row.multi_class ? 1 : 0) << ','
        << (row.window_source ? 1 : 0) << ',' << (row.continuation_source ? 1 : 0) << ','
        << format_double(r.spearman_rho) << ',' << format_double(r.poa_macro) << ','
        << format_double(r.contact_ap) << ',' << format_double(r.contact_auc) << ','
        << format_double(r.fall_auc) << ',' << format_double(r.pcr) << ','
        << format_double(r.kendall_tau) << '\n';
    json entry = report_to_json(r);
    entry["config"] = row.name;
    summary.push_back(entry);
  }

  write_text(out_dir / "ablation_summary.csv", csv.str());
  write_text(out_dir / "ablation_summary.json", summary.dump(2) + "\n");
  write_run_manifest(out_dir, "ablate", cfg, {},
                     {"ablation_summary.csv", "ablation_summary.json"});
}

}  // namespace pharl
