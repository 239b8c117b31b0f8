#include "pharl/trainer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "pharl/dataset_io.hpp"
#include "pharl/errors.hpp"

namespace pharl {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "pharl") return Variant::Pharl;
  if (s == "vanilla") return Variant::Vanilla;
  throw ValidationError("unknown train.variant: " + s + " (expected pharl or vanilla)");
}

const char* to_string(Variant v) { return v == Variant::Pharl ? "pharl" : "vanilla"; }

void TrainConfig::validate() const {
  if (epochs <= 0) throw ValidationError("train.epochs must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
  if (batch_size <= 1) throw ValidationError("train.batch_size must be >= 2");
  if (bank_capacity < 0) throw ValidationError("train.bank_capacity must be >= 0");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw ValidationError("train.warmup_epochs must lie in [0, epochs]");
  if (hidden_dim <= 0 || embed_dim <= 0)
    throw ValidationError("train.hidden_dim and train.embed_dim must be positive");
  if (quota_head < 0 || quota_trunk < 0) throw ValidationError("quotas must be >= 0");
  loss.validate();
}

double TrainConfig::effective_lambda_phys(int epoch) const {
  if (variant == Variant::Vanilla) return 0.0;
  if (warmup_epochs == 0) return loss.lambda_phys;
  double ramp = double(epoch) / double(warmup_epochs);
  return loss.lambda_phys * std::min(1.0, ramp);
}

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != std::size_t(m.rows) * m.cols)
    throw ValidationError("checkpoint: matrix payload size mismatch");
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  json bank = json::array();
  for (const auto& e : cp.bank) {
    bank.push_back(json{{"z", e.z},
                        {"window_id", e.window_id},
                        {"traj_id", e.traj_id},
                        {"label", to_string(e.label)}});
  }
  json j{{"format_version", 1},
         {"arch",
          {{"feature_dim", cp.params.cfg.feature_dim},
           {"hidden_dim", cp.params.cfg.hidden_dim},
           {"embed_dim", cp.params.cfg.embed_dim}}},
         {"w1", matrix_to_json(cp.params.w1)},
         {"b1", cp.params.b1},
         {"w2", matrix_to_json(cp.params.w2)},
         {"b2", cp.params.b2},
         {"adam",
          {{"step", cp.adam.step},
           {"m_w1", matrix_to_json(cp.adam.m_w1)},
           {"v_w1", matrix_to_json(cp.adam.v_w1)},
           {"m_w2", matrix_to_json(cp.adam.m_w2)},
           {"v_w2", matrix_to_json(cp.adam.v_w2)},
           {"m_b1", cp.adam.m_b1},
           {"v_b1", cp.adam.v_b1},
           {"m_b2", cp.adam.m_b2},
           {"v_b2", cp.adam.v_b2}}},
         {"epoch", cp.epoch},
         {"val_loss", cp.val_loss},
         {"bank", bank}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputeError("cannot write checkpoint " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw ComputeError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw ValidationError("unsupported checkpoint format_version in " + path.string());

  Checkpoint cp;
  const json& arch = j.at("arch");
  cp.params.cfg.feature_dim = arch.at("feature_dim").get<int>();
  cp.params.cfg.hidden_dim = arch.at("hidden_dim").get<int>();
  cp.params.cfg.embed_dim = arch.at("embed_dim").get<int>();
  cp.params.w1 = matrix_from_json(j.at("w1"));
  cp.params.b1 = j.at("b1").get<std::vector<double>>();
  cp.params.w2 = matrix_from_json(j.at("w2"));
  cp.params.b2 = j.at("b2").get<std::vector<double>>();
  const json& a = j.at("adam");
  cp.adam.step = a.at("step").get<long>();
  cp.adam.m_w1 = matrix_from_json(a.at("m_w1"));
  cp.adam.v_w1 = matrix_from_json(a.at("v_w1"));
  cp.adam.m_w2 = matrix_from_json(a.at("m_w2"));
  cp.adam.v_w2 = matrix_from_json(a.at("v_w2"));
  cp.adam.m_b1 = a.at("m_b1").get<std::vector<double>>();
  cp.adam.v_b1 = a.at("v_b1").get<std::vector<double>>();
  cp.adam.m_b2 = a.at("m_b2").get<std::vector<double>>();
  cp.adam.v_b2 = a.at("v_b2").get<std::vector<double>>();
  cp.epoch = j.at("epoch").get<int>();
  cp.val_loss = j.at("val_loss").get<double>();
  for (const auto& e : j.at("bank")) {
    BankEntry be;
    be.z = e.at("z").get<std::vector<double>>();
    be.window_id = e.at("window_id").get<std::string>();
    be.traj_id = e.at("traj_id").get<std::string>();
    be.label = label_from_string(e.at("label").get<std::string>());
    cp.bank.push_back(std::move(be));
  }
  return cp;
}

namespace {

Matrix gather_features(const Dataset& ds, std::span<const int> window_indices, int dim) {
  Matrix m(int(window_indices.size()), dim);
  for (int r = 0; r < m.rows; ++r) {
    const auto& f = ds.windows[window_indices[r]].features;
    std::copy(f.begin(), f.end(), m.row(r));
  }
  return m;
}

// Pool = batch entries followed by bank entries (oldest first), plus the
// stacked embedding matrix to match.
struct PoolData {
  std::vector<PoolEntry> entries;
  Matrix z;
};

PoolData assemble_pool(const Dataset& ds, const DatasetIndex& idx,
                       std::span<const int> batch_windows, const Matrix& batch_z,
                       const MemoryBank& bank) {
  PoolData pool;
  pool.entries = build_pool(ds, idx, batch_windows);
  pool.z = Matrix(int(batch_windows.size()) + bank.size(), batch_z.cols);
  for (int r = 0; r < batch_z.rows; ++r)
    std::copy(batch_z.row(r), batch_z.row(r) + batch_z.cols, pool.z.row(r));
  for (int b = 0; b < bank.size(); ++b) {
    const BankEntry& e = bank.entry(b);
    pool.entries.push_back(
        PoolEntry{e.window_id, idx.traj_by_id.at(e.traj_id), e.label, true});
    std::copy(e.z.begin(), e.z.end(), pool.z.row(batch_z.rows + b));
  }
  return pool;
}

// Sequential fixed-order batches for validation; a trailing singleton is
// folded into its predecessor so every batch supports the variance term.
std::vector<std::vector<int>> sequential_chunks(std::span<const int> indices, int batch_size) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < indices.size(); i += batch_size) {
    std::size_t end = std::min(indices.size(), i + batch_size);
    out.emplace_back(indices.begin() + i, indices.begin() + end);
  }
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& labeled, const TrainConfig& config, const Checkpoint* resume) {
  config.validate();
  DatasetIndex idx = build_index(labeled);

  std::vector<int> train_idx, val_idx;
  std::vector<PhysicsLabel> labels(labeled.windows.size(), PhysicsLabel::Supported);
  for (int i = 0; i < int(labeled.windows.size()); ++i) {
    const auto& w = labeled.windows[i];
    if (!w.phys_label)
      throw ValidationError("window " + w.window_id + " is unlabeled; run the label stage first");
    labels[i] = *w.phys_label;
    Split s = labeled.trajectories[idx.traj_by_id.at(w.traj_id)].split;
    if (s == Split::Train) train_idx.push_back(i);
    if (s == Split::Val) val_idx.push_back(i);
  }
  if (train_idx.size() < 2) throw ValidationError("train split needs at least 2 windows");
  if (val_idx.size() < 2) throw ValidationError("val split needs at least 2 windows");

  EncoderConfig enc_cfg{idx.feature_dim, config.hidden_dim, config.embed_dim};
  RelationOptions rel_opts{config.exact_class_attraction};
  const bool stratified = config.variant == Variant::Pharl;
  BatchQuota quota{stratified ? config.quota_head : 0, stratified ? config.quota_trunk : 0};

  EncoderParams params = [&] {
    if (resume) {
      if (resume->params.cfg.feature_dim != enc_cfg.feature_dim)
        throw ValidationError("resume checkpoint feature_dim does not match dataset");
      return resume->params;
    }
    Rng init_rng = Rng::substream(config.seed, "encoder-init");
    return EncoderParams::init(enc_cfg, init_rng);
  }();
  AdamState adam = resume ? resume->adam : AdamState::zeros(params.cfg);
  MemoryBank bank(config.bank_capacity);
  if (resume) bank.restore(resume->bank);
  const int first_epoch = resume ? resume->epoch + 1 : 0;

  // Validation always scores the target objective: full attraction weight,
  // not the warmup-ramped one, so epochs stay comparable.
  LossConfig val_loss_cfg = config.loss;
  if (config.variant == Variant::Vanilla) {
    val_loss_cfg.lambda_phys = 0.0;
    val_loss_cfg.lambda_var = 0.0;
    val_loss_cfg.use_masking = false;
  }
  auto val_chunks = sequential_chunks(val_idx, config.batch_size);

  TrainResult result;
  bool have_best = false;

  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    LossConfig epoch_loss = val_loss_cfg;
    epoch_loss.lambda_phys =
        config.variant == Variant::Vanilla ? 0.0 : config.effective_lambda_phys(epoch);

    std::uint64_t epoch_seed = Rng::substream(config.seed, "epoch-batches", epoch).raw();
    auto batches = stratified_batches(labels, train_idx, config.batch_size, quota, epoch_seed);

    EpochStats stats;
    stats.epoch = epoch;
    stats.effective_lambda_phys = epoch_loss.lambda_phys;
    int batch_count = 0;

    for (const auto& batch : batches) {
      Matrix feats = gather_features(labeled, batch, idx.feature_dim);
      ForwardResult fwd = forward(params, feats);
      PoolData pool = assemble_pool(labeled, idx, batch, fwd.embeddings, bank);
      auto rels = build_relations(pool.entries, int(batch.size()), rel_opts);
      LossGradient grad = loss_gradient(rels, pool.z, fwd.pre_projection, epoch_loss);

      if (!std::isfinite(grad.value.total))
        throw ComputeError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));

      Matrix d_embeddings(int(batch.size()), params.cfg.embed_dim);
      for (int r = 0; r < d_embeddings.rows; ++r)
        std::copy(grad.d_pool_z.row(r), grad.d_pool_z.row(r) + params.cfg.embed_dim,
                  d_embeddings.row(r));
      ParamGrads pgrads = backward(params, feats, fwd, d_embeddings, grad.d_pre_projection);
      adam_step(params, pgrads, adam, config.learning_rate);

      for (int r = 0; r < int(batch.size()); ++r) {
        const auto& w = labeled.windows[batch[r]];
        bank.push(BankEntry{{fwd.embeddings.row(r), fwd.embeddings.row(r) + params.cfg.embed_dim},
                            w.window_id,
                            w.traj_id,
                            labels[batch[r]]});
      }

      stats.train_motion += grad.value.motion;
      stats.train_physics += grad.value.physics;
      stats.train_var += grad.value.variance;
      stats.train_total += grad.value.total;
      ++batch_count;
    }
    stats.train_motion /= batch_count;
    stats.train_physics /= batch_count;
    stats.train_var /= batch_count;
    stats.train_total /= batch_count;

    double val_total = 0.0;
    for (const auto& chunk : val_chunks) {
      Matrix feats = gather_features(labeled, chunk, idx.feature_dim);
      ForwardResult fwd = forward(params, feats);
      PoolData pool = assemble_pool(labeled, idx, chunk, fwd.embeddings, MemoryBank(0));
      auto rels = build_relations(pool.entries, int(chunk.size()), rel_opts);
      val_total += composite_loss(rels, pool.z, fwd.pre_projection, val_loss_cfg).total;
    }
    val_total /= double(val_chunks.size());
    if (!std::isfinite(val_total))
      throw ComputeError("validation loss non-finite at epoch " + std::to_string(epoch));
    stats.val_total = val_total;
    result.history.push_back(stats);

    Checkpoint cp;
    cp.params = params;
    cp.adam = adam;
    cp.epoch = epoch;
    cp.val_loss = val_total;
    cp.bank = bank.snapshot();
    if (!have_best || val_total < result.best.val_loss) {
      result.best = cp;
      have_best = true;
    }
    result.final_ = std::move(cp);
  }
  return result;
}

}  // namespace pharl
