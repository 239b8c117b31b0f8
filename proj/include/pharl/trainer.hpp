#pragma once

#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "pharl/encoder.hpp"
#include "pharl/loss.hpp"
#include "pharl/types.hpp"

namespace pharl {

// FIFO store of recent embeddings with the metadata relation building needs.
// Entries are detached snapshots; nothing ever backpropagates into them.
struct BankEntry {
  std::vector<double> z;
  std::string window_id;
  std::string traj_id;
  PhysicsLabel label = PhysicsLabel::Supported;
};

class MemoryBank {
 public:
  explicit MemoryBank(int capacity) : capacity_(capacity) {}

  void push(BankEntry entry) {
    if (capacity_ <= 0) return;
    entries_.push_back(std::move(entry));
    if (int(entries_.size()) > capacity_) entries_.pop_front();
  }

  int size() const { return int(entries_.size()); }
  int capacity() const { return capacity_; }
  const BankEntry& entry(int i) const { return entries_[i]; }  // oldest first

  std::vector<BankEntry> snapshot() const { return {entries_.begin(), entries_.end()}; }
  void restore(std::vector<BankEntry> entries) {
    entries_.assign(entries.begin(), entries.end());
    while (int(entries_.size()) > capacity_) entries_.pop_front();
  }

 private:
  int capacity_;
  std::deque<BankEntry> entries_;
};

enum class Variant { Pharl, Vanilla };

Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 7;
  int bank_capacity = 512;
  int warmup_epochs = 10;
  int hidden_dim = 64;
  int embed_dim = 32;
  int quota_head = 2;   // stratified sampling quotas, pharl only
  int quota_trunk = 2;
  bool exact_class_attraction = true;  // false = binary-grouping ablation
  LossConfig loss;                     // loss.lambda_phys is the post-warmup maximum
  Variant variant = Variant::Pharl;

  void validate() const;

  // Warmup ramp for the attraction weight.
  double effective_lambda_phys(int epoch) const;
};

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
  int epoch = -1;          // last completed epoch
  double val_loss = 0.0;
  std::vector<BankEntry> bank;
};

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochStats {
  int epoch = 0;
  double train_motion = 0.0;
  double train_physics = 0.0;
  double train_var = 0.0;
  double train_total = 0.0;
  double val_total = 0.0;
  double effective_lambda_phys = 0.0;
};

struct TrainResult {
  Checkpoint best;     // minimum validation loss (earliest epoch on ties)
  Checkpoint final_;   // last epoch
  std::vector<EpochStats> history;
};

// Trains the encoder on the train split, tracking validation loss per epoch.
// All randomness flows from config.seed through named substreams keyed by
// epoch, so training resumed from a checkpoint replays the identical stream.
TrainResult train(const Dataset& labeled, const TrainConfig& config,
                  const Checkpoint* resume = nullptr);

}  // namespace pharl
