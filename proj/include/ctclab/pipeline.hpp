// Copyright 2026 The ctclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctclab/banks.hpp"
#include "ctclab/datagen.hpp"
#include "ctclab/losses.hpp"
#include "ctclab/metrics.hpp"
#include "ctclab/mi.hpp"
#include "ctclab/mlp.hpp"

namespace ctclab {

struct StageOptim {
  double lr_init = 5e-2;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 5e-3;
  // Cosine horizon in epochs; 0 means the stage's own epoch count. A larger
  // horizon with fewer trained epochs gives the early-stopped variant.
  std::size_t schedule_epochs = 0;
};

struct TrainConfig {
  std::size_t stage1_epochs = 20;
  std::size_t stage2_epochs = 100;
  std::size_t batch_size = 64;
  StageOptim stage1;
  StageOptim stage2;
  LossConfig loss;
  double bank_momentum = 0.5;
  std::size_t eval_every = 1;
  std::size_t mi_every = 0;         // 0 disables in-run MI estimation
  std::size_t checkpoint_every = 0; // 0: stage boundary and final epoch only
  std::uint64_t seed = 0;
  double augment_strength = 0.0;
  std::vector<std::size_t> hidden_dims = {128, 64};
  std::size_t rep_dim = 32;
  MineConfig mine;
  ProbeConfig probe;

  TrainConfig() {
    // Desk-scale schedule: stage 1 keeps a 1e-2 lr floor so the compression
    // phase stays active through the run; stage 2 restarts at 5e-3.
    stage1.lr_min = 1e-2;
    stage2.lr_init = 5e-3;
  }

  void validate() const;
};

struct NamedDatasetPair {
  std::string name;
  DatasetPair data;
};

struct RunData {
  DatasetPair source;
  std::vector<NamedDatasetPair> targets;
};

struct EpochRecord {
  std::size_t epoch = 0;
  int stage = 1;
  double train_loss = 0.0;  // source train cross-entropy, nats
  double test_loss = 0.0;   // source test cross-entropy, nats
  double r_at_1 = 0.0;
  double nmi_value = 0.0;
  std::vector<double> probe_acc;   // one per target, config order
  bool has_mi = false;
  std::vector<MiEstimate> ixt;     // one per dataset: source, then targets
  std::vector<MiEstimate> ity;
};

struct Trajectory {
  std::uint64_t config_fingerprint = 0;
  std::vector<std::string> target_names;
  std::vector<std::string> dataset_names;  // source, then targets
  std::vector<EpochRecord> records;
  std::vector<std::pair<std::size_t, std::string>> checkpoints;  // (epoch, path)
};

// Raised when a training step produces a non-finite loss or gradient;
// carries the most recent checkpoint that is known good.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& message, std::string last_good, std::size_t epoch)
      : std::runtime_error(message), last_good_checkpoint(std::move(last_good)),
        failed_epoch(epoch) {}

  std::string last_good_checkpoint;  // empty if none was saved yet
  std::size_t failed_epoch;
};

// Final model state and bank evidence, for callers that inspect the run.
struct RunArtifacts {
  Mlp backbone;
  LinearHead head;
  bool has_info_bank = false;
  InformationBank info_bank;          // state at the end of the run
  Matrix info_bank_reps_at_boundary;  // cached reps right after the snapshot
};

// Cross-entropy-only baseline: stage-1 optimizer and schedule for
// stage1_epochs epochs; stage2_epochs is ignored.
Trajectory train_vanilla(const TrainConfig& config, const RunData& data,
                         const std::string& out_dir, RunArtifacts* artifacts = nullptr);

// Two-stage schedule: stage 1 minimizes alpha * L_IAS + L_CE with memory
// bank updates every step, the stage boundary snapshots the information
// bank, and stage 2 continues the same network on beta * L_IRS + L_CE under
// a fresh cosine schedule. With alpha = 0 and stage2_epochs = 0 the run is
// bitwise identical to train_vanilla.
Trajectory train_ctc(const TrainConfig& config, const RunData& data,
                     const std::string& out_dir, RunArtifacts* artifacts = nullptr);

// One temporal-analysis snapshot: losses on the source splits, retrieval
// and clustering discriminability on the source test split, a linear probe
// per target, and (when with_mi) MINE estimates of I(X;T) and I(T;Y) on
// every dataset's test split.
EpochRecord evaluate_epoch(const Mlp& backbone, const LinearHead& head,
                           const RunData& data, const TrainConfig& config,
                           std::size_t epoch, int stage, bool with_mi);

// Writes out_dir/trajectory.csv (fixed column order:
// epoch,stage,train_loss,test_loss,r_at_1,nmi,probe_<target>...,
// ixt_<dataset>...,ity_<dataset>...; cells are empty when a quantity was
// not evaluated that epoch) and out_dir/trajectory.json (full fidelity,
// including std errors and the config fingerprint).
void emit_trajectory(const Trajectory& trajectory, const std::string& out_dir);

// Parsed trajectory.csv; empty cells become nullopt.
struct TrajectoryTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t column_index(const std::string& name) const;  // throws if absent
};
TrajectoryTable read_trajectory_csv(const std::string& path);

// Stable serialization of every semantically relevant field, and its
// FNV-1a 64 hash. Identical configs hash identically across runs.
std::string canonical_config_string(const TrainConfig& config);
std::uint64_t config_fingerprint(const TrainConfig& config);

// Top-1 accuracy of the model's classifier head on a labeled split.
double classifier_accuracy(const Mlp& backbone, const LinearHead& head,
                           const Dataset& dataset);

}  // namespace ctclab
