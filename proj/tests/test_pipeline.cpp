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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctclab/checkpoint.hpp"
#include "ctclab/datagen.hpp"
#include "ctclab/pipeline.hpp"

using namespace ctclab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/ctclab_pipe_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Small data and a fast config so a full run takes well under a second.
RunData tiny_data(std::uint64_t seed = 0) {
  SharedPatternSpec spec;
  spec.train_samples = 120;
  spec.test_samples = 80;
  spec.seed = seed;
  const SharedPair pair = gen_shared_pair(spec);
  RunData data;
  data.source = pair.source;
  data.targets.push_back({"target", pair.target});
  return data;
}

TrainConfig tiny_config(std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.stage1_epochs = 3;
  cfg.stage2_epochs = 2;
  cfg.batch_size = 32;
  cfg.hidden_dims = {16, 12};
  cfg.rep_dim = 8;
  cfg.eval_every = 1;
  cfg.checkpoint_every = 1;
  cfg.probe.steps = 40;
  cfg.probe.batch_size = 32;
  cfg.probe.decay_steps = {20, 30};
  return cfg;
}

}  // namespace

TEST_CASE("zero-epoch run records exactly the initial evaluation") {
  TempDir dir("zero_epochs");
  TrainConfig cfg = tiny_config();
  cfg.stage1_epochs = 0;
  cfg.stage2_epochs = 0;
  const RunData data = tiny_data();
  const Trajectory traj = train_vanilla(cfg, data, dir.path);
  REQUIRE(traj.records.size() == 1);
  CHECK(traj.records[0].epoch == 0);
  CHECK(traj.records[0].stage == 1);
  CHECK(traj.records[0].probe_acc.size() == 1);
  REQUIRE(traj.checkpoints.size() == 1);
  CHECK(traj.checkpoints[0].first == 0);
  CHECK(std::filesystem::exists(dir.path + "/" + traj.checkpoints[0].second));
}

TEST_CASE("identical seeds give byte-identical trajectory files") {
  TempDir a("det_a"), b("det_b");
  const RunData data = tiny_data();
  const TrainConfig cfg = tiny_config(7);
  emit_trajectory(train_ctc(cfg, data, a.path), a.path);
  emit_trajectory(train_ctc(cfg, data, b.path), b.path);
  CHECK(slurp(a.path + "/trajectory.csv") == slurp(b.path + "/trajectory.csv"));
  CHECK(slurp(a.path + "/trajectory.json") == slurp(b.path + "/trajectory.json"));
  CHECK(slurp(a.path + "/ckpt_epoch_5.bin") == slurp(b.path + "/ckpt_epoch_5.bin"));

  TrainConfig other = cfg;
  other.seed = 8;
  TempDir c("det_c");
  emit_trajectory(train_ctc(other, data, c.path), c.path);
  CHECK(slurp(a.path + "/trajectory.csv") != slurp(c.path + "/trajectory.csv"));
}

TEST_CASE("train_ctc with alpha=0 and no stage 2 reduces to train_vanilla bitwise") {
  TempDir a("red_vanilla"), b("red_ctc");
  const RunData data = tiny_data();
  TrainConfig cfg = tiny_config(3);
  cfg.stage2_epochs = 0;
  cfg.loss.alpha = 0.0;
  emit_trajectory(train_vanilla(cfg, data, a.path), a.path);
  emit_trajectory(train_ctc(cfg, data, b.path), b.path);
  CHECK(slurp(a.path + "/trajectory.csv") == slurp(b.path + "/trajectory.csv"));
  CHECK(slurp(a.path + "/trajectory.json") == slurp(b.path + "/trajectory.json"));
  CHECK(slurp(a.path + "/ckpt_epoch_3.bin") == slurp(b.path + "/ckpt_epoch_3.bin"));
}

TEST_CASE("beta=0 stage 2 is exactly cross-entropy training") {
  // A ctc run that is all stage 2 with beta=0 must equal a vanilla run whose
  // stage-1 optimizer carries the stage-2 settings: same epochs, same
  // shuffle streams, identical parameter updates.
  const RunData data = tiny_data();
  TrainConfig ctc_cfg = tiny_config(5);
  ctc_cfg.stage1_epochs = 0;
  ctc_cfg.stage2_epochs = 4;
  ctc_cfg.loss.alpha = 0.0;
  ctc_cfg.loss.beta = 0.0;

  TrainConfig vanilla_cfg = ctc_cfg;
  vanilla_cfg.stage1_epochs = 4;
  vanilla_cfg.stage2_epochs = 0;
  vanilla_cfg.stage1 = ctc_cfg.stage2;

  TempDir a("beta0_ctc"), b("beta0_vanilla");
  train_ctc(ctc_cfg, data, a.path);
  train_vanilla(vanilla_cfg, data, b.path);
  CHECK(slurp(a.path + "/ckpt_epoch_4.bin") == slurp(b.path + "/ckpt_epoch_4.bin"));
}

TEST_CASE("information bank stays bitwise constant through stage 2") {
  TempDir dir("bank_const");
  const RunData data = tiny_data();
  TrainConfig cfg = tiny_config(9);
  cfg.loss.alpha = 0.3;
  RunArtifacts art;
  train_ctc(cfg, data, dir.path, &art);
  REQUIRE(art.has_info_bank);
  CHECK(art.info_bank.cached_reps.data == art.info_bank_reps_at_boundary.data);
  const Matrix fresh = l2_normalize_rows(art.info_bank.frozen.forward(data.source.train.features));
  CHECK(fresh.data == art.info_bank.cached_reps.data);
}

TEST_CASE("checkpoint reload reproduces the recorded epoch exactly") {
  TempDir dir("ckpt_replay");
  const RunData data = tiny_data();
  TrainConfig cfg = tiny_config(11);
  const Trajectory traj = train_ctc(cfg, data, dir.path);

  for (const auto& [epoch, name] : traj.checkpoints) {
    const EpochRecord* recorded = nullptr;
    for (const EpochRecord& r : traj.records)
      if (r.epoch == epoch) recorded = &r;
    REQUIRE(recorded != nullptr);

    const Checkpoint ck = load_checkpoint(dir.path + "/" + name);
    const int stage = epoch <= cfg.stage1_epochs ? 1 : 2;
    const EpochRecord replay =
        evaluate_epoch(ck.backbone, ck.head, data, cfg, epoch, stage, false);
    CHECK(replay.train_loss == recorded->train_loss);
    CHECK(replay.test_loss == recorded->test_loss);
    CHECK(replay.r_at_1 == recorded->r_at_1);
    CHECK(replay.nmi_value == recorded->nmi_value);
    REQUIRE(replay.probe_acc.size() == recorded->probe_acc.size());
    for (std::size_t t = 0; t < replay.probe_acc.size(); ++t)
      CHECK(replay.probe_acc[t] == recorded->probe_acc[t]);
  }
}

TEST_CASE("checkpoint files carry the magic and survive a round trip") {
  TempDir dir("ckpt_bytes");
  const Mlp net = Mlp::random_init(6, {5, 4}, true, 21);
  const LinearHead head = LinearHead::random_init(4, 3, 22);
  const std::string path = dir.path + "/model.bin";
  save_checkpoint(path, net, head);

  const std::string bytes = slurp(path);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(0, 8) == "CTCLAB01");

  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.backbone.layers.size() == 2);
  CHECK(ck.backbone.layers[0].weight.data == net.layers[0].weight.data);
  CHECK(ck.head.layer.bias.data == head.layer.bias.data);

  std::ofstream(dir.path + "/bad.bin", std::ios::binary) << "NOTMAGIC" << bytes.substr(8);
  CHECK_THROWS_AS(load_checkpoint(dir.path + "/bad.bin"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(dir.path + "/absent.bin"), std::runtime_error);
}

TEST_CASE("evaluate_epoch on class-clustered and constant representations") {
  // Features are one-hot by class; an identity backbone passes them through.
  const std::size_t classes = 3;
  auto clustered = [&](std::size_t n, int class_count) {
    Dataset ds;
    ds.class_count = class_count;
    ds.features = Matrix(n, classes);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      ds.labels[i] = static_cast<int>(i % classes);
      ds.features.at(i, i % classes) = 1.0;
    }
    return ds;
  };
  RunData data;
  data.source.train = clustered(30, classes);
  data.source.test = clustered(12, classes);
  data.targets.push_back({"t", {clustered(30, classes), clustered(12, classes)}});

  Mlp identity(classes, {classes}, true);
  for (std::size_t i = 0; i < classes; ++i) identity.layers[0].weight.at(i, i) = 1.0;
  const LinearHead head = LinearHead::random_init(classes, classes, 23);

  TrainConfig cfg = tiny_config(13);
  const EpochRecord rec = evaluate_epoch(identity, head, data, cfg, 0, 1, false);
  CHECK(rec.r_at_1 == 1.0);
  CHECK(rec.nmi_value == doctest::Approx(1.0));

  // Constant representations: zero weights, positive bias.
  Mlp constant(classes, {classes}, true);
  for (double& v : constant.layers[0].bias.data) v = 0.5;
  const EpochRecord degenerate = evaluate_epoch(constant, head, data, cfg, 0, 1, false);
  CHECK(degenerate.r_at_1 == 0.0);
  CHECK(degenerate.nmi_value == 0.0);
}

TEST_CASE("divergent training aborts with the last good checkpoint") {
  TempDir dir("diverge");
  const RunData data = tiny_data();
  TrainConfig cfg = tiny_config(15);
  cfg.stage1.lr_init = 1e18;  // guarantees a non-finite loss within an epoch
  cfg.stage1.lr_min = 1e18;
  try {
    train_vanilla(cfg, data, dir.path);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.failed_epoch >= 1);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("MI cadence populates estimates and empty CSV cells elsewhere") {
  TempDir dir("mi_cadence");
  RunData data = tiny_data();
  TrainConfig cfg = tiny_config(17);
  cfg.stage1_epochs = 2;
  cfg.stage2_epochs = 0;
  cfg.mi_every = 2;
  cfg.mine.hidden_dim = 8;
  cfg.mine.layer_count = 2;
  cfg.mine.batch_size = 32;
  cfg.mine.train_steps = 30;
  cfg.mine.eval_sample_cap = 64;

  const Trajectory traj = train_vanilla(cfg, data, dir.path);
  emit_trajectory(traj, dir.path);
  REQUIRE(traj.records.size() == 3);  // epochs 0, 1, 2
  CHECK(traj.records[0].has_mi);
  CHECK(!traj.records[1].has_mi);
  CHECK(traj.records[2].has_mi);
  REQUIRE(traj.records[0].ixt.size() == 2);  // source + one target
  REQUIRE(traj.records[0].ity.size() == 2);

  const TrajectoryTable table = read_trajectory_csv(dir.path + "/trajectory.csv");
  const std::size_t ixt_col = table.column_index("ixt_source");
  CHECK(table.rows[0][ixt_col].has_value());
  CHECK(!table.rows[1][ixt_col].has_value());
  CHECK(table.rows[2][ixt_col].has_value());
  CHECK(*table.rows[0][ixt_col] == doctest::Approx(traj.records[0].ixt[0].value));
}

TEST_CASE("trajectory CSV column order is the documented contract") {
  TempDir dir("csv_columns");
  Trajectory traj;
  traj.target_names = {"t1", "t2"};
  traj.dataset_names = {"source", "t1", "t2"};
  emit_trajectory(traj, dir.path);
  const std::string csv = slurp(dir.path + "/trajectory.csv");
  CHECK(csv ==
        "epoch,stage,train_loss,test_loss,r_at_1,nmi,probe_t1,probe_t2,"
        "ixt_source,ixt_t1,ixt_t2,ity_source,ity_t1,ity_t2\n");
}

TEST_CASE("trajectory write/read round trip preserves records") {
  TempDir dir("csv_roundtrip");
  const RunData data = tiny_data();
  TrainConfig cfg = tiny_config(19);
  cfg.stage1_epochs = 2;
  cfg.stage2_epochs = 1;
  const Trajectory traj = train_ctc(cfg, data, dir.path);
  emit_trajectory(traj, dir.path);
  const TrajectoryTable table = read_trajectory_csv(dir.path + "/trajectory.csv");
  REQUIRE(table.rows.size() == traj.records.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(*table.rows[i][table.column_index("epoch")] ==
          static_cast<double>(traj.records[i].epoch));
    CHECK(*table.rows[i][table.column_index("train_loss")] == traj.records[i].train_loss);
    CHECK(*table.rows[i][table.column_index("probe_target")] == traj.records[i].probe_acc[0]);
  }
  CHECK_THROWS_AS(read_trajectory_csv(dir.path + "/missing.csv"), std::runtime_error);
}

TEST_CASE("config fingerprint distinguishes semantic changes") {
  const TrainConfig base;
  CHECK(config_fingerprint(base) == config_fingerprint(TrainConfig{}));
  TrainConfig changed = base;
  changed.loss.alpha = 0.123;
  CHECK(config_fingerprint(changed) != config_fingerprint(base));
  TrainConfig reseeded = base;
  reseeded.seed = 99;
  CHECK(config_fingerprint(reseeded) != config_fingerprint(base));
}

TEST_CASE("TrainConfig validation rejects broken settings") {
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.eval_every = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.loss.tau_stage1 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.loss.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.bank_momentum = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.hidden_dims.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("backbone parameters are untouched by evaluation") {
  const RunData data = tiny_data();
  const TrainConfig cfg = tiny_config(25);
  Mlp net = Mlp::random_init(data.source.train.features.cols, {10, 6}, true, 26);
  LinearHead head = LinearHead::random_init(
      6, static_cast<std::size_t>(data.source.train.class_count), 27);
  std::vector<std::vector<double>> before;
  for (const DenseLayer& l : net.layers) {
    before.push_back(l.weight.data);
    before.push_back(l.bias.data);
  }
  evaluate_epoch(net, head, data, cfg, 0, 1, false);
  std::size_t idx = 0;
  for (const DenseLayer& l : net.layers) {
    CHECK(l.weight.data == before[idx++]);
    CHECK(l.bias.data == before[idx++]);
  }
}
