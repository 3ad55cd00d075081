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

#include "ctclab/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ctclab/checkpoint.hpp"
#include "ctclab/optim.hpp"
#include "ctclab/rng.hpp"

namespace ctclab {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Matrix one_hot(const std::vector<int>& labels, int class_count) {
  Matrix m(labels.size(), static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i)
    m.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return m;
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& ids,
                   std::size_t begin, std::size_t count) {
  Matrix out(count, src.cols);
  for (std::size_t i = 0; i < count; ++i)
    std::copy_n(src.row(ids[begin + i]), src.cols, out.row(i));
  return out;
}

enum class Mode { kVanilla, kCtc };

struct StageRuntime {
  SgdState sgd;
  CosineSchedule schedule;
  std::size_t steps_per_epoch = 0;
};

StageRuntime make_stage_runtime(const StageOptim& opt, std::size_t stage_epochs,
                                std::size_t train_count, std::size_t batch,
                                const ParamSet& params) {
  StageRuntime rt;
  rt.steps_per_epoch = std::max<std::size_t>(1, train_count / std::min(batch, train_count));
  const std::size_t horizon = opt.schedule_epochs > 0 ? opt.schedule_epochs : stage_epochs;
  rt.schedule.lr_init = opt.lr_init;
  rt.schedule.lr_min = opt.lr_min;
  rt.schedule.total_steps = std::max<std::size_t>(1, horizon * rt.steps_per_epoch);
  rt.sgd = SgdState::for_params(params, opt.lr_init, opt.momentum, opt.weight_decay);
  return rt;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
  if (rep_dim < 1) throw std::invalid_argument("TrainConfig: rep_dim must be >= 1");
  if (stage1.lr_init <= 0.0 || stage2.lr_init <= 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must be > 0");
  if (stage1.momentum < 0.0 || stage1.momentum >= 1.0 || stage2.momentum < 0.0 ||
      stage2.momentum >= 1.0)
    throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (stage1.weight_decay < 0.0 || stage2.weight_decay < 0.0)
    throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (bank_momentum < 0.0 || bank_momentum > 1.0)
    throw std::invalid_argument("TrainConfig: bank_momentum must be in [0, 1]");
  if (loss.tau_stage1 <= 0.0 || loss.tau_stage2 <= 0.0)
    throw std::invalid_argument("TrainConfig: temperatures must be > 0");
  if (loss.alpha < 0.0 || loss.beta < 0.0 || !std::isfinite(loss.alpha) ||
      !std::isfinite(loss.beta))
    throw std::invalid_argument("TrainConfig: alpha/beta must be finite and >= 0");
  if (loss.negatives_per_anchor != kAllKeys && loss.negatives_per_anchor < 1)
    throw std::invalid_argument("TrainConfig: negatives_per_anchor must be 'all' or >= 1");
  if (augment_strength < 0.0)
    throw std::invalid_argument("TrainConfig: augment_strength must be >= 0");
  if (hidden_dims.empty())
    throw std::invalid_argument("TrainConfig: at least one hidden layer required");
  probe.validate();
  if (mi_every > 0) mine.validate();
}

EpochRecord evaluate_epoch(const Mlp& backbone, const LinearHead& head,
                           const RunData& data, const TrainConfig& config,
                           std::size_t epoch, int stage, bool with_mi) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.stage = stage;

  {
    const Matrix logits = head.forward(backbone.forward(data.source.train.features));
    rec.train_loss = cross_entropy(logits, data.source.train.labels).loss;
  }
  const Matrix test_reps = backbone.forward(data.source.test.features);
  {
    const Matrix logits = head.forward(test_reps);
    rec.test_loss = cross_entropy(logits, data.source.test.labels).loss;
  }

  rec.r_at_1 = recall_at_1(test_reps, data.source.test.labels);
  const ClusteringResult clusters =
      kmeans(test_reps, static_cast<std::size_t>(data.source.test.class_count),
             derive_seed(config.seed, "kmeans", epoch));
  rec.nmi_value = nmi(clusters.assignments, data.source.test.labels);

  for (std::size_t t = 0; t < data.targets.size(); ++t) {
    const DatasetPair& target = data.targets[t].data;
    ProbeConfig probe_cfg = config.probe;
    probe_cfg.seed = derive_seed(config.seed, "probe", t);
    const Matrix train_reps = backbone.forward(target.train.features);
    const Matrix target_test_reps = backbone.forward(target.test.features);
    rec.probe_acc.push_back(linear_probe(train_reps, target.train.labels,
                                         target_test_reps, target.test.labels, probe_cfg));
  }

  if (with_mi) {
    rec.has_mi = true;
    std::vector<const DatasetPair*> all = {&data.source};
    for (const NamedDatasetPair& t : data.targets) all.push_back(&t.data);
    for (std::size_t d = 0; d < all.size(); ++d) {
      const Dataset& test = all[d]->test;
      const Matrix reps = backbone.forward(test.features);
      rec.ixt.push_back(mine_estimate(test.features, reps, config.mine,
                                      derive_seed(config.seed, "mine-ixt", d, epoch)));
      rec.ity.push_back(mine_estimate(reps, one_hot(test.labels, test.class_count),
                                      config.mine,
                                      derive_seed(config.seed, "mine-ity", d, epoch)));
    }
  }
  return rec;
}

namespace {

Trajectory run_training(const TrainConfig& config, const RunData& data,
                        const std::string& out_dir, Mode mode, RunArtifacts* artifacts) {
  config.validate();
  if (data.source.train.sample_count() == 0)
    throw std::invalid_argument("run_training: empty source training split");

  const std::size_t n_train = data.source.train.sample_count();
  const std::size_t input_dim = data.source.train.features.cols;
  const std::size_t classes = static_cast<std::size_t>(data.source.train.class_count);

  std::vector<std::size_t> dims = config.hidden_dims;
  dims.push_back(config.rep_dim);
  Mlp backbone = Mlp::random_init(input_dim, dims, /*rectify_output=*/true,
                                  derive_seed(config.seed, "backbone"));
  LinearHead head =
      LinearHead::random_init(config.rep_dim, classes, derive_seed(config.seed, "head"));
  ParamSet params = collect_params(backbone, &head);

  const bool ias_active = mode == Mode::kCtc && config.loss.alpha != 0.0;
  const bool irs_active = mode == Mode::kCtc && config.loss.beta != 0.0;
  const std::size_t stage2_epochs = mode == Mode::kCtc ? config.stage2_epochs : 0;
  const std::size_t total_epochs = config.stage1_epochs + stage2_epochs;

  Trajectory traj;
  traj.config_fingerprint = config_fingerprint(config);
  traj.dataset_names.push_back(data.source.train.name.empty() ? "source"
                                                              : data.source.train.name);
  for (const NamedDatasetPair& t : data.targets) {
    traj.target_names.push_back(t.name);
    traj.dataset_names.push_back(t.name);
  }

  std::string last_good;
  auto save_model = [&](std::size_t epoch) {
    // Stored relative to the run directory so identical runs emit
    // byte-identical trajectory files regardless of where they live.
    const std::string name = "ckpt_epoch_" + std::to_string(epoch) + ".bin";
    save_checkpoint(out_dir + "/" + name, backbone, head);
    traj.checkpoints.emplace_back(epoch, name);
    last_good = out_dir + "/" + name;
  };
  auto want_checkpoint = [&](std::size_t epoch) {
    if (epoch == total_epochs) return true;
    if (stage2_epochs > 0 && epoch == config.stage1_epochs) return true;
    return config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
  };
  auto record_epoch = [&](std::size_t epoch, int stage) {
    const bool due = epoch % config.eval_every == 0 || epoch == total_epochs;
    if (!due) return;
    const bool with_mi =
        config.mi_every > 0 && (epoch % config.mi_every == 0 || epoch == total_epochs);
    traj.records.push_back(evaluate_epoch(backbone, head, data, config, epoch, stage, with_mi));
    if (want_checkpoint(epoch)) save_model(epoch);
  };

  MemoryBank bank;
  if (ias_active)
    bank = init_memory_bank(backbone, data.source.train.features, config.bank_momentum);

  record_epoch(0, 1);

  InformationBank info_bank;
  Matrix boundary_reps;

  auto train_stage = [&](int stage, std::size_t first_epoch, std::size_t stage_epochs,
                         const StageOptim& opt) {
    if (stage_epochs == 0) return;
    StageRuntime rt = make_stage_runtime(opt, stage_epochs, n_train, config.batch_size, params);
    const std::size_t batch = std::min(config.batch_size, n_train);
    std::vector<std::size_t> order(n_train);

    for (std::size_t e = 0; e < stage_epochs; ++e) {
      const std::size_t epoch = first_epoch + e;
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
      shuffle_rng.shuffle(order);

      for (std::size_t s = 0; s < rt.steps_per_epoch; ++s) {
        try {
          rt.sgd.learning_rate = rt.schedule.at(e * rt.steps_per_epoch + s);

          Matrix x = gather_rows(data.source.train.features, order, s * batch, batch);
          if (config.augment_strength > 0.0)
            x = augment(x, config.augment_strength,
                        derive_seed(config.seed, "augment-step", epoch, s));
          std::vector<int> y(batch);
          std::vector<std::size_t> ids(batch);
          for (std::size_t i = 0; i < batch; ++i) {
            ids[i] = order[s * batch + i];
            y[i] = data.source.train.labels[ids[i]];
          }

          Mlp::Cache cache;
          const Matrix reps = backbone.forward_cached(x, cache);
          const Matrix logits = head.forward(reps);
          const LossGrad ce = cross_entropy(logits, y);
          double step_loss = ce.loss;

          Matrix unit_reps;
          Matrix g_reps;
          const bool contrastive = stage == 1 ? ias_active : irs_active;
          if (contrastive) {
            unit_reps = l2_normalize_rows(reps);
            Rng neg_rng(derive_seed(config.seed, "negatives", epoch, s));
            LossGrad nce = stage == 1
                               ? ias_loss(unit_reps, ids, bank, config.loss.tau_stage1,
                                          config.loss.negatives_per_anchor, &neg_rng)
                               : irs_loss(unit_reps, ids, info_bank, config.loss.tau_stage2,
                                          config.loss.negatives_per_anchor, &neg_rng);
            const double weight = stage == 1 ? config.loss.alpha : config.loss.beta;
            step_loss += weight * nce.loss;
            scale_in_place(nce.grad, weight);
            g_reps = l2_normalize_rows_backward(reps, nce.grad);
          }
          ensure_finite(step_loss, "training step loss");

          // head gradients + representation-path gradients through the backbone
          ModelGrads grads;
          grads.head_weight = matmul_at(reps, ce.grad);
          grads.head_bias = column_sums(ce.grad);
          Matrix g_rep_total = matmul_bt(ce.grad, head.layer.weight);
          if (g_reps.size() != 0) add_in_place(g_rep_total, g_reps);
          grads.backbone = backbone.backward(x, cache, g_rep_total);

          sgd_step(params, grads_in_param_order(grads), rt.sgd);
          for (std::size_t t = 0; t < params.size(); ++t)
            if (!all_finite(*params.tensors[t]))
              throw std::runtime_error("parameter " + params.names[t] +
                                       " became non-finite after the update");

          if (stage == 1 && ias_active) bank_update(bank, ids, unit_reps);
        } catch (const TrainingDiverged&) {
          throw;
        } catch (const std::runtime_error& err) {
          throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(s) + ": " + err.what() +
                                     (last_good.empty() ? "; no checkpoint saved yet"
                                                        : "; last good checkpoint: " + last_good),
                                 last_good, epoch);
        }
      }
      try {
        record_epoch(epoch, stage);
      } catch (const std::runtime_error& err) {
        throw TrainingDiverged("training diverged by the epoch " + std::to_string(epoch) +
                                   " evaluation: " + err.what() +
                                   (last_good.empty() ? "; no checkpoint saved yet"
                                                      : "; last good checkpoint: " + last_good),
                               last_good, epoch);
      }
    }
  };

  train_stage(1, 1, config.stage1_epochs, config.stage1);

  if (stage2_epochs > 0) {
    if (irs_active) {
      info_bank = snapshot_information_bank(backbone, data.source.train.features);
      boundary_reps = info_bank.cached_reps;
    }
    train_stage(2, config.stage1_epochs + 1, stage2_epochs, config.stage2);

    if (irs_active) {
      // The frozen bank must have stayed bitwise constant through stage 2.
      const Matrix recomputed =
          l2_normalize_rows(info_bank.frozen.forward(data.source.train.features));
      if (info_bank.cached_reps.data != boundary_reps.data ||
          recomputed.data != boundary_reps.data)
        throw std::logic_error("information bank changed during stage 2");
    }
  }

  if (traj.checkpoints.empty() || traj.checkpoints.back().first != total_epochs)
    save_model(total_epochs);

  if (artifacts != nullptr) {
    artifacts->backbone = backbone;
    artifacts->head = head;
    artifacts->has_info_bank = irs_active && stage2_epochs > 0;
    if (artifacts->has_info_bank) {
      artifacts->info_bank = info_bank;
      artifacts->info_bank_reps_at_boundary = boundary_reps;
    }
  }
  return traj;
}

}  // namespace

Trajectory train_vanilla(const TrainConfig& config, const RunData& data,
                         const std::string& out_dir, RunArtifacts* artifacts) {
  return run_training(config, data, out_dir, Mode::kVanilla, artifacts);
}

Trajectory train_ctc(const TrainConfig& config, const RunData& data,
                     const std::string& out_dir, RunArtifacts* artifacts) {
  return run_training(config, data, out_dir, Mode::kCtc, artifacts);
}

void emit_trajectory(const Trajectory& trajectory, const std::string& out_dir) {
  const std::string csv_path = out_dir + "/trajectory.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("emit_trajectory: cannot open " + csv_path);

  csv << "epoch,stage,train_loss,test_loss,r_at_1,nmi";
  for (const std::string& t : trajectory.target_names) csv << ",probe_" << t;
  for (const std::string& d : trajectory.dataset_names) csv << ",ixt_" << d;
  for (const std::string& d : trajectory.dataset_names) csv << ",ity_" << d;
  csv << "\n";

  for (const EpochRecord& r : trajectory.records) {
    csv << r.epoch << ',' << r.stage << ',' << fmt_double(r.train_loss) << ','
        << fmt_double(r.test_loss) << ',' << fmt_double(r.r_at_1) << ','
        << fmt_double(r.nmi_value);
    for (double p : r.probe_acc) csv << ',' << fmt_double(p);
    for (std::size_t d = 0; d < trajectory.dataset_names.size(); ++d) {
      csv << ',';
      if (r.has_mi) csv << fmt_double(r.ixt[d].value);
    }
    for (std::size_t d = 0; d < trajectory.dataset_names.size(); ++d) {
      csv << ',';
      if (r.has_mi) csv << fmt_double(r.ity[d].value);
    }
    csv << "\n";
  }
  if (!csv) throw std::runtime_error("emit_trajectory: write failed for " + csv_path);
  csv.close();

  nlohmann::ordered_json j;
  {
    std::ostringstream fp;
    fp << std::hex << trajectory.config_fingerprint;
    j["config_fingerprint"] = fp.str();
  }
  j["targets"] = trajectory.target_names;
  j["datasets"] = trajectory.dataset_names;
  j["records"] = nlohmann::ordered_json::array();
  for (const EpochRecord& r : trajectory.records) {
    nlohmann::ordered_json rec;
    rec["epoch"] = r.epoch;
    rec["stage"] = r.stage;
    rec["train_loss"] = r.train_loss;
    rec["test_loss"] = r.test_loss;
    rec["r_at_1"] = r.r_at_1;
    rec["nmi"] = r.nmi_value;
    for (std::size_t t = 0; t < trajectory.target_names.size(); ++t)
      rec["probe"][trajectory.target_names[t]] = r.probe_acc[t];
    if (r.has_mi) {
      for (std::size_t d = 0; d < trajectory.dataset_names.size(); ++d) {
        const std::string& name = trajectory.dataset_names[d];
        rec["ixt"][name] = {{"value", r.ixt[d].value},
                            {"std_error", r.ixt[d].std_error},
                            {"steps_used", r.ixt[d].steps_used}};
        rec["ity"][name] = {{"value", r.ity[d].value},
                            {"std_error", r.ity[d].std_error},
                            {"steps_used", r.ity[d].steps_used}};
      }
    }
    j["records"].push_back(std::move(rec));
  }
  j["checkpoints"] = nlohmann::ordered_json::array();
  for (const auto& [epoch, path] : trajectory.checkpoints)
    j["checkpoints"].push_back({{"epoch", epoch}, {"path", path}});

  const std::string json_path = out_dir + "/trajectory.json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("emit_trajectory: cannot open " + json_path);
  js << j.dump(2) << "\n";
  if (!js) throw std::runtime_error("emit_trajectory: write failed for " + json_path);
}

std::size_t TrajectoryTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::runtime_error("trajectory table: no column named '" + name + "'");
}

TrajectoryTable read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trajectory_csv: cannot open " + path);
  TrajectoryTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
  {
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) table.columns.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::optional<double>> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos
                                                      ? std::string::npos
                                                      : comma - start);
      if (cell.empty()) {
        row.emplace_back(std::nullopt);
      } else {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
          throw std::runtime_error(path + ": malformed cell '" + cell + "' at row " +
                                   std::to_string(line_no));
        row.emplace_back(v);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (row.size() != table.columns.size())
      throw std::runtime_error(path + ": expected " + std::to_string(table.columns.size()) +
                               " cells, got " + std::to_string(row.size()) + " at row " +
                               std::to_string(line_no));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string canonical_config_string(const TrainConfig& config) {
  std::ostringstream os;
  os << "stage1_epochs=" << config.stage1_epochs << "\n"
     << "stage2_epochs=" << config.stage2_epochs << "\n"
     << "batch_size=" << config.batch_size << "\n";
  const auto stage = [&](const char* tag, const StageOptim& o) {
    os << tag << ".lr_init=" << fmt_double(o.lr_init) << "\n"
       << tag << ".lr_min=" << fmt_double(o.lr_min) << "\n"
       << tag << ".momentum=" << fmt_double(o.momentum) << "\n"
       << tag << ".weight_decay=" << fmt_double(o.weight_decay) << "\n"
       << tag << ".schedule_epochs=" << o.schedule_epochs << "\n";
  };
  stage("stage1", config.stage1);
  stage("stage2", config.stage2);
  os << "alpha=" << fmt_double(config.loss.alpha) << "\n"
     << "beta=" << fmt_double(config.loss.beta) << "\n"
     << "tau_stage1=" << fmt_double(config.loss.tau_stage1) << "\n"
     << "tau_stage2=" << fmt_double(config.loss.tau_stage2) << "\n"
     << "negatives_per_anchor=" << config.loss.negatives_per_anchor << "\n"
     << "bank_momentum=" << fmt_double(config.bank_momentum) << "\n"
     << "eval_every=" << config.eval_every << "\n"
     << "mi_every=" << config.mi_every << "\n"
     << "checkpoint_every=" << config.checkpoint_every << "\n"
     << "seed=" << config.seed << "\n"
     << "augment_strength=" << fmt_double(config.augment_strength) << "\n";
  os << "hidden_dims=";
  for (std::size_t i = 0; i < config.hidden_dims.size(); ++i)
    os << (i ? "," : "") << config.hidden_dims[i];
  os << "\nrep_dim=" << config.rep_dim << "\n"
     << "mine.hidden_dim=" << config.mine.hidden_dim << "\n"
     << "mine.layer_count=" << config.mine.layer_count << "\n"
     << "mine.batch_size=" << config.mine.batch_size << "\n"
     << "mine.learning_rate=" << fmt_double(config.mine.learning_rate) << "\n"
     << "mine.train_steps=" << config.mine.train_steps << "\n"
     << "mine.ema_decay=" << fmt_double(config.mine.ema_decay) << "\n"
     << "mine.eval_sample_cap=" << config.mine.eval_sample_cap << "\n"
     << "probe.steps=" << config.probe.steps << "\n"
     << "probe.batch_size=" << config.probe.batch_size << "\n"
     << "probe.lr_init=" << fmt_double(config.probe.lr_init) << "\n"
     << "probe.lr_decay_factor=" << fmt_double(config.probe.lr_decay_factor) << "\n";
  os << "probe.decay_steps=";
  for (std::size_t i = 0; i < config.probe.decay_steps.size(); ++i)
    os << (i ? "," : "") << config.probe.decay_steps[i];
  os << "\n";
  return os.str();
}

std::uint64_t config_fingerprint(const TrainConfig& config) {
  const std::string s = canonical_config_string(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double classifier_accuracy(const Mlp& backbone, const LinearHead& head,
                           const Dataset& dataset) {
  const Matrix logits = head.forward(backbone.forward(dataset.features));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols; ++j)
      if (row[j] > row[arg]) arg = j;
    if (static_cast<int>(arg) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

}  // namespace ctclab
