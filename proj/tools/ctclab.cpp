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

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctclab/checkpoint.hpp"
#include "ctclab/config.hpp"
#include "ctclab/datagen.hpp"
#include "ctclab/mi.hpp"
#include "ctclab/pipeline.hpp"

namespace {

using nlohmann::ordered_json;

std::uint64_t env_default_seed() {
  const char* env = std::getenv("CTCLAB_SEED");
  if (env == nullptr) return 0;
  return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, std::uint64_t seed,
                    const std::vector<std::string>& extra_keys,
                    const std::vector<std::string>& extra_values) {
  ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  for (std::size_t i = 0; i < extra_keys.size(); ++i) j[extra_keys[i]] = extra_values[i];
  j["timestamp"] = timestamp_utc();
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

ctclab::Matrix one_hot_labels(const std::vector<int>& labels, int class_count) {
  ctclab::Matrix m(labels.size(), static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i)
    m.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return m;
}

struct GenArgs {
  std::string out;
  std::string preset = "default";
  std::uint64_t seed = env_default_seed();
  ctclab::SharedPatternSpec spec;
};

int run_gen(const GenArgs& args) {
  if (args.preset != "default")
    throw std::invalid_argument("unknown preset '" + args.preset + "'");
  ctclab::SharedPatternSpec spec = args.spec;
  spec.seed = args.seed;
  spec.validate();

  std::filesystem::create_directories(args.out);
  const ctclab::SharedPair pair = ctclab::gen_shared_pair(spec);
  ctclab::save_matrix_csv(pair.source.train, args.out + "/source_train.csv");
  ctclab::save_matrix_csv(pair.source.test, args.out + "/source_test.csv");
  ctclab::save_matrix_csv(pair.target.train, args.out + "/target_train.csv");
  ctclab::save_matrix_csv(pair.target.test, args.out + "/target_test.csv");
  write_manifest(args.out, "gen", "", spec.seed, {"preset"}, {args.preset});

  std::cout << "wrote source/target train/test CSVs to " << args.out << "\n"
            << "  source: " << spec.train_samples << " train / " << spec.test_samples
            << " test, " << spec.source_classes << " classes\n"
            << "  target: " << spec.train_samples << " train / " << spec.test_samples
            << " test, " << spec.target_classes << " classes\n";
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string mode = "ctc";
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& args) {
  ctclab::ParsedConfig parsed = ctclab::parse_config_file(args.config_path);
  for (const std::string& o : args.overrides) ctclab::apply_override(parsed, o);
  ctclab::RunSpec spec = ctclab::build_run_spec(parsed);
  if (args.seed.has_value()) {
    spec.train.seed = *args.seed;
  } else if (!spec.seed_set) {
    spec.train.seed = env_default_seed();
  }

  const ctclab::RunData data = ctclab::load_run_data(spec.data);
  std::filesystem::create_directories(args.out);

  ctclab::Trajectory traj;
  try {
    traj = args.mode == "vanilla" ? ctclab::train_vanilla(spec.train, data, args.out)
                                  : ctclab::train_ctc(spec.train, data, args.out);
  } catch (const ctclab::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  ctclab::emit_trajectory(traj, args.out);

  std::vector<std::string> keys = {"mode"};
  std::vector<std::string> values = {args.mode};
  for (std::size_t i = 0; i < args.overrides.size(); ++i) {
    keys.push_back("override_" + std::to_string(i));
    values.push_back(args.overrides[i]);
  }
  {
    std::ostringstream fp;
    fp << std::hex << traj.config_fingerprint;
    keys.push_back("config_fingerprint");
    values.push_back(fp.str());
  }
  write_manifest(args.out, "train", args.config_path, spec.train.seed, keys, values);

  const ctclab::EpochRecord& last = traj.records.back();
  std::cout << "run complete: " << traj.records.size() << " evaluated epochs, "
            << traj.checkpoints.size() << " checkpoints\n"
            << "final epoch " << last.epoch << ": train_loss=" << last.train_loss
            << " test_loss=" << last.test_loss << " r_at_1=" << last.r_at_1
            << " nmi=" << last.nmi_value;
  for (std::size_t t = 0; t < traj.target_names.size(); ++t)
    std::cout << " probe_" << traj.target_names[t] << "=" << last.probe_acc[t];
  std::cout << "\ntrajectory: " << args.out << "/trajectory.csv\n";
  return 0;
}

struct MiArgs {
  std::string samples_a, samples_b;
  std::string oracle_joint;
  std::string checkpoint, data, quantity = "ixt";
  std::string preset;
  std::string out_json;
  std::uint64_t seed = env_default_seed();
  ctclab::MineConfig config;
  bool hidden_set = false;
};

int run_mi(const MiArgs& args) {
  ordered_json j;
  j["command"] = "mi";
  j["seed"] = args.seed;

  double value = 0.0;
  if (!args.oracle_joint.empty()) {
    const ctclab::DiscreteJoint joint =
        ctclab::DiscreteJoint::from(ctclab::load_raw_csv(args.oracle_joint));
    value = ctclab::discrete_mi_exact(joint);
    std::cout << "exact MI = " << value << " nats\n";
    j["mode"] = "oracle";
    j["value"] = value;
  } else {
    ctclab::Matrix a, b;
    if (!args.checkpoint.empty()) {
      if (args.data.empty())
        throw std::invalid_argument("--checkpoint needs --data <dataset.csv>");
      const ctclab::Checkpoint ck = ctclab::load_checkpoint(args.checkpoint);
      const ctclab::Dataset ds = ctclab::load_matrix_csv(args.data);
      const ctclab::Matrix reps = ck.backbone.forward(ds.features);
      if (args.quantity == "ixt") {
        a = ds.features;
        b = reps;
      } else if (args.quantity == "ity") {
        a = reps;
        b = one_hot_labels(ds.labels, ds.class_count);
      } else {
        throw std::invalid_argument("--quantity must be ixt or ity");
      }
      j["mode"] = "checkpoint";
      j["quantity"] = args.quantity;
    } else {
      if (args.samples_a.empty() || args.samples_b.empty())
        throw std::invalid_argument(
            "mi needs --samples-a/--samples-b, --oracle-joint, or --checkpoint/--data");
      a = ctclab::load_raw_csv(args.samples_a);
      b = ctclab::load_raw_csv(args.samples_b);
      j["mode"] = "samples";
    }
    const ctclab::MiEstimate est = ctclab::mine_estimate(a, b, args.config, args.seed);
    value = est.value;
    std::cout << "I = " << est.value << " +- " << est.std_error << " nats ("
              << est.steps_used << " steps)\n";
    j["value"] = est.value;
    j["std_error"] = est.std_error;
    j["steps_used"] = est.steps_used;
  }

  if (!args.out_json.empty()) {
    j["timestamp"] = timestamp_utc();
    std::ofstream out(args.out_json);
    if (!out) throw std::runtime_error("cannot write " + args.out_json);
    out << j.dump(2) << "\n";
  }
  return 0;
}

struct RunSummary {
  std::string file;
  bool empty = false;
  std::vector<std::string> probe_names;
  std::vector<std::size_t> peak_epoch;
  std::vector<double> peak_value, final_value;
  double final_r_at_1 = 0.0, final_nmi = 0.0;
};

int run_report(const std::vector<std::string>& files) {
  std::vector<RunSummary> summaries;
  for (const std::string& file : files) {
    const ctclab::TrajectoryTable table = ctclab::read_trajectory_csv(file);
    RunSummary s;
    s.file = file;
    if (table.rows.empty()) {
      s.empty = true;
      std::cout << file << ": no evaluated epochs\n";
      summaries.push_back(std::move(s));
      continue;
    }
    const std::size_t epoch_col = table.column_index("epoch");
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (table.columns[c].rfind("probe_", 0) != 0) continue;
      s.probe_names.push_back(table.columns[c].substr(6));
      double peak = -1.0;
      std::size_t peak_epoch = 0;
      double final_value = 0.0;
      for (const auto& row : table.rows) {
        if (!row[c].has_value()) continue;
        const double v = *row[c];
        if (v > peak) {
          peak = v;
          peak_epoch = static_cast<std::size_t>(row[epoch_col].value_or(0.0));
        }
        final_value = v;
      }
      s.peak_value.push_back(peak);
      s.peak_epoch.push_back(peak_epoch);
      s.final_value.push_back(final_value);
    }
    const auto& last = table.rows.back();
    s.final_r_at_1 = last[table.column_index("r_at_1")].value_or(0.0);
    s.final_nmi = last[table.column_index("nmi")].value_or(0.0);

    std::cout << file << ":\n";
    for (std::size_t t = 0; t < s.probe_names.size(); ++t) {
      std::cout << "  probe_" << s.probe_names[t] << ": peak " << s.peak_value[t]
                << " at epoch " << s.peak_epoch[t] << ", final " << s.final_value[t]
                << " (gap " << s.peak_value[t] - s.final_value[t] << ")\n";
    }
    std::cout << "  final r_at_1 " << s.final_r_at_1 << ", final nmi " << s.final_nmi << "\n";
    summaries.push_back(std::move(s));
  }

  if (summaries.size() == 2 && !summaries[0].empty && !summaries[1].empty) {
    const RunSummary& a = summaries[0];
    const RunSummary& b = summaries[1];
    std::cout << "deltas (second minus first):\n";
    for (std::size_t t = 0; t < a.probe_names.size(); ++t) {
      for (std::size_t u = 0; u < b.probe_names.size(); ++u) {
        if (a.probe_names[t] != b.probe_names[u]) continue;
        const double delta = b.final_value[u] - a.final_value[t];
        std::cout << "  final probe_" << a.probe_names[t] << ": " << (delta >= 0 ? "+" : "")
                  << delta << "\n";
      }
    }
    std::cout << "  final r_at_1: " << (b.final_r_at_1 - a.final_r_at_1 >= 0 ? "+" : "")
              << b.final_r_at_1 - a.final_r_at_1 << "\n"
              << "  final nmi: " << (b.final_nmi - a.final_nmi >= 0 ? "+" : "")
              << b.final_nmi - a.final_nmi << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctclab: two-stage contrastive training laboratory"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic source/target dataset pair");
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--preset", gen_args.preset, "spec preset (default)");
  gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("--shared-dim", gen_args.spec.shared_dim, "shared latent dimension");
  gen->add_option("--source-private-dim", gen_args.spec.source_private_dim,
                  "source private latent dimension");
  gen->add_option("--target-private-dim", gen_args.spec.target_private_dim,
                  "target private latent dimension");
  gen->add_option("--ambient-dim", gen_args.spec.ambient_dim, "feature dimension");
  gen->add_option("--source-classes", gen_args.spec.source_classes, "source class count");
  gen->add_option("--target-classes", gen_args.spec.target_classes, "target class count");
  gen->add_option("--train-samples", gen_args.spec.train_samples, "train samples per dataset");
  gen->add_option("--test-samples", gen_args.spec.test_samples, "test samples per dataset");
  gen->add_option("--noise-std", gen_args.spec.noise_std, "feature noise std");
  gen->add_option("--label-margin", gen_args.spec.label_margin, "minimum top-2 score gap");
  gen->add_option("--shared-label-weight", gen_args.spec.shared_label_weight,
                  "shared-latent weight in source labels");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("-c,--config", train_args.config_path, "config file")->required();
  train->add_option("--mode", train_args.mode, "vanilla | ctc")
      ->check(CLI::IsMember({"vanilla", "ctc"}));
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--set", train_args.overrides, "override, section.key=value (repeatable)");
  std::uint64_t train_seed = 0;
  CLI::Option* seed_opt = train->add_option("--seed", train_seed, "seed override");

  MiArgs mi_args;
  CLI::App* mi = app.add_subcommand("mi", "estimate mutual information");
  mi->add_option("--samples-a", mi_args.samples_a, "raw CSV of first-variable samples");
  mi->add_option("--samples-b", mi_args.samples_b, "raw CSV of second-variable samples");
  mi->add_option("--oracle-joint", mi_args.oracle_joint,
                 "probability-table CSV: exact discrete MI, no training");
  mi->add_option("--checkpoint", mi_args.checkpoint, "model checkpoint");
  mi->add_option("--data", mi_args.data, "labeled dataset CSV for --checkpoint");
  mi->add_option("--quantity", mi_args.quantity, "ixt | ity")
      ->check(CLI::IsMember({"ixt", "ity"}));
  mi->add_option("--seed", mi_args.seed, "estimator seed");
  mi->add_option("--out", mi_args.out_json, "JSON output path");
  std::string mi_preset;
  CLI::Option* preset_opt =
      mi->add_option("--preset", mi_preset, "desk | paper-a5-input | paper-a5-label")
          ->check(CLI::IsMember({"desk", "paper-a5-input", "paper-a5-label"}));
  CLI::Option* hd = mi->add_option("--hidden-dim", mi_args.config.hidden_dim, "");
  CLI::Option* lc = mi->add_option("--layer-count", mi_args.config.layer_count, "");
  CLI::Option* bs = mi->add_option("--batch-size", mi_args.config.batch_size, "");
  CLI::Option* lr = mi->add_option("--learning-rate", mi_args.config.learning_rate, "");
  CLI::Option* ts = mi->add_option("--train-steps", mi_args.config.train_steps, "");
  CLI::Option* ed = mi->add_option("--ema-decay", mi_args.config.ema_decay, "");

  std::vector<std::string> report_files;
  CLI::App* report = app.add_subcommand("report", "summarize trajectory CSVs");
  report->add_option("trajectories", report_files, "trajectory.csv files")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (train->parsed()) {
      if (seed_opt->count() > 0) train_args.seed = train_seed;
      return run_train(train_args);
    }
    if (mi->parsed()) {
      if (preset_opt->count() > 0) {
        ctclab::MineConfig preset_cfg;
        if (mi_preset == "paper-a5-input") preset_cfg = ctclab::MineConfig::paper_a5_input();
        if (mi_preset == "paper-a5-label") preset_cfg = ctclab::MineConfig::paper_a5_label();
        // Explicit flags override the preset.
        if (hd->count() == 0) mi_args.config.hidden_dim = preset_cfg.hidden_dim;
        if (lc->count() == 0) mi_args.config.layer_count = preset_cfg.layer_count;
        if (bs->count() == 0) mi_args.config.batch_size = preset_cfg.batch_size;
        if (lr->count() == 0) mi_args.config.learning_rate = preset_cfg.learning_rate;
        if (ts->count() == 0) mi_args.config.train_steps = preset_cfg.train_steps;
        if (ed->count() == 0) mi_args.config.ema_decay = preset_cfg.ema_decay;
      }
      return run_mi(mi_args);
    }
    if (report->parsed()) return run_report(report_files);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
