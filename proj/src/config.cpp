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

#include "ctclab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctclab {

namespace {

const char* const kKnownSections[] = {"data", "model", "stage1", "stage2", "eval", "mi"};

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void key_error(const std::string& section, const ConfigEntry& entry,
                            const std::string& reason) {
  const std::string where =
      entry.line > 0 ? "line " + std::to_string(entry.line) : "override";
  throw std::invalid_argument("config: " + reason + " '" + section + "." + entry.key +
                              "' (" + where + ")");
}

double to_double(const std::string& section, const ConfigEntry& e) {
  double v = 0.0;
  const std::string s = trim(e.value);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    key_error(section, e, "non-numeric value for");
  return v;
}

long long to_int(const std::string& section, const ConfigEntry& e) {
  long long v = 0;
  const std::string s = trim(e.value);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    key_error(section, e, "non-integer value for");
  return v;
}

std::size_t to_count(const std::string& section, const ConfigEntry& e) {
  const long long v = to_int(section, e);
  if (v < 0) key_error(section, e, "negative value for");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> to_count_list(const std::string& section, const ConfigEntry& e) {
  std::vector<std::size_t> out;
  std::istringstream is(trim(e.value));
  std::string cell;
  while (std::getline(is, cell, ',')) {
    cell = trim(cell);
    std::size_t v = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      key_error(section, e, "non-integer list entry for");
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<ConfigEntry>& ParsedConfig::section(const std::string& name) {
  for (auto& [sec, entries] : sections)
    if (sec == name) return entries;
  sections.emplace_back(name, std::vector<ConfigEntry>{});
  return sections.back().second;
}

ParsedConfig parse_config_text(const std::string& text, const std::string& origin) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line;
  std::string current_section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument(origin + ": malformed section header at line " +
                                    std::to_string(line_no));
      current_section = trim(t.substr(1, t.size() - 2));
      const bool known = std::any_of(std::begin(kKnownSections), std::end(kKnownSections),
                                     [&](const char* s) { return current_section == s; });
      if (!known)
        throw std::invalid_argument(origin + ": unknown section '" + current_section +
                                    "' at line " + std::to_string(line_no));
      out.section(current_section);
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ": expected 'key = value' at line " +
                                  std::to_string(line_no));
    if (current_section.empty())
      throw std::invalid_argument(origin + ": key outside any section at line " +
                                  std::to_string(line_no));
    ConfigEntry entry;
    entry.key = trim(t.substr(0, eq));
    entry.value = trim(t.substr(eq + 1));
    entry.line = line_no;
    if (entry.key.empty())
      throw std::invalid_argument(origin + ": empty key at line " + std::to_string(line_no));
    out.section(current_section).push_back(std::move(entry));
  }
  return out;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(ParsedConfig& config, const std::string& spec) {
  const std::size_t dot = spec.find('.');
  const std::size_t eq = spec.find('=');
  if (dot == std::string::npos || eq == std::string::npos || dot > eq)
    throw std::invalid_argument("override must look like section.key=value, got '" + spec + "'");
  const std::string section = trim(spec.substr(0, dot));
  const bool known = std::any_of(std::begin(kKnownSections), std::end(kKnownSections),
                                 [&](const char* s) { return section == s; });
  if (!known) throw std::invalid_argument("override names unknown section '" + section + "'");
  ConfigEntry entry;
  entry.key = trim(spec.substr(dot + 1, eq - dot - 1));
  entry.value = trim(spec.substr(eq + 1));
  entry.line = 0;
  if (entry.key.empty())
    throw std::invalid_argument("override has an empty key: '" + spec + "'");
  config.section(section).push_back(std::move(entry));
}

RunSpec build_run_spec(const ParsedConfig& config) {
  RunSpec spec;
  TrainConfig& t = spec.train;

  for (const auto& [section, entries] : config.sections) {
    if (section == "data") {
      // `targets` declares the names; each name then owns <name>_train and
      // <name>_test path keys. Two passes keep declaration order free.
      std::vector<std::string> target_names;
      for (const ConfigEntry& e : entries) {
        if (e.key == "targets") {
          std::istringstream is(e.value);
          std::string name;
          while (std::getline(is, name, ',')) {
            name = trim(name);
            if (!name.empty()) target_names.push_back(name);
          }
        }
      }
      for (const std::string& name : target_names)
        spec.data.targets.push_back({name, "", ""});
      for (const ConfigEntry& e : entries) {
        if (e.key == "targets") continue;
        if (e.key == "source_train") {
          spec.data.source_train = e.value;
        } else if (e.key == "source_test") {
          spec.data.source_test = e.value;
        } else {
          bool matched = false;
          for (TargetPaths& tp : spec.data.targets) {
            if (e.key == tp.name + "_train") {
              tp.train = e.value;
              matched = true;
            } else if (e.key == tp.name + "_test") {
              tp.test = e.value;
              matched = true;
            }
          }
          if (!matched) key_error(section, e, "unknown key");
        }
      }
    } else if (section == "model") {
      for (const ConfigEntry& e : entries) {
        if (e.key == "seed") {
          t.seed = static_cast<std::uint64_t>(to_int(section, e));
          spec.seed_set = true;
        } else if (e.key == "batch_size") {
          t.batch_size = to_count(section, e);
        } else if (e.key == "hidden_dims") {
          t.hidden_dims = to_count_list(section, e);
        } else if (e.key == "rep_dim") {
          t.rep_dim = to_count(section, e);
        } else if (e.key == "augment_strength") {
          t.augment_strength = to_double(section, e);
        } else {
          key_error(section, e, "unknown key");
        }
      }
    } else if (section == "stage1" || section == "stage2") {
      const bool s1 = section == "stage1";
      StageOptim& opt = s1 ? t.stage1 : t.stage2;
      for (const ConfigEntry& e : entries) {
        if (e.key == "epochs") {
          (s1 ? t.stage1_epochs : t.stage2_epochs) = to_count(section, e);
        } else if (e.key == "lr_init") {
          opt.lr_init = to_double(section, e);
        } else if (e.key == "lr_min") {
          opt.lr_min = to_double(section, e);
        } else if (e.key == "momentum") {
          opt.momentum = to_double(section, e);
        } else if (e.key == "weight_decay") {
          opt.weight_decay = to_double(section, e);
        } else if (e.key == "schedule_epochs") {
          opt.schedule_epochs = to_count(section, e);
        } else if (e.key == "tau") {
          (s1 ? t.loss.tau_stage1 : t.loss.tau_stage2) = to_double(section, e);
        } else if (s1 && e.key == "alpha") {
          t.loss.alpha = to_double(section, e);
        } else if (!s1 && e.key == "beta") {
          t.loss.beta = to_double(section, e);
        } else if (s1 && e.key == "bank_momentum") {
          t.bank_momentum = to_double(section, e);
        } else if (s1 && e.key == "negatives") {
          if (trim(e.value) == "all") {
            t.loss.negatives_per_anchor = kAllKeys;
          } else {
            const long long k = to_int(section, e);
            if (k < 1) key_error(section, e, "negatives must be 'all' or >= 1 for");
            t.loss.negatives_per_anchor = static_cast<long>(k);
          }
        } else {
          key_error(section, e, "unknown key");
        }
      }
    } else if (section == "eval") {
      for (const ConfigEntry& e : entries) {
        if (e.key == "eval_every") {
          t.eval_every = to_count(section, e);
        } else if (e.key == "checkpoint_every") {
          t.checkpoint_every = to_count(section, e);
        } else if (e.key == "probe_steps") {
          t.probe.steps = to_count(section, e);
        } else if (e.key == "probe_batch_size") {
          t.probe.batch_size = to_count(section, e);
        } else if (e.key == "probe_lr") {
          t.probe.lr_init = to_double(section, e);
        } else if (e.key == "probe_decay_factor") {
          t.probe.lr_decay_factor = to_double(section, e);
        } else if (e.key == "probe_decay_steps") {
          t.probe.decay_steps = to_count_list(section, e);
        } else {
          key_error(section, e, "unknown key");
        }
      }
    } else if (section == "mi") {
      for (const ConfigEntry& e : entries) {
        if (e.key == "every") {
          t.mi_every = to_count(section, e);
        } else if (e.key == "preset") {
          const std::string v = trim(e.value);
          if (v == "desk") {
            t.mine = MineConfig{};
          } else if (v == "paper-a5-input") {
            t.mine = MineConfig::paper_a5_input();
          } else if (v == "paper-a5-label") {
            t.mine = MineConfig::paper_a5_label();
          } else {
            key_error(section, e, "unknown preset value for");
          }
        } else if (e.key == "hidden_dim") {
          t.mine.hidden_dim = to_count(section, e);
        } else if (e.key == "layer_count") {
          t.mine.layer_count = to_count(section, e);
        } else if (e.key == "batch_size") {
          t.mine.batch_size = to_count(section, e);
        } else if (e.key == "learning_rate") {
          t.mine.learning_rate = to_double(section, e);
        } else if (e.key == "train_steps") {
          t.mine.train_steps = to_count(section, e);
        } else if (e.key == "ema_decay") {
          t.mine.ema_decay = to_double(section, e);
        } else if (e.key == "eval_sample_cap") {
          t.mine.eval_sample_cap = to_count(section, e);
        } else {
          key_error(section, e, "unknown key");
        }
      }
    }
  }

  if (spec.data.source_train.empty() || spec.data.source_test.empty())
    throw std::invalid_argument("config: [data] must set source_train and source_test");
  for (const TargetPaths& tp : spec.data.targets) {
    if (tp.train.empty() || tp.test.empty())
      throw std::invalid_argument("config: [data] target '" + tp.name +
                                  "' is missing its _train or _test path");
  }
  spec.train.validate();
  return spec;
}

RunData load_run_data(const DataPaths& paths) {
  auto load = [](const std::string& path, const std::string& name, const char* split) {
    Dataset ds = load_matrix_csv(path);
    ds.name = name;
    ds.split = split;
    return ds;
  };
  RunData data;
  data.source.train = load(paths.source_train, "source", "train");
  data.source.test = load(paths.source_test, "source", "test");
  // The classifier head sizes off the union of train/test label ranges.
  data.source.train.class_count =
      std::max(data.source.train.class_count, data.source.test.class_count);
  data.source.test.class_count = data.source.train.class_count;
  for (const TargetPaths& tp : paths.targets) {
    NamedDatasetPair named;
    named.name = tp.name;
    named.data.train = load(tp.train, tp.name, "train");
    named.data.test = load(tp.test, tp.name, "test");
    const int classes = std::max(named.data.train.class_count, named.data.test.class_count);
    named.data.train.class_count = classes;
    named.data.test.class_count = classes;
    data.targets.push_back(std::move(named));
  }
  return data;
}

}  // namespace ctclab
