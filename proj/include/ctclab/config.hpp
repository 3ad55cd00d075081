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

#include <string>
#include <vector>

#include "ctclab/pipeline.hpp"

namespace ctclab {

// Flat sectioned key-value format:
//   # comment
//   [section]
//   key = value
// Sections are [data], [model], [stage1], [stage2], [eval], [mi].
// Unknown sections or keys are errors that name the offender and its line.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;  // 0 for --set overrides
};

struct ParsedConfig {
  std::vector<std::pair<std::string, std::vector<ConfigEntry>>> sections;

  std::vector<ConfigEntry>& section(const std::string& name);
};

ParsedConfig parse_config_text(const std::string& text, const std::string& origin);
ParsedConfig parse_config_file(const std::string& path);

// "section.key=value"
void apply_override(ParsedConfig& config, const std::string& spec);

struct TargetPaths {
  std::string name;
  std::string train;
  std::string test;
};

struct DataPaths {
  std::string source_train;
  std::string source_test;
  std::vector<TargetPaths> targets;
};

struct RunSpec {
  TrainConfig train;
  DataPaths data;
  bool seed_set = false;
};

RunSpec build_run_spec(const ParsedConfig& config);

// Reads every referenced CSV; a missing file surfaces with its path.
RunData load_run_data(const DataPaths& paths);

}  // namespace ctclab
