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

#include "ctclab/mlp.hpp"

namespace ctclab {

// Versioned binary model blob: magic bytes "CTCLAB01", then shapes and
// row-major 64-bit parameters for every backbone layer and the head.
inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'C', 'L', 'A', 'B', '0', '1'};

struct Checkpoint {
  Mlp backbone;
  LinearHead head;
};

void save_checkpoint(const std::string& path, const Mlp& backbone, const LinearHead& head);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ctclab
