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

#include <functional>
#include <string>
#include <vector>

#include "ctclab/mlp.hpp"

namespace ctclab {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_err = 0.0;
  double tolerance = 0.0;

  bool ok() const { return max_rel_err <= tolerance; }
  std::string summary() const;
};

// Central-difference comparison of `analytic` against d loss_fn / d params.
// loss_fn must be a deterministic function of the current parameter values
// (read through the ParamSet views). Relative error uses
// |a - n| / max(|a|, |n|, 0.01) so that near-zero gradients are judged on
// an absolute scale safely above the h^2 differencing noise.
GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  ParamSet& params,
                                  const std::vector<Matrix>& analytic,
                                  double tolerance, double step = 1e-5);

}  // namespace ctclab
