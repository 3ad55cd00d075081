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

#include "ctclab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ctclab {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "max rel err " << max_rel_err << (ok() ? " <= " : " > ") << tolerance;
  for (const GradCheckEntry& e : per_param) {
    if (e.max_rel_err > tolerance) {
      os << "; " << e.name << "[" << e.worst_index << "] analytic=" << e.analytic
         << " numeric=" << e.numeric;
    }
  }
  return os.str();
}

GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  ParamSet& params,
                                  const std::vector<Matrix>& analytic,
                                  double tolerance, double step) {
  if (tolerance <= 0.0) throw std::invalid_argument("finite_diff_check: tolerance must be > 0");
  if (analytic.size() != params.size())
    throw std::invalid_argument("finite_diff_check: analytic gradient count mismatch");

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params.tensors[t];
    if (!p.same_shape(analytic[t]))
      throw std::invalid_argument("finite_diff_check: shape mismatch for " + params.names[t]);
    GradCheckEntry entry;
    entry.name = params.names[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + step;
      const double plus = loss_fn();
      p.data[i] = saved - step;
      const double minus = loss_fn();
      p.data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[t].data[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 0.01});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ctclab
