// Copyright 2026 The DUNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef DUNET_GRADCHECK_HPP_
#define DUNET_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dunet/tensor.hpp"

namespace dunet {

// A scalar function of some tensors together with its claimed gradient.
struct GradcheckProblem {
  std::vector<std::string> names;   // one per tensor in `wrt`
  std::vector<Tensor<double>*> wrt;  // perturbed in place, restored afterwards
  std::function<double()> loss;
  std::function<std::vector<Tensor<double>>()> analytic;  // same shapes as `wrt`
};

struct GradcheckSuite {
  std::string name;
  double tolerance = 1e-4;
  double step = 1e-3;
  // Builds a fresh problem; the problem may reference state owned by the closure.
  std::function<void(const std::function<void(GradcheckProblem&)>& check)> run;
};

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  std::string worst;  // "<tensor>[<flat index>]" of the largest error
  std::size_t checked = 0;
  double seconds = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

GradcheckResult run_gradcheck(const GradcheckSuite& suite);

std::vector<GradcheckSuite> default_gradcheck_suites(std::uint64_t seed = 0);

}  // namespace dunet

#endif  // DUNET_GRADCHECK_HPP_
