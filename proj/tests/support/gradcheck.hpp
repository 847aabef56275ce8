// Copyright 2026 The akd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "akd/ops.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd::test {

// Central-difference oracle for reverse-mode gradients, run at double so
// the finite-difference truncation error dominates rounding error.
//
// The function under test maps input tensors to one output tensor of any
// shape; the harness contracts that output against a fixed random weight
// tensor to obtain the scalar whose gradient is checked. Every element of
// the output therefore contributes to the comparison.
struct GradCheck {
  using Fn = std::function<TensorT<double>(const std::vector<TensorT<double>>&)>;

  double step = 1e-4;

  // Largest |fd - analytic| over all inputs, relative to the gradient scale.
  double max_rel_err(const Fn& fn, std::vector<VariableT<double>>& vars, Rng& rng) const {
    // Fixed contraction weights, chosen once per call.
    std::vector<double> weights;
    {
      std::vector<TensorT<double>> xs;
      xs.reserve(vars.size());
      for (auto& v : vars) xs.push_back(v.constant());
      const TensorT<double> out = fn(xs);
      weights.resize(out.numel());
      for (double& w : weights) w = uniform_range(rng, -1.0, 1.0);
    }
    auto loss_value = [&](void) -> double {
      std::vector<TensorT<double>> xs;
      xs.reserve(vars.size());
      for (auto& v : vars) xs.push_back(v.constant());
      const TensorT<double> out = fn(xs);
      double acc = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) acc += out.values()[i] * weights[i];
      return acc;
    };

    // Analytic pass.
    std::vector<std::vector<double>> analytic;
    {
      Tape<double> tape;
      std::vector<TensorT<double>> xs;
      xs.reserve(vars.size());
      for (auto& v : vars) {
        v.zero_grad();
        xs.push_back(v.use(tape));
      }
      const TensorT<double> out = fn(xs);
      const TensorT<double> w(out.shape(), weights);
      const TensorT<double> loss = sum(mul(out, w));
      tape.backward(loss);
      for (auto& v : vars) analytic.push_back(v.grad());
    }

    // Finite differences, one coordinate at a time.
    double worst = 0.0;
    for (std::size_t vi = 0; vi < vars.size(); ++vi) {
      auto& vals = vars[vi].values();
      double max_fd = 0.0, max_an = 0.0;
      std::vector<double> fd(vals.size());
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + step;
        const double up = loss_value();
        vals[i] = keep - step;
        const double dn = loss_value();
        vals[i] = keep;
        fd[i] = (up - dn) / (2.0 * step);
        max_fd = std::max(max_fd, std::abs(fd[i]));
        max_an = std::max(max_an, std::abs(analytic[vi][i]));
      }
      const double denom = std::max({max_fd, max_an, 1e-8});
      for (std::size_t i = 0; i < vals.size(); ++i) {
        worst = std::max(worst, std::abs(fd[i] - analytic[vi][i]) / denom);
      }
    }
    return worst;
  }
};

inline VariableT<double> random_var(const std::string& name, Shape shape, Rng& rng, double lo = -1.5,
                                    double hi = 1.5) {
  std::vector<double> init(shape_numel(shape));
  for (double& x : init) x = uniform_range(rng, lo, hi);
  return VariableT<double>(name, std::move(shape), std::move(init));
}

}  // namespace akd::test
