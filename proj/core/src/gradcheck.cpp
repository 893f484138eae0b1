// Copyright 2026 The hsdssa Authors.
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

#include "hsdssa/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hsdssa/attention.hpp"
#include "hsdssa/random.hpp"

namespace hsdssa {

Bindings finite_difference_gradient(const Graph& g, const Bindings& leaves, double h) {
  Bindings grads;
  Bindings probe = leaves;
  for (const auto& [name, value] : leaves) {
    Tensor grad(value.shape());
    Tensor& slot = probe.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      slot[i] = orig + h;
      const double up = g.evaluate(probe);
      slot[i] = orig - h;
      const double down = g.evaluate(probe);
      slot[i] = orig;
      grad[i] = (up - down) / (2.0 * h);
    }
    grads[name] = std::move(grad);
  }
  return grads;
}

GradientComparison compare_gradients(const Graph& g, const Bindings& leaves, double h,
                                     double min_magnitude) {
  const Bindings analytic = g.gradient(leaves);
  const Bindings numeric = finite_difference_gradient(g, leaves, h);
  GradientComparison cmp;
  for (const auto& [name, a] : analytic) {
    const Tensor& n = numeric.at(name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i]) <= min_magnitude) continue;
      const double rel = std::abs(a[i] - n[i]) / std::max(std::abs(a[i]), std::abs(n[i]));
      ++cmp.components_checked;
      if (cmp.worst.empty() || rel > cmp.max_rel_error) {
        cmp.max_rel_error = rel;
        cmp.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return cmp;
}

DssaGradcheckReport run_dssa_gradcheck(const DssaGradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  DssaGradcheckReport report;
  Rng rng(options.seed);
  while (report.instances.size() < options.instances) {
    const std::size_t idx = report.instances.size();
    const std::size_t C = 1 + rng.index(3);
    const std::size_t T = 2 + rng.index(5);
    const std::size_t W = 2 + rng.index(3);
    const std::size_t kernel = idx % 2 == 0 ? 1 : 3;
    DSSAConfig cfg = DSSAConfig::random(C, W, kernel, rng);
    if (idx % 3 == 2) cfg.topk = 1 + rng.index(T);
    // Non-trivial affine parameters so every leaf carries gradient.
    for (auto* a : {&cfg.head_gamma, &cfg.head_beta, &cfg.out_gamma, &cfg.out_beta}) {
      for (auto& v : a->data()) v = rng.uniform(0.5, 1.5);
    }
    const Tensor x = rng.uniform_tensor({C, T, W}, -1.0, 1.0);

    const DSSAResult probe = dssa_forward(cfg, x);
    double min_score = INFINITY;
    for (double s : probe.scores.data()) min_score = std::min(min_score, s * s);
    if (min_score < options.min_score_magnitude) continue;
    if (cfg.topk) {
      // Keep the mask locally constant: no near-ties at the k-th value.
      bool separated = true;
      for (std::size_t c = 0; c < C && separated; ++c) {
        for (std::size_t r = 0; r < T && separated; ++r) {
          std::vector<double> row(T);
          for (std::size_t j = 0; j < T; ++j) row[j] = probe.scores(c, r, j);
          std::sort(row.begin(), row.end());
          for (std::size_t j = 1; j < T; ++j) separated &= row[j] - row[j - 1] > 1e-3;
        }
      }
      if (!separated) continue;
    }

    Graph g;
    const Var y = dssa_graph(g, cfg, T);
    const Var r = g.leaf("projection");
    g.set_output(g.sum(g.mul(y, r)));
    Bindings leaves = dssa_bindings(cfg, x);
    leaves["projection"] = rng.uniform_tensor({C, T, W}, -1.0, 1.0);

    GradientComparison cmp = compare_gradients(g, leaves, options.step);
    report.max_rel_error = std::max(report.max_rel_error, cmp.max_rel_error);
    report.labels.push_back("C=" + std::to_string(C) + " T=" + std::to_string(T) +
                            " W=" + std::to_string(W) + " kernel=" + std::to_string(kernel) +
                            (cfg.topk ? " topk=" + std::to_string(*cfg.topk) : ""));
    report.instances.push_back(std::move(cmp));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace hsdssa
