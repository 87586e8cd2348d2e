// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_ORACLE_HPP_
#define SHAPGRAPH_ORACLE_HPP_

#include <string>

#include "shapgraph/grad_rules.hpp"
#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

struct OracleOptions {
  std::string output_name;  // empty: first output
  int64_t output_index = 0;
  double eps_act = kDefaultEpsAct;
  double eps_pool = kDefaultEpsPool;
};

// Reference implementation of the multiplier rules, evaluated numerically
// layer by layer from the captured activations of one input row `x` and one
// reference row `r`. Shares no code with graph emission. Returns the
// multipliers of the input, shaped like `x`, in float64.
Tensor deeplift_multipliers(const GraphModel& model, const Tensor& x, const Tensor& r,
                            const OracleOptions& options = {});

// mean_b m_b * (x - r_b) over the reference rows, in float64.
Tensor deeplift_oracle(const GraphModel& model, const Tensor& x, const Tensor& references,
                       const OracleOptions& options = {});

// Central-difference gradient of one output coordinate with respect to `x`.
Tensor finite_diff(const GraphModel& model, const Tensor& x, int64_t output_index, double h = 1e-4,
                   const std::string& output_name = "");

// Elementwise |a - b| < atol + rtol * |b| (b is the reference side).
struct ClosenessReport {
  int64_t count = 0;
  int64_t within = 0;
  double fraction = 1.0;  // within / count
  double atol = 0.0, rtol = 0.0;
  int64_t worst_index = -1;  // largest excess over the bound
  double worst_a = 0.0, worst_b = 0.0;
  double worst_excess = 0.0;  // |a-b| - bound at worst_index (< 0 when within)
  double max_abs_diff = 0.0;
  bool all_within() const { return within == count; }
};

ClosenessReport compare_attributions(const Tensor& a, const Tensor& b, double atol, double rtol);

}  // namespace shapgraph

#endif  // SHAPGRAPH_ORACLE_HPP_
