// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_BENCH_HPP_
#define SHAPGRAPH_BENCH_HPP_

#include <optional>
#include <string>
#include <vector>

#include "shapgraph/explainer.hpp"

namespace shapgraph {

struct BenchReport {
  std::string scheme;
  int64_t reference_count = 0;
  int64_t images = 0;
  double compile_ms = 0.0;
  // The first explanation; kept out of the mean.
  double cold_start_ms = 0.0;
  // Mean over images 2..N; empty when N == 1.
  std::optional<double> mean_ms;
  std::vector<double> per_image_ms;
};

// Explains `images` one after another with a fresh runner over `artifact`.
BenchReport bench_explainer(const ExplainerArtifact& artifact, const std::vector<Tensor>& images);

std::string format_bench_report(const BenchReport& report);
std::string bench_report_json(const std::vector<BenchReport>& reports);

}  // namespace shapgraph

#endif  // SHAPGRAPH_BENCH_HPP_
