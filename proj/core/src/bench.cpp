// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/bench.hpp"

#include <chrono>
#include <sstream>

#include "json.hpp"

namespace shapgraph {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchReport bench_explainer(const ExplainerArtifact& artifact, const std::vector<Tensor>& images) {
  BenchReport r;
  r.scheme = std::string(scheme_name(artifact.info.scheme));
  r.reference_count = artifact.info.reference_count;
  r.images = static_cast<int64_t>(images.size());
  // Runner construction (scheduling, lifetime analysis) belongs to the cold start.
  const auto t0 = std::chrono::steady_clock::now();
  const Explainer explainer(artifact);
  double setup = ms_since(t0);
  double sum = 0.0;
  for (size_t i = 0; i < images.size(); ++i) {
    const auto t = std::chrono::steady_clock::now();
    const Attribution a = explainer.explain(images[i]);
    const double ms = ms_since(t) + (i == 0 ? setup : 0.0);
    r.per_image_ms.push_back(ms);
    if (i == 0) {
      r.cold_start_ms = ms;
    } else {
      sum += ms;
    }
  }
  if (images.size() > 1) r.mean_ms = sum / static_cast<double>(images.size() - 1);
  return r;
}

std::string format_bench_report(const BenchReport& r) {
  std::ostringstream os;
  os << r.scheme << " B=" << r.reference_count << " images=" << r.images;
  if (r.compile_ms > 0) os << " compile_ms=" << r.compile_ms;
  os << " cold_start_ms=" << r.cold_start_ms << " mean_ms=";
  if (r.mean_ms) {
    os << *r.mean_ms;
  } else {
    os << "-";
  }
  return os.str();
}

std::string bench_report_json(const std::vector<BenchReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["scheme"] = r.scheme;
    j["reference_count"] = r.reference_count;
    j["images"] = r.images;
    j["compile_ms"] = r.compile_ms;
    j["cold_start_ms"] = r.cold_start_ms;
    j["mean_ms"] = r.mean_ms ? nlohmann::json(*r.mean_ms) : nlohmann::json(nullptr);
    j["per_image_ms"] = r.per_image_ms;
    out.push_back(j);
  }
  return out.dump(2);
}

}  // namespace shapgraph
