// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_EXPLAINER_HPP_
#define SHAPGRAPH_EXPLAINER_HPP_

#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "shapgraph/executor.hpp"
#include "shapgraph/model.hpp"
#include "shapgraph/ref_optimizer.hpp"

namespace shapgraph {

// Facts about an explainer graph, stored in its metadata block.
struct ArtifactInfo {
  Scheme scheme = Scheme::kOptimized;
  std::string source_model;
  std::string explained_input;
  std::string explained_output;
  std::string prediction_output;
  std::string attribution_output;
  int64_t output_index = 0;
  int64_t reference_count = 0;
  double eps_act = kDefaultEpsAct;
  double eps_pool = kDefaultEpsPool;
  // Mean over the references of the explained output coordinate.
  double reference_output_mean = 0.0;
  std::string reference_digest;
  std::string build_digest;  // SHA-256 of the graph serialized without this field
};

struct ExplainerArtifact {
  GraphModel graph;
  ArtifactInfo info;
};

ArtifactInfo read_artifact_info(const GraphModel& graph);

// Compiles `model` and a fixed reference set [B, ...] into a one-shot graph
// mapping one input row to (prediction, attributions).
ExplainerArtifact compile(const GraphModel& model, const Tensor& references,
                          Scheme scheme = Scheme::kOptimized, const CompileOptions& options = {});

struct Attribution {
  Tensor phi;                 // shaped like one input row, batch axis kept
  Tensor prediction;          // one output row
  double output_value = 0.0;  // prediction at the explained index
  // |sum(phi) - (output_value - reference_output_mean)|
  double residual = 0.0;
};

// Reusable runner over a loaded artifact.
class Explainer {
 public:
  explicit Explainer(ExplainerArtifact artifact);
  const ArtifactInfo& info() const { return artifact_.info; }
  const GraphModel& graph() const { return artifact_.graph; }
  Attribution explain(const Tensor& x) const;

 private:
  ExplainerArtifact artifact_;
  std::shared_ptr<const Session> session_;
};

Attribution explain(const ExplainerArtifact& artifact, const Tensor& x);

// |sum(phi) - mean_b(y_x - y_refs[b])|, summing phi in index order.
double completeness_residual(const Tensor& phi, double y_x, std::span<const double> y_refs);
double completeness_check(const Attribution& attribution, double y_x,
                          std::span<const double> y_refs);

void save_artifact(const std::filesystem::path& path, const ExplainerArtifact& artifact);
ExplainerArtifact load_artifact(const std::filesystem::path& path);
ExplainerArtifact artifact_from_graph(GraphModel graph);

// Recomputes the build digest; false if the graph was altered after compile.
bool verify_build_digest(const ExplainerArtifact& artifact);

// Binary PGM heat map of |phi| summed over channels (input laid out
// [1, C, H, W] or [1, H, W]); gray 0..255 scaled to the largest magnitude.
std::string attribution_pgm(const Tensor& phi);

}  // namespace shapgraph

#endif  // SHAPGRAPH_EXPLAINER_HPP_
