// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/explainer.hpp"

#include <cmath>
#include <sstream>

#include "shapgraph/error.hpp"
#include "shapgraph/serialize.hpp"

namespace shapgraph {

namespace {

const std::string& meta(const GraphModel& g, const std::string& key) {
  auto it = g.metadata.find(key);
  if (it == g.metadata.end()) {
    throw ValidationError("graph '" + g.name + "' is not an explainer: metadata '" + key +
                          "' is missing");
  }
  return it->second;
}

int64_t meta_int(const GraphModel& g, const std::string& key) {
  const std::string& s = meta(g, key);
  try {
    size_t used = 0;
    const int64_t v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("metadata '" + key + "' is not an integer: '" + s + "'");
}

void write_info(GraphModel& g, const ArtifactInfo& info) {
  auto& m = g.metadata;
  m["scheme"] = std::string(scheme_name(info.scheme));
  m["source_model"] = info.source_model;
  m["explained_input"] = info.explained_input;
  m["explained_output"] = info.explained_output;
  m["prediction_output"] = info.prediction_output;
  m["attribution_output"] = info.attribution_output;
  m["output_index"] = std::to_string(info.output_index);
  m["reference_count"] = std::to_string(info.reference_count);
  m["eps_act"] = format_double(info.eps_act);
  m["eps_pool"] = format_double(info.eps_pool);
  m["reference_output_mean"] = format_double(info.reference_output_mean);
  m["reference_digest"] = info.reference_digest;
}

std::string digest_of(GraphModel g) {
  g.metadata.erase("build_digest");
  return sha256_hex(save_model(g));
}

}  // namespace

ArtifactInfo read_artifact_info(const GraphModel& g) {
  ArtifactInfo info;
  info.scheme = parse_scheme(meta(g, "scheme"));
  info.source_model = meta(g, "source_model");
  info.explained_input = meta(g, "explained_input");
  info.explained_output = meta(g, "explained_output");
  info.prediction_output = meta(g, "prediction_output");
  info.attribution_output = meta(g, "attribution_output");
  info.output_index = meta_int(g, "output_index");
  info.reference_count = meta_int(g, "reference_count");
  info.eps_act = parse_double(meta(g, "eps_act"));
  info.eps_pool = parse_double(meta(g, "eps_pool"));
  info.reference_output_mean = parse_double(meta(g, "reference_output_mean"));
  info.reference_digest = meta(g, "reference_digest");
  info.build_digest = meta(g, "build_digest");
  return info;
}

ExplainerArtifact compile(const GraphModel& model, const Tensor& references, Scheme scheme,
                          const CompileOptions& options) {
  const PreparedModel prepared = prepare_model(model, options.output_name);
  const ReferenceCache cache = precompute_reference_cache(prepared.folded, references);

  ExplainerArtifact a;
  a.graph = scheme == Scheme::kOptimized ? build_optimized(prepared, cache, options)
                                         : build_naive(prepared, references, options);
  ArtifactInfo& info = a.info;
  info.scheme = scheme;
  info.source_model = model.name;
  info.explained_input = prepared.graph.explained_input;
  info.explained_output = prepared.graph.explained_output;
  info.prediction_output = a.graph.outputs.at(0).name;
  info.attribution_output = a.graph.outputs.at(1).name;
  info.output_index = options.output_index;
  info.reference_count = cache.reference_count;
  info.eps_act = options.eps_act;
  info.eps_pool = options.eps_pool;
  info.reference_digest = cache.reference_digest;

  const Tensor& ref_out = cache.activations.at(prepared.graph.explained_output);
  const int64_t per_row = ref_out.size() / cache.reference_count;
  double sum = 0.0;
  for (int64_t b = 0; b < cache.reference_count; ++b) {
    sum += ref_out.at(b * per_row + options.output_index);
  }
  info.reference_output_mean = sum / static_cast<double>(cache.reference_count);

  write_info(a.graph, info);
  info.build_digest = digest_of(a.graph);
  a.graph.metadata["build_digest"] = info.build_digest;
  return a;
}

Explainer::Explainer(ExplainerArtifact artifact)
    : artifact_(std::move(artifact)), session_(std::make_shared<const Session>(artifact_.graph)) {}

Attribution Explainer::explain(const Tensor& x) const {
  const ArtifactInfo& info = artifact_.info;
  const ValueSpec& spec = artifact_.graph.inputs.at(0);
  if (x.shape() != spec.shape) {
    throw ShapeError("explain expects input " + shape_to_string(spec.shape) + ", got " +
                     shape_to_string(x.shape()));
  }
  if (x.dtype() != spec.dtype) {
    throw ShapeError("explain expects " + std::string(dtype_name(spec.dtype)) + " input");
  }
  ExecutionResult r = session_->run({{spec.name, x}});
  Attribution a;
  a.phi = std::move(r.outputs.at(info.attribution_output));
  a.prediction = std::move(r.outputs.at(info.prediction_output));
  a.output_value = a.prediction.at(info.output_index);
  double total = 0.0;
  for (int64_t i = 0; i < a.phi.size(); ++i) total += a.phi.at(i);
  a.residual = std::abs(total - (a.output_value - info.reference_output_mean));
  return a;
}

Attribution explain(const ExplainerArtifact& artifact, const Tensor& x) {
  return Explainer(artifact).explain(x);
}

double completeness_residual(const Tensor& phi, double y_x, std::span<const double> y_refs) {
  if (y_refs.empty()) throw ValidationError("completeness needs at least one reference output");
  double total = 0.0;
  for (int64_t i = 0; i < phi.size(); ++i) total += phi.at(i);
  double delta = 0.0;
  for (double r : y_refs) delta += y_x - r;
  delta /= static_cast<double>(y_refs.size());
  return std::abs(total - delta);
}

double completeness_check(const Attribution& attribution, double y_x,
                          std::span<const double> y_refs) {
  return completeness_residual(attribution.phi, y_x, y_refs);
}

ExplainerArtifact artifact_from_graph(GraphModel graph) {
  validate(graph);
  ExplainerArtifact a;
  a.info = read_artifact_info(graph);
  a.graph = std::move(graph);
  if (a.graph.inputs.size() != 1 || a.graph.outputs.size() != 2) {
    throw ValidationError("explainer graphs have one input and two outputs");
  }
  return a;
}

void save_artifact(const std::filesystem::path& path, const ExplainerArtifact& artifact) {
  write_model_file(path, artifact.graph);
}

ExplainerArtifact load_artifact(const std::filesystem::path& path) {
  return artifact_from_graph(read_model_file(path));
}

bool verify_build_digest(const ExplainerArtifact& artifact) {
  return digest_of(artifact.graph) == artifact.info.build_digest;
}

std::string attribution_pgm(const Tensor& phi) {
  const Shape& s = phi.shape();
  int64_t channels = 1, h = 0, w = 0;
  if (s.size() == 4) {
    channels = s[1];
    h = s[2];
    w = s[3];
  } else if (s.size() == 3) {
    h = s[1];
    w = s[2];
  } else if (s.size() == 2) {
    h = 1;
    w = s[1];
  } else {
    throw ShapeError("cannot render attributions of shape " + shape_to_string(s));
  }
  std::vector<double> mag(static_cast<size_t>(h * w), 0.0);
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t i = 0; i < h * w; ++i) mag[i] += std::abs(phi.at(c * h * w + i));
  }
  double top = 0.0;
  for (double m : mag) top = std::max(top, m);
  std::ostringstream os;
  os << "P5\n" << w << ' ' << h << "\n255\n";
  for (double m : mag) {
    const double level = top > 0 ? std::round(255.0 * m / top) : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(level)));
  }
  return os.str();
}

}  // namespace shapgraph
