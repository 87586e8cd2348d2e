// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/ref_optimizer.hpp"

#include "shapgraph/autodiff.hpp"
#include "shapgraph/error.hpp"
#include "shapgraph/executor.hpp"
#include "shapgraph/graph_builder.hpp"
#include "shapgraph/serialize.hpp"
#include "shapgraph/transform.hpp"

namespace shapgraph {

std::string_view scheme_name(Scheme scheme) {
  return scheme == Scheme::kOptimized ? "optimized" : "naive";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "optimized") return Scheme::kOptimized;
  if (name == "naive") return Scheme::kNaive;
  throw ValidationError("unknown scheme '" + std::string(name) + "'");
}

void check_references(const GraphModel& model, const Tensor& references) {
  if (model.inputs.size() != 1) throw ValidationError("model must have exactly one input");
  const ValueSpec& spec = model.inputs[0];
  const Shape& s = references.shape();
  if (s.size() != spec.shape.size() || s.empty() || s[0] < 1) {
    throw ValidationError("references must have shape [B, ...] matching input '" + spec.name +
                          "' " + shape_to_string(spec.shape) + ", got " + shape_to_string(s));
  }
  for (size_t d = 1; d < s.size(); ++d) {
    if (s[d] != spec.shape[d]) {
      throw ValidationError("references " + shape_to_string(s) + " do not match input " +
                            shape_to_string(spec.shape));
    }
  }
  if (references.dtype() != spec.dtype) {
    throw ValidationError("references are " + std::string(dtype_name(references.dtype())) +
                          ", input is " + std::string(dtype_name(spec.dtype)));
  }
  if (!references.all_finite()) throw ValidationError("references contain non-finite values");
}

ReferenceCache precompute_reference_cache(const GraphModel& model, const Tensor& references) {
  check_references(model, references);
  const std::string& input = model.inputs[0].name;
  ExecutionResult run = execute(model, {{input, references}}, /*capture=*/true);
  ReferenceCache cache;
  cache.activations = std::move(*run.trace);
  cache.activations.insert_or_assign(input, references);
  cache.reference_count = references.shape()[0];
  cache.reference_digest = sha256_hex(references.raw_bytes());
  return cache;
}

PreparedModel prepare_model(const GraphModel& model, const std::string& output_name) {
  validate(model);
  if (model.inputs.size() != 1) {
    throw ValidationError("model '" + model.name + "' must have exactly one input");
  }
  PreparedModel p;
  p.folded = fold_constants(model);
  const std::string& input = p.folded.inputs[0].name;
  const std::string output = output_name.empty() ? p.folded.outputs.at(0).name : output_name;
  bool known = false;
  for (const auto& o : p.folded.outputs) known = known || o.name == output;
  if (!known) throw ValidationError("'" + output + "' is not a graph output");
  p.graph = build_backward_graph(p.folded, input, output);

  // Row independence: every differentiable value keeps a leading batch axis
  // that tracks the input's, and nothing else changes with the batch size.
  GraphModel relaxed = p.folded;
  if (relaxed.inputs[0].shape.empty()) throw UnsupportedOp("input '" + input + "' is a scalar");
  relaxed.inputs[0].shape[0] = kSymbolicBatch;
  ShapeMap s2;
  try {
    p.shapes = infer_shapes(relaxed, 1);
    s2 = infer_shapes(relaxed, 2);
  } catch (const ShapeError& e) {
    throw UnsupportedOp(std::string("model does not preserve the batch axis: ") + e.what());
  }
  for (const auto& v : p.graph.differentiable) {
    const Shape& a = p.shapes.at(v).shape;
    const Shape& b = s2.at(v).shape;
    bool ok = !a.empty() && a.size() == b.size() && a[0] == 1 && b[0] == 2;
    for (size_t d = 1; ok && d < a.size(); ++d) ok = a[d] == b[d];
    if (!ok) {
      throw UnsupportedOp("value '" + v + "' does not keep the batch axis leading (" +
                          shape_to_string(a) + " at batch 1, " + shape_to_string(b) +
                          " at batch 2)");
    }
  }
  return p;
}

namespace {

Shape with_rows(Shape s, int64_t rows) {
  s[0] = rows;
  return s;
}

std::vector<int64_t> row_repeats(size_t rank, int64_t rows) {
  std::vector<int64_t> r(rank, 1);
  r[0] = rows;
  return r;
}

std::string unused_name(const GraphModel& m, const std::string& want) {
  auto used = [&](const std::string& n) {
    if (m.initializers.count(n) || m.find_input(n)) return true;
    for (const auto& node : m.nodes) {
      for (const auto& o : node.outputs) {
        if (o == n) return true;
      }
    }
    return false;
  };
  std::string name = want;
  for (int i = 1; used(name); ++i) name = want + "_" + std::to_string(i);
  return name;
}

Tensor one_hot_seed(const PreparedModel& p, const CompileOptions& o, int64_t rows, DType dtype) {
  const Shape& out = p.shapes.at(p.graph.explained_output).shape;
  const int64_t per_row = element_count(out);
  if (o.output_index < 0 || o.output_index >= per_row) {
    throw ValidationError("output index " + std::to_string(o.output_index) +
                          " is outside output '" + p.graph.explained_output + "' of " +
                          std::to_string(per_row) + " elements per row");
  }
  std::vector<double> v(static_cast<size_t>(rows * per_row), 0.0);
  for (int64_t r = 0; r < rows; ++r) v[r * per_row + o.output_index] = o.seed_scale;
  return Tensor::from_values(dtype, with_rows(out, rows), v);
}

// Shared tail: backward pass, attribution reduction, output wiring, folding.
struct Assembly {
  const PreparedModel& p;
  GraphModel& art;
  GraphBuilder& b;
  ActivationSource& acts;
  const CompileOptions& options;
  DType dtype;

  void finish() {
    const std::string& x = p.graph.explained_input;
    const std::string& y = p.graph.explained_output;
    const size_t in_rank = p.shapes.at(x).shape.size();

    b.set_prefix("bwd/");
    const std::string seed = b.constant(one_hot_seed(p, options, acts.grad_rows(), dtype), "seed");
    RuleEnv env{
        b,    acts, p.folded, p.shapes, p.graph.differentiable, options.eps_act, options.eps_pool,
        dtype};
    const std::string m = differentiate(p.graph, seed, env).input_grad;

    b.set_prefix("out/");
    const std::string delta = acts.expand(b.add("Sub", {x, acts.reference(x)}), in_rank);
    const std::string phi = b.add("ReduceMean", {b.add("Mul", {m, delta})},
                                  {{"axes", std::vector<int64_t>{0}}, {"keepdims", int64_t{1}}});
    std::string prediction = acts.target(y);

    const std::string phi_name = unused_name(art, "attribution");
    rename_value(art, phi, phi_name);
    if (prediction != x) {
      const std::string pred_name = unused_name(art, "prediction");
      rename_value(art, prediction, pred_name);
      prediction = pred_name;
    }
    art.outputs = {{prediction, dtype, with_rows(p.shapes.at(y).shape, 1)},
                   {phi_name, dtype, with_rows(p.shapes.at(x).shape, 1)}};
    art = fold_constants(art);
    validate(art);
  }
};

GraphModel artifact_skeleton(const PreparedModel& p) {
  GraphModel art;
  art.name = p.folded.name + ".explainer";
  ValueSpec in = p.folded.inputs[0];
  in.shape[0] = 1;
  art.inputs = {in};
  art.initializers = p.folded.initializers;
  return art;
}

class CachedSource : public ActivationSource {
 public:
  CachedSource(GraphModel& art, const ReferenceCache& cache, DType dtype)
      : art_(art), cache_(cache), dtype_(dtype) {}
  std::string target(const std::string& v) override { return v; }
  std::string reference(const std::string& v) override {
    const std::string name = "ref/" + v;
    if (!art_.initializers.count(name)) {
      auto it = cache_.activations.find(v);
      if (it == cache_.activations.end()) {
        throw MissingCacheEntry("reference cache has no activations for '" + v + "'");
      }
      art_.initializers.emplace(name, it->second.cast(dtype_));
    }
    return name;
  }
  std::string expand(const std::string& v, size_t) override { return v; }
  int64_t reference_rows() const override { return cache_.reference_count; }
  int64_t grad_rows() const override { return cache_.reference_count; }

 private:
  GraphModel& art_;
  const ReferenceCache& cache_;
  DType dtype_;
};

class JointSource : public ActivationSource {
 public:
  JointSource(GraphBuilder& b, std::string input, std::string refs, int64_t rows)
      : b_(b), input_(std::move(input)), refs_(std::move(refs)), rows_(rows) {}
  std::string target(const std::string& v) override {
    return v == input_ ? input_ : pieces(v).front();
  }
  std::string reference(const std::string& v) override {
    return v == input_ ? refs_ : pieces(v).back();
  }
  std::string expand(const std::string& v, size_t rank) override {
    return b_.add("Tile", {v}, {{"repeats", row_repeats(rank, 2)}});
  }
  int64_t reference_rows() const override { return rows_; }
  int64_t grad_rows() const override { return 2 * rows_; }

 private:
  // Joint rows are [x]*B then the B references: keep one target row and the
  // reference block.
  const std::vector<std::string>& pieces(const std::string& v) {
    auto it = split_.find(v);
    if (it != split_.end()) return it->second;
    std::vector<int64_t> sizes{1, rows_ - 1, rows_};
    if (rows_ == 1) sizes = {1, 1};
    const size_t n = sizes.size();
    auto outs = b_.add_multi("Split", {"joint/" + v}, n,
                             {{"axis", int64_t{0}}, {"split", std::move(sizes)}});
    return split_.emplace(v, std::move(outs)).first->second;
  }

  GraphBuilder& b_;
  std::string input_;
  std::string refs_;
  int64_t rows_;
  std::map<std::string, std::vector<std::string>> split_;
};

}  // namespace

GraphModel build_optimized(const PreparedModel& p, const ReferenceCache& cache,
                           const CompileOptions& options) {
  const DType dtype = p.folded.inputs[0].dtype;
  GraphModel art = artifact_skeleton(p);
  for (size_t idx : topological_order(p.folded)) {
    Node n = p.folded.nodes[idx];
    n.name = "fwd/" + n.name;
    art.nodes.push_back(std::move(n));
  }
  GraphBuilder b(art, "bwd/");
  CachedSource acts(art, cache, dtype);
  Assembly{p, art, b, acts, options, dtype}.finish();
  return art;
}

GraphModel build_naive(const PreparedModel& p, const Tensor& references,
                       const CompileOptions& options) {
  check_references(p.folded, references);
  const DType dtype = p.folded.inputs[0].dtype;
  const int64_t rows = references.shape()[0];
  const std::string& x = p.graph.explained_input;
  GraphModel art = artifact_skeleton(p);
  const std::string refs = unused_name(p.folded, "references");
  art.initializers.emplace(refs, references);

  GraphBuilder b(art, "fwd/joint/");
  const std::string tiled = b.add("Tile", {x}, {{"repeats", row_repeats(references.rank(), rows)}});
  const std::string joint = b.add("Concat", {tiled, refs}, {{"axis", int64_t{0}}});
  auto joint_name = [&](const std::string& v) {
    if (v == x) return joint;
    if (p.folded.initializers.count(v)) return v;
    return "joint/" + v;
  };
  for (size_t idx : topological_order(p.folded)) {
    Node n = p.folded.nodes[idx];
    n.name = "fwd/" + n.name;
    for (auto& in : n.inputs) in = joint_name(in);
    for (auto& out : n.outputs) out = joint_name(out);
    art.nodes.push_back(std::move(n));
  }
  JointSource acts(b, x, refs, rows);
  Assembly{p, art, b, acts, options, dtype}.finish();
  return art;
}

}  // namespace shapgraph
