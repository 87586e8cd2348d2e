// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/model.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "shapgraph/error.hpp"

namespace shapgraph {

std::string_view attr_kind_name(AttrKind kind) {
  switch (kind) {
    case AttrKind::kInt:
      return "int";
    case AttrKind::kFloat:
      return "float";
    case AttrKind::kInts:
      return "ints";
    case AttrKind::kFloats:
      return "floats";
    case AttrKind::kString:
      return "string";
  }
  return "?";
}

AttrKind attr_kind_of(const AttributeValue& value) { return static_cast<AttrKind>(value.index()); }

namespace {

template <typename T>
const T* get_attr(const Node& node, const std::string& key) {
  auto it = node.attributes.find(key);
  if (it == node.attributes.end()) return nullptr;
  const T* v = std::get_if<T>(&it->second);
  if (v == nullptr) {
    throw ValidationError("node '" + node.name + "': attribute '" + key + "' has kind " +
                          std::string(attr_kind_name(attr_kind_of(it->second))));
  }
  return v;
}

const std::vector<OpSchema>& schemas() {
  using K = AttrKind;
  static const std::vector<OpSchema> kSchemas = {
      {"MatMul", 2, 2, 1, 1, {}},
      {"Gemm",
       2,
       3,
       1,
       1,
       {{"alpha", K::kFloat}, {"beta", K::kFloat}, {"transA", K::kInt}, {"transB", K::kInt}}},
      {"Conv",
       2,
       3,
       1,
       1,
       {{"kernel_shape", K::kInts},
        {"strides", K::kInts},
        {"pads", K::kInts},
        {"dilations", K::kInts},
        {"group", K::kInt}}},
      {"Add", 2, 2, 1, 1, {}},
      {"Sub", 2, 2, 1, 1, {}},
      {"Mul", 2, 2, 1, 1, {}},
      {"Div", 2, 2, 1, 1, {}},
      {"Concat", 1, -1, 1, 1, {{"axis", K::kInt}}},
      {"Relu", 1, 1, 1, 1, {}},
      {"Sigmoid", 1, 1, 1, 1, {}},
      {"Tanh", 1, 1, 1, 1, {}},
      {"Exp", 1, 1, 1, 1, {}},
      {"Softmax", 1, 1, 1, 1, {{"axis", K::kInt}}},
      {"MaxPool",
       1,
       1,
       1,
       1,
       {{"kernel_shape", K::kInts}, {"strides", K::kInts}, {"pads", K::kInts}}},
      {"AveragePool",
       1,
       1,
       1,
       1,
       {{"kernel_shape", K::kInts},
        {"strides", K::kInts},
        {"pads", K::kInts},
        {"count_include_pad", K::kInt}}},
      {"GlobalAveragePool", 1, 1, 1, 1, {}},
      {"GlobalMaxPool", 1, 1, 1, 1, {}},
      {"BatchNormalization", 5, 5, 1, 1, {{"epsilon", K::kFloat}, {"momentum", K::kFloat}}},
      {"Transpose", 1, 1, 1, 1, {{"perm", K::kInts}}},
      {"Reshape", 1, 1, 1, 1, {{"shape", K::kInts}}},
      {"Flatten", 1, 1, 1, 1, {{"axis", K::kInt}}},
      {"ReduceSum", 1, 1, 1, 1, {{"axes", K::kInts}, {"keepdims", K::kInt}}},
      {"ReduceMean", 1, 1, 1, 1, {{"axes", K::kInts}, {"keepdims", K::kInt}}},
      {"Greater", 2, 2, 1, 1, {}},
      {"Where", 3, 3, 1, 1, {}},
      {"Tile", 1, 1, 1, 1, {{"repeats", K::kInts}}},
      {"Split", 1, 1, 1, -1, {{"axis", K::kInt}, {"split", K::kInts}}},
      {"Constant",
       0,
       0,
       1,
       1,
       {{"value_float", K::kFloat}, {"value_floats", K::kFloats}, {"dtype", K::kString}}},
  };
  return kSchemas;
}

// Attributes that must be present for the op to be meaningful.
const std::map<std::string_view, std::vector<std::string_view>>& required_attributes() {
  static const std::map<std::string_view, std::vector<std::string_view>> kRequired = {
      {"Concat", {"axis"}},   {"MaxPool", {"kernel_shape"}}, {"AveragePool", {"kernel_shape"}},
      {"Reshape", {"shape"}}, {"Tile", {"repeats"}},
  };
  return kRequired;
}

std::string node_label(const Node& node) {
  return "node '" + node.name + "' (" + node.op_type + ")";
}

}  // namespace

int64_t Node::attr_int(const std::string& key, int64_t fallback) const {
  const auto* v = get_attr<int64_t>(*this, key);
  return v ? *v : fallback;
}

double Node::attr_float(const std::string& key, double fallback) const {
  const auto* v = get_attr<double>(*this, key);
  return v ? *v : fallback;
}

std::vector<int64_t> Node::attr_ints(const std::string& key, std::vector<int64_t> fallback) const {
  const auto* v = get_attr<std::vector<int64_t>>(*this, key);
  return v ? *v : fallback;
}

std::vector<double> Node::attr_floats(const std::string& key, std::vector<double> fallback) const {
  const auto* v = get_attr<std::vector<double>>(*this, key);
  return v ? *v : fallback;
}

std::string Node::attr_string(const std::string& key, std::string fallback) const {
  const auto* v = get_attr<std::string>(*this, key);
  return v ? *v : fallback;
}

const Node* GraphModel::find_node(std::string_view node_name) const {
  for (const auto& n : nodes) {
    if (n.name == node_name) return &n;
  }
  return nullptr;
}

const ValueSpec* GraphModel::find_input(std::string_view value_name) const {
  for (const auto& v : inputs) {
    if (v.name == value_name) return &v;
  }
  return nullptr;
}

const Tensor* GraphModel::find_initializer(const std::string& value_name) const {
  auto it = initializers.find(value_name);
  return it == initializers.end() ? nullptr : &it->second;
}

const OpSchema* find_schema(std::string_view op_type) {
  for (const auto& s : schemas()) {
    if (s.op_type == op_type) return &s;
  }
  return nullptr;
}

std::vector<std::string_view> supported_ops() {
  std::vector<std::string_view> ops;
  for (const auto& s : schemas()) ops.push_back(s.op_type);
  return ops;
}

namespace {

void validate_spec(const ValueSpec& spec, const char* role) {
  if (spec.name.empty()) throw ValidationError(std::string(role) + " with empty name");
  for (size_t i = 0; i < spec.shape.size(); ++i) {
    const int64_t d = spec.shape[i];
    if (d == kSymbolicBatch && i == 0) continue;
    if (d <= 0) {
      throw ValidationError(std::string(role) + " '" + spec.name + "' has invalid extent " +
                            std::to_string(d) + " at axis " + std::to_string(i));
    }
  }
}

void validate_node_signature(const Node& node) {
  if (node.name.empty()) throw ValidationError("node of type " + node.op_type + " has no name");
  const OpSchema* schema = find_schema(node.op_type);
  if (schema == nullptr) {
    throw ValidationError(node_label(node) + ": unsupported op_type");
  }
  const int n_in = static_cast<int>(node.inputs.size());
  const int n_out = static_cast<int>(node.outputs.size());
  if (n_in < schema->min_inputs || (schema->max_inputs >= 0 && n_in > schema->max_inputs)) {
    throw ValidationError(node_label(node) + ": takes " + std::to_string(n_in) +
                          " inputs, outside the allowed arity");
  }
  if (n_out < schema->min_outputs || (schema->max_outputs >= 0 && n_out > schema->max_outputs)) {
    throw ValidationError(node_label(node) + ": produces " + std::to_string(n_out) +
                          " outputs, outside the allowed arity");
  }
  for (const auto& [key, value] : node.attributes) {
    auto it = schema->attributes.find(key);
    if (it == schema->attributes.end()) {
      throw ValidationError(node_label(node) + ": unknown attribute '" + key + "'");
    }
    if (it->second != attr_kind_of(value)) {
      throw ValidationError(node_label(node) + ": attribute '" + key + "' must be " +
                            std::string(attr_kind_name(it->second)));
    }
  }
  auto req = required_attributes().find(node.op_type);
  if (req != required_attributes().end()) {
    for (auto key : req->second) {
      if (!node.has_attr(std::string(key))) {
        throw ValidationError(node_label(node) + ": missing attribute '" + std::string(key) + "'");
      }
    }
  }
  if (node.op_type == "Constant" && node.has_attr("value_float") == node.has_attr("value_floats")) {
    throw ValidationError(node_label(node) + ": needs exactly one of value_float/value_floats");
  }
  for (const auto& in : node.inputs) {
    if (in.empty()) throw ValidationError(node_label(node) + ": empty input name");
  }
  for (const auto& out : node.outputs) {
    if (out.empty()) throw ValidationError(node_label(node) + ": empty output name");
  }
}

}  // namespace

void validate(const GraphModel& model) {
  std::unordered_set<std::string> produced;
  for (const auto& in : model.inputs) {
    validate_spec(in, "graph input");
    if (!produced.insert(in.name).second) {
      throw ValidationError("duplicate graph input '" + in.name + "'");
    }
  }
  for (const auto& [name, tensor] : model.initializers) {
    if (!produced.insert(name).second) {
      throw ValidationError("initializer '" + name + "' shadows a graph input");
    }
    if (!tensor.all_finite()) {
      throw ValidationError("initializer '" + name + "' holds non-finite values");
    }
  }
  std::unordered_set<std::string> node_names;
  for (const auto& node : model.nodes) {
    validate_node_signature(node);
    if (!node_names.insert(node.name).second) {
      throw ValidationError(node_label(node) + ": duplicate node name");
    }
    for (const auto& out : node.outputs) {
      if (!produced.insert(out).second) {
        throw ValidationError(node_label(node) + ": output '" + out +
                              "' is already produced elsewhere");
      }
    }
  }
  for (const auto& node : model.nodes) {
    for (const auto& in : node.inputs) {
      if (!produced.count(in)) {
        throw ValidationError(node_label(node) + ": consumes undeclared value '" + in + "'");
      }
    }
  }
  for (const auto& out : model.outputs) {
    validate_spec(out, "graph output");
    if (!produced.count(out.name)) {
      throw ValidationError("graph output '" + out.name + "' is never produced");
    }
  }
  topological_order(model);
}

std::vector<size_t> topological_order(const GraphModel& model) {
  const size_t n = model.nodes.size();
  std::unordered_map<std::string, size_t> producer;
  for (size_t i = 0; i < n; ++i) {
    for (const auto& out : model.nodes[i].outputs) producer.emplace(out, i);
  }
  std::vector<size_t> indegree(n, 0);
  std::vector<std::vector<size_t>> consumers(n);
  for (size_t i = 0; i < n; ++i) {
    std::set<size_t> deps;
    for (const auto& in : model.nodes[i].inputs) {
      auto it = producer.find(in);
      if (it != producer.end()) deps.insert(it->second);
    }
    indegree[i] = deps.size();
    for (size_t d : deps) consumers[d].push_back(i);
  }
  std::priority_queue<size_t, std::vector<size_t>, std::greater<>> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (size_t c : consumers[i]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) {
    for (size_t i = 0; i < n; ++i) {
      if (indegree[i] != 0) {
        throw CycleError(node_label(model.nodes[i]) + ": participates in a cycle");
      }
    }
  }
  return order;
}

std::vector<size_t> ancestor_nodes(const GraphModel& model,
                                   const std::vector<std::string>& values) {
  std::unordered_map<std::string, size_t> producer;
  for (size_t i = 0; i < model.nodes.size(); ++i) {
    for (const auto& out : model.nodes[i].outputs) producer.emplace(out, i);
  }
  std::vector<bool> keep(model.nodes.size(), false);
  std::vector<std::string> stack(values.begin(), values.end());
  while (!stack.empty()) {
    const std::string v = std::move(stack.back());
    stack.pop_back();
    auto it = producer.find(v);
    if (it == producer.end() || keep[it->second]) continue;
    keep[it->second] = true;
    for (const auto& in : model.nodes[it->second].inputs) stack.push_back(in);
  }
  std::vector<size_t> out;
  for (size_t i : topological_order(model)) {
    if (keep[i]) out.push_back(i);
  }
  return out;
}

GraphModel cast_model(const GraphModel& model, DType dtype) {
  GraphModel out = model;
  for (auto& spec : out.inputs) spec.dtype = dtype;
  for (auto& spec : out.outputs) spec.dtype = dtype;
  for (auto& [name, tensor] : out.initializers) tensor = tensor.cast(dtype);
  for (auto& node : out.nodes) {
    if (node.op_type == "Constant") node.attributes["dtype"] = std::string(dtype_name(dtype));
  }
  return out;
}

}  // namespace shapgraph
