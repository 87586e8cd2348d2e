// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_MODEL_HPP_
#define SHAPGRAPH_MODEL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shapgraph/tensor.hpp"

namespace shapgraph {

// Extent used for the symbolic batch axis of graph inputs and outputs.
inline constexpr int64_t kSymbolicBatch = -1;

using AttributeValue =
    std::variant<int64_t, double, std::vector<int64_t>, std::vector<double>, std::string>;

enum class AttrKind { kInt, kFloat, kInts, kFloats, kString };

std::string_view attr_kind_name(AttrKind kind);
AttrKind attr_kind_of(const AttributeValue& value);

struct Node {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, AttributeValue> attributes;

  bool has_attr(const std::string& key) const { return attributes.count(key) != 0; }
  int64_t attr_int(const std::string& key, int64_t fallback) const;
  double attr_float(const std::string& key, double fallback) const;
  std::vector<int64_t> attr_ints(const std::string& key, std::vector<int64_t> fallback = {}) const;
  std::vector<double> attr_floats(const std::string& key, std::vector<double> fallback = {}) const;
  std::string attr_string(const std::string& key, std::string fallback = {}) const;

  friend bool operator==(const Node&, const Node&) = default;
};

struct ValueSpec {
  std::string name;
  DType dtype = DType::kFloat64;
  // Axis 0 may be kSymbolicBatch; every other extent is concrete.
  Shape shape;

  friend bool operator==(const ValueSpec&, const ValueSpec&) = default;
};

struct GraphModel {
  std::string name;
  std::vector<ValueSpec> inputs;
  std::vector<ValueSpec> outputs;
  std::map<std::string, Tensor> initializers;
  std::vector<Node> nodes;
  // Free-form key/value block carried through serialization.
  std::map<std::string, std::string> metadata;

  const Node* find_node(std::string_view node_name) const;
  const ValueSpec* find_input(std::string_view value_name) const;
  const Tensor* find_initializer(const std::string& value_name) const;

  friend bool operator==(const GraphModel&, const GraphModel&) = default;
};

// Input/output arity and attribute table of one supported operator.
struct OpSchema {
  std::string_view op_type;
  int min_inputs;
  int max_inputs;  // -1: unbounded
  int min_outputs;
  int max_outputs;  // -1: unbounded
  std::map<std::string, AttrKind, std::less<>> attributes;
};

const OpSchema* find_schema(std::string_view op_type);
std::vector<std::string_view> supported_ops();

// Throws ValidationError (or CycleError) naming the offending node.
void validate(const GraphModel& model);

// Node indices such that every node follows the producers of its inputs.
// Independent nodes keep declaration order. Throws CycleError.
std::vector<size_t> topological_order(const GraphModel& model);

// Indices of the nodes the named values transitively depend on, in
// topological order.
std::vector<size_t> ancestor_nodes(const GraphModel& model, const std::vector<std::string>& values);

// Copy of `model` with every spec, initializer and Constant retyped.
GraphModel cast_model(const GraphModel& model, DType dtype);

}  // namespace shapgraph

#endif  // SHAPGRAPH_MODEL_HPP_
