// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_SHAPE_INFERENCE_HPP_
#define SHAPGRAPH_SHAPE_INFERENCE_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

struct ValueInfo {
  DType dtype = DType::kFloat64;
  Shape shape;

  friend bool operator==(const ValueInfo&, const ValueInfo&) = default;
};

// Output dtypes/shapes of `node` under ONNX shape laws. Throws ShapeError.
std::vector<ValueInfo> infer_node(const Node& node, std::span<const ValueInfo> inputs);

using ShapeMap = std::map<std::string, ValueInfo>;

// Infers every value of `model`; graph inputs take their symbolic batch
// extent from `batch`.
ShapeMap infer_shapes(const GraphModel& model, int64_t batch);

// Infers every value with explicit shapes for the graph inputs.
ShapeMap infer_shapes(const GraphModel& model, const std::map<std::string, Shape>& input_shapes);

}  // namespace shapgraph

#endif  // SHAPGRAPH_SHAPE_INFERENCE_HPP_
