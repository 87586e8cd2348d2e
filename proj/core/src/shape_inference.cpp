// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/shape_inference.hpp"

#include "shapgraph/error.hpp"
#include "shapgraph/op_attrs.hpp"

namespace shapgraph {

namespace {

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw ShapeError("node '" + node.name + "' (" + node.op_type + "): " + what);
}

void require_rank(const Node& node, const Shape& s, size_t rank, const char* which) {
  if (s.size() != rank) {
    fail(node, std::string(which) + " must have rank " + std::to_string(rank) + ", got " +
                   shape_to_string(s));
  }
}

Shape broadcast_or_fail(const Node& node, const std::vector<Shape>& shapes) {
  try {
    return broadcast_shapes(shapes);
  } catch (const ShapeError& e) {
    fail(node, e.what());
  }
}

Shape matmul_shape(const Node& node, const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2) fail(node, "operands must have rank >= 2");
  const int64_t m = a[a.size() - 2], k = a.back();
  const int64_t kb = b[b.size() - 2], n = b.back();
  if (k != kb) {
    fail(node, "inner extents differ: " + shape_to_string(a) + " x " + shape_to_string(b));
  }
  Shape out =
      broadcast_or_fail(node, {Shape(a.begin(), a.end() - 2), Shape(b.begin(), b.end() - 2)});
  out.push_back(m);
  out.push_back(n);
  return out;
}

Shape infer_one(const Node& node, std::span<const ValueInfo> in) {
  const std::string& op = node.op_type;
  auto shape = [&](size_t i) -> const Shape& { return in[i].shape; };

  if (op == "MatMul") return matmul_shape(node, shape(0), shape(1));
  if (op == "Gemm") {
    require_rank(node, shape(0), 2, "A");
    require_rank(node, shape(1), 2, "B");
    const bool ta = node.attr_int("transA", 0) != 0;
    const bool tb = node.attr_int("transB", 0) != 0;
    const int64_t m = ta ? shape(0)[1] : shape(0)[0];
    const int64_t k = ta ? shape(0)[0] : shape(0)[1];
    const int64_t kb = tb ? shape(1)[1] : shape(1)[0];
    const int64_t n = tb ? shape(1)[0] : shape(1)[1];
    if (k != kb) fail(node, "inner extents differ");
    if (in.size() > 2) {
      // C broadcasts one-way into (M, N).
      const Shape target{m, n};
      if (broadcast_or_fail(node, {target, shape(2)}) != target) {
        fail(node, "C does not broadcast to " + shape_to_string(target));
      }
    }
    return {m, n};
  }
  if (op == "Conv") {
    require_rank(node, shape(0), 4, "X");
    require_rank(node, shape(1), 4, "W");
    const Shape& x = shape(0);
    const Shape& w = shape(1);
    const int64_t group = node.attr_int("group", 1);
    if (group <= 0 || x[1] % group != 0 || w[0] % group != 0) fail(node, "bad group count");
    if (w[1] * group != x[1]) fail(node, "filter channels do not match the input");
    if (in.size() > 2 && shape(2) != Shape{w[0]}) fail(node, "bias must have shape [M]");
    const auto g = window_geometry(node, x, {w[2], w[3]});
    return {x[0], w[0], g.out_h, g.out_w};
  }
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div" || op == "Greater") {
    return broadcast_or_fail(node, {shape(0), shape(1)});
  }
  if (op == "Where") return broadcast_or_fail(node, {shape(0), shape(1), shape(2)});
  if (op == "Relu" || op == "Sigmoid" || op == "Tanh" || op == "Exp") return shape(0);
  if (op == "Softmax") {
    normalize_axis(node.attr_int("axis", -1), shape(0).size(), node);
    return shape(0);
  }
  if (op == "Concat") {
    const int64_t rank = shape(0).size();
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), rank, node);
    Shape out = shape(0);
    for (size_t i = 1; i < in.size(); ++i) {
      const Shape& s = shape(i);
      if (static_cast<int64_t>(s.size()) != rank) fail(node, "inputs differ in rank");
      for (int64_t d = 0; d < rank; ++d) {
        if (d == axis) continue;
        if (s[d] != out[d]) fail(node, "inputs differ off the concat axis");
      }
      out[axis] += s[axis];
    }
    return out;
  }
  if (op == "MaxPool" || op == "AveragePool") {
    const auto g = window_geometry(node, shape(0));
    if (g.dilation_h != 1 || g.dilation_w != 1) fail(node, "pooling dilations must be 1");
    if (g.pads[0] >= g.kernel_h || g.pads[2] >= g.kernel_h || g.pads[1] >= g.kernel_w ||
        g.pads[3] >= g.kernel_w) {
      fail(node, "pads must be smaller than the kernel");
    }
    return {shape(0)[0], shape(0)[1], g.out_h, g.out_w};
  }
  if (op == "GlobalAveragePool" || op == "GlobalMaxPool") {
    if (shape(0).size() < 3) fail(node, "input must have rank >= 3");
    Shape out(shape(0).size(), 1);
    out[0] = shape(0)[0];
    out[1] = shape(0)[1];
    return out;
  }
  if (op == "BatchNormalization") {
    if (shape(0).size() < 2) fail(node, "input must have rank >= 2");
    const Shape c{shape(0)[1]};
    for (size_t i = 1; i < 5; ++i) {
      if (shape(i) != c) fail(node, "parameter " + std::to_string(i) + " must have shape [C]");
    }
    return shape(0);
  }
  if (op == "Transpose") {
    const auto perm = transpose_perm(node, shape(0).size());
    Shape out;
    for (int64_t p : perm) out.push_back(shape(0)[p]);
    return out;
  }
  if (op == "Reshape") return resolve_reshape(node, shape(0));
  if (op == "Flatten") {
    const int64_t rank = shape(0).size();
    int64_t axis = node.attr_int("axis", 1);
    if (axis < 0) axis += rank;
    if (axis < 0 || axis > rank) fail(node, "axis out of range");
    int64_t outer = 1, inner = 1;
    for (int64_t d = 0; d < rank; ++d) (d < axis ? outer : inner) *= shape(0)[d];
    return {outer, inner};
  }
  if (op == "ReduceSum" || op == "ReduceMean") {
    const int64_t rank = shape(0).size();
    const auto axes = reduce_axes(node, rank);
    const bool keep = node.attr_int("keepdims", 1) != 0;
    Shape out;
    size_t next = 0;
    for (int64_t d = 0; d < rank; ++d) {
      const bool reduced = next < axes.size() && axes[next] == d;
      if (reduced) ++next;
      if (!reduced) {
        out.push_back(shape(0)[d]);
      } else if (keep) {
        out.push_back(1);
      }
    }
    return out;
  }
  if (op == "Tile") {
    const auto reps = node.attr_ints("repeats");
    if (reps.size() != shape(0).size()) fail(node, "repeats length differs from rank");
    Shape out = shape(0);
    for (size_t d = 0; d < out.size(); ++d) {
      if (reps[d] < 1) fail(node, "repeats must be positive");
      out[d] *= reps[d];
    }
    return out;
  }
  fail(node, "no shape law");
}

}  // namespace

std::vector<ValueInfo> infer_node(const Node& node, std::span<const ValueInfo> inputs) {
  const std::string& op = node.op_type;
  if (!find_schema(op)) throw UnsupportedOp("unsupported operator '" + op + "'");

  if (op == "Constant") {
    const DType dtype = parse_dtype(node.attr_string("dtype", "float64"));
    if (node.has_attr("value_float")) return {{dtype, {}}};
    return {{dtype, {static_cast<int64_t>(node.attr_floats("value_floats").size())}}};
  }

  for (size_t i = 1; i < inputs.size(); ++i) {
    if (inputs[i].dtype != inputs[0].dtype) {
      fail(node, "input dtypes differ (" + std::string(dtype_name(inputs[0].dtype)) + " vs " +
                     std::string(dtype_name(inputs[i].dtype)) + ")");
    }
  }
  for (const auto& v : inputs) {
    for (int64_t d : v.shape) {
      if (d < 0) fail(node, "input extent is unresolved");
    }
  }
  const DType dtype = inputs[0].dtype;

  if (op == "Split") {
    const auto sizes = split_sizes(node, inputs[0].shape);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), inputs[0].shape.size(), node);
    std::vector<ValueInfo> out;
    for (int64_t s : sizes) {
      Shape piece = inputs[0].shape;
      piece[axis] = s;
      out.push_back({dtype, piece});
    }
    return out;
  }
  return {{dtype, infer_one(node, inputs)}};
}

ShapeMap infer_shapes(const GraphModel& model, const std::map<std::string, Shape>& input_shapes) {
  ShapeMap shapes;
  for (const auto& spec : model.inputs) {
    auto it = input_shapes.find(spec.name);
    if (it == input_shapes.end()) throw ShapeError("no shape given for input '" + spec.name + "'");
    if (it->second.size() != spec.shape.size()) {
      throw ShapeError("input '" + spec.name + "' expects rank " +
                       std::to_string(spec.shape.size()));
    }
    for (size_t d = 0; d < spec.shape.size(); ++d) {
      if (spec.shape[d] != kSymbolicBatch && spec.shape[d] != it->second[d]) {
        throw ShapeError("input '" + spec.name + "' expects " + shape_to_string(spec.shape) +
                         ", got " + shape_to_string(it->second));
      }
    }
    shapes[spec.name] = {spec.dtype, it->second};
  }
  for (const auto& [name, t] : model.initializers) shapes[name] = {t.dtype(), t.shape()};

  for (size_t idx : topological_order(model)) {
    const Node& node = model.nodes[idx];
    std::vector<ValueInfo> ins;
    for (const auto& name : node.inputs) {
      auto it = shapes.find(name);
      if (it == shapes.end()) throw ShapeError("value '" + name + "' has no shape");
      ins.push_back(it->second);
    }
    auto outs = infer_node(node, ins);
    for (size_t i = 0; i < node.outputs.size(); ++i) shapes[node.outputs[i]] = outs[i];
  }
  return shapes;
}

ShapeMap infer_shapes(const GraphModel& model, int64_t batch) {
  std::map<std::string, Shape> given;
  for (const auto& spec : model.inputs) {
    Shape s = spec.shape;
    if (!s.empty() && s[0] == kSymbolicBatch) s[0] = batch;
    given[spec.name] = s;
  }
  return infer_shapes(model, given);
}

}  // namespace shapgraph
