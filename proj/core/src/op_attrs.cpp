// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/op_attrs.hpp"

#include <algorithm>

#include "shapgraph/error.hpp"

namespace shapgraph {

namespace {

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw ShapeError("node '" + node.name + "' (" + node.op_type + "): " + what);
}

}  // namespace

WindowGeometry window_geometry(const Node& node, const Shape& input_shape,
                               std::array<int64_t, 2> kernel_hw) {
  if (input_shape.size() != 4) fail(node, "expects an N x C x H x W input");
  WindowGeometry g;
  g.in_h = input_shape[2];
  g.in_w = input_shape[3];
  auto kernel = node.attr_ints("kernel_shape");
  if (kernel.empty()) kernel = {kernel_hw[0], kernel_hw[1]};
  if (kernel.size() != 2 || kernel[0] <= 0 || kernel[1] <= 0) {
    fail(node, "kernel_shape must hold two positive extents");
  }
  if (kernel_hw[0] > 0 && (kernel[0] != kernel_hw[0] || kernel[1] != kernel_hw[1])) {
    fail(node, "kernel_shape disagrees with the filter");
  }
  g.kernel_h = kernel[0];
  g.kernel_w = kernel[1];
  const auto strides = node.attr_ints("strides", {1, 1});
  if (strides.size() != 2 || strides[0] <= 0 || strides[1] <= 0) {
    fail(node, "strides must hold two positive values");
  }
  g.stride_h = strides[0];
  g.stride_w = strides[1];
  const auto dilations = node.attr_ints("dilations", {1, 1});
  if (dilations.size() != 2 || dilations[0] <= 0 || dilations[1] <= 0) {
    fail(node, "dilations must hold two positive values");
  }
  g.dilation_h = dilations[0];
  g.dilation_w = dilations[1];
  const auto pads = node.attr_ints("pads", {0, 0, 0, 0});
  if (pads.size() != 4) fail(node, "pads must hold four values");
  for (size_t i = 0; i < 4; ++i) {
    if (pads[i] < 0) fail(node, "pads must be non-negative");
    g.pads[i] = pads[i];
  }
  const int64_t span_h = g.in_h + g.pads[0] + g.pads[2];
  const int64_t span_w = g.in_w + g.pads[1] + g.pads[3];
  if (span_h < g.effective_kernel_h() || span_w < g.effective_kernel_w()) {
    fail(node, "window larger than the padded input");
  }
  g.out_h = (span_h - g.effective_kernel_h()) / g.stride_h + 1;
  g.out_w = (span_w - g.effective_kernel_w()) / g.stride_w + 1;
  return g;
}

Shape broadcast_shapes(const std::vector<Shape>& shapes) {
  size_t rank = 0;
  for (const auto& s : shapes) rank = std::max(rank, s.size());
  Shape out(rank, 1);
  for (const auto& s : shapes) {
    const size_t offset = rank - s.size();
    for (size_t i = 0; i < s.size(); ++i) {
      const int64_t d = s[i];
      int64_t& o = out[offset + i];
      if (d == o || d == 1) continue;
      if (o == 1) {
        o = d;
        continue;
      }
      std::string msg = "shapes are not broadcast-compatible:";
      for (const auto& x : shapes) msg += " " + shape_to_string(x);
      throw ShapeError(msg);
    }
  }
  return out;
}

int64_t normalize_axis(int64_t axis, int64_t rank, const Node& node) {
  const int64_t a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) fail(node, "axis " + std::to_string(axis) + " out of range");
  return a;
}

Shape resolve_reshape(const Node& node, const Shape& input) {
  Shape target = node.attr_ints("shape");
  int64_t infer_at = -1;
  int64_t known = 1;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0) {
      if (i >= input.size()) fail(node, "0 in shape refers past the input rank");
      target[i] = input[i];
    }
    if (target[i] == -1) {
      if (infer_at >= 0) fail(node, "shape holds more than one -1");
      infer_at = static_cast<int64_t>(i);
    } else if (target[i] < 0) {
      fail(node, "negative extent in shape");
    } else {
      known *= target[i];
    }
  }
  const int64_t total = element_count(input);
  if (infer_at >= 0) {
    if (known == 0 || total % known != 0) fail(node, "cannot infer the -1 extent");
    target[infer_at] = total / known;
  }
  if (element_count(target) != total) {
    fail(node, "cannot reshape " + shape_to_string(input) + " to " + shape_to_string(target));
  }
  return target;
}

std::vector<int64_t> transpose_perm(const Node& node, int64_t rank) {
  auto perm = node.attr_ints("perm");
  if (perm.empty()) {
    for (int64_t i = rank - 1; i >= 0; --i) perm.push_back(i);
  }
  if (static_cast<int64_t>(perm.size()) != rank) fail(node, "perm length differs from rank");
  std::vector<bool> seen(rank, false);
  for (int64_t p : perm) {
    if (p < 0 || p >= rank || seen[p]) fail(node, "perm is not a permutation");
    seen[p] = true;
  }
  return perm;
}

std::vector<int64_t> split_sizes(const Node& node, const Shape& input) {
  const int64_t axis = normalize_axis(node.attr_int("axis", 0), input.size(), node);
  const auto n_out = static_cast<int64_t>(node.outputs.size());
  auto sizes = node.attr_ints("split");
  if (sizes.empty()) {
    if (input[axis] % n_out != 0) fail(node, "axis extent not divisible by output count");
    sizes.assign(n_out, input[axis] / n_out);
  }
  if (static_cast<int64_t>(sizes.size()) != n_out)
    fail(node, "split length differs from output count");
  int64_t total = 0;
  for (int64_t s : sizes) {
    if (s < 0) fail(node, "negative split extent");
    total += s;
  }
  if (total != input[axis]) fail(node, "split extents do not sum to the axis extent");
  return sizes;
}

std::vector<int64_t> reduce_axes(const Node& node, int64_t rank) {
  auto axes = node.attr_ints("axes");
  if (axes.empty()) {
    for (int64_t i = 0; i < rank; ++i) axes.push_back(i);
  }
  for (auto& a : axes) a = normalize_axis(a, rank, node);
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) fail(node, "repeated axis");
  return axes;
}

}  // namespace shapgraph
