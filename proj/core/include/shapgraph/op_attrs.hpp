// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_OP_ATTRS_HPP_
#define SHAPGRAPH_OP_ATTRS_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

// Resolved geometry of a 2-D sliding window (Conv, MaxPool, AveragePool).
// Input is N x C x H x W; pads are {top, left, bottom, right}.
struct WindowGeometry {
  int64_t kernel_h = 1, kernel_w = 1;
  int64_t stride_h = 1, stride_w = 1;
  int64_t dilation_h = 1, dilation_w = 1;
  std::array<int64_t, 4> pads{0, 0, 0, 0};
  int64_t in_h = 0, in_w = 0;
  int64_t out_h = 0, out_w = 0;

  int64_t effective_kernel_h() const { return (kernel_h - 1) * dilation_h + 1; }
  int64_t effective_kernel_w() const { return (kernel_w - 1) * dilation_w + 1; }
  int64_t window_size() const { return kernel_h * kernel_w; }
};

// `kernel_hw` overrides a missing kernel_shape attribute (Conv infers it from
// the filter). Throws ShapeError on inconsistent attributes.
WindowGeometry window_geometry(const Node& node, const Shape& input_shape,
                               std::array<int64_t, 2> kernel_hw = {0, 0});

// Multidirectional (numpy-style) broadcast of two or more shapes.
Shape broadcast_shapes(const std::vector<Shape>& shapes);

// Maps a possibly negative axis into [0, rank).
int64_t normalize_axis(int64_t axis, int64_t rank, const Node& node);

// Reshape target with 0 (copy) and -1 (infer) resolved against `input`.
Shape resolve_reshape(const Node& node, const Shape& input);

std::vector<int64_t> transpose_perm(const Node& node, int64_t rank);

// Extents of each Split output along the split axis.
std::vector<int64_t> split_sizes(const Node& node, const Shape& input);

// Sorted, normalized reduction axes; empty attribute means all axes.
std::vector<int64_t> reduce_axes(const Node& node, int64_t rank);

}  // namespace shapgraph

#endif  // SHAPGRAPH_OP_ATTRS_HPP_
