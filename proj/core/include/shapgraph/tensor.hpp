// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_TENSOR_HPP_
#define SHAPGRAPH_TENSOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shapgraph {

enum class DType { kFloat32, kFloat64 };

using Shape = std::vector<int64_t>;

std::string_view dtype_name(DType dtype);
DType parse_dtype(std::string_view name);
size_t dtype_size(DType dtype);

int64_t element_count(const Shape& shape);
// Row-major strides in elements.
std::vector<int64_t> strides_of(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor of float32 or float64 scalars.
//
// The value is immutable in spirit: kernels build new tensors rather than
// mutating shared ones. Mutable access exists for construction only.
class Tensor {
 public:
  Tensor() : Tensor(DType::kFloat64, Shape{0}) {}
  // Zero-filled tensor.
  Tensor(DType dtype, Shape shape);
  Tensor(Shape shape, std::vector<double> data);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(double value, DType dtype = DType::kFloat64);
  // Converts `values` to `dtype`.
  static Tensor from_values(DType dtype, Shape shape, std::span<const double> values);
  static Tensor filled(DType dtype, Shape shape, double value);

  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const;
  size_t byte_size() const { return static_cast<size_t>(size()) * dtype_size(dtype_); }

  template <typename T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(storage_);
  }
  template <typename T>
  std::span<T> mutable_data() {
    return std::get<std::vector<T>>(storage_);
  }

  // Element access through double, regardless of dtype.
  double at(int64_t flat_index) const;
  std::vector<double> to_doubles() const;

  Tensor cast(DType dtype) const;
  Tensor reshaped(Shape shape) const;

  // Little-endian raw scalar buffer.
  std::string raw_bytes() const;
  static Tensor from_raw_bytes(DType dtype, Shape shape, std::string_view bytes);

  bool all_finite() const;

  // Bitwise equality of dtype, shape, and data.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  DType dtype_;
  Shape shape_;
  std::variant<std::vector<float>, std::vector<double>> storage_;
};

// Calls `fn` with a zero scalar of the element type that `dtype` names.
template <typename Fn>
decltype(auto) dispatch_dtype(DType dtype, Fn&& fn) {
  if (dtype == DType::kFloat32) return fn(float{});
  return fn(double{});
}

}  // namespace shapgraph

#endif  // SHAPGRAPH_TENSOR_HPP_
