// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "shapgraph/error.hpp"

namespace shapgraph {

static_assert(std::endian::native == std::endian::little,
              "raw tensor buffers assume a little-endian host");

std::string_view dtype_name(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

DType parse_dtype(std::string_view name) {
  if (name == "float32" || name == "f32") return DType::kFloat32;
  if (name == "float64" || name == "f64") return DType::kFloat64;
  throw ParseError("unknown dtype '" + std::string(name) + "'");
}

size_t dtype_size(DType dtype) { return dtype == DType::kFloat32 ? sizeof(float) : sizeof(double); }

int64_t element_count(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative extent in " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::vector<int64_t> strides_of(const Shape& shape) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (int64_t i = static_cast<int64_t>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * shape[i + 1];
  }
  return strides;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(DType dtype, Shape shape) : dtype_(dtype), shape_(std::move(shape)) {
  const auto n = static_cast<size_t>(element_count(shape_));
  if (dtype_ == DType::kFloat32) {
    storage_ = std::vector<float>(n, 0.0f);
  } else {
    storage_ = std::vector<double>(n, 0.0);
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : dtype_(DType::kFloat64), shape_(std::move(shape)), storage_(std::move(data)) {
  if (static_cast<int64_t>(std::get<std::vector<double>>(storage_).size()) !=
      element_count(shape_)) {
    throw ShapeError("data length does not match shape " + shape_to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : dtype_(DType::kFloat32), shape_(std::move(shape)), storage_(std::move(data)) {
  if (static_cast<int64_t>(std::get<std::vector<float>>(storage_).size()) !=
      element_count(shape_)) {
    throw ShapeError("data length does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(double value, DType dtype) { return filled(dtype, Shape{}, value); }

Tensor Tensor::from_values(DType dtype, Shape shape, std::span<const double> values) {
  if (static_cast<int64_t>(values.size()) != element_count(shape)) {
    throw ShapeError("value count does not match shape " + shape_to_string(shape));
  }
  if (dtype == DType::kFloat64) {
    return Tensor(std::move(shape), std::vector<double>(values.begin(), values.end()));
  }
  std::vector<float> data(values.size());
  for (size_t i = 0; i < values.size(); ++i) data[i] = static_cast<float>(values[i]);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::filled(DType dtype, Shape shape, double value) {
  Tensor t(dtype, std::move(shape));
  dispatch_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (T& v : t.mutable_data<T>()) v = static_cast<T>(value);
  });
  return t;
}

int64_t Tensor::size() const {
  return std::visit([](const auto& v) { return static_cast<int64_t>(v.size()); }, storage_);
}

double Tensor::at(int64_t flat_index) const {
  return std::visit([&](const auto& v) { return static_cast<double>(v.at(flat_index)); }, storage_);
}

std::vector<double> Tensor::to_doubles() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
                    storage_);
}

Tensor Tensor::cast(DType dtype) const {
  if (dtype == dtype_) return *this;
  const auto values = to_doubles();
  return from_values(dtype, shape_, values);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

std::string Tensor::raw_bytes() const {
  return std::visit(
      [](const auto& v) {
        return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(v[0]));
      },
      storage_);
}

Tensor Tensor::from_raw_bytes(DType dtype, Shape shape, std::string_view bytes) {
  Tensor t(dtype, std::move(shape));
  if (bytes.size() != t.byte_size()) {
    throw ParseError("tensor buffer holds " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(t.byte_size()));
  }
  std::visit([&](auto& v) { std::memcpy(v.data(), bytes.data(), bytes.size()); }, t.storage_);
  return t;
}

bool Tensor::all_finite() const {
  return std::visit(
      [](const auto& v) {
        for (auto x : v) {
          if (!std::isfinite(x)) return false;
        }
        return true;
      },
      storage_);
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dtype_ != b.dtype_ || a.shape_ != b.shape_) return false;
  return a.raw_bytes() == b.raw_bytes();
}

}  // namespace shapgraph
