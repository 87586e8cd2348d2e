// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_SERIALIZE_HPP_
#define SHAPGRAPH_SERIALIZE_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

// Model exchange document (".sgm"):
//
//   { "name": str,
//     "inputs":  [{"name", "dtype", "shape"}],     // batch axis may be -1
//     "outputs": [{"name", "dtype", "shape"}],
//     "initializers": [{"name", "dtype", "shape", "data_b64"}],
//     "nodes": [{"op_type", "name", "inputs", "outputs",
//                "attributes": {key: {"int"|"float"|"ints"|"floats"|"string": v}}}],
//     "metadata": {key: str} }                      // optional
//
// `data_b64` is the base64 of the row-major little-endian scalar buffer.
// Keys are emitted in a fixed order so equal models give equal bytes.
GraphModel load_model(std::string_view bytes);
std::string save_model(const GraphModel& model);

// Standalone tensor document (".stn"): {"dtype", "shape", "data_b64"}.
Tensor load_tensor(std::string_view bytes);
std::string save_tensor(const Tensor& tensor);

GraphModel read_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const GraphModel& model);
Tensor read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);
std::string sha256_hex(std::string_view bytes);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace shapgraph

#endif  // SHAPGRAPH_SERIALIZE_HPP_
