// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapgraph/serialize.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "shapgraph/error.hpp"

namespace shapgraph {

using json = nlohmann::ordered_json;

std::string base64_encode(std::string_view bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw ParseError("base64 payload length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
  size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<size_t>(n) - padding);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::ostringstream os;
  for (unsigned char c : digest) os << std::hex << std::setw(2) << std::setfill('0') << int{c};
  return os.str();
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

template <typename T>
T field(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

json shape_json(const Shape& shape) {
  json arr = json::array();
  for (int64_t d : shape) arr.push_back(d);
  return arr;
}

json spec_json(const ValueSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["dtype"] = dtype_name(spec.dtype);
  j["shape"] = shape_json(spec.shape);
  return j;
}

ValueSpec parse_spec(const json& j) {
  ValueSpec spec;
  spec.name = field<std::string>(j, "name", "value spec");
  spec.dtype = parse_dtype(field<std::string>(j, "dtype", "value spec"));
  spec.shape = field<Shape>(j, "shape", "value spec");
  return spec;
}

json tensor_json(const Tensor& t) {
  json j;
  j["dtype"] = dtype_name(t.dtype());
  j["shape"] = shape_json(t.shape());
  j["data_b64"] = base64_encode(t.raw_bytes());
  return j;
}

Tensor parse_tensor_json(const json& j, const char* where) {
  const DType dtype = parse_dtype(field<std::string>(j, "dtype", where));
  const Shape shape = field<Shape>(j, "shape", where);
  for (int64_t d : shape) {
    if (d < 0) throw ParseError(std::string(where) + ": tensors cannot have symbolic extents");
  }
  const std::string bytes = base64_decode(field<std::string>(j, "data_b64", where));
  return Tensor::from_raw_bytes(dtype, shape, bytes);
}

json attribute_json(const AttributeValue& value) {
  json j = json::object();
  const std::string kind(attr_kind_name(attr_kind_of(value)));
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::vector<int64_t>> ||
                      std::is_same_v<V, std::vector<double>>) {
          json arr = json::array();
          for (auto x : v) arr.push_back(x);
          j[kind] = arr;
        } else {
          j[kind] = v;
        }
      },
      value);
  return j;
}

AttributeValue parse_attribute(const json& j, const std::string& node, const std::string& key) {
  const std::string where = "node '" + node + "' attribute '" + key + "'";
  if (!j.is_object() || j.size() != 1) {
    throw ParseError(where + ": expected a single-key kind object");
  }
  const auto& [kind, v] = *j.items().begin();
  try {
    if (kind == "int") {
      if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
      return v.get<int64_t>();
    }
    if (kind == "float") {
      if (!v.is_number()) throw ParseError(where + ": expected a number");
      return v.get<double>();
    }
    if (kind == "ints") return v.get<std::vector<int64_t>>();
    if (kind == "floats") return v.get<std::vector<double>>();
    if (kind == "string") return v.get<std::string>();
  } catch (const json::exception&) {
    throw ParseError(where + ": value does not match kind '" + kind + "'");
  }
  throw ParseError(where + ": unknown kind '" + kind + "'");
}

json parse_json(std::string_view bytes) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

GraphModel load_model(std::string_view bytes) {
  const json doc = parse_json(bytes);
  if (!doc.is_object()) throw ParseError("model document must be an object");
  GraphModel model;
  model.name = field<std::string>(doc, "name", "model");
  for (const auto& j : field<json>(doc, "inputs", "model")) model.inputs.push_back(parse_spec(j));
  for (const auto& j : field<json>(doc, "outputs", "model")) {
    model.outputs.push_back(parse_spec(j));
  }
  for (const auto& j : field<json>(doc, "initializers", "model")) {
    const auto name = field<std::string>(j, "name", "initializer");
    if (model.initializers.count(name))
      throw ValidationError("duplicate initializer '" + name + "'");
    model.initializers.emplace(name, parse_tensor_json(j, "initializer"));
  }
  for (const auto& j : field<json>(doc, "nodes", "model")) {
    Node node;
    node.op_type = field<std::string>(j, "op_type", "node");
    node.name = field<std::string>(j, "name", "node");
    node.inputs = field<std::vector<std::string>>(j, "inputs", "node");
    node.outputs = field<std::vector<std::string>>(j, "outputs", "node");
    if (j.contains("attributes")) {
      const auto& attrs = j.at("attributes");
      if (!attrs.is_object())
        throw ParseError("node '" + node.name + "': attributes must be an object");
      for (const auto& [key, value] : attrs.items()) {
        node.attributes.emplace(key, parse_attribute(value, node.name, key));
      }
    }
    model.nodes.push_back(std::move(node));
  }
  if (doc.contains("metadata")) {
    model.metadata = field<std::map<std::string, std::string>>(doc, "metadata", "model");
  }
  validate(model);
  return model;
}

std::string save_model(const GraphModel& model) {
  json doc;
  doc["name"] = model.name;
  doc["inputs"] = json::array();
  for (const auto& s : model.inputs) doc["inputs"].push_back(spec_json(s));
  doc["outputs"] = json::array();
  for (const auto& s : model.outputs) doc["outputs"].push_back(spec_json(s));
  doc["initializers"] = json::array();
  for (const auto& [name, tensor] : model.initializers) {
    json j;
    j["name"] = name;
    const json body = tensor_json(tensor);
    for (const auto& [k, v] : body.items()) j[k] = v;
    doc["initializers"].push_back(std::move(j));
  }
  doc["nodes"] = json::array();
  for (const auto& node : model.nodes) {
    json j;
    j["op_type"] = node.op_type;
    j["name"] = node.name;
    j["inputs"] = node.inputs;
    j["outputs"] = node.outputs;
    json attrs = json::object();
    for (const auto& [key, value] : node.attributes) attrs[key] = attribute_json(value);
    j["attributes"] = std::move(attrs);
    doc["nodes"].push_back(std::move(j));
  }
  if (!model.metadata.empty()) {
    json meta = json::object();
    for (const auto& [k, v] : model.metadata) meta[k] = v;
    doc["metadata"] = std::move(meta);
  }
  return doc.dump(1) + "\n";
}

Tensor load_tensor(std::string_view bytes) {
  const json doc = parse_json(bytes);
  if (!doc.is_object()) throw ParseError("tensor document must be an object");
  Tensor t = parse_tensor_json(doc, "tensor");
  return t;
}

std::string save_tensor(const Tensor& tensor) { return tensor_json(tensor).dump(1) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

GraphModel read_model_file(const std::filesystem::path& path) {
  return load_model(read_file(path));
}

void write_model_file(const std::filesystem::path& path, const GraphModel& model) {
  write_file(path, save_model(model));
}

Tensor read_tensor_file(const std::filesystem::path& path) { return load_tensor(read_file(path)); }

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, save_tensor(tensor));
}

}  // namespace shapgraph
