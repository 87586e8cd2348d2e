// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_CORPUS_HPP_
#define SHAPGRAPH_CORPUS_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "shapgraph/model.hpp"
#include "shapgraph/tensor.hpp"

namespace shapgraph {

inline constexpr uint64_t kCorpusSeed = 20260117;

// Portable uniform generator: std::mt19937_64 is fully specified by the
// standard, and the bits-to-double mapping below avoids the
// implementation-defined std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }
  Tensor tensor(DType dtype, const Shape& shape, double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

// X: N x 32 -> MatMul(W: 32 x 1) -> Sigmoid.
GraphModel demo_model(uint64_t seed = kCorpusSeed);

// Motif tags, in corpus order.
const std::vector<std::string>& motif_tags();

// 3 x 16 x 16 input, 10-class head, float64.
GraphModel build_motif(const std::string& motif, uint64_t seed = kCorpusSeed);

struct CorpusEntry {
  std::string motif;
  GraphModel model;
  Tensor references;            // B x input
  std::vector<Tensor> samples;  // each 1 x input
};

std::vector<CorpusEntry> build_corpus(uint64_t seed = kCorpusSeed, int64_t reference_count = 5,
                                      size_t sample_count = 20);

// Per-row input shape of the model's single graph input, with leading `rows`.
Shape input_shape(const GraphModel& model, int64_t rows);
Tensor zero_references(const GraphModel& model, int64_t count);
Tensor random_references(const GraphModel& model, int64_t count, uint64_t seed);
Tensor random_input(const GraphModel& model, uint64_t seed);

// One small network per gradient rule family, keyed by a short rule tag.
struct MicroNet {
  std::string rule;
  GraphModel model;
};
std::vector<MicroNet> micro_nets(uint64_t seed = kCorpusSeed);

// op_type -> motifs whose model contains it.
using CoverageMatrix = std::map<std::string, std::set<std::string>>;
CoverageMatrix op_coverage(const std::vector<CorpusEntry>& corpus);
std::string format_coverage(const CoverageMatrix& coverage);

}  // namespace shapgraph

#endif  // SHAPGRAPH_CORPUS_HPP_
