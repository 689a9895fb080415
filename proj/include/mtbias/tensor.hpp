#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/error.hpp"

namespace mtbias {

// Dense float32 tensor, row-major. Shapes are never empty and every
// dimension is positive.
struct Tensor {
  std::vector<uint32_t> shape;
  std::vector<float> data;

  Tensor() = default;

  Tensor(std::vector<uint32_t> shape_, std::vector<float> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape.empty()) throw error("tensor shape must have at least one dimension");
    if (numel_of(shape) != data.size())
      throw error("tensor shape/value count mismatch");
  }

  static size_t numel_of(const std::vector<uint32_t>& shape) {
    if (shape.empty()) return 0;
    uint64_t n = 1;
    for (uint32_t d : shape) {
      if (d == 0) throw error("tensor dimensions must be positive");
      n *= d;
      if (n > (1ull << 32)) throw error("tensor too large");
    }
    return static_cast<size_t>(n);
  }

  static Tensor zeros(std::vector<uint32_t> shape) {
    size_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
  }

  size_t numel() const { return data.size(); }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor& other) const = default;
};

enum class ParamGroup { attention, feedforward, embedding, other };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::attention: return "attention";
    case ParamGroup::feedforward: return "feedforward";
    case ParamGroup::embedding: return "embedding";
    case ParamGroup::other: return "other";
  }
  return "other";
}

inline ParamGroup param_group_from_string(std::string_view s) {
  if (s == "attention") return ParamGroup::attention;
  if (s == "feedforward") return ParamGroup::feedforward;
  if (s == "embedding") return ParamGroup::embedding;
  if (s == "other") return ParamGroup::other;
  throw error("unknown parameter group '" + std::string(s) + "'");
}

// Named parameter collection. std::map keeps iteration lexicographic, which
// is the ordering contract of the weight file format. Treated as immutable
// once built; derived sets are fresh copies.
struct WeightSet {
  std::map<std::string, Tensor> params;
  std::map<std::string, std::string> layer_of;  // name -> layer unit id
  std::map<std::string, ParamGroup> group_of;   // name -> functional group

  size_t total_values() const {
    size_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
  }

  // Every parameter must be tagged in both maps and the maps may not carry
  // stray names (the file format round-trips them one-to-one).
  void validate() const {
    for (const auto& [name, t] : params) {
      if (!layer_of.count(name))
        throw error("parameter '" + name + "' has no layer assignment");
      if (!group_of.count(name))
        throw error("parameter '" + name + "' has no group assignment");
    }
    if (layer_of.size() != params.size() || group_of.size() != params.size())
      throw error("layer/group maps name parameters that do not exist");
  }

  bool operator==(const WeightSet& other) const = default;
};

// Fraction of exactly-zero values. Pruning writes exact zeros, so the test
// is plain float equality.
inline double sparsity(const WeightSet& ws) {
  size_t total = ws.total_values();
  if (total == 0) throw error("sparsity of an empty weight set is undefined");
  size_t zeros = 0;
  for (const auto& [name, t] : ws.params)
    for (float v : t.data)
      if (v == 0.0f) ++zeros;
  return static_cast<double>(zeros) / static_cast<double>(total);
}

}  // namespace mtbias
