#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtbias/error.hpp"
#include "mtbias/tensor.hpp"

namespace mtbias {

// How parameters are pooled before ranking by magnitude:
//   transformer_layer  — all parameters of one layer unit share a pool
//                        (embedding tables are their own units),
//   per_module         — every tensor is its own pool,
//   separate_attn_ffn  — pool by functional group within each layer unit.
enum class PruneStrategy { transformer_layer, per_module, separate_attn_ffn };

inline const char* to_string(PruneStrategy s) {
  switch (s) {
    case PruneStrategy::transformer_layer: return "transformer-layer";
    case PruneStrategy::per_module: return "per-module";
    case PruneStrategy::separate_attn_ffn: return "separate-attn-ffn";
  }
  return "transformer-layer";
}

inline PruneStrategy prune_strategy_from_string(std::string_view s) {
  if (s == "transformer-layer") return PruneStrategy::transformer_layer;
  if (s == "per-module") return PruneStrategy::per_module;
  if (s == "separate-attn-ffn") return PruneStrategy::separate_attn_ffn;
  throw error("unknown prune strategy '" + std::string(s) + "'");
}

// Zeroes the round(p*n) smallest-magnitude values within each pool, where
// round is half-away-from-zero and n is the pool size. Ties in |w| keep
// pool order (tensor name, then flat index), so results are deterministic.
// Values that survive are bit-identical to the input.
inline WeightSet magnitude_prune(const WeightSet& ws, double p, PruneStrategy strategy) {
  if (!(p >= 0.0 && p <= 1.0)) throw error("sparsity ratio must lie in [0, 1]");
  ws.validate();

  WeightSet out = ws;

  // Entries are appended in iteration order; that order is the tie-break.
  struct Entry {
    Tensor* tensor;
    size_t index;
  };
  std::map<std::string, std::vector<Entry>> pools;
  for (auto& [name, t] : out.params) {
    std::string key;
    switch (strategy) {
      case PruneStrategy::transformer_layer: key = out.layer_of.at(name); break;
      case PruneStrategy::per_module: key = name; break;
      case PruneStrategy::separate_attn_ffn:
        key = out.layer_of.at(name) + "\x1f" + to_string(out.group_of.at(name));
        break;
    }
    auto& pool = pools[key];
    for (size_t i = 0; i < t.data.size(); ++i) pool.push_back({&t, i});
  }

  std::vector<size_t> order;
  for (auto& [key, pool] : pools) {
    size_t n = pool.size();
    auto k = static_cast<size_t>(std::llround(p * static_cast<double>(n)));
    k = std::min(k, n);
    if (k == 0) continue;
    order.resize(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&pool](size_t a, size_t b) {
      return std::fabs(pool[a].tensor->data[pool[a].index]) <
             std::fabs(pool[b].tensor->data[pool[b].index]);
    });
    for (size_t i = 0; i < k; ++i) {
      const Entry& e = pool[order[i]];
      e.tensor->data[e.index] = 0.0f;
    }
  }
  return out;
}

}  // namespace mtbias
