#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "mtbias/error.hpp"

namespace mtbias {

// Language resource class by bitext volume with English. Boundary counts
// fall into the lower class (<= thresholds).
enum class ResourceBucket { very_low, low, medium, high };

inline const char* to_string(ResourceBucket b) {
  switch (b) {
    case ResourceBucket::very_low: return "very-low";
    case ResourceBucket::low: return "low";
    case ResourceBucket::medium: return "medium";
    case ResourceBucket::high: return "high";
  }
  return "very-low";
}

inline ResourceBucket bucket(uint64_t count) {
  if (count <= 100'000ull) return ResourceBucket::very_low;
  if (count <= 1'000'000ull) return ResourceBucket::low;
  if (count <= 100'000'000ull) return ResourceBucket::medium;
  return ResourceBucket::high;
}

// Sentence-pair counts with English per language.
struct ResourceTable {
  std::map<std::string, uint64_t> bitext;

  uint64_t count_for(const std::string& lang) const {
    auto it = bitext.find(lang);
    if (it == bitext.end()) throw error("no resource count for language '" + lang + "'");
    return it->second;
  }
};

// rho_xy = min(rho_x, rho_y): a pair is only as well-resourced as its
// weaker side.
inline std::pair<uint64_t, ResourceBucket> pair_resource(const ResourceTable& table,
                                                         const std::string& x,
                                                         const std::string& y) {
  uint64_t rho = std::min(table.count_for(x), table.count_for(y));
  return {rho, bucket(rho)};
}

// Evaluation-pair filter: keep pairs whose baseline score is strictly above
// the threshold.
inline std::set<std::pair<std::string, std::string>> filter_pairs(
    const std::map<std::pair<std::string, std::string>, double>& baseline_scores,
    double threshold = 12.0) {
  std::set<std::pair<std::string, std::string>> kept;
  for (const auto& [pair, score] : baseline_scores)
    if (score > threshold) kept.insert(pair);
  return kept;
}

}  // namespace mtbias
