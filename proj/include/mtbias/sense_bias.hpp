#pragma once

// DiBiMT-style word-sense bias metrics. Sense indices are 1-based positions
// in the frequency-ordered synset list of the record's lemma/POS.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtbias/error.hpp"

namespace mtbias {

struct SenseRecord {
  std::string lemma_pos;
  uint32_t gold_index = 1;                      // 1-based rank of the gold synset
  std::optional<uint32_t> predicted_index;      // absent when not mappable
  bool correct = false;
  uint32_t polysemy = 1;                        // size of the synset list

  void validate() const {
    if (polysemy < 1) throw error("sense record polysemy must be at least 1");
    if (gold_index < 1 || gold_index > polysemy)
      throw error("sense record gold index out of range");
    if (predicted_index && (*predicted_index < 1 || *predicted_index > polysemy))
      throw error("sense record predicted index out of range");
    if (correct && predicted_index && *predicted_index != gold_index)
      throw error("sense record marked correct but predicted a different synset");
  }
};

namespace detail {

template <typename KeyFn>
double bucketed_error_mean(const std::vector<SenseRecord>& records, KeyFn&& key) {
  if (records.empty()) throw error("sense metrics need at least one record");
  std::map<uint32_t, std::pair<long long, long long>> buckets;  // key -> (wrong, total)
  for (const SenseRecord& r : records) {
    auto& [wrong, total] = buckets[key(r)];
    if (!r.correct) ++wrong;
    ++total;
  }
  double sum = 0.0;
  for (const auto& [k, wt] : buckets)
    sum += static_cast<double>(wt.first) / static_cast<double>(wt.second);
  return 100.0 * sum / static_cast<double>(buckets.size());
}

}  // namespace detail

// Error rate bucketed by the gold synset's frequency rank, macro-averaged
// over the occupied buckets.
inline double sfii(const std::vector<SenseRecord>& records) {
  return detail::bucketed_error_mean(records, [](const SenseRecord& r) { return r.gold_index; });
}

// Same, bucketed by polysemy degree.
inline double spdi(const std::vector<SenseRecord>& records) {
  return detail::bucketed_error_mean(records, [](const SenseRecord& r) { return r.polysemy; });
}

namespace detail {

inline double mfs_ratio(const std::vector<SenseRecord>& records, bool most_frequent_only) {
  long long denom = 0;
  long long num = 0;
  for (const SenseRecord& r : records) {
    if (r.correct || !r.predicted_index) continue;
    ++denom;
    bool more_frequent = *r.predicted_index < r.gold_index;
    if (more_frequent && (!most_frequent_only || *r.predicted_index == 1)) ++num;
  }
  if (denom == 0)
    throw error("MFS undefined: no erroneous records with a predicted sense index");
  return 100.0 * static_cast<double>(num) / static_cast<double>(denom);
}

}  // namespace detail

// Share of errors that picked a more frequent sense than the gold one.
inline double mfs(const std::vector<SenseRecord>& records) {
  return detail::mfs_ratio(records, false);
}

// Share of errors that picked the most frequent sense (rank 1) when the
// gold sense was rarer. Always <= MFS.
inline double mfs_plus(const std::vector<SenseRecord>& records) {
  return detail::mfs_ratio(records, true);
}

inline double bias_average(const std::vector<SenseRecord>& records) {
  return (sfii(records) + spdi(records) + mfs(records) + mfs_plus(records)) / 4.0;
}

}  // namespace mtbias
