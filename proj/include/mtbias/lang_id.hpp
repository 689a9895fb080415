#pragma once

// Rank-profile language identification (Cavnar/Trenkle out-of-place
// distance over character 1..5-grams) and the off-target translation rate.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtbias/error.hpp"
#include "mtbias/text_metrics.hpp"
#include "mtbias/utf8.hpp"

namespace mtbias {

struct LanguageProfile {
  std::string lang;
  std::vector<std::u32string> ranked_ngrams;  // rank = position in this list
  size_t k = 300;                             // requested depth; also the miss penalty
};

namespace detail {

// ASCII lowercase, digits folded to '0'. Non-ASCII code points pass through.
inline std::u32string normalize_for_lid(std::string_view text) {
  std::u32string out = utf8_decode(text);
  for (char32_t& c : out) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    else if (c >= U'0' && c <= U'9') c = U'0';
  }
  return out;
}

// 1..5-gram counts over words padded with '_' boundaries.
inline void accumulate_lid_ngrams(std::u32string_view normalized,
                                  std::map<std::u32string, long long>& counts) {
  std::u32string word;
  auto flush = [&]() {
    if (word.empty()) return;
    std::u32string padded;
    padded.reserve(word.size() + 2);
    padded.push_back(U'_');
    padded += word;
    padded.push_back(U'_');
    for (int n = 1; n <= 5; ++n)
      for (size_t i = 0; i + static_cast<size_t>(n) <= padded.size(); ++i)
        ++counts[padded.substr(i, static_cast<size_t>(n))];
    word.clear();
  };
  for (char32_t c : normalized) {
    if (is_ascii_space(c)) flush();
    else word.push_back(c);
  }
  flush();
}

inline std::vector<std::u32string> rank_top_k(const std::map<std::u32string, long long>& counts,
                                              size_t k) {
  std::vector<std::pair<std::u32string, long long>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > k) items.resize(k);
  std::vector<std::u32string> out;
  out.reserve(items.size());
  for (auto& [gram, count] : items) out.push_back(std::move(gram));
  return out;
}

inline std::vector<std::u32string> text_profile(std::string_view text, size_t k) {
  std::map<std::u32string, long long> counts;
  accumulate_lid_ngrams(normalize_for_lid(text), counts);
  return rank_top_k(counts, k);
}

}  // namespace detail

inline std::vector<LanguageProfile> train_profiles(
    const std::map<std::string, std::vector<std::string>>& corpora, size_t k = 300) {
  if (k < 1) throw error("profile size k must be at least 1");
  if (corpora.size() < 2) throw error("profile training needs at least 2 languages");
  std::vector<LanguageProfile> out;
  for (const auto& [lang, texts] : corpora) {
    if (texts.empty()) throw error("empty corpus for language '" + lang + "'");
    std::map<std::u32string, long long> counts;
    for (const std::string& t : texts)
      detail::accumulate_lid_ngrams(detail::normalize_for_lid(t), counts);
    if (counts.empty()) throw error("empty corpus for language '" + lang + "'");
    out.push_back({lang, detail::rank_top_k(counts, k), k});
  }
  return out;
}

struct Identification {
  std::string lang;
  uint64_t distance = 0;  // out-of-place distance
};

// Smallest out-of-place distance wins; ties break toward the
// lexicographically smaller language code. Result is independent of the
// order the profiles are passed in.
inline Identification identify(const std::vector<LanguageProfile>& profiles,
                               std::string_view text) {
  if (profiles.empty()) throw error("identify needs at least one profile");
  size_t k = 0;
  for (const LanguageProfile& p : profiles) k = std::max(k, p.k);
  std::vector<std::u32string> text_ranked = detail::text_profile(text, k);
  if (text_ranked.empty()) throw error("cannot identify empty text");

  bool found = false;
  Identification best;
  for (const LanguageProfile& p : profiles) {
    std::unordered_map<std::u32string, size_t> rank_of;
    rank_of.reserve(p.ranked_ngrams.size());
    for (size_t r = 0; r < p.ranked_ngrams.size(); ++r) rank_of.emplace(p.ranked_ngrams[r], r);
    uint64_t dist = 0;
    for (size_t r = 0; r < text_ranked.size(); ++r) {
      auto it = rank_of.find(text_ranked[r]);
      if (it == rank_of.end()) dist += k;
      else dist += r > it->second ? r - it->second : it->second - r;
    }
    if (!found || dist < best.distance ||
        (dist == best.distance && p.lang < best.lang)) {
      best = {p.lang, dist};
      found = true;
    }
  }
  return best;
}

enum class HypSide { base, comp };

inline HypSide hyp_side_from_string(std::string_view s) {
  if (s == "base") return HypSide::base;
  if (s == "comp") return HypSide::comp;
  throw error("unknown hypothesis side '" + std::string(s) + "' (expected base or comp)");
}

struct OffTargetResult {
  double rate = 0.0;
  size_t evaluated = 0;
};

// Records whose reference is not identified as the target language are
// excluded; among the rest, the rate is the share of hypotheses identified
// as some other language. Hypotheses without any identifiable text count as
// off-target.
inline OffTargetResult off_target_rate(const std::vector<TranslationRecord>& records,
                                       const std::vector<LanguageProfile>& profiles,
                                       HypSide which) {
  std::map<std::string, bool> covered;
  for (const LanguageProfile& p : profiles) covered[p.lang] = true;
  for (const TranslationRecord& r : records)
    if (!covered.count(r.tgt_lang))
      throw error("no language profile for target language '" + r.tgt_lang + "'");

  size_t evaluated = 0;
  size_t off = 0;
  for (const TranslationRecord& r : records) {
    if (detail::text_profile(r.reference, 1).empty()) continue;  // nothing to identify
    if (identify(profiles, r.reference).lang != r.tgt_lang) continue;
    ++evaluated;
    const std::string& hyp = which == HypSide::base ? r.hyp_base : r.hyp_comp;
    if (detail::text_profile(hyp, 1).empty()) {
      ++off;
      continue;
    }
    if (identify(profiles, hyp).lang != r.tgt_lang) ++off;
  }
  double rate = evaluated > 0 ? static_cast<double>(off) / static_cast<double>(evaluated) : 0.0;
  return {rate, evaluated};
}

}  // namespace mtbias
