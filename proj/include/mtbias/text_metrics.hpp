#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtbias/error.hpp"
#include "mtbias/utf8.hpp"

namespace mtbias {

namespace detail {

inline bool is_ascii_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

// Strip whitespace at the ends only; internal whitespace is scored.
inline std::u32string strip_ends(const std::u32string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

struct NgramCounts {
  std::unordered_map<std::u32string, long long> counts;
  long long total = 0;
};

inline NgramCounts char_ngrams(const std::u32string& s, int n) {
  NgramCounts out;
  if (static_cast<int>(s.size()) < n) return out;
  for (size_t i = 0; i + static_cast<size_t>(n) <= s.size(); ++i) {
    ++out.counts[s.substr(i, static_cast<size_t>(n))];
    ++out.total;
  }
  return out;
}

}  // namespace detail

// Character n-gram F-score on [0, 100]. Precision and recall are averaged
// over the orders 1..max_n for which the reference has at least one n-gram,
// then combined with recall weight beta (ChrF3 by default).
inline double chrf(std::string_view reference, std::string_view hypothesis, int max_n = 6,
                   double beta = 3.0) {
  if (max_n < 1) throw error("chrf: max_n must be at least 1");
  std::u32string ref = detail::strip_ends(utf8_decode(reference));
  if (ref.empty()) throw error("chrf: reference is empty");
  std::u32string hyp = detail::strip_ends(utf8_decode(hypothesis));

  double precision_sum = 0.0;
  double recall_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (static_cast<int>(ref.size()) < n) break;
    detail::NgramCounts rc = detail::char_ngrams(ref, n);
    detail::NgramCounts hc = detail::char_ngrams(hyp, n);
    long long match = 0;
    for (const auto& [gram, count] : hc.counts) {
      auto it = rc.counts.find(gram);
      if (it != rc.counts.end()) match += std::min(count, it->second);
    }
    precision_sum += hc.total > 0 ? static_cast<double>(match) / static_cast<double>(hc.total) : 0.0;
    recall_sum += static_cast<double>(match) / static_cast<double>(rc.total);
    ++orders;
  }
  double precision = precision_sum / orders;
  double recall = recall_sum / orders;
  if (precision + recall == 0.0) return 0.0;
  double b2 = beta * beta;
  return 100.0 * (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

// Corpus BLEU on [0, 100] over caller-supplied token sequences (spBLEU when
// fed subword tokens). Higher orders with zero matches are smoothed add-one
// on both numerator and denominator; a zero unigram match stays zero. The
// brevity penalty is exp(1 - ref_len / hyp_len) when the hypothesis side is
// shorter.
template <typename Token>
double bleu(const std::vector<std::vector<Token>>& references,
            const std::vector<std::vector<Token>>& hypotheses, int max_n = 4) {
  if (references.size() != hypotheses.size())
    throw error("bleu: reference/hypothesis count mismatch");
  if (references.empty()) throw error("bleu: empty corpus");
  if (max_n < 1) throw error("bleu: max_n must be at least 1");

  std::vector<long long> total(static_cast<size_t>(max_n) + 1, 0);
  std::vector<long long> match(static_cast<size_t>(max_n) + 1, 0);
  long long ref_len = 0;
  long long hyp_len = 0;

  std::map<std::vector<Token>, long long> ref_counts;
  std::map<std::vector<Token>, long long> hyp_counts;
  for (size_t r = 0; r < references.size(); ++r) {
    const auto& ref = references[r];
    const auto& hyp = hypotheses[r];
    if (ref.empty()) throw error("bleu: empty reference at record " + std::to_string(r));
    ref_len += static_cast<long long>(ref.size());
    hyp_len += static_cast<long long>(hyp.size());
    for (int n = 1; n <= max_n; ++n) {
      ref_counts.clear();
      hyp_counts.clear();
      for (size_t i = 0; i + static_cast<size_t>(n) <= ref.size(); ++i)
        ++ref_counts[std::vector<Token>(ref.begin() + i, ref.begin() + i + n)];
      for (size_t i = 0; i + static_cast<size_t>(n) <= hyp.size(); ++i) {
        ++hyp_counts[std::vector<Token>(hyp.begin() + i, hyp.begin() + i + n)];
        ++total[static_cast<size_t>(n)];
      }
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          match[static_cast<size_t>(n)] += std::min(count, it->second);
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long long m = match[static_cast<size_t>(n)];
    long long t = total[static_cast<size_t>(n)];
    double p;
    if (n == 1) {
      if (m == 0) return 0.0;
      p = static_cast<double>(m) / static_cast<double>(t);
    } else if (m == 0) {
      p = static_cast<double>(m + 1) / static_cast<double>(t + 1);
    } else {
      p = static_cast<double>(m) / static_cast<double>(t);
    }
    log_sum += std::log(p);
  }
  double geo = std::exp(log_sum / max_n);
  double bp = hyp_len < ref_len
                  ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                  : 1.0;
  return 100.0 * geo * bp;
}

// --- tokenizers -------------------------------------------------------------

inline std::vector<std::string> whitespace_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::u32string cps = utf8_decode(text);
  std::u32string word;
  for (char32_t c : cps) {
    if (detail::is_ascii_space(c)) {
      if (!word.empty()) {
        out.push_back(utf8_encode(word));
        word.clear();
      }
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) out.push_back(utf8_encode(word));
  return out;
}

// One token per non-whitespace code point; fallback for text without
// usable word boundaries.
inline std::vector<std::string> character_tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (char32_t c : utf8_decode(text)) {
    if (detail::is_ascii_space(c)) continue;
    std::string tok;
    utf8_append(tok, c);
    out.push_back(std::move(tok));
  }
  return out;
}

enum class Tokenizer { whitespace, character };

inline Tokenizer tokenizer_from_string(std::string_view s) {
  if (s == "whitespace") return Tokenizer::whitespace;
  if (s == "character") return Tokenizer::character;
  throw error("unknown tokenizer '" + std::string(s) + "'");
}

inline std::vector<std::string> tokenize(std::string_view text, Tokenizer t) {
  return t == Tokenizer::whitespace ? whitespace_tokenize(text) : character_tokenize(text);
}

// --- delta partition ---------------------------------------------------------

// One corpus sentence with both systems' outputs. attn_base / attn_comp are
// optional line indices into the attention JSONL files.
struct TranslationRecord {
  std::string src_lang;
  std::string tgt_lang;
  std::string source;
  std::string reference;
  std::string hyp_base;
  std::string hyp_comp;
  std::string pair_id;
  std::optional<size_t> attn_base;
  std::optional<size_t> attn_comp;

  void validate() const {
    if (src_lang.empty() || tgt_lang.empty()) throw error("record languages must be non-empty");
    if (reference.empty()) throw error("record reference must be non-empty");
  }
};

enum class DeltaBucket { losing, winning, neutral };

inline const char* to_string(DeltaBucket b) {
  switch (b) {
    case DeltaBucket::losing: return "losing";
    case DeltaBucket::winning: return "winning";
    case DeltaBucket::neutral: return "neutral";
  }
  return "neutral";
}

struct DeltaOutcome {
  double delta = 0.0;
  DeltaBucket bucket = DeltaBucket::neutral;
};

// delta is ChrF difference on the [0, 1] scale, so the paper's +-0.5
// thresholds select genuinely flipped sentences. Comparisons are strict.
inline DeltaOutcome classify_delta(double delta, double threshold = 0.5) {
  if (!(threshold > 0.0)) throw error("delta threshold must be positive");
  if (delta < -threshold) return {delta, DeltaBucket::losing};
  if (delta > threshold) return {delta, DeltaBucket::winning};
  return {delta, DeltaBucket::neutral};
}

inline std::vector<DeltaOutcome> delta_partition(const std::vector<TranslationRecord>& records,
                                                 double threshold = 0.5, int chrf_max_n = 6,
                                                 double chrf_beta = 3.0) {
  if (!(threshold > 0.0)) throw error("delta threshold must be positive");
  std::vector<DeltaOutcome> out;
  out.reserve(records.size());
  for (const TranslationRecord& r : records) {
    double comp = chrf(r.reference, r.hyp_comp, chrf_max_n, chrf_beta) / 100.0;
    double base = chrf(r.reference, r.hyp_base, chrf_max_n, chrf_beta) / 100.0;
    out.push_back(classify_delta(comp - base, threshold));
  }
  return out;
}

}  // namespace mtbias
