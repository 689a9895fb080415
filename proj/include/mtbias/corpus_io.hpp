#pragma once

// JSON / JSONL readers and writers for every on-disk schema the toolkit
// consumes. All parse failures raise schema_error naming the file and line.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtbias/attention.hpp"
#include "mtbias/error.hpp"
#include "mtbias/gender.hpp"
#include "mtbias/lang_id.hpp"
#include "mtbias/resources.hpp"
#include "mtbias/sense_bias.hpp"
#include "mtbias/tensor.hpp"
#include "mtbias/text_metrics.hpp"
#include "mtbias/transformer.hpp"
#include "mtbias/utf8.hpp"

namespace mtbias {

namespace detail {

using json = nlohmann::json;

inline std::string loc(const std::string& file, size_t line) {
  return file + ":" + std::to_string(line);
}

inline json parse_json(const std::string& text, const std::string& file, size_t line) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw schema_error(loc(file, line) + ": invalid JSON: " + e.what());
  }
}

inline const json& require(const json& j, const char* key, const std::string& file, size_t line) {
  if (!j.is_object() || !j.contains(key))
    throw schema_error(loc(file, line) + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T field(const json& j, const char* key, const std::string& file, size_t line) {
  try {
    return require(j, key, file, line).get<T>();
  } catch (const json::exception& e) {
    throw schema_error(loc(file, line) + ": bad value for field '" + key + "': " + e.what());
  }
}

// Calls fn(line_text, line_number) for every non-blank line.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, lineno);
  }
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw error(path + ": cannot open file for writing");
  return out;
}

}  // namespace detail

// --- translation corpus -------------------------------------------------------

inline std::vector<TranslationRecord> load_corpus_jsonl(const std::string& path) {
  std::vector<TranslationRecord> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    TranslationRecord r;
    r.src_lang = detail::field<std::string>(j, "src_lang", path, lineno);
    r.tgt_lang = detail::field<std::string>(j, "tgt_lang", path, lineno);
    r.source = detail::field<std::string>(j, "source", path, lineno);
    r.reference = detail::field<std::string>(j, "reference", path, lineno);
    r.hyp_base = detail::field<std::string>(j, "hyp_base", path, lineno);
    r.hyp_comp = detail::field<std::string>(j, "hyp_comp", path, lineno);
    r.pair_id = j.contains("pair_id") ? detail::field<std::string>(j, "pair_id", path, lineno)
                                      : r.src_lang + "-" + r.tgt_lang;
    if (j.contains("attn_base"))
      r.attn_base = detail::field<size_t>(j, "attn_base", path, lineno);
    if (j.contains("attn_comp"))
      r.attn_comp = detail::field<size_t>(j, "attn_comp", path, lineno);
    try {
      r.validate();
    } catch (const error& e) {
      throw schema_error(detail::loc(path, lineno) + ": " + e.what());
    }
    out.push_back(std::move(r));
  });
  return out;
}

inline void save_corpus_jsonl(const std::vector<TranslationRecord>& records,
                              const std::string& path) {
  std::ofstream out = detail::open_for_write(path);
  for (const TranslationRecord& r : records) {
    detail::json j{{"src_lang", r.src_lang}, {"tgt_lang", r.tgt_lang}, {"source", r.source},
                   {"reference", r.reference}, {"hyp_base", r.hyp_base},
                   {"hyp_comp", r.hyp_comp},  {"pair_id", r.pair_id}};
    if (r.attn_base) j["attn_base"] = *r.attn_base;
    if (r.attn_comp) j["attn_comp"] = *r.attn_comp;
    out << j.dump() << '\n';
  }
}

// --- attention matrices -------------------------------------------------------

// One matrix per line: {"alpha": [[...], ...]}, row-major target x source.
inline std::vector<AttentionMatrix> load_attention_jsonl(const std::string& path) {
  std::vector<AttentionMatrix> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    const detail::json& rows = detail::require(j, "alpha", path, lineno);
    if (!rows.is_array() || rows.empty())
      throw schema_error(detail::loc(path, lineno) + ": alpha must be a non-empty array of rows");
    AttentionMatrix m;
    m.rows = rows.size();
    m.cols = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      const detail::json& row = rows[i];
      if (!row.is_array() || row.empty())
        throw schema_error(detail::loc(path, lineno) + ": alpha rows must be non-empty arrays");
      if (i == 0) {
        m.cols = row.size();
        m.alpha.reserve(m.rows * m.cols);
      } else if (row.size() != m.cols) {
        throw schema_error(detail::loc(path, lineno) + ": ragged attention matrix");
      }
      for (const detail::json& v : row) {
        if (!v.is_number())
          throw schema_error(detail::loc(path, lineno) + ": attention weights must be numbers");
        m.alpha.push_back(v.get<double>());
      }
    }
    try {
      m.validate();
    } catch (const error& e) {
      throw schema_error(detail::loc(path, lineno) + ": " + e.what());
    }
    out.push_back(std::move(m));
  });
  return out;
}

inline void save_attention_jsonl(const std::vector<AttentionMatrix>& mats,
                                 const std::string& path) {
  std::ofstream out = detail::open_for_write(path);
  for (const AttentionMatrix& m : mats) {
    detail::json rows = detail::json::array();
    for (size_t i = 0; i < m.rows; ++i) {
      detail::json row = detail::json::array();
      for (size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
      rows.push_back(std::move(row));
    }
    out << detail::json{{"alpha", std::move(rows)}}.dump() << '\n';
  }
}

// --- language profiles ---------------------------------------------------------

// {"k": 300, "profiles": [{"lang": "...", "ngrams": ["...", ...]}, ...]}
// where ngrams are listed in rank order.
inline void save_profiles_json(const std::vector<LanguageProfile>& profiles,
                               const std::string& path) {
  detail::json j;
  size_t k = 0;
  for (const LanguageProfile& p : profiles) k = std::max(k, p.k);
  j["k"] = k;
  auto& arr = j["profiles"] = detail::json::array();
  for (const LanguageProfile& p : profiles) {
    detail::json grams = detail::json::array();
    for (const std::u32string& g : p.ranked_ngrams) grams.push_back(utf8_encode(g));
    arr.push_back({{"lang", p.lang}, {"ngrams", std::move(grams)}});
  }
  std::ofstream out = detail::open_for_write(path);
  out << j.dump(2) << '\n';
}

inline std::vector<LanguageProfile> load_profiles_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  detail::json j = detail::parse_json(buf.str(), path, 1);
  size_t k = detail::field<size_t>(j, "k", path, 1);
  if (k < 1) throw schema_error(path + ": k must be at least 1");
  const detail::json& arr = detail::require(j, "profiles", path, 1);
  if (!arr.is_array() || arr.empty())
    throw schema_error(path + ": profiles must be a non-empty array");
  std::vector<LanguageProfile> out;
  for (const detail::json& pj : arr) {
    LanguageProfile p;
    p.lang = detail::field<std::string>(pj, "lang", path, 1);
    p.k = k;
    for (const detail::json& g : detail::require(pj, "ngrams", path, 1))
      p.ranked_ngrams.push_back(utf8_decode(g.get<std::string>()));
    out.push_back(std::move(p));
  }
  return out;
}

// --- resources ------------------------------------------------------------------

// {"lang": bitext-count-with-English, ...}
inline ResourceTable load_resources_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  detail::json j = detail::parse_json(buf.str(), path, 1);
  if (!j.is_object()) throw schema_error(path + ": expected a JSON object of language counts");
  ResourceTable table;
  for (auto& [lang, count] : j.items()) {
    if (!count.is_number_unsigned())
      throw schema_error(path + ": count for '" + lang + "' must be a non-negative integer");
    table.bitext[lang] = count.get<uint64_t>();
  }
  return table;
}

inline void save_resources_json(const ResourceTable& table, const std::string& path) {
  detail::json j = detail::json::object();
  for (const auto& [lang, count] : table.bitext) j[lang] = count;
  std::ofstream out = detail::open_for_write(path);
  out << j.dump(2) << '\n';
}

// --- gender records --------------------------------------------------------------

// {"lang": "...", "gold": "male|female", "predicted": "male|female|unknown",
//  "stereotype": "pro|anti|neutral"}
inline std::vector<GenderRecord> load_gender_jsonl(const std::string& path) {
  std::vector<GenderRecord> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    GenderRecord r;
    try {
      r.gold = gender_from_string(detail::field<std::string>(j, "gold", path, lineno));
      r.predicted =
          predicted_gender_from_string(detail::field<std::string>(j, "predicted", path, lineno));
      r.stereotype =
          stereotype_from_string(detail::field<std::string>(j, "stereotype", path, lineno));
    } catch (const schema_error&) {
      throw;
    } catch (const error& e) {
      throw schema_error(detail::loc(path, lineno) + ": " + e.what());
    }
    r.lang = detail::field<std::string>(j, "lang", path, lineno);
    out.push_back(std::move(r));
  });
  return out;
}

// --- sense records ----------------------------------------------------------------

// {"lemma_pos": "...", "gold_index": C, "predicted_index": C' (optional),
//  "correct": bool, "polysemy": n}
inline std::vector<SenseRecord> load_senses_jsonl(const std::string& path) {
  std::vector<SenseRecord> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    SenseRecord r;
    r.lemma_pos = detail::field<std::string>(j, "lemma_pos", path, lineno);
    r.gold_index = detail::field<uint32_t>(j, "gold_index", path, lineno);
    if (j.contains("predicted_index") && !j.at("predicted_index").is_null())
      r.predicted_index = detail::field<uint32_t>(j, "predicted_index", path, lineno);
    r.correct = detail::field<bool>(j, "correct", path, lineno);
    r.polysemy = detail::field<uint32_t>(j, "polysemy", path, lineno);
    try {
      r.validate();
    } catch (const error& e) {
      throw schema_error(detail::loc(path, lineno) + ": " + e.what());
    }
    out.push_back(std::move(r));
  });
  return out;
}

// --- model config ------------------------------------------------------------------

inline ModelConfig load_model_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  detail::json j = detail::parse_json(buf.str(), path, 1);
  ModelConfig cfg;
  cfg.vocab_size = detail::field<uint32_t>(j, "vocab_size", path, 1);
  cfg.d_model = detail::field<uint32_t>(j, "d_model", path, 1);
  cfg.n_heads = detail::field<uint32_t>(j, "n_heads", path, 1);
  cfg.n_enc_layers = detail::field<uint32_t>(j, "n_enc_layers", path, 1);
  cfg.n_dec_layers = detail::field<uint32_t>(j, "n_dec_layers", path, 1);
  cfg.d_ff = detail::field<uint32_t>(j, "d_ff", path, 1);
  cfg.max_len = detail::field<uint32_t>(j, "max_len", path, 1);
  cfg.bos = detail::field<uint32_t>(j, "bos", path, 1);
  cfg.eos = detail::field<uint32_t>(j, "eos", path, 1);
  cfg.pad = detail::field<uint32_t>(j, "pad", path, 1);
  try {
    cfg.validate();
  } catch (const error& e) {
    throw schema_error(path + ": " + e.what());
  }
  return cfg;
}

inline void save_model_config_json(const ModelConfig& cfg, const std::string& path) {
  detail::json j{{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},
                 {"n_heads", cfg.n_heads},       {"n_enc_layers", cfg.n_enc_layers},
                 {"n_dec_layers", cfg.n_dec_layers}, {"d_ff", cfg.d_ff},
                 {"max_len", cfg.max_len},       {"bos", cfg.bos},
                 {"eos", cfg.eos},               {"pad", cfg.pad}};
  std::ofstream out = detail::open_for_write(path);
  out << j.dump(2) << '\n';
}

// --- token sequences ------------------------------------------------------------------

// translate input/output: {"tokens": [id, ...]} per line; sweep corpora add
// {"ref": [id, ...]}.
struct TokenCorpusEntry {
  std::vector<uint32_t> tokens;
  std::vector<uint32_t> ref;
};

inline std::vector<std::vector<uint32_t>> load_token_jsonl(const std::string& path) {
  std::vector<std::vector<uint32_t>> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    out.push_back(detail::field<std::vector<uint32_t>>(j, "tokens", path, lineno));
  });
  return out;
}

inline void save_token_jsonl(const std::vector<std::vector<uint32_t>>& sequences,
                             const std::string& path) {
  std::ofstream out = detail::open_for_write(path);
  for (const auto& seq : sequences) out << detail::json{{"tokens", seq}}.dump() << '\n';
}

inline std::vector<TokenCorpusEntry> load_sweep_corpus_jsonl(const std::string& path) {
  std::vector<TokenCorpusEntry> out;
  detail::for_each_jsonl_line(path, [&](const std::string& line, size_t lineno) {
    detail::json j = detail::parse_json(line, path, lineno);
    TokenCorpusEntry e;
    e.tokens = detail::field<std::vector<uint32_t>>(j, "tokens", path, lineno);
    e.ref = detail::field<std::vector<uint32_t>>(j, "ref", path, lineno);
    if (e.ref.empty())
      throw schema_error(detail::loc(path, lineno) + ": ref must be non-empty");
    out.push_back(std::move(e));
  });
  return out;
}

}  // namespace mtbias
