// mtbias-audit: compression + bias audit toolkit for small translation
// models. One subcommand per pipeline stage; `run` drives the whole audit
// from a single JSON config.
//
// Exit codes: 0 success, 2 input schema errors, 1 anything else.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mtbias/mtbias.hpp"
#include "mtbias/parallel.hpp"

namespace {

using namespace mtbias;

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

// Calibration tensors are grouped into activation sites by name; a trailing
// "#<n>" suffix marks one batch of a multi-batch site.
std::map<std::string, std::vector<Tensor>> calib_sites(const WeightSet& acts) {
  std::map<std::string, std::vector<Tensor>> sites;
  for (const auto& [name, t] : acts.params) {
    std::string site = name;
    size_t hash = name.rfind('#');
    if (hash != std::string::npos && hash + 1 < name.size() &&
        name.find_first_not_of("0123456789", hash + 1) == std::string::npos)
      site = name.substr(0, hash);
    sites[site].push_back(t);
  }
  return sites;
}

struct DeltaLine {
  size_t line = 0;
  std::string pair_id;
  double delta = 0.0;
  DeltaBucket bucket = DeltaBucket::neutral;
  std::optional<size_t> attn_base;
  std::optional<size_t> attn_comp;
};

std::vector<DeltaLine> load_delta_jsonl(const std::string& path) {
  std::vector<DeltaLine> out;
  detail::for_each_jsonl_line(path, [&](const std::string& text, size_t lineno) {
    auto j = detail::parse_json(text, path, lineno);
    DeltaLine d;
    d.line = detail::field<size_t>(j, "line", path, lineno);
    d.pair_id = detail::field<std::string>(j, "pair_id", path, lineno);
    d.delta = detail::field<double>(j, "delta", path, lineno);
    std::string b = detail::field<std::string>(j, "bucket", path, lineno);
    if (b == "losing") d.bucket = DeltaBucket::losing;
    else if (b == "winning") d.bucket = DeltaBucket::winning;
    else if (b == "neutral") d.bucket = DeltaBucket::neutral;
    else throw schema_error(detail::loc(path, lineno) + ": unknown bucket '" + b + "'");
    if (j.contains("attn_base")) d.attn_base = j.at("attn_base").get<size_t>();
    if (j.contains("attn_comp")) d.attn_comp = j.at("attn_comp").get<size_t>();
    out.push_back(d);
  });
  return out;
}

int cmd_prune(const std::string& in, const std::string& out, double p,
              const std::string& strategy) {
  WeightSet ws = load_weights(in);
  WeightSet pruned = magnitude_prune(ws, p, prune_strategy_from_string(strategy));
  save_weights(pruned, out);
  std::cout << "pruned " << ws.params.size() << " tensors at p=" << p
            << ", sparsity=" << sparsity(pruned) << "\n";
  return 0;
}

int cmd_quantize(const std::string& in, const std::string& calib, const std::string& out,
                 uint32_t grid) {
  WeightSet ws = load_weights(in);
  std::map<std::string, std::vector<Tensor>> sites;
  if (!calib.empty()) sites = calib_sites(load_weights(calib));
  QuantSpec spec;
  spec.calib_grid = grid;
  QuantizedModel model = quantize(ws, sites, spec);
  save_quantized(model, out);
  std::cout << "quantized " << model.weights.size() << " tensors, " << model.activations.size()
            << " activation sites\n";
  return 0;
}

int cmd_dequantize(const std::string& in, const std::string& out) {
  QuantizedModel model = load_quantized(in);
  save_weights(dequantize_model(model), out);
  std::cout << "dequantized " << model.weights.size() << " tensors\n";
  return 0;
}

int cmd_translate(const std::string& config, const std::string& weights, const std::string& in,
                  const std::string& out, const std::string& attn) {
  ModelConfig cfg = load_model_config_json(config);
  WeightSet ws = load_weights(weights);
  std::vector<std::vector<uint32_t>> sources = load_token_jsonl(in);
  std::vector<std::vector<uint32_t>> hyps(sources.size());
  std::vector<AttentionMatrix> attns(sources.size());
  parallel_for(sources.size(), [&](size_t i) {
    DecodeResult r = forward_decode(cfg, ws, sources[i]);
    hyps[i] = std::move(r.tokens);
    attns[i] = std::move(r.cross_attention);
  });
  save_token_jsonl(hyps, out);
  if (!attn.empty()) save_attention_jsonl(attns, attn);
  std::cout << "decoded " << sources.size() << " sentences\n";
  return 0;
}

int cmd_score(const std::string& in, const std::string& metric, const std::string& out,
              const std::string& tokenizer, int max_n, double beta) {
  std::vector<TranslationRecord> records = load_corpus_jsonl(in);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw error(out + ": cannot open file for writing");
  if (metric == "chrf") {
    int n = max_n > 0 ? max_n : 6;
    csv << "line,pair_id,chrf_base,chrf_comp\n";
    std::vector<std::pair<double, double>> scores(records.size());
    parallel_for(records.size(), [&](size_t i) {
      scores[i] = {chrf(records[i].reference, records[i].hyp_base, n, beta),
                   chrf(records[i].reference, records[i].hyp_comp, n, beta)};
    });
    for (size_t i = 0; i < records.size(); ++i)
      csv << i << ',' << records[i].pair_id << ',' << detail::fmt_double(scores[i].first) << ','
          << detail::fmt_double(scores[i].second) << '\n';
  } else if (metric == "bleu") {
    int n = max_n > 0 ? max_n : 4;
    Tokenizer tok = tokenizer_from_string(tokenizer);
    std::map<std::pair<std::string, std::string>, std::vector<size_t>> by_pair;
    for (size_t i = 0; i < records.size(); ++i)
      by_pair[{records[i].src_lang, records[i].tgt_lang}].push_back(i);
    csv << "src_lang,tgt_lang,records,bleu_base,bleu_comp\n";
    for (const auto& [key, idxs] : by_pair) {
      std::vector<std::vector<std::string>> refs, base_hyps, comp_hyps;
      for (size_t i : idxs) {
        refs.push_back(tokenize(records[i].reference, tok));
        base_hyps.push_back(tokenize(records[i].hyp_base, tok));
        comp_hyps.push_back(tokenize(records[i].hyp_comp, tok));
      }
      csv << key.first << ',' << key.second << ',' << idxs.size() << ','
          << detail::fmt_double(bleu(refs, base_hyps, n)) << ','
          << detail::fmt_double(bleu(refs, comp_hyps, n)) << '\n';
    }
  } else {
    throw error("unknown metric '" + metric + "' (expected chrf or bleu)");
  }
  std::cout << "scored " << records.size() << " records with " << metric << "\n";
  return 0;
}

int cmd_delta(const std::string& in, double threshold, const std::string& out) {
  std::vector<TranslationRecord> records = load_corpus_jsonl(in);
  std::vector<DeltaOutcome> outcomes = delta_partition(records, threshold);
  std::ofstream js(out, std::ios::trunc);
  if (!js) throw error(out + ": cannot open file for writing");
  size_t losing = 0, winning = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    nlohmann::json j{{"line", i},
                     {"pair_id", records[i].pair_id},
                     {"delta", outcomes[i].delta},
                     {"bucket", to_string(outcomes[i].bucket)}};
    if (records[i].attn_base) j["attn_base"] = *records[i].attn_base;
    if (records[i].attn_comp) j["attn_comp"] = *records[i].attn_comp;
    js << j.dump() << '\n';
    if (outcomes[i].bucket == DeltaBucket::losing) ++losing;
    if (outcomes[i].bucket == DeltaBucket::winning) ++winning;
  }
  std::cout << records.size() << " records: " << losing << " losing, " << winning
            << " winning, " << (records.size() - losing - winning) << " neutral\n";
  return 0;
}

int cmd_lid_train(const std::string& corpora, const std::string& out, size_t k) {
  std::vector<LanguageProfile> profiles = detail::load_profiles_from_dir(corpora, k);
  save_profiles_json(profiles, out);
  std::cout << "trained " << profiles.size() << " language profiles (k=" << k << ")\n";
  return 0;
}

int cmd_lid_offtarget(const std::string& in, const std::string& profiles_path,
                      const std::string& which, const std::string& out) {
  std::vector<TranslationRecord> records = load_corpus_jsonl(in);
  std::vector<LanguageProfile> profiles = load_profiles_json(profiles_path);
  OffTargetResult r = off_target_rate(records, profiles, hyp_side_from_string(which));
  nlohmann::json j{{"which", which},
                   {"rate", r.rate},
                   {"evaluated", r.evaluated},
                   {"records", records.size()}};
  if (!out.empty()) {
    std::ofstream js(out, std::ios::trunc);
    if (!js) throw error(out + ": cannot open file for writing");
    js << j.dump(2) << '\n';
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_align(const std::string& in, const std::string& attn_base_path,
              const std::string& attn_comp_path, const std::string& subset,
              const std::string& out) {
  DeltaBucket want;
  if (subset == "losing") want = DeltaBucket::losing;
  else if (subset == "winning") want = DeltaBucket::winning;
  else throw error("unknown subset '" + subset + "' (expected losing or winning)");

  std::vector<DeltaLine> lines = load_delta_jsonl(in);
  std::vector<AttentionMatrix> base = load_attention_jsonl(attn_base_path);
  std::vector<AttentionMatrix> comp = load_attention_jsonl(attn_comp_path);

  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> mats;
  for (const DeltaLine& d : lines) {
    if (d.bucket != want) continue;
    size_t bi = d.attn_base.value_or(d.line);
    size_t ci = d.attn_comp.value_or(d.line);
    if (bi >= base.size())
      throw schema_error(attn_base_path + ": no attention entry at line " + std::to_string(bi + 1));
    if (ci >= comp.size())
      throw schema_error(attn_comp_path + ": no attention entry at line " + std::to_string(ci + 1));
    mats.push_back({base[bi], comp[ci]});
  }

  nlohmann::json j{{"subset", subset}, {"count", mats.size()}};
  if (mats.empty()) {
    j["lambda"] = nullptr;
    j["degenerate"] = true;
    j["note"] = "empty subset";
  } else {
    try {
      j["lambda"] = relative_alignment(mats);
      j["degenerate"] = false;
    } catch (const error& e) {
      j["lambda"] = nullptr;
      j["degenerate"] = true;
      j["note"] = e.what();
    }
  }
  std::ofstream js(out, std::ios::trunc);
  if (!js) throw error(out + ": cannot open file for writing");
  js << j.dump(2) << '\n';
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_gender(const std::string& in, const std::string& out) {
  std::vector<GenderRecord> records = load_gender_jsonl(in);
  if (records.empty()) throw schema_error(in + ": no gender records");
  std::map<std::string, std::vector<GenderRecord>> by_lang;
  for (const GenderRecord& r : records) by_lang[r.lang].push_back(r);

  nlohmann::json per_lang = nlohmann::json::object();
  double psi_sum = 0.0, psi_star_sum = 0.0;
  size_t psi_n = 0, psi_star_n = 0;
  for (const auto& [lang, recs] : by_lang) {
    nlohmann::json entry;
    GenderF1 f1 = gender_f1(recs);
    entry["f_male"] = f1.f_male;
    entry["f_female"] = f1.f_female;
    try {
      double p = psi(recs);
      entry["psi"] = p;
      psi_sum += p;
      ++psi_n;
    } catch (const error& e) {
      entry["psi"] = nullptr;
      entry["psi_error"] = e.what();
    }
    try {
      double ps = psi_star(recs);
      entry["psi_star"] = ps;
      psi_star_sum += ps;
      ++psi_star_n;
    } catch (const error& e) {
      entry["psi_star"] = nullptr;
      entry["psi_star_error"] = e.what();
    }
    per_lang[lang] = std::move(entry);
  }
  nlohmann::json avg;
  avg["psi"] = psi_n ? nlohmann::json(psi_sum / static_cast<double>(psi_n)) : nlohmann::json();
  avg["psi_star"] =
      psi_star_n ? nlohmann::json(psi_star_sum / static_cast<double>(psi_star_n)) : nlohmann::json();
  nlohmann::json j{{"per_lang", per_lang}, {"average", avg}};
  std::ofstream js(out, std::ios::trunc);
  if (!js) throw error(out + ": cannot open file for writing");
  js << j.dump(2) << '\n';
  std::cout << "gender metrics for " << by_lang.size() << " languages\n";
  return 0;
}

int cmd_wsd(const std::string& in, const std::string& out) {
  std::vector<SenseRecord> records = load_senses_jsonl(in);
  if (records.empty()) throw schema_error(in + ": no sense records");
  double s = sfii(records);
  double p = spdi(records);
  double m = mfs(records);
  double mp = mfs_plus(records);
  nlohmann::json j{{"SFII", s}, {"SPDI", p}, {"MFS", m}, {"MFS+", mp},
                   {"AVG", (s + p + m + mp) / 4.0}, {"records", records.size()}};
  std::ofstream js(out, std::ios::trunc);
  if (!js) throw error(out + ": cannot open file for writing");
  js << j.dump(2) << '\n';
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& weights, const std::string& in,
              const std::string& ratios_csv, const std::string& strategies_csv,
              const std::string& out) {
  ModelConfig cfg = load_model_config_json(config);
  WeightSet ws = load_weights(weights);
  std::vector<TokenCorpusEntry> corpus = load_sweep_corpus_jsonl(in);
  std::vector<double> ratios = parse_double_list(ratios_csv);
  std::vector<PruneStrategy> strategies;
  std::stringstream ss(strategies_csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) strategies.push_back(prune_strategy_from_string(item));
  if (strategies.empty()) strategies.push_back(PruneStrategy::transformer_layer);

  std::vector<SweepRow> rows = sweep(cfg, ws, corpus, ratios, strategies);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw error(out + ": cannot open file for writing");
  csv << "p,strategy,bleu\n";
  for (const SweepRow& r : rows)
    csv << detail::fmt_double(r.p) << ',' << to_string(r.strategy) << ','
        << detail::fmt_double(r.bleu_score) << '\n';
  std::cout << "swept " << rows.size() << " (ratio, strategy) settings over " << corpus.size()
            << " sentences\n";
  return 0;
}

int cmd_run(const std::string& config) {
  AuditConfig cfg = load_audit_config(config);
  AuditResult result = run_audit(cfg);
  std::cout << "audit complete: " << result.records_total << " records, "
            << result.pairs.size() << " pairs (" << result.included_pairs
            << " included), reports in " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compression and bias audit toolkit for small translation models"};
  app.require_subcommand(1);

  std::string in, out, calib, config, weights, attn, metric = "chrf", strategy = "transformer-layer";
  std::string tokenizer = "whitespace", which = "comp", subset = "losing", corpora, profiles;
  std::string ratios, strategies, attn_base, attn_comp;
  double p = 0.0, threshold = 0.5, beta = 3.0;
  int max_n = 0;
  uint32_t grid = 100;
  size_t k = 300;

  auto* prune_cmd = app.add_subcommand("prune", "Magnitude-prune a weight file");
  prune_cmd->add_option("--in", in, "input .mtbw")->required();
  prune_cmd->add_option("--out", out, "output .mtbw")->required();
  prune_cmd->add_option("--p", p, "sparsity ratio in [0,1]")->required();
  prune_cmd->add_option("--strategy", strategy,
                        "transformer-layer | per-module | separate-attn-ffn");

  auto* quant_cmd = app.add_subcommand("quantize", "Int8-quantize a weight file");
  quant_cmd->add_option("--in", in, "input .mtbw")->required();
  quant_cmd->add_option("--calib", calib, "activation calibration .mtbw");
  quant_cmd->add_option("--out", out, "output .mtbq")->required();
  quant_cmd->add_option("--grid", grid, "MSE calibration grid size");

  auto* dequant_cmd = app.add_subcommand("dequantize", "Reconstruct floats from a .mtbq file");
  dequant_cmd->add_option("--in", in, "input .mtbq")->required();
  dequant_cmd->add_option("--out", out, "output .mtbw")->required();

  auto* translate_cmd = app.add_subcommand("translate", "Greedy-decode a token corpus");
  translate_cmd->add_option("--config", config, "model config JSON")->required();
  translate_cmd->add_option("--weights", weights, "weights .mtbw")->required();
  translate_cmd->add_option("--in", in, "source token JSONL")->required();
  translate_cmd->add_option("--out", out, "hypothesis token JSONL")->required();
  translate_cmd->add_option("--attn", attn, "cross-attention JSONL");

  auto* score_cmd = app.add_subcommand("score", "Score a translation corpus");
  score_cmd->add_option("--in", in, "corpus JSONL")->required();
  score_cmd->add_option("--metric", metric, "chrf | bleu")->required();
  score_cmd->add_option("--out", out, "output CSV")->required();
  score_cmd->add_option("--tokenizer", tokenizer, "whitespace | character (bleu)");
  score_cmd->add_option("--max-n", max_n, "n-gram order");
  score_cmd->add_option("--beta", beta, "ChrF recall weight");

  auto* delta_cmd = app.add_subcommand("delta", "Partition sentences by ChrF delta");
  delta_cmd->add_option("--in", in, "corpus JSONL")->required();
  delta_cmd->add_option("--threshold", threshold, "delta threshold on [0,1] ChrF");
  delta_cmd->add_option("--out", out, "delta JSONL")->required();

  auto* lid = app.add_subcommand("lid", "Language identification");
  lid->require_subcommand(1);
  auto* lid_train = lid->add_subcommand("train", "Train n-gram profiles from <lang>.txt files");
  lid_train->add_option("--corpora", corpora, "directory of <lang>.txt")->required();
  lid_train->add_option("--out", out, "profiles JSON")->required();
  lid_train->add_option("--k", k, "profile depth");
  auto* lid_ot = lid->add_subcommand("offtarget", "Off-target translation rate");
  lid_ot->add_option("--in", in, "corpus JSONL")->required();
  lid_ot->add_option("--profiles", profiles, "profiles JSON")->required();
  lid_ot->add_option("--which", which, "base | comp");
  lid_ot->add_option("--out", out, "result JSON");

  auto* align_cmd = app.add_subcommand("align", "Relative alignment over a delta subset");
  align_cmd->add_option("--in", in, "delta JSONL")->required();
  align_cmd->add_option("--attn-base", attn_base, "baseline attention JSONL")->required();
  align_cmd->add_option("--attn-comp", attn_comp, "compressed attention JSONL")->required();
  align_cmd->add_option("--subset", subset, "losing | winning");
  align_cmd->add_option("--out", out, "lambda JSON")->required();

  auto* gender_cmd = app.add_subcommand("gender", "Gender fairness metrics");
  gender_cmd->add_option("--in", in, "gender JSONL")->required();
  gender_cmd->add_option("--out", out, "psi JSON")->required();

  auto* wsd_cmd = app.add_subcommand("wsd", "Word-sense bias metrics");
  wsd_cmd->add_option("--in", in, "senses JSONL")->required();
  wsd_cmd->add_option("--out", out, "wsd JSON")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "BLEU across sparsity ratios");
  sweep_cmd->add_option("--config", config, "model config JSON")->required();
  sweep_cmd->add_option("--weights", weights, "weights .mtbw")->required();
  sweep_cmd->add_option("--in", in, "token corpus JSONL with refs")->required();
  sweep_cmd->add_option("--ratios", ratios, "comma-separated ratios")->required();
  sweep_cmd->add_option("--strategies", strategies, "comma-separated strategies");
  sweep_cmd->add_option("--out", out, "output CSV")->required();

  auto* run_cmd = app.add_subcommand("run", "Full audit from a JSON config");
  run_cmd->add_option("--config", config, "audit config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prune_cmd->parsed()) return cmd_prune(in, out, p, strategy);
    if (quant_cmd->parsed()) return cmd_quantize(in, calib, out, grid);
    if (dequant_cmd->parsed()) return cmd_dequantize(in, out);
    if (translate_cmd->parsed()) return cmd_translate(config, weights, in, out, attn);
    if (score_cmd->parsed()) return cmd_score(in, metric, out, tokenizer, max_n, beta);
    if (delta_cmd->parsed()) return cmd_delta(in, threshold, out);
    if (lid_train->parsed()) return cmd_lid_train(corpora, out, k);
    if (lid_ot->parsed()) return cmd_lid_offtarget(in, profiles, which, out);
    if (align_cmd->parsed()) return cmd_align(in, attn_base, attn_comp, subset, out);
    if (gender_cmd->parsed()) return cmd_gender(in, out);
    if (wsd_cmd->parsed()) return cmd_wsd(in, out);
    if (sweep_cmd->parsed()) return cmd_sweep(config, weights, in, ratios, strategies, out);
    if (run_cmd->parsed()) return cmd_run(config);
  } catch (const schema_error& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
