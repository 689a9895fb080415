#pragma once

// End-to-end audit: ingest corpus + side inputs, score, group, and emit the
// report files. Also hosts the sparsity-sweep harness.

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtbias/attention.hpp"
#include "mtbias/corpus_io.hpp"
#include "mtbias/lang_id.hpp"
#include "mtbias/parallel.hpp"
#include "mtbias/prune.hpp"
#include "mtbias/quantize.hpp"
#include "mtbias/resources.hpp"
#include "mtbias/text_metrics.hpp"
#include "mtbias/transformer.hpp"

namespace mtbias {

struct AuditConfig {
  std::string corpus;       // corpus.jsonl, required
  std::string resources;    // resources.json, required
  std::string out_dir;      // required
  std::string profiles;     // profiles.json, optional
  std::string lid_corpora;  // directory of <lang>.txt files, optional alternative
  std::string attn_base;    // attention jsonl for the baseline hypotheses, optional
  std::string attn_comp;    // attention jsonl for the compressed hypotheses, optional
  std::string method = "baseline";  // baseline | pruned(p) | quantized-int8

  double delta_threshold = 0.5;
  std::optional<double> spbleu_filter = 12.0;  // nullopt disables the pair filter
  double chrf_beta = 3.0;
  int chrf_max_n = 6;
  int bleu_max_n = 4;
  size_t lid_k = 300;
  Tokenizer tokenizer = Tokenizer::whitespace;
  bool emit_svg = true;
};

inline AuditConfig load_audit_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  detail::json j = detail::parse_json(buf.str(), path, 1);
  AuditConfig cfg;
  cfg.corpus = detail::field<std::string>(j, "corpus", path, 1);
  cfg.resources = detail::field<std::string>(j, "resources", path, 1);
  cfg.out_dir = detail::field<std::string>(j, "out_dir", path, 1);
  if (j.contains("profiles")) cfg.profiles = j.at("profiles").get<std::string>();
  if (j.contains("lid_corpora")) cfg.lid_corpora = j.at("lid_corpora").get<std::string>();
  if (j.contains("attn_base")) cfg.attn_base = j.at("attn_base").get<std::string>();
  if (j.contains("attn_comp")) cfg.attn_comp = j.at("attn_comp").get<std::string>();
  if (j.contains("method")) cfg.method = j.at("method").get<std::string>();
  if (j.contains("delta_threshold")) cfg.delta_threshold = j.at("delta_threshold").get<double>();
  if (j.contains("spbleu_filter")) {
    if (j.at("spbleu_filter").is_null()) cfg.spbleu_filter.reset();
    else cfg.spbleu_filter = j.at("spbleu_filter").get<double>();
  }
  if (j.contains("chrf_beta")) cfg.chrf_beta = j.at("chrf_beta").get<double>();
  if (j.contains("chrf_max_n")) cfg.chrf_max_n = j.at("chrf_max_n").get<int>();
  if (j.contains("bleu_max_n")) cfg.bleu_max_n = j.at("bleu_max_n").get<int>();
  if (j.contains("lid_k")) cfg.lid_k = j.at("lid_k").get<size_t>();
  if (j.contains("tokenizer"))
    cfg.tokenizer = tokenizer_from_string(j.at("tokenizer").get<std::string>());
  if (j.contains("emit_svg")) cfg.emit_svg = j.at("emit_svg").get<bool>();
  return cfg;
}

struct PairSummary {
  std::string src_lang;
  std::string tgt_lang;
  size_t records = 0;
  double bleu_base = 0.0;
  double bleu_comp = 0.0;
  std::optional<double> rel_diff_pct;  // 100 * (comp - base) / base, base > 0 only
  uint64_t rho = 0;
  ResourceBucket pair_bucket = ResourceBucket::very_low;
  ResourceBucket src_bucket = ResourceBucket::very_low;
  ResourceBucket tgt_bucket = ResourceBucket::very_low;
  size_t losing = 0;
  size_t winning = 0;
  size_t neutral = 0;
  std::optional<double> off_target_base_pct;
  std::optional<double> off_target_comp_pct;
  std::optional<double> lambda_losing;
  std::optional<double> lambda_winning;
  bool included = true;  // passed the baseline-BLEU pair filter
};

struct GroupedMean {
  std::string grouping;  // "pair" | "source" | "target"
  ResourceBucket bucket_key = ResourceBucket::very_low;
  size_t pairs = 0;
  double mean_rel_diff_pct = 0.0;
};

struct DeltaHistogram {
  static constexpr int kBins = 20;  // width 0.1 over [-1, 1]
  std::map<ResourceBucket, std::array<size_t, kBins>> counts;

  static int bin_of(double delta) {
    int b = static_cast<int>(std::floor((delta + 1.0) / 0.1));
    if (b < 0) b = 0;
    if (b >= kBins) b = kBins - 1;
    return b;
  }
};

struct LambdaReport {
  std::optional<double> lambda;
  size_t count = 0;
  bool degenerate = false;
  std::string note;
};

struct OffTargetTable {
  std::optional<double> base_pct;
  std::optional<double> comp_pct;
  size_t total_losing = 0;
};

struct AuditResult {
  std::vector<PairSummary> pairs;
  std::vector<GroupedMean> grouped;
  DeltaHistogram histogram;
  OffTargetTable off_target;
  LambdaReport lambda_losing;
  LambdaReport lambda_winning;
  std::string method;
  double memory = 1.0;
  size_t records_total = 0;
  size_t included_pairs = 0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

// Minimal grouped bar chart; enough for the grouped-mean and delta-bin
// figures. Values may be negative; bars hang below the zero line.
inline std::string svg_grouped_bars(const std::string& title,
                                    const std::vector<std::string>& bin_labels,
                                    const std::vector<std::string>& series_names,
                                    const std::vector<std::vector<double>>& values) {
  const double width = 960, height = 420;
  const double left = 60, right = 30, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  double vmin = 0.0, vmax = 0.0;
  for (const auto& series : values)
    for (double v : series) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  if (vmax == vmin) vmax = vmin + 1.0;
  auto y_of = [&](double v) { return top + (vmax - v) / (vmax - vmin) * plot_h; };
  const char* palette[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c"};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_double(width) +
         "\" height=\"" + fmt_double(height) + "\">\n";
  svg += "<text x=\"" + fmt_double(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
  svg += "<line x1=\"" + fmt_double(left) + "\" y1=\"" + fmt_double(y_of(0.0)) + "\" x2=\"" +
         fmt_double(width - right) + "\" y2=\"" + fmt_double(y_of(0.0)) +
         "\" stroke=\"#444\"/>\n";

  size_t bins = bin_labels.size();
  size_t series_n = series_names.size();
  double group_w = plot_w / static_cast<double>(bins);
  double bar_w = group_w * 0.8 / static_cast<double>(series_n);
  for (size_t s = 0; s < series_n; ++s) {
    for (size_t b = 0; b < bins; ++b) {
      double v = values[s][b];
      double x = left + group_w * static_cast<double>(b) + group_w * 0.1 +
                 bar_w * static_cast<double>(s);
      double y0 = y_of(std::max(0.0, v));
      double h = std::fabs(y_of(v) - y_of(0.0));
      svg += "<rect x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y0) + "\" width=\"" +
             fmt_double(bar_w) + "\" height=\"" + fmt_double(h) + "\" fill=\"" +
             palette[s % 6] + "\"/>\n";
    }
    svg += "<rect x=\"" + fmt_double(left + 140.0 * static_cast<double>(s)) + "\" y=\"" +
           fmt_double(height - 24) + "\" width=\"12\" height=\"12\" fill=\"" + palette[s % 6] +
           "\"/>\n";
    svg += "<text x=\"" + fmt_double(left + 140.0 * static_cast<double>(s) + 16) + "\" y=\"" +
           fmt_double(height - 14) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
           series_names[s] + "</text>\n";
  }
  for (size_t b = 0; b < bins; ++b) {
    double x = left + group_w * (static_cast<double>(b) + 0.5);
    svg += "<text x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(top + plot_h + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           bin_labels[b] + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline std::vector<LanguageProfile> load_profiles_from_dir(const std::string& dir, size_t k) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw schema_error(dir + ": not a directory");
  std::map<std::string, std::vector<std::string>> corpora;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    std::ifstream in(p);
    if (!in) throw schema_error(p.string() + ": cannot open file");
    std::string line;
    auto& texts = corpora[p.stem().string()];
    while (std::getline(in, line))
      if (!line.empty()) texts.push_back(line);
  }
  return train_profiles(corpora, k);
}

}  // namespace detail

inline AuditResult run_audit(const AuditConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.corpus.empty() || cfg.resources.empty() || cfg.out_dir.empty())
    throw schema_error("audit config must set corpus, resources and out_dir");

  std::vector<TranslationRecord> records = load_corpus_jsonl(cfg.corpus);
  if (records.empty()) throw schema_error(cfg.corpus + ": corpus holds no records");
  ResourceTable resources = load_resources_json(cfg.resources);

  std::vector<LanguageProfile> profiles;
  bool have_profiles = false;
  if (!cfg.profiles.empty()) {
    profiles = load_profiles_json(cfg.profiles);
    have_profiles = true;
  } else if (!cfg.lid_corpora.empty()) {
    profiles = detail::load_profiles_from_dir(cfg.lid_corpora, cfg.lid_k);
    have_profiles = true;
  }

  std::vector<AttentionMatrix> attn_base, attn_comp;
  bool have_attention = !cfg.attn_base.empty() && !cfg.attn_comp.empty();
  if (have_attention) {
    attn_base = load_attention_jsonl(cfg.attn_base);
    attn_comp = load_attention_jsonl(cfg.attn_comp);
  }

  // Per-record ChrF delta, parallel over records with slot writes.
  std::vector<DeltaOutcome> deltas(records.size());
  parallel_for(records.size(), [&](size_t i) {
    const TranslationRecord& r = records[i];
    double comp = chrf(r.reference, r.hyp_comp, cfg.chrf_max_n, cfg.chrf_beta) / 100.0;
    double base = chrf(r.reference, r.hyp_base, cfg.chrf_max_n, cfg.chrf_beta) / 100.0;
    deltas[i] = classify_delta(comp - base, cfg.delta_threshold);
  });

  auto attn_index = [&](const TranslationRecord& r, size_t record_pos, bool comp) -> size_t {
    const std::optional<size_t>& ref = comp ? r.attn_comp : r.attn_base;
    return ref ? *ref : record_pos;
  };
  auto attn_pair_for = [&](size_t record_pos) -> std::pair<AttentionMatrix, AttentionMatrix> {
    const TranslationRecord& r = records[record_pos];
    size_t bi = attn_index(r, record_pos, false);
    size_t ci = attn_index(r, record_pos, true);
    if (bi >= attn_base.size())
      throw schema_error(cfg.attn_base + ": no attention entry at line " + std::to_string(bi + 1));
    if (ci >= attn_comp.size())
      throw schema_error(cfg.attn_comp + ": no attention entry at line " + std::to_string(ci + 1));
    return {attn_base[bi], attn_comp[ci]};
  };

  // Group records into language pairs; map iteration keeps output order
  // deterministic.
  std::map<std::pair<std::string, std::string>, std::vector<size_t>> by_pair;
  for (size_t i = 0; i < records.size(); ++i)
    by_pair[{records[i].src_lang, records[i].tgt_lang}].push_back(i);

  AuditResult result;
  result.method = cfg.method;
  result.memory = memory_factor(parse_method(cfg.method));
  result.records_total = records.size();

  std::map<std::pair<std::string, std::string>, double> baseline_scores;
  for (const auto& [key, idxs] : by_pair) {
    PairSummary ps;
    ps.src_lang = key.first;
    ps.tgt_lang = key.second;
    ps.records = idxs.size();

    std::vector<std::vector<std::string>> refs, base_hyps, comp_hyps;
    std::vector<TranslationRecord> pair_records;
    for (size_t i : idxs) {
      const TranslationRecord& r = records[i];
      refs.push_back(tokenize(r.reference, cfg.tokenizer));
      base_hyps.push_back(tokenize(r.hyp_base, cfg.tokenizer));
      comp_hyps.push_back(tokenize(r.hyp_comp, cfg.tokenizer));
      pair_records.push_back(r);
      switch (deltas[i].bucket) {
        case DeltaBucket::losing: ++ps.losing; break;
        case DeltaBucket::winning: ++ps.winning; break;
        case DeltaBucket::neutral: ++ps.neutral; break;
      }
    }
    for (const auto& ref : refs)
      if (ref.empty())
        throw schema_error(cfg.corpus + ": reference for pair " + ps.src_lang + "-" +
                           ps.tgt_lang + " tokenizes to nothing");
    ps.bleu_base = bleu(refs, base_hyps, cfg.bleu_max_n);
    ps.bleu_comp = bleu(refs, comp_hyps, cfg.bleu_max_n);
    if (ps.bleu_base > 0.0)
      ps.rel_diff_pct = 100.0 * (ps.bleu_comp - ps.bleu_base) / ps.bleu_base;

    auto [rho, pb] = pair_resource(resources, ps.src_lang, ps.tgt_lang);
    ps.rho = rho;
    ps.pair_bucket = pb;
    ps.src_bucket = bucket(resources.count_for(ps.src_lang));
    ps.tgt_bucket = bucket(resources.count_for(ps.tgt_lang));

    if (have_profiles) {
      ps.off_target_base_pct = 100.0 * off_target_rate(pair_records, profiles, HypSide::base).rate;
      ps.off_target_comp_pct = 100.0 * off_target_rate(pair_records, profiles, HypSide::comp).rate;
    }
    if (have_attention) {
      std::vector<std::pair<AttentionMatrix, AttentionMatrix>> losing_mats, winning_mats;
      for (size_t i : idxs) {
        if (deltas[i].bucket == DeltaBucket::losing) losing_mats.push_back(attn_pair_for(i));
        else if (deltas[i].bucket == DeltaBucket::winning) winning_mats.push_back(attn_pair_for(i));
      }
      try {
        if (!losing_mats.empty()) ps.lambda_losing = relative_alignment(losing_mats);
      } catch (const error&) {}
      try {
        if (!winning_mats.empty()) ps.lambda_winning = relative_alignment(winning_mats);
      } catch (const error&) {}
    }

    baseline_scores[key] = ps.bleu_base;
    result.pairs.push_back(std::move(ps));
  }

  std::set<std::pair<std::string, std::string>> kept;
  if (cfg.spbleu_filter) kept = filter_pairs(baseline_scores, *cfg.spbleu_filter);
  for (PairSummary& ps : result.pairs) {
    ps.included = !cfg.spbleu_filter || kept.count({ps.src_lang, ps.tgt_lang}) > 0;
    if (ps.included) ++result.included_pairs;
  }

  // Grouped means of the relative BLEU difference over included pairs, by
  // pair / source / target resource class.
  struct Acc {
    double sum = 0.0;
    size_t n = 0;
  };
  std::map<std::pair<std::string, ResourceBucket>, Acc> acc;
  for (const PairSummary& ps : result.pairs) {
    if (!ps.included || !ps.rel_diff_pct) continue;
    for (auto [grouping, b] :
         std::initializer_list<std::pair<const char*, ResourceBucket>>{
             {"pair", ps.pair_bucket}, {"source", ps.src_bucket}, {"target", ps.tgt_bucket}}) {
      Acc& a = acc[{grouping, b}];
      a.sum += *ps.rel_diff_pct;
      ++a.n;
    }
  }
  for (const auto& [key, a] : acc)
    result.grouped.push_back({key.first, key.second, a.n, a.sum / static_cast<double>(a.n)});

  // Delta-bin histogram per pair resource class, over included pairs.
  std::map<std::pair<std::string, std::string>, ResourceBucket> pair_buckets;
  std::map<std::pair<std::string, std::string>, bool> pair_included;
  for (const PairSummary& ps : result.pairs) {
    pair_buckets[{ps.src_lang, ps.tgt_lang}] = ps.pair_bucket;
    pair_included[{ps.src_lang, ps.tgt_lang}] = ps.included;
  }
  std::vector<size_t> losing_indices;
  for (size_t i = 0; i < records.size(); ++i) {
    std::pair<std::string, std::string> key{records[i].src_lang, records[i].tgt_lang};
    if (!pair_included[key]) continue;
    auto& bins = result.histogram.counts[pair_buckets[key]];
    ++bins[static_cast<size_t>(DeltaHistogram::bin_of(deltas[i].delta))];
    if (deltas[i].bucket == DeltaBucket::losing) losing_indices.push_back(i);
  }

  // Off-target rates over the losing subset (base and compressed sides).
  result.off_target.total_losing = losing_indices.size();
  if (have_profiles && !losing_indices.empty()) {
    std::vector<TranslationRecord> losing_records;
    for (size_t i : losing_indices) losing_records.push_back(records[i]);
    result.off_target.base_pct =
        100.0 * off_target_rate(losing_records, profiles, HypSide::base).rate;
    result.off_target.comp_pct =
        100.0 * off_target_rate(losing_records, profiles, HypSide::comp).rate;
  }

  // Relative alignment over the flagged subsets. Losing keeps only
  // on-target compressed hypotheses when profiles are available (off-target
  // lines are a separate failure mode); winning keeps reference-valid lines.
  auto lambda_over = [&](DeltaBucket which) -> LambdaReport {
    LambdaReport rep;
    if (!have_attention) {
      rep.degenerate = true;
      rep.note = "no attention inputs";
      return rep;
    }
    std::vector<std::pair<AttentionMatrix, AttentionMatrix>> mats;
    for (size_t i = 0; i < records.size(); ++i) {
      std::pair<std::string, std::string> key{records[i].src_lang, records[i].tgt_lang};
      if (!pair_included[key] || deltas[i].bucket != which) continue;
      if (have_profiles) {
        const TranslationRecord& r = records[i];
        if (detail::text_profile(r.reference, 1).empty() ||
            identify(profiles, r.reference).lang != r.tgt_lang)
          continue;
        if (which == DeltaBucket::losing) {
          if (detail::text_profile(r.hyp_comp, 1).empty() ||
              identify(profiles, r.hyp_comp).lang != r.tgt_lang)
            continue;
        }
      }
      mats.push_back(attn_pair_for(i));
    }
    rep.count = mats.size();
    if (mats.empty()) {
      rep.degenerate = true;
      rep.note = "empty subset";
      return rep;
    }
    try {
      rep.lambda = relative_alignment(mats);
    } catch (const error& e) {
      rep.degenerate = true;
      rep.note = e.what();
    }
    return rep;
  };
  result.lambda_losing = lambda_over(DeltaBucket::losing);
  result.lambda_winning = lambda_over(DeltaBucket::winning);

  // ---- emit ----------------------------------------------------------------
  fs::create_directories(cfg.out_dir);
  auto out_path = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  {
    std::ofstream csv = detail::open_for_write(out_path("pairs.csv"));
    csv << "src_lang,tgt_lang,records,bleu_base,bleu_comp,rel_diff_pct,rho,pair_bucket,"
           "src_bucket,tgt_bucket,losing,winning,neutral,off_target_base_pct,"
           "off_target_comp_pct,lambda_losing,lambda_winning,included\n";
    detail::json arr = detail::json::array();
    for (const PairSummary& ps : result.pairs) {
      csv << ps.src_lang << ',' << ps.tgt_lang << ',' << ps.records << ','
          << detail::fmt_double(ps.bleu_base) << ',' << detail::fmt_double(ps.bleu_comp) << ','
          << detail::fmt_opt(ps.rel_diff_pct) << ',' << ps.rho << ','
          << to_string(ps.pair_bucket) << ',' << to_string(ps.src_bucket) << ','
          << to_string(ps.tgt_bucket) << ',' << ps.losing << ',' << ps.winning << ','
          << ps.neutral << ',' << detail::fmt_opt(ps.off_target_base_pct) << ','
          << detail::fmt_opt(ps.off_target_comp_pct) << ','
          << detail::fmt_opt(ps.lambda_losing) << ',' << detail::fmt_opt(ps.lambda_winning)
          << ',' << (ps.included ? "true" : "false") << '\n';
      detail::json pj{{"src_lang", ps.src_lang},
                      {"tgt_lang", ps.tgt_lang},
                      {"records", ps.records},
                      {"bleu_base", ps.bleu_base},
                      {"bleu_comp", ps.bleu_comp},
                      {"rho", ps.rho},
                      {"pair_bucket", to_string(ps.pair_bucket)},
                      {"src_bucket", to_string(ps.src_bucket)},
                      {"tgt_bucket", to_string(ps.tgt_bucket)},
                      {"losing", ps.losing},
                      {"winning", ps.winning},
                      {"neutral", ps.neutral},
                      {"included", ps.included}};
      pj["rel_diff_pct"] = ps.rel_diff_pct ? detail::json(*ps.rel_diff_pct) : detail::json();
      pj["off_target_base_pct"] =
          ps.off_target_base_pct ? detail::json(*ps.off_target_base_pct) : detail::json();
      pj["off_target_comp_pct"] =
          ps.off_target_comp_pct ? detail::json(*ps.off_target_comp_pct) : detail::json();
      pj["lambda_losing"] = ps.lambda_losing ? detail::json(*ps.lambda_losing) : detail::json();
      pj["lambda_winning"] =
          ps.lambda_winning ? detail::json(*ps.lambda_winning) : detail::json();
      arr.push_back(std::move(pj));
    }
    std::ofstream js = detail::open_for_write(out_path("pairs.json"));
    js << arr.dump(2) << '\n';
  }

  {
    std::ofstream csv = detail::open_for_write(out_path("grouped_rel_diff.csv"));
    csv << "grouping,bucket,pairs,mean_rel_diff_pct\n";
    for (const GroupedMean& g : result.grouped)
      csv << g.grouping << ',' << to_string(g.bucket_key) << ',' << g.pairs << ','
          << detail::fmt_double(g.mean_rel_diff_pct) << '\n';
  }

  {
    std::ofstream csv = detail::open_for_write(out_path("delta_hist.csv"));
    csv << "bucket,bin_lo,bin_hi,count\n";
    for (const auto& [b, bins] : result.histogram.counts)
      for (int i = 0; i < DeltaHistogram::kBins; ++i)
        csv << to_string(b) << ',' << detail::fmt_double(-1.0 + 0.1 * i) << ','
            << detail::fmt_double(-1.0 + 0.1 * (i + 1)) << ',' << bins[static_cast<size_t>(i)]
            << '\n';
  }

  {
    std::ofstream csv = detail::open_for_write(out_path("offtarget.csv"));
    csv << "method,off_target_base_pct,off_target_comp_pct,total_losing\n";
    csv << cfg.method << ',' << detail::fmt_opt(result.off_target.base_pct) << ','
        << detail::fmt_opt(result.off_target.comp_pct) << ',' << result.off_target.total_losing
        << '\n';
  }

  {
    auto lam_json = [](const LambdaReport& rep) {
      detail::json j{{"count", rep.count}, {"degenerate", rep.degenerate}};
      j["lambda"] = rep.lambda ? detail::json(*rep.lambda) : detail::json();
      if (!rep.note.empty()) j["note"] = rep.note;
      return j;
    };
    detail::json j{{"losing", lam_json(result.lambda_losing)},
                   {"winning", lam_json(result.lambda_winning)}};
    std::ofstream js = detail::open_for_write(out_path("lambda.json"));
    js << j.dump(2) << '\n';
  }

  {
    std::ofstream csv = detail::open_for_write(out_path("memory.csv"));
    csv << "method,memory_factor\n";
    csv << cfg.method << ',' << detail::fmt_double(result.memory) << '\n';
  }

  {
    detail::json j{{"method", cfg.method},
                   {"memory_factor", result.memory},
                   {"records", result.records_total},
                   {"pairs", result.pairs.size()},
                   {"included_pairs", result.included_pairs},
                   {"total_losing", result.off_target.total_losing},
                   {"delta_threshold", cfg.delta_threshold},
                   {"tokenizer", cfg.tokenizer == Tokenizer::whitespace ? "whitespace"
                                                                        : "character"}};
    j["spbleu_filter"] = cfg.spbleu_filter ? detail::json(*cfg.spbleu_filter) : detail::json();
    std::ofstream js = detail::open_for_write(out_path("summary.json"));
    js << j.dump(2) << '\n';
  }

  if (cfg.emit_svg) {
    const ResourceBucket all_buckets[] = {ResourceBucket::very_low, ResourceBucket::low,
                                          ResourceBucket::medium, ResourceBucket::high};
    std::vector<std::string> labels;
    std::vector<std::vector<double>> vals{std::vector<double>(4, 0.0)};
    for (int i = 0; i < 4; ++i) {
      labels.push_back(to_string(all_buckets[i]));
      for (const GroupedMean& g : result.grouped)
        if (g.grouping == "pair" && g.bucket_key == all_buckets[i])
          vals[0][static_cast<size_t>(i)] = g.mean_rel_diff_pct;
    }
    std::ofstream f3 = detail::open_for_write(out_path("fig3.svg"));
    f3 << detail::svg_grouped_bars("Mean relative BLEU difference (%) by resource class",
                                   labels, {"pairs"}, vals);

    std::vector<std::string> bin_labels;
    for (int i = 0; i < DeltaHistogram::kBins; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.1f", -1.0 + 0.1 * i);
      bin_labels.push_back(buf);
    }
    std::vector<std::string> series;
    std::vector<std::vector<double>> hist_vals;
    for (ResourceBucket b : all_buckets) {
      series.push_back(to_string(b));
      std::vector<double> row(DeltaHistogram::kBins, 0.0);
      auto it = result.histogram.counts.find(b);
      if (it != result.histogram.counts.end())
        for (int i = 0; i < DeltaHistogram::kBins; ++i)
          row[static_cast<size_t>(i)] = static_cast<double>(it->second[static_cast<size_t>(i)]);
      hist_vals.push_back(std::move(row));
    }
    std::ofstream f4 = detail::open_for_write(out_path("fig4.svg"));
    f4 << detail::svg_grouped_bars("Sentences per delta bin by resource class", bin_labels,
                                   series, hist_vals);
  }

  return result;
}

// --- sparsity sweep -----------------------------------------------------------

struct SweepRow {
  double p = 0.0;
  PruneStrategy strategy = PruneStrategy::transformer_layer;
  double bleu_score = 0.0;
};

// Prunes at each ratio, decodes the corpus, scores BLEU against the token
// references. Rows come back ordered by (p, strategy name).
inline std::vector<SweepRow> sweep(
    const ModelConfig& cfg, const WeightSet& ws, const std::vector<TokenCorpusEntry>& corpus,
    std::vector<double> ratios,
    std::vector<PruneStrategy> strategies = {PruneStrategy::transformer_layer}) {
  if (corpus.empty()) throw error("sweep: empty corpus");
  if (ratios.empty()) throw error("sweep: no sparsity ratios given");
  if (strategies.empty()) throw error("sweep: no strategies given");
  for (double p : ratios)
    if (!(p >= 0.0 && p <= 1.0)) throw error("sweep: sparsity ratio must lie in [0, 1]");
  std::sort(ratios.begin(), ratios.end());
  std::sort(strategies.begin(), strategies.end(), [](PruneStrategy a, PruneStrategy b) {
    return std::string(to_string(a)) < to_string(b);
  });

  std::vector<std::vector<uint32_t>> refs;
  refs.reserve(corpus.size());
  for (const TokenCorpusEntry& e : corpus) refs.push_back(e.ref);

  std::vector<SweepRow> rows;
  for (double p : ratios) {
    for (PruneStrategy strategy : strategies) {
      WeightSet pruned = magnitude_prune(ws, p, strategy);
      std::vector<std::vector<uint32_t>> hyps(corpus.size());
      parallel_for(corpus.size(), [&](size_t i) {
        hyps[i] = forward_decode(cfg, pruned, corpus[i].tokens).tokens;
      });
      rows.push_back({p, strategy, bleu(refs, hyps)});
    }
  }
  return rows;
}

}  // namespace mtbias
