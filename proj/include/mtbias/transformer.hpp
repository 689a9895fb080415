#pragma once

// Minimal deterministic transformer encoder-decoder used as the compression
// target. Fixed architecture so decodes are reproducible: pre-norm blocks,
// sinusoidal position encodings, untied embeddings scaled by sqrt(d_model),
// ReLU feed-forward, layer-norm epsilon 1e-5, greedy argmax decoding with
// ties broken toward the smaller token id. All math runs in double with
// fixed loop order; no caching between steps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtbias/attention.hpp"
#include "mtbias/error.hpp"
#include "mtbias/prng.hpp"
#include "mtbias/tensor.hpp"

namespace mtbias {

struct ModelConfig {
  uint32_t vocab_size = 0;
  uint32_t d_model = 0;
  uint32_t n_heads = 0;
  uint32_t n_enc_layers = 0;
  uint32_t n_dec_layers = 0;
  uint32_t d_ff = 0;
  uint32_t max_len = 0;
  uint32_t bos = 0;
  uint32_t eos = 0;
  uint32_t pad = 0;

  void validate() const {
    if (!vocab_size || !d_model || !n_heads || !n_enc_layers || !n_dec_layers || !d_ff ||
        !max_len)
      throw error("model config dimensions must be positive");
    if (d_model % n_heads != 0) throw error("d_model must be divisible by n_heads");
    if (bos >= vocab_size || eos >= vocab_size || pad >= vocab_size)
      throw error("special token ids must be below vocab_size");
    if (bos == eos || bos == pad || eos == pad)
      throw error("bos, eos and pad must be pairwise distinct");
  }
};

struct DecodeResult {
  std::vector<uint32_t> tokens;       // ends at eos or max_len
  AttentionMatrix cross_attention;    // |tokens| x |src|, rows renormalized
};

namespace detail {

struct ParamSpec {
  std::string name;
  std::vector<uint32_t> shape;
  std::string layer;
  ParamGroup group;
};

inline std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> specs;
  uint32_t d = cfg.d_model;
  uint32_t v = cfg.vocab_size;
  uint32_t ff = cfg.d_ff;

  auto add = [&](std::string name, std::vector<uint32_t> shape, std::string layer,
                 ParamGroup group) {
    specs.push_back({std::move(name), std::move(shape), std::move(layer), group});
  };
  auto add_ln = [&](const std::string& prefix, const std::string& layer) {
    add(prefix + ".gain", {d}, layer, ParamGroup::other);
    add(prefix + ".bias", {d}, layer, ParamGroup::other);
  };
  auto add_attn = [&](const std::string& prefix, const std::string& layer) {
    for (const char* part : {"wq", "wk", "wv", "wo"})
      add(prefix + "." + part, {d, d}, layer, ParamGroup::attention);
    for (const char* part : {"bq", "bk", "bv", "bo"})
      add(prefix + "." + part, {d}, layer, ParamGroup::attention);
  };
  auto add_ffn = [&](const std::string& prefix, const std::string& layer) {
    add(prefix + ".w1", {ff, d}, layer, ParamGroup::feedforward);
    add(prefix + ".b1", {ff}, layer, ParamGroup::feedforward);
    add(prefix + ".w2", {d, ff}, layer, ParamGroup::feedforward);
    add(prefix + ".b2", {d}, layer, ParamGroup::feedforward);
  };

  add("src_embed.weight", {v, d}, "embed.src", ParamGroup::embedding);
  add("tgt_embed.weight", {v, d}, "embed.tgt", ParamGroup::embedding);
  for (uint32_t i = 0; i < cfg.n_enc_layers; ++i) {
    std::string layer = "enc." + std::to_string(i);
    std::string prefix = layer;
    add_ln(prefix + ".ln1", layer);
    add_attn(prefix + ".attn", layer);
    add_ln(prefix + ".ln2", layer);
    add_ffn(prefix + ".ffn", layer);
  }
  add_ln("enc.norm", "enc.final");
  for (uint32_t i = 0; i < cfg.n_dec_layers; ++i) {
    std::string layer = "dec." + std::to_string(i);
    std::string prefix = layer;
    add_ln(prefix + ".ln1", layer);
    add_attn(prefix + ".self", layer);
    add_ln(prefix + ".ln2", layer);
    add_attn(prefix + ".cross", layer);
    add_ln(prefix + ".ln3", layer);
    add_ffn(prefix + ".ffn", layer);
  }
  add_ln("dec.norm", "dec.final");
  add("out_proj.weight", {v, d}, "head", ParamGroup::other);
  add("out_proj.bias", {v}, "head", ParamGroup::other);
  return specs;
}

inline const Tensor& fetch_param(const WeightSet& ws, const std::string& name,
                                 const std::vector<uint32_t>& shape) {
  auto it = ws.params.find(name);
  if (it == ws.params.end()) throw error("missing parameter '" + name + "'");
  if (it->second.shape != shape) throw error("parameter '" + name + "' has the wrong shape");
  return it->second;
}

struct LnParams {
  const Tensor* gain;
  const Tensor* bias;
};
struct AttnWeights {
  const Tensor *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
};
struct FfnWeights {
  const Tensor *w1, *b1, *w2, *b2;
};
struct EncLayer {
  LnParams ln1;
  AttnWeights attn;
  LnParams ln2;
  FfnWeights ffn;
};
struct DecLayer {
  LnParams ln1;
  AttnWeights self_attn;
  LnParams ln2;
  AttnWeights cross_attn;
  LnParams ln3;
  FfnWeights ffn;
};

struct BoundModel {
  ModelConfig cfg;
  const Tensor* src_embed;
  const Tensor* tgt_embed;
  std::vector<EncLayer> enc;
  LnParams enc_norm;
  std::vector<DecLayer> dec;
  LnParams dec_norm;
  const Tensor* out_w;
  const Tensor* out_b;
};

inline BoundModel bind_model(const ModelConfig& cfg, const WeightSet& ws) {
  BoundModel m;
  m.cfg = cfg;
  uint32_t d = cfg.d_model;
  uint32_t v = cfg.vocab_size;
  uint32_t ff = cfg.d_ff;
  auto ln = [&](const std::string& prefix) -> LnParams {
    return {&fetch_param(ws, prefix + ".gain", {d}), &fetch_param(ws, prefix + ".bias", {d})};
  };
  auto attn = [&](const std::string& prefix) -> AttnWeights {
    return {&fetch_param(ws, prefix + ".wq", {d, d}), &fetch_param(ws, prefix + ".bq", {d}),
            &fetch_param(ws, prefix + ".wk", {d, d}), &fetch_param(ws, prefix + ".bk", {d}),
            &fetch_param(ws, prefix + ".wv", {d, d}), &fetch_param(ws, prefix + ".bv", {d}),
            &fetch_param(ws, prefix + ".wo", {d, d}), &fetch_param(ws, prefix + ".bo", {d})};
  };
  auto ffn = [&](const std::string& prefix) -> FfnWeights {
    return {&fetch_param(ws, prefix + ".w1", {ff, d}), &fetch_param(ws, prefix + ".b1", {ff}),
            &fetch_param(ws, prefix + ".w2", {d, ff}), &fetch_param(ws, prefix + ".b2", {d})};
  };
  m.src_embed = &fetch_param(ws, "src_embed.weight", {v, d});
  m.tgt_embed = &fetch_param(ws, "tgt_embed.weight", {v, d});
  for (uint32_t i = 0; i < cfg.n_enc_layers; ++i) {
    std::string p = "enc." + std::to_string(i);
    m.enc.push_back({ln(p + ".ln1"), attn(p + ".attn"), ln(p + ".ln2"), ffn(p + ".ffn")});
  }
  m.enc_norm = ln("enc.norm");
  for (uint32_t i = 0; i < cfg.n_dec_layers; ++i) {
    std::string p = "dec." + std::to_string(i);
    m.dec.push_back({ln(p + ".ln1"), attn(p + ".self"), ln(p + ".ln2"), attn(p + ".cross"),
                     ln(p + ".ln3"), ffn(p + ".ffn")});
  }
  m.dec_norm = ln("dec.norm");
  m.out_w = &fetch_param(ws, "out_proj.weight", {v, d});
  m.out_b = &fetch_param(ws, "out_proj.bias", {v});
  return m;
}

using Rows = std::vector<std::vector<double>>;  // positions x d_model

inline double sinusoidal_pe(size_t pos, size_t channel, size_t d) {
  size_t pair = channel / 2;
  double exponent = static_cast<double>(2 * pair) / static_cast<double>(d);
  double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
  return (channel % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

inline Rows embed_sequence(const Tensor& embedding, const std::vector<uint32_t>& tokens,
                           size_t d) {
  double scale = std::sqrt(static_cast<double>(d));
  Rows rows(tokens.size(), std::vector<double>(d, 0.0));
  for (size_t t = 0; t < tokens.size(); ++t) {
    const float* e = embedding.data.data() + static_cast<size_t>(tokens[t]) * d;
    for (size_t c = 0; c < d; ++c)
      rows[t][c] = static_cast<double>(e[c]) * scale + sinusoidal_pe(t, c, d);
  }
  return rows;
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x, const LnParams& ln) {
  constexpr double eps = 1e-5;
  size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(d);
  for (size_t c = 0; c < d; ++c)
    out[c] = (x[c] - mean) * inv * static_cast<double>(ln.gain->data[c]) +
             static_cast<double>(ln.bias->data[c]);
  return out;
}

inline std::vector<double> affine(const Tensor& w, const Tensor& b,
                                  const std::vector<double>& x) {
  size_t out_dim = w.shape[0];
  size_t in_dim = w.shape[1];
  std::vector<double> y(out_dim);
  for (size_t o = 0; o < out_dim; ++o) {
    const float* row = w.data.data() + o * in_dim;
    double acc = static_cast<double>(b.data[o]);
    for (size_t i = 0; i < in_dim; ++i) acc += static_cast<double>(row[i]) * x[i];
    y[o] = acc;
  }
  return y;
}

// Queries come from x, keys/values from memory. When causal, query i only
// sees memory positions <= i. head_rows, when given, receives each head's
// softmax matrix (len_q * len_kv, row-major), appended per head.
inline Rows multi_head_attention(const ModelConfig& cfg, const AttnWeights& w, const Rows& x,
                                 const Rows& memory, bool causal,
                                 std::vector<std::vector<double>>* head_rows) {
  size_t d = cfg.d_model;
  size_t heads = cfg.n_heads;
  size_t dh = d / heads;
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  size_t len_q = x.size();
  size_t len_kv = memory.size();

  Rows q(len_q), k(len_kv), v(len_kv);
  for (size_t i = 0; i < len_q; ++i) q[i] = affine(*w.wq, *w.bq, x[i]);
  for (size_t j = 0; j < len_kv; ++j) {
    k[j] = affine(*w.wk, *w.bk, memory[j]);
    v[j] = affine(*w.wv, *w.bv, memory[j]);
  }

  Rows concat(len_q, std::vector<double>(d, 0.0));
  std::vector<double> scores(len_kv);
  for (size_t h = 0; h < heads; ++h) {
    std::vector<double>* rows = nullptr;
    if (head_rows) {
      head_rows->emplace_back(len_q * len_kv, 0.0);
      rows = &head_rows->back();
    }
    size_t off = h * dh;
    for (size_t i = 0; i < len_q; ++i) {
      size_t limit = causal ? std::min(len_kv, i + 1) : len_kv;
      double max_score = -1e300;
      for (size_t j = 0; j < limit; ++j) {
        double s = 0.0;
        for (size_t c = 0; c < dh; ++c) s += q[i][off + c] * k[j][off + c];
        s *= inv_sqrt_dh;
        scores[j] = s;
        max_score = std::max(max_score, s);
      }
      double denom = 0.0;
      for (size_t j = 0; j < limit; ++j) {
        scores[j] = std::exp(scores[j] - max_score);
        denom += scores[j];
      }
      for (size_t j = 0; j < limit; ++j) {
        double a = scores[j] / denom;
        if (rows) (*rows)[i * len_kv + j] = a;
        for (size_t c = 0; c < dh; ++c) concat[i][off + c] += a * v[j][off + c];
      }
    }
  }

  Rows out(len_q);
  for (size_t i = 0; i < len_q; ++i) out[i] = affine(*w.wo, *w.bo, concat[i]);
  return out;
}

inline void add_rows(Rows& x, const Rows& delta) {
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t c = 0; c < x[i].size(); ++c) x[i][c] += delta[i][c];
}

inline Rows feed_forward(const FfnWeights& w, const Rows& x) {
  Rows out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    std::vector<double> h = affine(*w.w1, *w.b1, x[i]);
    for (double& v : h) v = std::max(0.0, v);
    out[i] = affine(*w.w2, *w.b2, h);
  }
  return out;
}

inline Rows ln_rows(const Rows& x, const LnParams& ln) {
  Rows out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = layer_norm_row(x[i], ln);
  return out;
}

inline Rows encode(const BoundModel& m, const std::vector<uint32_t>& src) {
  Rows x = embed_sequence(*m.src_embed, src, m.cfg.d_model);
  for (const EncLayer& layer : m.enc) {
    Rows normed = ln_rows(x, layer.ln1);
    add_rows(x, multi_head_attention(m.cfg, layer.attn, normed, normed, false, nullptr));
    add_rows(x, feed_forward(layer.ffn, ln_rows(x, layer.ln2)));
  }
  return ln_rows(x, m.enc_norm);
}

struct DecoderStep {
  std::vector<double> last_logits;
  // one matrix per (layer, head), row-major len_dec x len_src
  std::vector<std::vector<double>> cross_rows;
};

inline DecoderStep decode_forward(const BoundModel& m, const Rows& enc_mem,
                                  const std::vector<uint32_t>& dec_in) {
  DecoderStep step;
  Rows y = embed_sequence(*m.tgt_embed, dec_in, m.cfg.d_model);
  for (const DecLayer& layer : m.dec) {
    Rows normed = ln_rows(y, layer.ln1);
    add_rows(y, multi_head_attention(m.cfg, layer.self_attn, normed, normed, true, nullptr));
    add_rows(y, multi_head_attention(m.cfg, layer.cross_attn, ln_rows(y, layer.ln2), enc_mem,
                                     false, &step.cross_rows));
    add_rows(y, feed_forward(layer.ffn, ln_rows(y, layer.ln3)));
  }
  std::vector<double> last = layer_norm_row(y.back(), m.dec_norm);
  step.last_logits = affine(*m.out_w, *m.out_b, last);
  return step;
}

}  // namespace detail

// Greedy decode. The returned cross-attention is the arithmetic mean over
// all decoder layers and heads of the final step's cross-attention, with
// each row renormalized to sum exactly to 1.
inline DecodeResult forward_decode(const ModelConfig& cfg, const WeightSet& ws,
                                   const std::vector<uint32_t>& src) {
  cfg.validate();
  if (src.empty()) throw error("source sequence is empty");
  if (src.size() > cfg.max_len) throw error("source sequence longer than max_len");
  for (uint32_t id : src)
    if (id >= cfg.vocab_size) throw error("source token id out of range");

  detail::BoundModel model = detail::bind_model(cfg, ws);
  detail::Rows enc_mem = detail::encode(model, src);

  std::vector<uint32_t> out;
  std::vector<std::vector<double>> last_cross;
  std::vector<uint32_t> dec_in = {cfg.bos};
  while (out.size() < cfg.max_len) {
    detail::DecoderStep step = detail::decode_forward(model, enc_mem, dec_in);
    uint32_t next = 0;
    for (uint32_t t = 1; t < cfg.vocab_size; ++t)
      if (step.last_logits[t] > step.last_logits[next]) next = t;
    last_cross = std::move(step.cross_rows);
    out.push_back(next);
    if (next == cfg.eos) break;
    dec_in.push_back(next);
  }

  size_t rows = out.size();
  size_t cols = src.size();
  AttentionMatrix avg;
  avg.rows = rows;
  avg.cols = cols;
  avg.alpha.assign(rows * cols, 0.0);
  double inv = 1.0 / static_cast<double>(last_cross.size());
  for (const auto& mat : last_cross)
    for (size_t i = 0; i < rows * cols; ++i) avg.alpha[i] += mat[i] * inv;
  for (size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < cols; ++j) sum += avg.at(i, j);
    for (size_t j = 0; j < cols; ++j) avg.at(i, j) /= sum;
  }

  return {std::move(out), std::move(avg)};
}

// Reproducible random weights: SplitMix64 feeding uniform(-s, s) with
// s = 0.1 / sqrt(d_model), values drawn in lexicographic parameter-name
// order. Layer/group tags support all three prune strategies.
inline WeightSet make_demo_weights(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::vector<detail::ParamSpec> specs = detail::model_param_specs(cfg);
  std::sort(specs.begin(), specs.end(),
            [](const detail::ParamSpec& a, const detail::ParamSpec& b) { return a.name < b.name; });
  SplitMix64 rng(seed);
  double s = 0.1 / std::sqrt(static_cast<double>(cfg.d_model));
  WeightSet ws;
  for (detail::ParamSpec& spec : specs) {
    size_t n = Tensor::numel_of(spec.shape);
    std::vector<float> data(n);
    for (float& v : data) v = static_cast<float>(rng.uniform_sym(s));
    ws.layer_of[spec.name] = spec.layer;
    ws.group_of[spec.name] = spec.group;
    ws.params.emplace(std::move(spec.name), Tensor(std::move(spec.shape), std::move(data)));
  }
  return ws;
}

}  // namespace mtbias
