#pragma once

// Int8 post-training quantization. Weights are symmetric per output channel
// (first dimension); activations are asymmetric per tensor. Clip thresholds
// are picked by exhaustive MSE search over a uniform candidate grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/error.hpp"
#include "mtbias/tensor.hpp"

namespace mtbias {

struct QuantSpec {
  int bits = 8;             // int8 is the only supported width
  uint32_t calib_grid = 100;  // number of candidate clip thresholds

  void validate() const {
    if (bits != 8) throw error("only 8-bit quantization is supported");
    if (calib_grid < 2) throw error("calibration grid needs at least 2 candidates");
  }
};

struct QuantizedTensor {
  std::vector<int8_t> q;
  std::vector<float> scales;        // per channel, or a single entry per-tensor
  std::vector<int32_t> zero_points;  // parallel to scales; zero when symmetric
  std::vector<uint32_t> shape;
  bool per_channel = true;

  size_t numel() const { return q.size(); }

  void validate() const {
    if (shape.empty()) throw error("quantized tensor has empty shape");
    if (Tensor::numel_of(shape) != q.size())
      throw error("quantized tensor shape/value count mismatch");
    size_t want = per_channel ? shape[0] : 1;
    if (scales.size() != want || zero_points.size() != want)
      throw error("quantized tensor has wrong scale/zero-point count");
    for (float s : scales)
      if (!(s > 0.0f)) throw error("quantized tensor scale must be positive");
  }
};

struct ActivationQuantParams {
  float scale = 1.0f;
  int32_t zero_point = 0;
};

struct QuantizedModel {
  std::map<std::string, QuantizedTensor> weights;
  std::map<std::string, ActivationQuantParams> activations;
  std::map<std::string, std::string> layer_of;
  std::map<std::string, ParamGroup> group_of;
};

inline double round_half_even(double x) {
  double fl = std::floor(x);
  double diff = x - fl;
  if (diff > 0.5) return fl + 1.0;
  if (diff < 0.5) return fl;
  return (std::fmod(fl, 2.0) == 0.0) ? fl : fl + 1.0;
}

namespace detail {

inline double clamp_q(double q, double lo, double hi) {
  return std::min(hi, std::max(lo, q));
}

// Reconstruction MSE of symmetric int8 with clip threshold t (scale t/127).
// Sequential accumulation; callers rely on a fixed reduction order.
inline double symmetric_mse(const float* v, size_t n, double t) {
  double scale = t / 127.0;
  double mse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double w = v[i];
    double q = clamp_q(round_half_even(w / scale), -127.0, 127.0);
    double d = w - scale * q;
    mse += d * d;
  }
  return mse;
}

struct AffineParams {
  double scale;
  int32_t zero_point;
};

inline AffineParams affine_from_range(double lo, double hi) {
  double scale = (hi - lo) / 255.0;
  double zp = round_half_even(-128.0 - lo / scale);
  zp = clamp_q(zp, -128.0, 127.0);
  return {scale, static_cast<int32_t>(zp)};
}

inline double asymmetric_mse(const std::vector<const Tensor*>& batches, const AffineParams& ap) {
  double mse = 0.0;
  for (const Tensor* t : batches) {
    for (float x : t->data) {
      double q = clamp_q(round_half_even(x / ap.scale) + ap.zero_point, -128.0, 127.0);
      double r = ap.scale * (q - ap.zero_point);
      double d = x - r;
      mse += d * d;
    }
  }
  return mse;
}

}  // namespace detail

// Symmetric per-output-channel int8 for one tensor. The clip threshold per
// channel is the MSE-minimizing candidate among {max|w| * i / grid},
// i = 1..grid; ties go to the smaller threshold. All-zero channels get
// scale 1 and all-zero codes.
inline QuantizedTensor quantize_tensor(const Tensor& t, const QuantSpec& spec = {}) {
  spec.validate();
  if (t.shape.empty()) throw error("cannot quantize a tensor without shape");

  QuantizedTensor out;
  out.shape = t.shape;
  out.per_channel = true;
  size_t channels = t.shape[0];
  size_t per = t.numel() / channels;
  out.q.assign(t.numel(), 0);
  out.scales.assign(channels, 1.0f);
  out.zero_points.assign(channels, 0);

  for (size_t c = 0; c < channels; ++c) {
    const float* v = t.data.data() + c * per;
    double vmax = 0.0;
    for (size_t i = 0; i < per; ++i) vmax = std::max(vmax, std::fabs(static_cast<double>(v[i])));
    if (vmax == 0.0) continue;  // scale 1, all codes zero

    uint32_t grid = spec.calib_grid;
    double best_mse = 0.0;
    double best_t = 0.0;
    for (uint32_t g = 1; g <= grid; ++g) {
      double cand = vmax * static_cast<double>(g) / static_cast<double>(grid);
      double mse = detail::symmetric_mse(v, per, cand);
      if (g == 1 || mse < best_mse) {
        best_mse = mse;
        best_t = cand;
      }
    }
    float scale = static_cast<float>(best_t / 127.0);
    out.scales[c] = scale;
    for (size_t i = 0; i < per; ++i) {
      double q = detail::clamp_q(round_half_even(v[i] / static_cast<double>(scale)), -127.0, 127.0);
      out.q[c * per + i] = static_cast<int8_t>(q);
    }
  }
  return out;
}

// Per-tensor asymmetric int8 range for one activation site, chosen by the
// same MSE grid search over (min, max) shrink factors i/grid, i = 1..grid.
inline ActivationQuantParams calibrate_activations(const std::vector<Tensor>& batches,
                                                   const QuantSpec& spec,
                                                   const std::string& site) {
  spec.validate();
  std::vector<const Tensor*> refs;
  size_t total = 0;
  for (const Tensor& t : batches) {
    refs.push_back(&t);
    total += t.numel();
  }
  if (total == 0) throw error("empty calibration set for activation site '" + site + "'");

  double mn = 0.0, mx = 0.0;
  bool first = true;
  for (const Tensor* t : refs) {
    for (float x : t->data) {
      if (first) {
        mn = mx = x;
        first = false;
      } else {
        mn = std::min(mn, static_cast<double>(x));
        mx = std::max(mx, static_cast<double>(x));
      }
    }
  }

  if (mx == mn) {
    // Constant signal: represent it exactly.
    if (mn == 0.0) return {1.0f, 0};
    double s = std::fabs(mn);
    return {static_cast<float>(s), 0};
  }

  uint32_t grid = spec.calib_grid;
  double best_mse = 0.0;
  detail::AffineParams best{1.0, 0};
  for (uint32_t g = 1; g <= grid; ++g) {
    double f = static_cast<double>(g) / static_cast<double>(grid);
    detail::AffineParams ap = detail::affine_from_range(mn * f, mx * f);
    double mse = detail::asymmetric_mse(refs, ap);
    if (g == 1 || mse < best_mse) {
      best_mse = mse;
      best = ap;
    }
  }
  return {static_cast<float>(best.scale), best.zero_point};
}

// Quantizes every weight tensor per channel and calibrates every declared
// activation site. Sites come from the caller (config); there is no graph
// tracing.
inline QuantizedModel quantize(const WeightSet& ws,
                               const std::map<std::string, std::vector<Tensor>>& calib,
                               const QuantSpec& spec = {}) {
  spec.validate();
  ws.validate();
  QuantizedModel out;
  out.layer_of = ws.layer_of;
  out.group_of = ws.group_of;
  for (const auto& [name, t] : ws.params) out.weights[name] = quantize_tensor(t, spec);
  for (const auto& [site, batches] : calib)
    out.activations[site] = calibrate_activations(batches, spec, site);
  return out;
}

inline Tensor dequantize(const QuantizedTensor& qt) {
  qt.validate();
  Tensor out;
  out.shape = qt.shape;
  out.data.resize(qt.numel());
  size_t channels = qt.per_channel ? qt.shape[0] : 1;
  size_t per = qt.numel() / channels;
  for (size_t c = 0; c < channels; ++c) {
    double scale = qt.scales[c];
    double zp = qt.zero_points[c];
    for (size_t i = 0; i < per; ++i) {
      size_t idx = c * per + i;
      out.data[idx] = static_cast<float>(scale * (static_cast<double>(qt.q[idx]) - zp));
    }
  }
  return out;
}

// --- memory footprint ------------------------------------------------------

struct CompressionMethod {
  enum class Kind { baseline, pruned, quantized_int8 };
  Kind kind = Kind::baseline;
  double p = 0.0;  // sparsity ratio, pruned only
};

inline std::string to_string(const CompressionMethod& m) {
  switch (m.kind) {
    case CompressionMethod::Kind::baseline: return "baseline";
    case CompressionMethod::Kind::pruned: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "pruned(%g)", m.p);
      return buf;
    }
    case CompressionMethod::Kind::quantized_int8: return "quantized-int8";
  }
  return "baseline";
}

inline CompressionMethod parse_method(std::string_view s) {
  if (s == "baseline") return {CompressionMethod::Kind::baseline, 0.0};
  if (s == "quantized-int8") return {CompressionMethod::Kind::quantized_int8, 0.0};
  if (s.starts_with("pruned(") && s.ends_with(")")) {
    std::string num(s.substr(7, s.size() - 8));
    char* end = nullptr;
    double p = std::strtod(num.c_str(), &end);
    if (end == num.c_str() + num.size() && p >= 0.0 && p <= 1.0)
      return {CompressionMethod::Kind::pruned, p};
  }
  throw error("unknown compression method '" + std::string(s) +
              "' (expected baseline, pruned(p), or quantized-int8)");
}

// Relative memory footprint. Pruned models assume sparse storage with index
// overhead ignored; int8 is 8/32 bits.
inline double memory_factor(const CompressionMethod& m) {
  switch (m.kind) {
    case CompressionMethod::Kind::baseline: return 1.0;
    case CompressionMethod::Kind::pruned: return 1.0 - m.p;
    case CompressionMethod::Kind::quantized_int8: return 0.25;
  }
  return 1.0;
}

}  // namespace mtbias
