#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "mtbias/prune.hpp"
#include "mtbias/quant_io.hpp"
#include "mtbias/quantize.hpp"
#include "test_util.hpp"

using namespace mtbias;

namespace {

// ---- independent pruning oracle -------------------------------------------
// Pools rebuilt from scratch; selection by plain sort on (|w|, pool order).

struct PoolEntry {
  std::string tensor;
  size_t index;
  float value;
};

std::map<std::string, std::vector<PoolEntry>> oracle_pools(const WeightSet& ws,
                                                           PruneStrategy strategy) {
  std::map<std::string, std::vector<PoolEntry>> pools;
  for (const auto& [name, t] : ws.params) {
    std::string key;
    if (strategy == PruneStrategy::per_module) key = name;
    else if (strategy == PruneStrategy::transformer_layer) key = ws.layer_of.at(name);
    else key = ws.layer_of.at(name) + "|" + to_string(ws.group_of.at(name));
    for (size_t i = 0; i < t.data.size(); ++i) pools[key].push_back({name, i, t.data[i]});
  }
  return pools;
}

// Expected zero positions per pool: the round(p*n) smallest magnitudes,
// earlier pool positions first on ties.
std::map<std::string, std::vector<std::pair<std::string, size_t>>> oracle_zeroed(
    const WeightSet& ws, double p, PruneStrategy strategy) {
  std::map<std::string, std::vector<std::pair<std::string, size_t>>> zeroed;
  for (auto& [key, pool] : oracle_pools(ws, strategy)) {
    std::vector<std::pair<double, size_t>> ranked;  // (|w|, pool position)
    for (size_t i = 0; i < pool.size(); ++i)
      ranked.push_back({std::fabs(static_cast<double>(pool[i].value)), i});
    std::sort(ranked.begin(), ranked.end());
    auto k = static_cast<size_t>(std::llround(p * static_cast<double>(pool.size())));
    k = std::min(k, pool.size());
    for (size_t i = 0; i < k; ++i) {
      const PoolEntry& e = pool[ranked[i].second];
      zeroed[key].push_back({e.tensor, e.index});
    }
  }
  return zeroed;
}

void check_against_oracle(const WeightSet& input, double p, PruneStrategy strategy) {
  WeightSet output = magnitude_prune(input, p, strategy);
  auto expected = oracle_zeroed(input, p, strategy);

  std::map<std::pair<std::string, size_t>, bool> expect_zero;
  for (const auto& [pool, entries] : expected)
    for (const auto& e : entries) expect_zero[e] = true;

  size_t expected_total = expect_zero.size();
  size_t got_zero_from_nonzero = 0;
  for (const auto& [name, t] : input.params) {
    const Tensor& out = output.params.at(name);
    ASSERT_EQ(out.shape, t.shape);
    for (size_t i = 0; i < t.data.size(); ++i) {
      bool should_zero = expect_zero.count({name, i}) > 0;
      if (should_zero) {
        EXPECT_EQ(out.data[i], 0.0f) << name << "[" << i << "] p=" << p;
        if (t.data[i] != 0.0f) ++got_zero_from_nonzero;
      } else {
        // Survivors are bit-identical to the input.
        EXPECT_EQ(out.data[i], t.data[i]) << name << "[" << i << "] p=" << p;
      }
    }
  }

  // Newly-zeroed count per pool is round(p*n) minus the preexisting zeros
  // that got selected (zeros always rank first).
  for (auto& [key, pool] : oracle_pools(input, strategy)) {
    auto k = static_cast<size_t>(std::llround(p * static_cast<double>(pool.size())));
    k = std::min(k, pool.size());
    size_t preexisting = 0;
    for (const PoolEntry& e : pool)
      if (e.value == 0.0f) ++preexisting;
    size_t newly = 0;
    for (const PoolEntry& e : pool) {
      if (e.value == 0.0f) continue;
      if (output.params.at(e.tensor).data[e.index] == 0.0f) ++newly;
    }
    EXPECT_EQ(newly, k - std::min(k, preexisting)) << "pool " << key << " p=" << p;
  }
  (void)expected_total;
  (void)got_zero_from_nonzero;
}

}  // namespace

TEST(MagnitudePrune, SpecExamplePool) {
  WeightSet ws;
  ws.params.emplace("w", Tensor({4}, {0.5f, -0.1f, 0.3f, -0.7f}));
  ws.layer_of["w"] = "l0";
  ws.group_of["w"] = ParamGroup::other;
  WeightSet out = magnitude_prune(ws, 0.5, PruneStrategy::per_module);
  EXPECT_EQ(out.params.at("w").data, (std::vector<float>{0.5f, 0.0f, 0.0f, -0.7f}));
}

TEST(MagnitudePrune, ZeroRatioIsIdentity) {
  SplitMix64 rng(3);
  WeightSet ws = testutil::random_weight_set(rng);
  EXPECT_EQ(magnitude_prune(ws, 0.0, PruneStrategy::transformer_layer), ws);
}

TEST(MagnitudePrune, FullRatioZeroesEverything) {
  SplitMix64 rng(4);
  WeightSet ws = testutil::random_weight_set(rng);
  WeightSet out = magnitude_prune(ws, 1.0, PruneStrategy::separate_attn_ffn);
  EXPECT_DOUBLE_EQ(sparsity(out), 1.0);
}

TEST(MagnitudePrune, MatchesSortOracleAcrossStrategiesAndRatios) {
  const PruneStrategy strategies[] = {PruneStrategy::transformer_layer,
                                      PruneStrategy::per_module,
                                      PruneStrategy::separate_attn_ffn};
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SplitMix64 rng(seed);
    WeightSet ws = testutil::random_weight_set(rng);
    for (PruneStrategy s : strategies)
      for (double p : {0.0, 0.25, 0.3, 0.5, 1.0}) check_against_oracle(ws, p, s);
  }
}

TEST(MagnitudePrune, IdempotentAtFixedRatio) {
  SplitMix64 rng(9);
  WeightSet ws = testutil::random_weight_set(rng);
  for (PruneStrategy s : {PruneStrategy::transformer_layer, PruneStrategy::per_module}) {
    WeightSet once = magnitude_prune(ws, 0.4, s);
    WeightSet twice = magnitude_prune(once, 0.4, s);
    EXPECT_EQ(once, twice);
  }
}

TEST(MagnitudePrune, StrategiesAgreeOnSingleTensor) {
  WeightSet ws;
  ws.params.emplace("only", Tensor({8}, {0.9f, -0.2f, 0.4f, 0.0f, -0.6f, 0.1f, 0.3f, -0.8f}));
  ws.layer_of["only"] = "l0";
  ws.group_of["only"] = ParamGroup::attention;
  WeightSet a = magnitude_prune(ws, 0.45, PruneStrategy::transformer_layer);
  WeightSet b = magnitude_prune(ws, 0.45, PruneStrategy::per_module);
  WeightSet c = magnitude_prune(ws, 0.45, PruneStrategy::separate_attn_ffn);
  EXPECT_EQ(a, b);
  EXPECT_EQ(b, c);
}

TEST(MagnitudePrune, RejectsBadRatioAndUntaggedParams) {
  SplitMix64 rng(5);
  WeightSet ws = testutil::random_weight_set(rng);
  EXPECT_THROW(magnitude_prune(ws, -0.1, PruneStrategy::per_module), error);
  EXPECT_THROW(magnitude_prune(ws, 1.5, PruneStrategy::per_module), error);
  WeightSet untagged = ws;
  untagged.group_of.erase(untagged.group_of.begin());
  EXPECT_THROW(magnitude_prune(untagged, 0.5, PruneStrategy::per_module), error);
}

// ---- quantization -----------------------------------------------------------

namespace {

// Round-half-even via IEEE remainder; independent of the library helper.
double rhe(double x) { return x - std::remainder(x, 1.0); }

double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Brute force over the same candidate grid the implementation documents.
struct SymmetricOracle {
  double best_threshold = 0.0;
  std::vector<double> candidate_mse;
};

SymmetricOracle symmetric_oracle(const std::vector<float>& vals, uint32_t grid) {
  double vmax = 0.0;
  for (float v : vals) vmax = std::max(vmax, std::fabs(static_cast<double>(v)));
  SymmetricOracle o;
  for (uint32_t g = 1; g <= grid; ++g) {
    double t = vmax * g / grid;
    double scale = t / 127.0;
    double mse = 0.0;
    for (float v : vals) {
      double q = clampd(rhe(v / scale), -127.0, 127.0);
      double d = v - scale * q;
      mse += d * d;
    }
    o.candidate_mse.push_back(mse);
  }
  // first minimum wins, matching the documented tie rule
  size_t best = static_cast<size_t>(
      std::min_element(o.candidate_mse.begin(), o.candidate_mse.end()) -
      o.candidate_mse.begin());
  o.best_threshold = vmax * static_cast<double>(best + 1) / grid;
  return o;
}

Tensor single_channel(std::vector<float> vals) {
  auto n = static_cast<uint32_t>(vals.size());
  return Tensor({1, n}, std::move(vals));
}

}  // namespace

TEST(Quantize, SpecChannelMatchesBruteForce) {
  std::vector<float> vals{-1.0f, 0.5f, 0.25f};
  QuantSpec spec;
  QuantizedTensor qt = quantize_tensor(single_channel(vals), spec);
  SymmetricOracle o = symmetric_oracle(vals, spec.calib_grid);
  EXPECT_FLOAT_EQ(qt.scales[0], static_cast<float>(o.best_threshold / 127.0));
  EXPECT_EQ(qt.zero_points[0], 0);
}

TEST(Quantize, ChosenThresholdIsGridOptimal) {
  SplitMix64 rng(21);
  QuantSpec spec;
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 3 + rng.below(30);
    std::vector<float> vals(n);
    for (float& v : vals) v = static_cast<float>(rng.uniform_sym(2.0));
    QuantizedTensor qt = quantize_tensor(single_channel(vals), spec);
    SymmetricOracle o = symmetric_oracle(vals, spec.calib_grid);
    ASSERT_FLOAT_EQ(qt.scales[0], static_cast<float>(o.best_threshold / 127.0)) << trial;
    double chosen = *std::min_element(o.candidate_mse.begin(), o.candidate_mse.end());
    for (double mse : o.candidate_mse) EXPECT_LE(chosen, mse);
  }
}

TEST(Quantize, OnGridValuesReconstructExactly) {
  // Values are exact multiples of 2^-10 with the top code present, so the
  // full-range candidate reconstructs with zero error.
  const float s0 = 0.0009765625f;
  std::vector<float> vals;
  for (int k : {-127, -64, -3, 0, 1, 42, 127, 90}) vals.push_back(s0 * static_cast<float>(k));
  Tensor t = single_channel(vals);
  QuantizedTensor qt = quantize_tensor(t);
  Tensor back = dequantize(qt);
  EXPECT_EQ(back.data, t.data);
  EXPECT_FLOAT_EQ(qt.scales[0], s0);
}

TEST(Quantize, AllZeroTensorGetsScaleOne) {
  Tensor t({2, 3}, std::vector<float>(6, 0.0f));
  QuantizedTensor qt = quantize_tensor(t);
  for (float s : qt.scales) EXPECT_FLOAT_EQ(s, 1.0f);
  for (int8_t q : qt.q) EXPECT_EQ(q, 0);
  Tensor back = dequantize(qt);
  for (float v : back.data) EXPECT_EQ(v, 0.0f);
}

TEST(Quantize, PerChannelScalesAreIndependent) {
  Tensor t({2, 2}, {1.0f, 0.5f, 100.0f, 50.0f});
  QuantizedTensor qt = quantize_tensor(t);
  ASSERT_EQ(qt.scales.size(), 2u);
  EXPECT_LT(qt.scales[0], qt.scales[1]);
}

TEST(Dequantize, DirectArithmetic) {
  QuantizedTensor qt;
  qt.shape = {1};
  qt.q = {127};
  qt.scales = {0.01f};
  qt.zero_points = {0};
  qt.per_channel = true;
  Tensor t = dequantize(qt);
  EXPECT_NEAR(t.data[0], 1.27f, 1e-6);
}

TEST(Dequantize, ErrorBoundedByHalfScaleForUnclipped) {
  SplitMix64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> vals(40);
    for (float& v : vals) v = static_cast<float>(rng.uniform_sym(3.0));
    Tensor t = single_channel(vals);
    QuantizedTensor qt = quantize_tensor(t);
    Tensor back = dequantize(qt);
    double scale = qt.scales[0];
    for (size_t i = 0; i < vals.size(); ++i) {
      double raw = rhe(vals[i] / scale);
      if (std::fabs(raw) > 127.0) continue;  // clipped
      EXPECT_LE(std::fabs(vals[i] - back.data[i]), scale * 0.5 * (1.0 + 1e-9));
    }
  }
}

TEST(ActivationCalibration, MatchesShrinkGridOracle) {
  SplitMix64 rng(44);
  QuantSpec spec;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> vals(64);
    for (float& v : vals) v = static_cast<float>(rng.uniform_sym(4.0) + 1.0);
    std::vector<Tensor> batches{single_channel(vals)};
    ActivationQuantParams got = calibrate_activations(batches, spec, "site");

    double mn = vals[0], mx = vals[0];
    for (float v : vals) {
      mn = std::min(mn, static_cast<double>(v));
      mx = std::max(mx, static_cast<double>(v));
    }
    double best_mse = 0.0;
    double best_scale = 0.0;
    int32_t best_zp = 0;
    for (uint32_t g = 1; g <= spec.calib_grid; ++g) {
      double f = static_cast<double>(g) / spec.calib_grid;
      double lo = mn * f, hi = mx * f;
      double scale = (hi - lo) / 255.0;
      double zp = clampd(rhe(-128.0 - lo / scale), -128.0, 127.0);
      double mse = 0.0;
      for (float x : vals) {
        double q = clampd(rhe(x / scale) + zp, -128.0, 127.0);
        double d = x - scale * (q - zp);
        mse += d * d;
      }
      if (g == 1 || mse < best_mse) {
        best_mse = mse;
        best_scale = scale;
        best_zp = static_cast<int32_t>(zp);
      }
    }
    EXPECT_FLOAT_EQ(got.scale, static_cast<float>(best_scale)) << trial;
    EXPECT_EQ(got.zero_point, best_zp) << trial;
  }
}

TEST(ActivationCalibration, ConstantSignalRepresentedExactly) {
  std::vector<Tensor> batches{single_channel({2.5f, 2.5f, 2.5f})};
  ActivationQuantParams ap = calibrate_activations(batches, {}, "const");
  EXPECT_FLOAT_EQ(ap.scale, 2.5f);
  EXPECT_EQ(ap.zero_point, 0);
}

TEST(ActivationCalibration, EmptySetFails) {
  std::vector<Tensor> none;
  EXPECT_THROW(calibrate_activations(none, {}, "hidden.0"), error);
  try {
    calibrate_activations(none, {}, "hidden.0");
  } catch (const error& e) {
    EXPECT_NE(std::string(e.what()).find("hidden.0"), std::string::npos);
  }
}

TEST(Quantize, FullModelAndFileRoundTrip) {
  testutil::TempDir tmp;
  SplitMix64 rng(55);
  WeightSet ws = testutil::random_weight_set(rng, 2, 24);
  std::map<std::string, std::vector<Tensor>> calib;
  calib["enc.in"] = {single_channel({0.1f, 0.9f, 0.4f}), single_channel({-0.2f, 0.8f})};
  QuantizedModel model = quantize(ws, calib);
  EXPECT_EQ(model.weights.size(), ws.params.size());
  ASSERT_EQ(model.activations.size(), 1u);

  std::string path = tmp.file("model.mtbq");
  save_quantized(model, path);
  QuantizedModel back = load_quantized(path);
  EXPECT_EQ(back.weights.size(), model.weights.size());
  for (const auto& [name, qt] : model.weights) {
    const QuantizedTensor& b = back.weights.at(name);
    EXPECT_EQ(b.q, qt.q);
    EXPECT_EQ(b.scales, qt.scales);
    EXPECT_EQ(b.zero_points, qt.zero_points);
    EXPECT_EQ(b.shape, qt.shape);
  }
  EXPECT_FLOAT_EQ(back.activations.at("enc.in").scale, model.activations.at("enc.in").scale);
  EXPECT_EQ(back.layer_of, model.layer_of);

  WeightSet deq = dequantize_model(back);
  EXPECT_EQ(deq.params.size(), ws.params.size());
}

TEST(MemoryFactor, ReproducesReportedFactors) {
  EXPECT_EQ(memory_factor(parse_method("baseline")), 1.0);
  EXPECT_EQ(memory_factor(parse_method("pruned(0.30)")), 0.70);
  EXPECT_EQ(memory_factor(parse_method("pruned(0.45)")), 0.55);
  EXPECT_EQ(memory_factor(parse_method("quantized-int8")), 0.25);
}

TEST(MemoryFactor, RejectsUnknownMethods) {
  EXPECT_THROW(parse_method("distilled"), error);
  EXPECT_THROW(parse_method("pruned(1.5)"), error);
}
