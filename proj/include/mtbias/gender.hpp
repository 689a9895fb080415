#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/error.hpp"

namespace mtbias {

enum class Gender { male, female };
enum class PredictedGender { male, female, unknown };
enum class Stereotype { pro, anti, neutral };

inline Gender gender_from_string(std::string_view s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw error("unknown gold gender '" + std::string(s) + "'");
}

inline PredictedGender predicted_gender_from_string(std::string_view s) {
  if (s == "male") return PredictedGender::male;
  if (s == "female") return PredictedGender::female;
  if (s == "unknown") return PredictedGender::unknown;
  throw error("unknown predicted gender '" + std::string(s) + "'");
}

inline Stereotype stereotype_from_string(std::string_view s) {
  if (s == "pro") return Stereotype::pro;
  if (s == "anti") return Stereotype::anti;
  if (s == "neutral") return Stereotype::neutral;
  throw error("unknown stereotype class '" + std::string(s) + "'");
}

struct GenderRecord {
  Gender gold = Gender::male;
  PredictedGender predicted = PredictedGender::unknown;
  Stereotype stereotype = Stereotype::neutral;
  std::string lang;
};

struct GenderF1 {
  double f_male = 0.0;
  double f_female = 0.0;
};

// Per-class binary F1. An unknown prediction is a miss for the gold class
// (false negative) but no false positive for either class.
inline GenderF1 gender_f1(const std::vector<GenderRecord>& records) {
  if (records.empty()) throw error("gender_f1: empty record list");
  long long tp_m = 0, fp_m = 0, fn_m = 0;
  long long tp_f = 0, fp_f = 0, fn_f = 0;
  for (const GenderRecord& r : records) {
    if (r.gold == Gender::male) {
      if (r.predicted == PredictedGender::male) ++tp_m;
      else if (r.predicted == PredictedGender::female) { ++fn_m; ++fp_f; }
      else ++fn_m;
    } else {
      if (r.predicted == PredictedGender::female) ++tp_f;
      else if (r.predicted == PredictedGender::male) { ++fn_f; ++fp_m; }
      else ++fn_f;
    }
  }
  auto f1 = [](long long tp, long long fp, long long fn) {
    double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  };
  return {f1(tp_m, fp_m, fn_m), f1(tp_f, fp_f, fn_f)};
}

// psi = (f_m - f_f) / (f_m + f_f), in [-1, 1]. Zero means no gender skew;
// +1 / -1 means fully skewed toward male / female.
inline double psi_from_f1(double f_male, double f_female) {
  if (f_male + f_female <= 0.0)
    throw error("psi undefined: both gender F1 scores are zero");
  return (f_male - f_female) / (f_male + f_female);
}

inline double psi(const std::vector<GenderRecord>& records) {
  GenderF1 f = gender_f1(records);
  return psi_from_f1(f.f_male, f.f_female);
}

// psi* = |psi_anti - psi_pro| over the stereotype subsets; neutral records
// are ignored.
inline double psi_star(const std::vector<GenderRecord>& records) {
  std::vector<GenderRecord> pro;
  std::vector<GenderRecord> anti;
  for (const GenderRecord& r : records) {
    if (r.stereotype == Stereotype::pro) pro.push_back(r);
    else if (r.stereotype == Stereotype::anti) anti.push_back(r);
  }
  if (pro.empty()) throw error("psi_star: pro-stereotypical subset is empty");
  if (anti.empty()) throw error("psi_star: anti-stereotypical subset is empty");
  return std::fabs(psi(anti) - psi(pro));
}

}  // namespace mtbias
