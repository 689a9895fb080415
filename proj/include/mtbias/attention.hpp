#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtbias/error.hpp"

namespace mtbias {

// Row-stochastic cross-attention, averaged over layers and heads upstream.
// rows = target positions, cols = source positions.
struct AttentionMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> alpha;  // row-major

  double at(size_t i, size_t j) const { return alpha[i * cols + j]; }
  double& at(size_t i, size_t j) { return alpha[i * cols + j]; }

  void validate() const {
    if (rows == 0 || cols == 0) throw error("attention matrix must be at least 1x1");
    if (alpha.size() != rows * cols) throw error("attention matrix value count mismatch");
    for (size_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (size_t j = 0; j < cols; ++j) {
        double a = at(i, j);
        if (!(a >= 0.0) || !std::isfinite(a))
          throw error("attention weight at (" + std::to_string(i) + "," + std::to_string(j) +
                      ") is negative or non-finite");
        sum += a;
      }
      if (std::fabs(sum - 1.0) > 1e-4)
        throw error("attention row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
};

// Positional spread of each target row's attention around its mean source
// position, averaged over the matrix:
//   mu_i = sum_j j * a[i][j],  var = (1 / (|I| * |J|)) sum_ij a[i][j] * (mu_i - j)^2
// with source positions 0-indexed. Rows are renormalized exactly first.
// Near-diagonal matrices score near 0; diffuse attention scores high.
inline double attention_variance(const AttentionMatrix& m) {
  m.validate();
  double acc = 0.0;
  for (size_t i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < m.cols; ++j) sum += m.at(i, j);
    double mu = 0.0;
    for (size_t j = 0; j < m.cols; ++j) mu += static_cast<double>(j) * (m.at(i, j) / sum);
    for (size_t j = 0; j < m.cols; ++j) {
      double d = mu - static_cast<double>(j);
      acc += (m.at(i, j) / sum) * d * d;
    }
  }
  return acc / (static_cast<double>(m.rows) * static_cast<double>(m.cols));
}

// lambda = mean variance of the compressed matrices over mean variance of
// the baseline matrices (ratio of means, which is stable when individual
// baseline variances are near zero).
inline double relative_alignment(
    const std::vector<std::pair<AttentionMatrix, AttentionMatrix>>& records) {
  if (records.empty()) throw error("relative alignment needs at least one record");
  double base_sum = 0.0;
  double comp_sum = 0.0;
  for (const auto& [base, comp] : records) {
    base_sum += attention_variance(base);
    comp_sum += attention_variance(comp);
  }
  if (base_sum == 0.0)
    throw error("degenerate subset: mean baseline attention variance is zero");
  return comp_sum / base_sum;
}

}  // namespace mtbias
