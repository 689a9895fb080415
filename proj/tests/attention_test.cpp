#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mtbias/attention.hpp"
#include "mtbias/prng.hpp"
#include "test_util.hpp"

using namespace mtbias;

namespace {

// Literal double loop over the definition, renormalizing explicitly.
double variance_oracle(const AttentionMatrix& m) {
  double total = 0.0;
  for (size_t i = 0; i < m.rows; ++i) {
    double row_sum = 0.0;
    for (size_t j = 0; j < m.cols; ++j) row_sum += m.at(i, j);
    double mu = 0.0;
    for (size_t j = 0; j < m.cols; ++j) mu += static_cast<double>(j) * m.at(i, j) / row_sum;
    for (size_t j = 0; j < m.cols; ++j)
      total += (m.at(i, j) / row_sum) * (mu - static_cast<double>(j)) * (mu - static_cast<double>(j));
  }
  return total / static_cast<double>(m.rows * m.cols);
}

AttentionMatrix uniform_matrix(size_t rows, size_t cols) {
  AttentionMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.alpha.assign(rows * cols, 1.0 / static_cast<double>(cols));
  return m;
}

AttentionMatrix one_hot_diagonal(size_t n) {
  AttentionMatrix m;
  m.rows = n;
  m.cols = n;
  m.alpha.assign(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

}  // namespace

TEST(AttentionVariance, OneHotDiagonalIsZero) {
  EXPECT_DOUBLE_EQ(attention_variance(one_hot_diagonal(5)), 0.0);
}

TEST(AttentionVariance, UniformFourByFour) {
  // Per-row weighted variance 1.25; divided by |J| = 4.
  EXPECT_DOUBLE_EQ(attention_variance(uniform_matrix(4, 4)), 0.3125);
}

TEST(AttentionVariance, OneByOneIsZero) {
  EXPECT_DOUBLE_EQ(attention_variance(uniform_matrix(1, 1)), 0.0);
}

TEST(AttentionVariance, MatchesBruteForceOnRandomMatrices) {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    size_t rows = 1 + rng.below(8);
    size_t cols = 1 + rng.below(8);
    AttentionMatrix m = testutil::random_attention(rng, rows, cols);
    EXPECT_NEAR(attention_variance(m), variance_oracle(m), 1e-9);
  }
}

TEST(AttentionVariance, InvariantUnderRowPermutation) {
  SplitMix64 rng(43);
  AttentionMatrix m = testutil::random_attention(rng, 5, 7);
  AttentionMatrix flipped = m;
  for (size_t i = 0; i < m.rows; ++i)
    for (size_t j = 0; j < m.cols; ++j) flipped.at(m.rows - 1 - i, j) = m.at(i, j);
  EXPECT_NEAR(attention_variance(m), attention_variance(flipped), 1e-12);
}

TEST(AttentionVariance, RejectsInvalidMatrices) {
  AttentionMatrix empty;
  EXPECT_THROW(attention_variance(empty), error);

  AttentionMatrix bad_sum = uniform_matrix(2, 2);
  bad_sum.at(0, 0) = 0.9;  // row sums to 1.4
  bad_sum.at(0, 1) = 0.5;
  EXPECT_THROW(attention_variance(bad_sum), error);

  AttentionMatrix negative = uniform_matrix(1, 2);
  negative.at(0, 0) = -0.2;
  negative.at(0, 1) = 1.2;
  EXPECT_THROW(attention_variance(negative), error);
}

TEST(RelativeAlignment, IdenticalPairsGiveOne) {
  SplitMix64 rng(47);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records;
  for (int i = 0; i < 4; ++i) {
    AttentionMatrix m = testutil::random_attention(rng, 3, 5);
    records.push_back({m, m});
  }
  EXPECT_DOUBLE_EQ(relative_alignment(records), 1.0);
}

TEST(RelativeAlignment, ExactRatioCase) {
  // base rows are uniform 1x2 (variance 0.125); comp uniform 4x4 (0.3125).
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records{
      {uniform_matrix(1, 2), uniform_matrix(4, 4)},
      {uniform_matrix(1, 2), uniform_matrix(4, 4)}};
  EXPECT_DOUBLE_EQ(relative_alignment(records), 2.5);
}

TEST(RelativeAlignment, RatioMatchesOracleOnPerturbedDiagonal) {
  // Base near one-hot diagonal, comp uniform; expected value recomputed with
  // the brute-force variance.
  AttentionMatrix base = one_hot_diagonal(4);
  for (size_t i = 0; i < 4; ++i) {
    base.at(i, i) = 0.9;
    base.at(i, (i + 1) % 4) = 0.1;
  }
  AttentionMatrix comp = uniform_matrix(4, 4);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records{{base, comp}};
  double expected = variance_oracle(comp) / variance_oracle(base);
  EXPECT_NEAR(relative_alignment(records), expected, 1e-12);
}

TEST(RelativeAlignment, DuplicatingRecordsKeepsLambda) {
  SplitMix64 rng(53);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records;
  for (int i = 0; i < 3; ++i)
    records.push_back(
        {testutil::random_attention(rng, 4, 6), testutil::random_attention(rng, 4, 6)});
  double lambda = relative_alignment(records);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> doubled = records;
  doubled.insert(doubled.end(), records.begin(), records.end());
  EXPECT_NEAR(relative_alignment(doubled), lambda, 1e-12);
}

TEST(RelativeAlignment, GreaterThanOneWhenCompAlwaysWider) {
  SplitMix64 rng(59);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records;
  for (int i = 0; i < 5; ++i) {
    AttentionMatrix base = one_hot_diagonal(4);
    for (size_t r = 0; r < 4; ++r) {
      base.at(r, r) = 0.95;
      base.at(r, (r + 1) % 4) = 0.05;
    }
    records.push_back({base, uniform_matrix(4, 4)});
  }
  EXPECT_GT(relative_alignment(records), 1.0);
}

TEST(RelativeAlignment, DegenerateBaseFails) {
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> records{
      {one_hot_diagonal(3), uniform_matrix(3, 3)}};
  EXPECT_THROW(relative_alignment(records), error);
  std::vector<std::pair<AttentionMatrix, AttentionMatrix>> empty;
  EXPECT_THROW(relative_alignment(empty), error);
}
