#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "disem/entropy.hpp"

using namespace disem;

namespace {

// Bin by scanning interval edges; independent of Quantizer::bin_index.
int scan_bin(double x) {
  if (x == 1.0) return 8;
  for (int k = 0; k <= 8; ++k)
    if (x >= (k - 0.5) * 0.25 - 1.0 && x < (k + 0.5) * 0.25 - 1.0) return k;
  return -1;
}

double brute_entropy(const MessageBatch& b, double eps) {
  double h = 0.0;
  for (std::size_t d = 0; d < b.length(); ++d) {
    std::vector<double> counts(9, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) counts[scan_bin(b.at(i, d))] += 1.0;
    for (double c : counts) {
      const double p = (c + eps) / b.size();
      if (p > 0) h -= p * std::log(p) / std::log(2.0);
    }
  }
  return h;
}

std::vector<double> vec(const MessageBatch& b) { return {b.values().begin(), b.values().end()}; }

MessageBatch column(std::vector<double> v) {
  const std::size_t n = v.size();
  return MessageBatch(n, 1, std::move(v));
}

}  // namespace

TEST(MessageBatch, Validation) {
  EXPECT_THROW(MessageBatch(0, 1), std::invalid_argument);
  EXPECT_THROW(MessageBatch(2, 0), std::invalid_argument);
  EXPECT_THROW(MessageBatch(2, 1, {0.0}), std::invalid_argument);
  EXPECT_THROW(MessageBatch(1, 1, {1.5}), std::out_of_range);
  MessageBatch b(2, 2);
  EXPECT_THROW(b.set(0, 0, -2.0), std::out_of_range);
}

TEST(Histogram, Examples) {
  const Quantizer q;
  auto h = histogram(column({0.1, 0.1, 0.1, 0.1}), 0, q);
  EXPECT_EQ(h.counts, (std::vector<std::int64_t>{0, 0, 0, 0, 4, 0, 0, 0, 0}));
  h = histogram(column({-1, -0.75, 0, 1}), 0, q);
  EXPECT_EQ(h.counts, (std::vector<std::int64_t>{1, 1, 0, 0, 1, 0, 0, 0, 1}));
  h = histogram(column({0.0}), 0, q);
  EXPECT_EQ(h.counts[4], 1);
  EXPECT_EQ(h.total(), 1);
}

TEST(Entropy, Examples) {
  const Quantizer q;
  EXPECT_DOUBLE_EQ(entropy(column({0.1, 0.1, 0.1, 0.1}), q, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(entropy(column({0.1, 0.3, 0.1, 0.3}), q, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(entropy(column({-1, -0.75, 0, 1}), q, 0.0), 2.0);
}

TEST(Entropy, SumsOverDigits) {
  const Quantizer q;
  const MessageBatch b(4, 2, {0.1, -1, 0.3, -0.75, 0.1, 0, 0.3, 1});
  EXPECT_DOUBLE_EQ(entropy(b, q, 0.0), 3.0);
}

TEST(Entropy, MatchesBruteForceAndBounds) {
  const Quantizer q;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 300, len = 1 + rng() % 4;
    std::vector<double> v(n * len);
    for (double& x : v) x = u(rng);
    const MessageBatch b(n, len, v);
    const double h = entropy(b, q, 0.0);
    ASSERT_NEAR(h, brute_entropy(b, 0.0), 1e-12);
    ASSERT_NEAR(entropy(b, q), brute_entropy(b, kDefaultEpsilon), 1e-12);
    ASSERT_GE(h, 0.0);
    ASSERT_LE(h, len * std::log2(std::min<double>(9.0, n)) + 1e-12);
  }
}

TEST(Entropy, PermutationInvariant) {
  const Quantizer q;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> rows(50, std::vector<double>(3));
  for (auto& r : rows)
    for (double& x : r) x = u(rng);
  const auto flat = [&]() {
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return MessageBatch(rows.size(), 3, v);
  };
  const double before = entropy(flat(), q);
  std::shuffle(rows.begin(), rows.end(), rng);
  EXPECT_EQ(entropy(flat(), q), before);
}

TEST(PseudoGradient, Examples) {
  const Quantizer q;
  // Seven values just above g_4 = 0 and three at g_5 = 0.25; query inside (0, 0.25).
  std::vector<double> v(7, 0.05);
  v.insert(v.end(), 3, 0.25);
  const auto hist = histogram(column(v), 0, q, 0.0);
  EXPECT_NEAR(pseudo_gradient_at(0.1, hist, 10, q), -0.1 * std::log2(3.0 / 7.0), 1e-15);
  EXPECT_NEAR(pseudo_gradient_at(0.1, hist, 10, q), 0.12224, 1e-5);
  EXPECT_EQ(pseudo_gradient_at(0.25, hist, 10, q), 0.0);

  const auto even = histogram(column({0.05, 0.05, 0.25, 0.25}), 0, q, 0.0);
  EXPECT_EQ(pseudo_gradient_at(0.1, even, 4, q), 0.0);
}

TEST(PseudoGradient, SignLemma) {
  const Quantizer q;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 100;
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    const MessageBatch b = column(v);
    const auto hist = histogram(b, 0, q);
    const double x = u(rng);
    const int c = q.cell_index(x);
    if (c < 0) continue;
    const auto nu = hist.counts[c], nu1 = hist.counts[c + 1];
    const double g = pseudo_gradient_at(x, hist, n, q);
    ASSERT_EQ(g > 0, nu > nu1);
    ASSERT_EQ(g < 0, nu < nu1);
    ASSERT_LE(std::abs(g), pseudo_gradient_bound(n) + 1e-15);
  }
}

TEST(PseudoGradient, BatchShapeAndGridZeros) {
  const Quantizer q;
  const MessageBatch b(3, 2, {0.0, 0.1, 0.25, 0.2, 0.1, 1.0});
  const auto g = pseudo_gradient(b, q);
  EXPECT_EQ(g.rows, 3u);
  EXPECT_EQ(g.cols, 2u);
  EXPECT_EQ(g.at(0, 0), 0.0);
  EXPECT_EQ(g.at(1, 0), 0.0);
  EXPECT_EQ(g.at(2, 1), 0.0);
}

TEST(PseudoGradient, Bound) {
  EXPECT_NEAR(pseudo_gradient_bound(10, 1e-10), 0.1 * std::log2((10 + 1e-10) / 1e-10), 1e-12);
}

TEST(PseudoStep, GridBatchUnchanged) {
  const Quantizer q;
  const MessageBatch b(4, 2, {-1, 0, 0.25, 0.5, 1, -0.75, 0.25, 0});
  EXPECT_EQ(vec(pseudo_step(b, 0.5, q)), vec(b));
}

TEST(PseudoStep, UniformCountsUnchanged) {
  const Quantizer q;
  // One value per bin interior, mirrored so every adjacent pair is equal.
  std::vector<double> v;
  for (int k = 0; k <= 8; ++k) v.push_back(std::clamp(k * 0.25 - 1.0 + 0.05, -1.0, 1.0));
  const MessageBatch b = column(v);
  EXPECT_EQ(vec(pseudo_step(b, 0.1, q)), vec(b));
}

TEST(PseudoStep, CrossingIntoPopularBinLowersEntropy) {
  const Quantizer q;
  // Bin 4 (around 0) has 5 members, bin 5 (around 0.25) has 2; 0.13 sits in bin 5.
  MessageBatch b = column({0.0, 0.01, -0.02, 0.05, 0.1, 0.13, 0.25});
  const double before = entropy(b, q);
  const double g = pseudo_gradient_at(0.13, histogram(b, 0, q), b.size(), q);
  ASSERT_GT(g, 0.0);
  const double after_x = pseudo_step_single(b, 5, 0, 0.02 / g, q);
  EXPECT_NEAR(after_x, 0.11, 1e-12);
  EXPECT_EQ(q.bin_index(after_x), 4);
  EXPECT_LT(entropy(b, q), before);
  EXPECT_NEAR(brute_entropy(b, kDefaultEpsilon), entropy(b, q), 1e-12);
}

TEST(PseudoStep, ClampsAndRejectsBadEta) {
  const Quantizer q;
  MessageBatch b = column({0.95, 0.95, 0.95, 0.9});
  EXPECT_THROW(pseudo_step(b, 0.0, q), std::invalid_argument);
  pseudo_step_single(b, 3, 0, 1e6, q);
  EXPECT_EQ(b.at(3, 0), 1.0);
}

TEST(PseudoStep, SingleLeavesOthersAlone) {
  const Quantizer q;
  MessageBatch b(3, 2, {0.05, 0.1, 0.06, 0.2, 0.3, 0.4});
  const auto before = vec(b);
  pseudo_step_single(b, 1, 1, 0.5, q);
  for (std::size_t k = 0; k < before.size(); ++k)
    if (k != 3) EXPECT_EQ(b.values()[k], before[k]);
}

TEST(Lemma3, Example) {
  // 0.7 log 0.7 + 0.3 log 0.3 - 0.8 log 0.8 - 0.2 log 0.2 in bits.
  const auto f = [](double p) { return p * std::log(p) / std::log(2.0); };
  const double oracle = f(0.7) + f(0.3) - f(0.8) - f(0.2);
  EXPECT_NEAR(lemma3_delta(7, 3, 10), oracle, 1e-12);
  EXPECT_NEAR(lemma3_delta(7, 3, 10), -0.159363, 1e-6);
  EXPECT_NEAR(lemma3_delta(3, 7, 10), oracle, 1e-12);
}

TEST(Lemma3, Preconditions) {
  EXPECT_THROW(lemma3_delta(5, 5, 10), std::invalid_argument);
  EXPECT_THROW(lemma3_delta(1, 1, 2), std::invalid_argument);
  EXPECT_THROW(lemma3_delta(3, 0, 5), std::invalid_argument);
  EXPECT_THROW(lemma3_delta(7, 3, 9), std::invalid_argument);
}

TEST(Lemma3, AlwaysNegative) {
  for (int n = 2; n <= 60; ++n)
    for (int a = 1; a < n; ++a)
      for (int b = 1; a + b <= n; ++b)
        if (a != b) ASSERT_LT(lemma3_delta(a, b, n), 0.0) << a << ' ' << b << ' ' << n;
}
