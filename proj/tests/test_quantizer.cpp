#include <gtest/gtest.h>

#include <random>

#include "disem/quantizer.hpp"

using disem::Quantizer;

TEST(Quantizer, Levels) {
  const Quantizer q(0.25);
  EXPECT_EQ(q.levels(), 8);
  EXPECT_EQ(q.num_bins(), 9);
  EXPECT_DOUBLE_EQ(q.grid_point(0), -1.0);
  EXPECT_DOUBLE_EQ(q.grid_point(8), 1.0);
  EXPECT_THROW(Quantizer(0.3), std::invalid_argument);
  EXPECT_THROW(Quantizer(0.0), std::invalid_argument);
}

TEST(Quantizer, Examples) {
  const Quantizer q;
  EXPECT_EQ(q.quantize(0.0), 0.0);
  EXPECT_EQ(q.quantize(0.13), 0.25);
  EXPECT_EQ(q.quantize(-1.0), -1.0);
  EXPECT_EQ(q.bin_index(0.13), 5);
  EXPECT_EQ(q.bin_index(-1.0), 0);
  EXPECT_EQ(q.bin_index(0.99), 8);
  EXPECT_EQ(q.bin_index(1.0), 8);
}

TEST(Quantizer, HalfOpenEdges) {
  const Quantizer q;
  EXPECT_EQ(q.bin_index(0.125), 5);  // lower edge belongs to the bin
  EXPECT_EQ(q.bin_index(std::nextafter(0.125, 0.0)), 4);
  EXPECT_EQ(q.bin_index(-0.875), 1);
  EXPECT_EQ(q.bin_index(std::nextafter(-0.875, -1.0)), 0);
  EXPECT_EQ(q.bin_index(0.875), 8);
}

TEST(Quantizer, OutOfRange) {
  const Quantizer q;
  EXPECT_THROW(q.bin_index(1.0000001), std::out_of_range);
  EXPECT_THROW(q.bin_index(-1.5), std::out_of_range);
  EXPECT_THROW(q.quantize(std::nan("")), std::out_of_range);
}

TEST(Quantizer, SignWeightExamples) {
  const Quantizer q;
  EXPECT_EQ(q.sign_weight(0.2, 5), 1);
  EXPECT_EQ(q.sign_weight(0.2, 4), -1);
  EXPECT_EQ(q.sign_weight(0.25, 5), 0);
  EXPECT_EQ(q.sign_weight(0.2, 6), 0);
  EXPECT_EQ(q.cell_index(0.2), 4);
  EXPECT_EQ(q.cell_index(0.25), -1);
}

TEST(Quantizer, TwoAdjacentSignWeights) {
  const Quantizer q;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 100000; ++n) {
    const double x = u(rng);
    if (q.on_grid(x)) continue;
    std::vector<int> nonzero;
    for (int k = 0; k <= q.levels(); ++k)
      if (q.sign_weight(x, k) != 0) nonzero.push_back(k);
    ASSERT_EQ(nonzero.size(), 2u) << x;
    ASSERT_EQ(nonzero[1], nonzero[0] + 1);
    ASSERT_EQ(q.sign_weight(x, nonzero[0]), -1);
    ASSERT_EQ(q.sign_weight(x, nonzero[1]), 1);
    ASSERT_LT(q.grid_point(nonzero[0]), x);
    ASSERT_GT(q.grid_point(nonzero[1]), x);
  }
}

TEST(Quantizer, TilingIdempotenceAndError) {
  const Quantizer q;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 1000000; ++n) {
    const double x = u(rng);
    int claims = 0;
    for (int k = 0; k <= q.levels(); ++k)
      if ((x >= q.lower_edge(k) && x < q.upper_edge(k)) || (k == q.levels() && x == 1.0)) ++claims;
    ASSERT_EQ(claims, 1) << x;
    const double y = q.quantize(x);
    ASSERT_EQ(q.quantize(y), y);
    ASSERT_LE(std::abs(y - x), q.delta() / 2);
  }
}

TEST(Quantizer, OtherStepSizes) {
  const Quantizer q(0.5);
  EXPECT_EQ(q.levels(), 4);
  EXPECT_EQ(q.quantize(0.3), 0.5);
  EXPECT_EQ(q.quantize(-0.76), -1.0);
}
