// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "prunekit/compensator.hpp"
#include "prunekit/error.hpp"
#include "prunekit/pruner.hpp"
#include "test_support.hpp"

namespace prunekit {
namespace {

ColumnStats stats_of(const MatrixF& rows) {
  ColumnStats s = stats_init(rows.cols());
  stats_update(s, rows);
  return s;
}

// Empirical objective for one output column as a function of the new bias,
// evaluated directly on the data.
double column_objective(const MatrixF& x, const WeightLayer& layer, const PruneMask& mask, std::size_t col,
                        double new_bias) {
  double total = 0.0;
  const double b = layer.bias ? (*layer.bias)[col] : 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double d = b - new_bias;
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (mask(j, col)) d += static_cast<double>(x(r, j)) * layer.weights(j, col);
    total += d * d;
  }
  return total / static_cast<double>(x.rows());
}

TEST(Compensator, HandExample) {
  // Features {1,-1} (mean 0) and {10,10} (mean 10); W = [3, 0.5], B = 1; prune j = 1.
  const MatrixF x(2, 2, {1, 10, -1, 10});
  WeightLayer layer{MatrixF(2, 1, {3, 0.5f}), std::vector<float>{1.0f}, false};
  const PruneMask mask(2, 1, {0, 1});
  const auto out = bias_update(layer, mask, stats_of(x), true);
  ASSERT_TRUE(out.bias);
  EXPECT_FLOAT_EQ((*out.bias)[0], 6.0f);
  EXPECT_EQ(out.weights, layer.weights);
  EXPECT_DOUBLE_EQ(bias_delta_norm(layer, out), 5.0);
  // The updated bias zeroes the error on the constant feature.
  EXPECT_EQ(reconstruction_mse(layer, apply_mask(out, mask), x), 0.0);
}

TEST(Compensator, CenteredInputLeavesBias) {
  const MatrixF x(4, 2, {1, 2, -1, -2, 3, 0.5f, -3, -0.5f});
  WeightLayer layer{MatrixF(2, 2, {1, 2, 3, 4}), std::vector<float>{0.5f, -0.5f}, true};
  const auto out = bias_update(layer, PruneMask(2, 2, {1, 0, 1, 1}), stats_of(x), true);
  EXPECT_EQ(out.bias, layer.bias);
  EXPECT_EQ(bias_delta_norm(layer, out), 0.0);
}

TEST(Compensator, DisabledIsBitIdentical) {
  std::mt19937_64 rng(2);
  const auto x = testing::random_matrix(rng, 10, 4, 1.0, 5.0);
  WeightLayer layer{testing::random_matrix(rng, 4, 3), std::vector<float>{0.1f, 0.2f, 0.3f}, false};
  const auto out = bias_update(layer, PruneMask(4, 3, 1), stats_of(x), false);
  EXPECT_EQ(std::memcmp(out.bias->data(), layer.bias->data(), 12), 0);
  WeightLayer no_bias{layer.weights, std::nullopt, false};
  EXPECT_FALSE(bias_update(no_bias, PruneMask(4, 3, 1), stats_of(x), false).bias.has_value());
}

TEST(Compensator, MissingBiasMaterializedOnlyWhenNeeded) {
  const MatrixF x(2, 2, {1, 4, 3, 4});
  WeightLayer layer{MatrixF(2, 1, {1, 2}), std::nullopt, false};
  EXPECT_FALSE(bias_update(layer, PruneMask(2, 1, {0, 0}), stats_of(x), true).bias.has_value());
  const auto out = bias_update(layer, PruneMask(2, 1, {0, 1}), stats_of(x), true);
  ASSERT_TRUE(out.bias);
  EXPECT_FLOAT_EQ((*out.bias)[0], 8.0f);
}

TEST(Compensator, Errors) {
  WeightLayer layer{MatrixF(2, 1, {1, 2}), std::nullopt, false};
  EXPECT_THROW(bias_update(layer, PruneMask(3, 1), stats_init(2), true), Error);
  EXPECT_THROW(bias_update(layer, PruneMask(2, 1), stats_init(3), true), Error);
  try {
    bias_update(layer, PruneMask(2, 1), stats_init(2), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyStats);
  }
  WeightLayer other{MatrixF(2, 2), std::nullopt, false};
  EXPECT_THROW(bias_delta_norm(layer, other), Error);
}

TEST(Compensator, PropertySinglePruneBiasIsGridOptimal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mu(-5, 5), sigma(0.1, 2);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> mus(5), sigmas(5);
    for (std::size_t j = 0; j < 5; ++j) {
      mus[j] = mu(rng);
      sigmas[j] = sigma(rng);
    }
    const auto x = testing::gaussian_columns(rng, 32, mus, sigmas);
    WeightLayer layer{testing::random_matrix(rng, 5, 1), std::vector<float>{0.3f}, false};
    PruneMask mask(5, 1, 0);
    mask(pick(rng), 0) = 1;
    const auto out = bias_update(layer, mask, stats_of(x), true);
    const double closed = (*out.bias)[0];
    const double at_closed = column_objective(x, layer, mask, 0, closed);
    // Grid/golden-section style check: nothing on a fine bracket beats the closed form.
    double best = at_closed;
    for (double b = closed - 1.0; b <= closed + 1.0; b += 1e-3) best = std::min(best, column_objective(x, layer, mask, 0, b));
    EXPECT_LE(at_closed - best, 1e-7);
  }
}

TEST(Compensator, MultiPruneIsMeanPreserving) {
  std::mt19937_64 rng(4);
  const auto x = testing::random_matrix(rng, 50, 6, -1.0, 4.0);
  WeightLayer layer{testing::random_matrix(rng, 6, 3), std::vector<float>{0.0f, 1.0f, -1.0f}, false};
  PruneMask mask(6, 3, 0);
  mask(0, 0) = mask(3, 0) = mask(1, 1) = mask(5, 2) = mask(2, 2) = 1;
  const auto pruned = apply_mask(bias_update(layer, mask, stats_of(x), true), mask);
  // Mean output difference is zero in every column.
  for (std::size_t m = 0; m < 3; ++m) {
    double mean_diff = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double d = (*layer.bias)[m] - (*pruned.bias)[m];
      for (std::size_t j = 0; j < 6; ++j) d += static_cast<double>(x(r, j)) * (layer.weights(j, m) - pruned.weights(j, m));
      mean_diff += d / static_cast<double>(x.rows());
    }
    EXPECT_NEAR(mean_diff, 0.0, 1e-6);
  }
}

}  // namespace
}  // namespace prunekit
