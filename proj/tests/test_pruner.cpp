// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "prunekit/error.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/pruner.hpp"
#include "test_support.hpp"

namespace prunekit {
namespace {

PruneOptions options_for(CriterionTag tag, double ratio, double holdout = 0.2) {
  PruneOptions o;
  o.criterion = Criterion::make(tag);
  o.sparsity = SparsitySpec::unstructured(ratio);
  o.holdout_fraction = holdout;
  return o;
}

// Direct evaluation of the per-element squared output difference.
double mse_oracle(const WeightLayer& a, const WeightLayer& b, const MatrixF& x) {
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t m = 0; m < a.weights.cols(); ++m) {
      double ya = a.bias ? (*a.bias)[m] : 0.0, yb = b.bias ? (*b.bias)[m] : 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        ya += static_cast<double>(x(r, j)) * a.weights(j, m);
        yb += static_cast<double>(x(r, j)) * b.weights(j, m);
      }
      total += (ya - yb) * (ya - yb);
    }
  return total / static_cast<double>(x.rows() * a.weights.cols());
}

TEST(Pruner, ZeroSparsityIsIdentity) {
  const auto toy = gen_toy_mlp(3, ToyMlpConfig{});
  const auto result = prune_container(toy.model, toy.calib, options_for(CriterionTag::Stade, 0.0));
  for (const auto& name : toy.model.layer_names()) {
    const auto before = toy.model.layer(name), after = result.model.layer(name);
    EXPECT_EQ(std::memcmp(before.weights.data().data(), after.weights.data().data(), before.weights.size() * 4), 0);
    ASSERT_TRUE(after.bias);
    EXPECT_EQ(std::memcmp(before.bias->data(), after.bias->data(), before.bias->size() * 4), 0);
    EXPECT_EQ(result.report.find(name)->reconstruction_mse, 0.0);
    EXPECT_EQ(result.report.find(name)->achieved_sparsity, 0.0);
  }
}

TEST(Pruner, StadeWResolvesPerLayerFlag) {
  ToyMlpConfig cfg;
  cfg.norm = NormKind::LayerNorm;
  const auto toy = gen_toy_mlp(5, cfg);
  const auto result = prune_container(toy.model, toy.calib, options_for(CriterionTag::StadeW, 0.5));
  EXPECT_EQ(result.report.find("fc1")->criterion, CriterionTag::Wanda);
  EXPECT_EQ(result.report.find("fc2")->criterion, CriterionTag::Stade);
  EXPECT_FALSE(result.report.find("fc1")->bias_update);
  EXPECT_TRUE(result.report.find("fc2")->bias_update);
  // Centered layer mask matches pure Wanda.
  const auto wanda = prune_container(toy.model, toy.calib, options_for(CriterionTag::Wanda, 0.5));
  EXPECT_EQ(get_mask(result.model, "fc1"), get_mask(wanda.model, "fc1"));
}

TEST(Pruner, AchievedSparsityIsFloor) {
  std::mt19937_64 rng(1);
  WeightLayer layer{testing::random_matrix(rng, 7, 3), std::nullopt, false};
  const auto calib = testing::random_matrix(rng, 40, 7, 0.0, 2.0);
  const auto out = prune_layer("fc", layer, calib, options_for(CriterionTag::Stade, 0.5));
  EXPECT_DOUBLE_EQ(out.report.achieved_sparsity, 3.0 / 7.0);
  EXPECT_EQ(out.report.stats_rows, 32u);
  EXPECT_EQ(out.report.mse_rows, 8u);
  EXPECT_TRUE(out.report.mse_on_holdout);
}

TEST(Pruner, MissingCalibration) {
  const auto toy = gen_toy_mlp(1, ToyMlpConfig{});
  TensorContainer partial;
  partial.put_matrix("fc1.calib", toy.calib.matrix("fc1.calib"));
  try {
    prune_container(toy.model, partial, options_for(CriterionTag::Wanda, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingCalibration);
    EXPECT_NE(std::string(e.what()).find("fc2"), std::string::npos);
  }
}

TEST(Pruner, ClassifyCentered) {
  ColumnStats s = stats_init(1);
  s.n = 100;
  s.mean = {10.0};
  s.var = {1.0};
  EXPECT_FALSE(classify_centered(s, 0.1));
  s.mean = {0.05};
  EXPECT_TRUE(classify_centered(s, 0.1));
  s.n = 1;
  EXPECT_THROW(classify_centered(s, 0.1), Error);
}

TEST(Pruner, ReconstructionMse) {
  std::mt19937_64 rng(2);
  const auto x = testing::random_matrix(rng, 30, 5, -2.0, 3.0);
  WeightLayer a{testing::random_matrix(rng, 5, 4), std::vector<float>{1, 2, 3, 4}, false};
  EXPECT_EQ(reconstruction_mse(a, a, x), 0.0);
  auto b = apply_mask(a, PruneMask(5, 4, {1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1}));
  EXPECT_NEAR(reconstruction_mse(a, b, x), mse_oracle(a, b, x), 1e-9);
  EXPECT_THROW(reconstruction_mse(a, b, MatrixF(3, 6)), Error);
}

TEST(Pruner, ConstantFeaturePruneIsExact) {
  std::mt19937_64 rng(3);
  auto x = testing::random_matrix(rng, 50, 3, -1.0, 1.0);
  for (std::size_t r = 0; r < x.rows(); ++r) x(r, 1) = 4.0f;
  WeightLayer layer{MatrixF(3, 1, {0.9f, 0.01f, 0.8f}), std::vector<float>{0.5f}, false};
  auto o = options_for(CriterionTag::Stade, 0.34);
  const auto out = prune_layer("fc", layer, x, o);
  EXPECT_EQ(out.mask(1, 0), 1);
  EXPECT_LE(out.report.reconstruction_mse, 1e-12);
}

TEST(Pruner, SinglePruneMseIsPopulationVarianceTimesWeight) {
  // With bias compensation, pruning feature j gives holdout error
  // (sample var around the stats mean) W_j^2 on the held-out rows.
  std::mt19937_64 rng(4);
  const auto x = testing::gaussian_columns(rng, 200, {3.0, -2.0, 5.0, 0.0}, {0.2, 1.0, 2.0, 0.5});
  WeightLayer layer{MatrixF(4, 1, {0.5f, 0.9f, -0.7f, 1.1f}), std::vector<float>{0.0f}, false};
  const auto out = prune_layer("fc", layer, x, options_for(CriterionTag::Stade, 0.25, 0.5));
  ASSERT_EQ(out.mask(0, 0), 1);
  const auto stats_part = testing::two_pass(x.slice_rows(0, 100));
  double expected = 0.0;
  for (std::size_t r = 100; r < 200; ++r) {
    const double d = (x(r, 0) - stats_part.mean[0]) * 0.5;
    expected += d * d;
  }
  expected /= 100.0;
  EXPECT_NEAR(out.report.reconstruction_mse, expected, 1e-6);
}

TEST(Pruner, StadeBeatsWandaOnUncenteredLayer) {
  std::mt19937_64 rng(5);
  std::vector<double> mu(24), sigma(24);
  std::uniform_real_distribution<double> um(-5, 5), us(0.1, 2);
  for (std::size_t j = 0; j < 24; ++j) {
    mu[j] = um(rng);
    sigma[j] = us(rng);
  }
  const auto x = testing::gaussian_columns(rng, 500, mu, sigma);
  WeightLayer layer{testing::random_matrix(rng, 24, 6), std::vector<float>(6, 0.0f), false};
  const auto stade = prune_layer("fc", layer, x, options_for(CriterionTag::Stade, 0.5, 0.0));
  for (auto tag : {CriterionTag::Wanda, CriterionTag::Magnitude}) {
    auto o = options_for(tag, 0.5, 0.0);
    o.bias_update = true;
    EXPECT_LE(stade.report.reconstruction_mse, prune_layer("fc", layer, x, o).report.reconstruction_mse + 1e-12);
  }
}

TEST(Pruner, LayersAreIndependentOfOrderAndThreads) {
  const auto toy = gen_toy_mlp(9, ToyMlpConfig{});
  auto o = options_for(CriterionTag::Stade, 0.5);
  const auto serial = serialize_container(prune_container(toy.model, toy.calib, o).model);
  o.threads = 3;
  EXPECT_EQ(serialize_container(prune_container(toy.model, toy.calib, o).model), serial);

  TensorContainer only_fc2;
  only_fc2.add_layer("fc2", toy.model.layer("fc2"));
  const auto alone = prune_container(only_fc2, toy.calib, options_for(CriterionTag::Stade, 0.5)).model;
  const auto both = prune_container(toy.model, toy.calib, options_for(CriterionTag::Stade, 0.5)).model;
  EXPECT_EQ(alone.layer("fc2").weights, both.layer("fc2").weights);
  EXPECT_EQ(get_mask(alone, "fc2"), get_mask(both, "fc2"));
}

TEST(Pruner, StructuredSparsityAndReportJson) {
  const auto toy = gen_toy_mlp(2, ToyMlpConfig{});
  auto o = options_for(CriterionTag::Wanda, 0.5);
  o.sparsity = SparsitySpec::structured(2, 4);
  const auto result = prune_container(toy.model, toy.calib, o);
  EXPECT_TRUE(validate_mask(get_mask(result.model, "fc1"), o.sparsity));
  const auto j = result.report.to_json();
  ASSERT_EQ(j.at("layers").size(), 2u);
  EXPECT_EQ(j["layers"][0]["sparsity"], "2:4");
  EXPECT_DOUBLE_EQ(j["layers"][0]["achieved_sparsity"].get<double>(), 0.5);
}

}  // namespace
}  // namespace prunekit
