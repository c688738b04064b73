// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "prunekit/error.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/pruner.hpp"
#include "test_support.hpp"

namespace prunekit {
namespace {

ColumnStats stats_of(const MatrixF& rows) {
  ColumnStats s = stats_init(rows.cols());
  stats_update(s, rows);
  return s;
}

TEST(Harness, LayerNormInputIsCentered) {
  ToyMlpConfig cfg;
  cfg.norm = NormKind::LayerNorm;
  const auto toy = gen_toy_mlp(4, cfg);
  const auto x = toy.calib.matrix("fc1.calib");
  EXPECT_EQ(x.rows(), 1000u);
  for (double mu : testing::two_pass(x.slice_rows(0, 800)).mean) EXPECT_LE(std::abs(mu), 1e-7);
  EXPECT_TRUE(classify_centered(stats_of(x), 0.1));
  EXPECT_TRUE(toy.model.layer("fc1").centered);
  EXPECT_FALSE(toy.model.layer("fc2").centered);
  EXPECT_FALSE(classify_centered(stats_of(toy.calib.matrix("fc2.calib")), 0.1));
}

TEST(Harness, RmsNormAndNoneAreUncentered) {
  for (auto norm : {NormKind::RmsNorm, NormKind::None}) {
    ToyMlpConfig cfg;
    cfg.norm = norm;
    const auto toy = gen_toy_mlp(4, cfg);
    EXPECT_FALSE(classify_centered(stats_of(toy.calib.matrix("fc1.calib")), 0.1)) << to_string(norm);
    EXPECT_FALSE(toy.model.layer("fc1").centered);
  }
}

TEST(Harness, CalibrationMatchesForwardPass) {
  const auto toy = gen_toy_mlp(6, ToyMlpConfig{8, 12, 4, NormKind::None, 50});
  const auto x = toy.calib.matrix("fc1.calib");
  const auto hidden = toy.calib.matrix("fc2.calib");
  const auto fc1 = toy.model.layer("fc1");
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t h = 0; h < 12; ++h) {
      double y = (*fc1.bias)[h];
      for (std::size_t j = 0; j < 8; ++j) y += static_cast<double>(x(r, j)) * fc1.weights(j, h);
      EXPECT_NEAR(hidden(r, h), std::max(y, 0.0), 1e-4 * (1.0 + std::abs(y)));
    }
  const auto out = forward_mlp(toy.model, x);
  EXPECT_EQ(out.rows(), 50u);
  EXPECT_EQ(out.cols(), 4u);
}

TEST(Harness, Reproducible) {
  const ToyMlpConfig cfg{8, 8, 4, NormKind::RmsNorm, 100};
  EXPECT_EQ(serialize_container(gen_toy_mlp(2, cfg).model), serialize_container(gen_toy_mlp(2, cfg).model));
  EXPECT_EQ(serialize_container(gen_toy_mlp(2, cfg).calib), serialize_container(gen_toy_mlp(2, cfg).calib));
  EXPECT_NE(serialize_container(gen_toy_mlp(3, cfg).model), serialize_container(gen_toy_mlp(2, cfg).model));
}

TEST(Harness, ComparisonTableIsComplete) {
  ComparisonConfig cfg;
  cfg.model = {8, 16, 4, NormKind::None, 200};
  cfg.criteria = {Criterion::make(CriterionTag::Magnitude), Criterion::make(CriterionTag::Wanda),
                  Criterion::make(CriterionTag::Stade)};
  cfg.seeds = 4;
  const auto table = run_comparison(cfg);
  EXPECT_EQ(table.cells.size(), 6u);
  for (const auto& c : table.cells) {
    ASSERT_EQ(c.mse.size(), 4u);
    for (double v : c.mse) EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_EQ(table.end_to_end.size(), 3u);
  const double f = table.fraction_at_most(CriterionTag::Stade, CriterionTag::Wanda, "fc2");
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
  EXPECT_EQ(table.fraction_at_most(CriterionTag::Wanda, CriterionTag::Wanda, "fc1"), 1.0);
  EXPECT_NE(table.to_text().find("stade"), std::string::npos);
  EXPECT_EQ(table.to_json()["cells"].size(), 6u);

  auto threaded = cfg;
  threaded.threads = 3;
  EXPECT_EQ(run_comparison(threaded).to_json(), table.to_json());

  cfg.criteria.resize(1);
  EXPECT_THROW(run_comparison(cfg), Error);
}

TEST(Harness, ParseNorm) {
  EXPECT_EQ(parse_norm("layernorm"), NormKind::LayerNorm);
  EXPECT_EQ(parse_norm("rmsnorm"), NormKind::RmsNorm);
  EXPECT_EQ(parse_norm("none"), NormKind::None);
  EXPECT_FALSE(parse_norm("batchnorm"));
}

}  // namespace
}  // namespace prunekit
