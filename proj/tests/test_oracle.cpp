// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "prunekit/error.hpp"
#include "prunekit/oracle.hpp"
#include "prunekit/pruner.hpp"
#include "test_support.hpp"

namespace prunekit {
namespace {

TEST(Oracle, HandFixture) {
  // Feature 0 = {1, -1}, feature 1 = {10, 10}; W = [3, 0.5], B = 1.
  const MatrixF x(2, 2, {1, 10, -1, 10});
  const std::vector<float> w{3.0f, 0.5f};
  const auto with_bias = brute_force_single_prune(w, 1.0, x, true);
  EXPECT_EQ(with_bias.index, 1u);
  EXPECT_EQ(with_bias.objective, 0.0);
  EXPECT_DOUBLE_EQ(with_bias.bias, 6.0);
  const auto no_bias = brute_force_single_prune(w, 1.0, x, false);
  // 9 for j = 0 versus 25 for j = 1.
  EXPECT_EQ(no_bias.index, 0u);
  EXPECT_DOUBLE_EQ(no_bias.objective, 9.0);
  EXPECT_DOUBLE_EQ(no_bias.bias, 1.0);
}

TEST(Oracle, SingleFeature) {
  const MatrixF x(3, 1, {1, 2, 3});
  const std::vector<float> w{2.0f};
  const auto r = brute_force_single_prune(w, 0.0, x, true);
  EXPECT_EQ(r.index, 0u);
  EXPECT_DOUBLE_EQ(r.bias, 4.0);
  EXPECT_NEAR(r.objective, 8.0 / 3.0, 1e-12);
}

TEST(Oracle, TooLarge) {
  const std::vector<float> w(65, 1.0f);
  try {
    brute_force_single_prune(w, 0.0, MatrixF(4, 65), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InstanceTooLarge);
  }
  const std::vector<float> w2(2, 1.0f);
  EXPECT_THROW(brute_force_single_prune(w2, 0.0, MatrixF(4097, 2), true), Error);
  EXPECT_THROW(brute_force_single_prune(w2, 0.0, MatrixF(4, 3), true), Error);
}

TEST(Oracle, ObjectiveAgreesWithReconstructionMse) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = random_instance(seed, InstanceKind::Uncentered);
    const std::size_t m = inst.weights.size();
    const auto best = brute_force_single_prune(inst.weights, inst.bias, inst.calib, true);
    WeightLayer dense{MatrixF(m, 1, inst.weights), std::vector<float>{static_cast<float>(inst.bias)}, false};
    WeightLayer sparse = dense;
    sparse.weights(best.index, 0) = 0.0f;
    (*sparse.bias)[0] = static_cast<float>(best.bias);
    // Float storage of the bias perturbs the objective by at most ~|bias| * 2^-23 squared terms.
    EXPECT_NEAR(reconstruction_mse(dense, sparse, inst.calib), best.objective, 1e-9 + 1e-6 * best.objective);
    EXPECT_NEAR(single_prune_objective(inst.weights, inst.bias, inst.calib, best.index, best.bias), best.objective,
                1e-12);
    // Closed-form refit equals bias + mean_j W_j.
    const auto tp = testing::two_pass(inst.calib);
    EXPECT_NEAR(best.bias, inst.bias + tp.mean[best.index] * inst.weights[best.index], 1e-9);
  }
}

TEST(Oracle, RandomInstancesRespectKinds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto u = random_instance(seed, InstanceKind::Uncentered);
    EXPECT_GE(u.calib.rows(), 8u);
    EXPECT_LE(u.calib.rows(), 64u);
    EXPECT_GE(u.weights.size(), 2u);
    EXPECT_LE(u.weights.size(), 16u);
    EXPECT_EQ(u.calib.cols(), u.weights.size());

    const auto c = random_instance(seed, InstanceKind::Centered);
    EXPECT_TRUE(c.centered);
    for (double mu : testing::two_pass(c.calib).mean) EXPECT_EQ(mu, 0.0);

    const auto o = random_instance(seed, InstanceKind::OffsetFeature);
    const auto tp = testing::two_pass(o.calib);
    EXPECT_GE(std::abs(tp.mean[o.offset_feature]), 2.9);
    EXPECT_LE(std::sqrt(tp.var[o.offset_feature]), 0.1);
  }
  EXPECT_EQ(random_instance(11, InstanceKind::Uncentered).calib, random_instance(11, InstanceKind::Uncentered).calib);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Oracle, CenteredBiasRefitIsUnchanged) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto inst = random_instance(seed, InstanceKind::Centered);
    const auto r = brute_force_single_prune(inst.weights, inst.bias, inst.calib, true);
    EXPECT_NEAR(r.bias, inst.bias, 1e-9);
  }
}

TEST(Oracle, SmallVerifyRuns) {
  OptimalityOptions o;
  o.trials = 100;
  o.seed = 3;
  for (auto tag : {CriterionTag::Stade, CriterionTag::Wanda, CriterionTag::StadeStar}) {
    const auto r = check_criterion_optimality(tag, o);
    EXPECT_TRUE(r.all_match()) << to_string(tag) << " " << r.to_json(false).dump();
  }
  o.data = InstanceKind::OffsetFeature;
  EXPECT_GT(check_criterion_optimality(CriterionTag::Wanda, o).mismatches, 0u);
  EXPECT_TRUE(check_criterion_optimality(CriterionTag::Stade, o).all_match());
}

TEST(Oracle, CounterexampleIsReproducible) {
  OptimalityOptions o;
  o.trials = 200;
  const auto r = check_criterion_optimality(CriterionTag::Magnitude, o);
  ASSERT_TRUE(r.first_counterexample);
  const auto& ce = *r.first_counterexample;
  const auto inst = random_instance(ce.seed, r.data);
  EXPECT_EQ(inst.calib, ce.instance.calib);
  EXPECT_EQ(criterion_choice(CriterionTag::Magnitude, inst), ce.criterion_index);
  EXPECT_EQ(brute_force_single_prune(inst.weights, inst.bias, inst.calib, r.allow_bias).index, ce.oracle_index);
  EXPECT_GE(ce.criterion_objective, ce.oracle_objective);
  o.threads = 4;
  EXPECT_EQ(check_criterion_optimality(CriterionTag::Magnitude, o).to_json().dump(), r.to_json().dump());
}

}  // namespace
}  // namespace prunekit
