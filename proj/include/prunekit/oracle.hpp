// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive single-weight pruning oracle. For one output column it tries
// every input j, zeroes W_j, and measures the empirical squared output error
// over the calibration rows directly, optionally re-fitting the bias. The
// criteria are then checked against it on random small instances.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prunekit/calib_stats.hpp"
#include "prunekit/criteria.hpp"

namespace prunekit {

inline constexpr std::size_t kOracleMaxFeatures = 64;
inline constexpr std::size_t kOracleMaxRows = 4096;

struct SinglePrune {
  std::size_t index = 0;
  double bias = 0.0;
  double objective = 0.0;
};

/// mean_i ((B + x_i . W) - (b + x_i . W'))^2 with W'_j = 0, evaluated literally.
double single_prune_objective(std::span<const float> weights, double bias, const CalibrationBatch& calib,
                              std::size_t pruned, double new_bias);

/// Enumerates every j. With `allow_bias` the bias is re-fit in closed form
/// (b = B + mean_j * W_j over the rows); otherwise b = B. Ties go to the lower
/// index. Throws InstanceTooLarge beyond 64 features or 4096 rows.
SinglePrune brute_force_single_prune(std::span<const float> weights, double bias, const CalibrationBatch& calib,
                                     bool allow_bias);

enum class InstanceKind { Uncentered, Centered, OffsetFeature };

std::string_view to_string(InstanceKind kind) noexcept;
std::optional<InstanceKind> parse_instance_kind(std::string_view name) noexcept;

/// One random single-column pruning problem.
struct Instance {
  MatrixF calib;                // N x M
  std::vector<float> weights;   // M
  double bias = 0.0;
  bool centered = false;
  std::size_t offset_feature = 0;  // OffsetFeature only

  nlohmann::json to_json() const;
};

/// Features x_j = mu_j + sigma_j z, mu_j ~ U(-5, 5), sigma_j ~ U(0.1, 2),
/// N in [8, 64], M in [2, 16], W ~ U(-1, 1). Centered instances store each
/// row next to its negation so every even prefix has an exactly zero mean.
/// OffsetFeature replaces one feature with |mu| in [3, 5], sigma in [0.01, 0.05].
Instance random_instance(std::uint64_t seed, InstanceKind kind);

/// Per-trial seeds derived from a master seed; independent of thread count.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Index the criterion would prune from the instance's single column.
std::size_t criterion_choice(CriterionTag tag, const Instance& inst);

struct OptimalityOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 7;
  std::optional<InstanceKind> data;  // unset: per-criterion default
  std::optional<bool> allow_bias;    // unset: per-criterion default
  unsigned threads = 1;
};

struct Counterexample {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::size_t criterion_index = 0;
  std::size_t oracle_index = 0;
  double criterion_objective = 0.0;
  double oracle_objective = 0.0;
  Instance instance;
};

struct OptimalityReport {
  CriterionTag criterion = CriterionTag::Stade;
  InstanceKind data = InstanceKind::Uncentered;
  bool allow_bias = true;
  std::size_t trials = 0;
  std::size_t matches = 0;
  std::size_t mismatches = 0;
  std::optional<Counterexample> first_counterexample;

  bool all_match() const noexcept { return mismatches == 0 && matches == trials; }
  nlohmann::json to_json(bool with_instance = true) const;
};

InstanceKind default_instance_kind(CriterionTag tag) noexcept;
bool default_allow_bias(CriterionTag tag) noexcept;

OptimalityReport check_criterion_optimality(CriterionTag tag, const OptimalityOptions& options);

}  // namespace prunekit
