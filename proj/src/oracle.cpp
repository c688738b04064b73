// SPDX-License-Identifier: Apache-2.0
#include "prunekit/oracle.hpp"

#include <cmath>
#include <random>

#include "prunekit/error.hpp"
#include "prunekit/mask_builder.hpp"
#include "prunekit/parallel.hpp"

namespace prunekit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void check_instance(std::span<const float> weights, const CalibrationBatch& calib) {
  if (weights.size() != calib.cols())
    throw Error(ErrorCode::DimensionMismatch, "weight column and calibration width differ");
  if (weights.empty()) throw Error(ErrorCode::InvalidDimension, "empty weight column");
  if (weights.size() > kOracleMaxFeatures || calib.rows() > kOracleMaxRows)
    throw Error(ErrorCode::InstanceTooLarge, std::to_string(weights.size()) + " features x " +
                                                 std::to_string(calib.rows()) + " rows exceeds 64 x 4096");
  if (calib.rows() == 0) throw Error(ErrorCode::EmptyStats, "oracle needs calibration rows");
}

}  // namespace

std::string_view to_string(InstanceKind kind) noexcept {
  switch (kind) {
    case InstanceKind::Uncentered: return "uncentered";
    case InstanceKind::Centered: return "centered";
    case InstanceKind::OffsetFeature: return "offset";
  }
  return "?";
}

std::optional<InstanceKind> parse_instance_kind(std::string_view name) noexcept {
  for (auto k : {InstanceKind::Uncentered, InstanceKind::Centered, InstanceKind::OffsetFeature})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

double single_prune_objective(std::span<const float> weights, double bias, const CalibrationBatch& calib,
                              std::size_t pruned, double new_bias) {
  double total = 0.0;
  for (std::size_t r = 0; r < calib.rows(); ++r) {
    const auto x = calib.row(r);
    double dense = bias;
    double sparse = new_bias;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double term = static_cast<double>(x[i]) * static_cast<double>(weights[i]);
      dense += term;
      if (i != pruned) sparse += term;
    }
    const double d = dense - sparse;
    total += d * d;
  }
  return total / static_cast<double>(calib.rows());
}

SinglePrune brute_force_single_prune(std::span<const float> weights, double bias, const CalibrationBatch& calib,
                                     bool allow_bias) {
  check_instance(weights, calib);
  SinglePrune best;
  bool have = false;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    double b = bias;
    if (allow_bias) {
      double mean = 0.0;
      for (std::size_t r = 0; r < calib.rows(); ++r) mean += calib(r, j);
      mean /= static_cast<double>(calib.rows());
      b = bias + mean * static_cast<double>(weights[j]);
    }
    const double obj = single_prune_objective(weights, bias, calib, j, b);
    if (!have || obj < best.objective) {
      best = {j, b, obj};
      have = true;
    }
  }
  return best;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ (index + 1) * 0xD1B54A32D192ED03ull);
}

Instance random_instance(std::uint64_t seed, InstanceKind kind) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> rows_dist(8, 64);
  std::uniform_int_distribution<std::size_t> cols_dist(2, 16);
  std::uniform_real_distribution<double> mean_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> sigma_dist(0.1, 2.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t rows = rows_dist(rng);
  const std::size_t cols = cols_dist(rng);
  if (kind == InstanceKind::Centered && rows % 2) ++rows;

  std::vector<double> mu(cols), sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    mu[j] = kind == InstanceKind::Centered ? 0.0 : mean_dist(rng);
    sigma[j] = sigma_dist(rng);
  }
  Instance inst;
  inst.centered = kind == InstanceKind::Centered;
  if (kind == InstanceKind::OffsetFeature) {
    std::uniform_int_distribution<std::size_t> pick(0, cols - 1);
    std::uniform_real_distribution<double> offset(3.0, 5.0);
    std::uniform_real_distribution<double> small_sigma(0.01, 0.05);
    inst.offset_feature = pick(rng);
    mu[inst.offset_feature] = (unit(rng) < 0.0 ? -1.0 : 1.0) * offset(rng);
    sigma[inst.offset_feature] = small_sigma(rng);
  }

  inst.calib = MatrixF(rows, cols);
  if (kind == InstanceKind::Centered) {
    for (std::size_t r = 0; r < rows; r += 2)
      for (std::size_t j = 0; j < cols; ++j) {
        const auto x = static_cast<float>(sigma[j] * normal(rng));
        inst.calib(r, j) = x;
        inst.calib(r + 1, j) = -x;
      }
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) inst.calib(r, j) = static_cast<float>(mu[j] + sigma[j] * normal(rng));
  }
  inst.weights.resize(cols);
  for (auto& w : inst.weights) w = static_cast<float>(unit(rng));
  inst.bias = static_cast<float>(unit(rng));
  return inst;
}

nlohmann::json Instance::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < calib.rows(); ++r) {
    const auto row = calib.row(r);
    rows.push_back(std::vector<float>(row.begin(), row.end()));
  }
  return {{"weights", weights}, {"bias", bias}, {"centered", centered}, {"calib", std::move(rows)}};
}

std::size_t criterion_choice(CriterionTag tag, const Instance& inst) {
  const std::size_t cols = inst.weights.size();
  const MatrixF w(cols, 1, inst.weights);
  WeightLayer layer{w, std::nullopt, inst.centered};
  const CriterionTag resolved = select_criterion(Criterion::make(tag), layer);

  // Stream in two batches; an even split point keeps centered pairs together.
  ColumnStats stats = stats_init(cols);
  const std::size_t split = inst.calib.rows() / 4 * 2;
  stats_update(stats, inst.calib.slice_rows(0, split));
  stats_update(stats, inst.calib.slice_rows(split, inst.calib.rows() - split));

  ScoreMatrix scores;
  switch (resolved) {
    case CriterionTag::Magnitude: scores = score_magnitude(w); break;
    case CriterionTag::Wanda: scores = score_wanda(w, stats); break;
    case CriterionTag::Stade: scores = score_stade(w, stats); break;
    case CriterionTag::StadeStar: scores = score_stade_star(w, stats); break;
    case CriterionTag::SparseGptScore: {
      GramAccumulator gram(cols);
      gram.update(inst.calib);
      scores = score_sparsegpt(w, gram, resolve_damping(Damping{}, gram));
      break;
    }
    case CriterionTag::StadeW: break;
  }
  return select_lowest(scores.data(), 1).front();
}

InstanceKind default_instance_kind(CriterionTag tag) noexcept {
  return tag == CriterionTag::Wanda ? InstanceKind::Centered : InstanceKind::Uncentered;
}

bool default_allow_bias(CriterionTag tag) noexcept {
  return tag != CriterionTag::StadeStar && tag != CriterionTag::SparseGptScore;
}

nlohmann::json OptimalityReport::to_json(bool with_instance) const {
  nlohmann::json j{{"criterion", std::string(to_string(criterion))},
                   {"data", std::string(to_string(data))},
                   {"allow_bias", allow_bias},
                   {"trials", trials},
                   {"matches", matches},
                   {"mismatches", mismatches},
                   {"all_match", all_match()}};
  if (first_counterexample) {
    const auto& c = *first_counterexample;
    nlohmann::json ce{{"trial", c.trial},
                      {"seed", c.seed},
                      {"criterion_index", c.criterion_index},
                      {"oracle_index", c.oracle_index},
                      {"criterion_objective", c.criterion_objective},
                      {"oracle_objective", c.oracle_objective}};
    if (with_instance) ce["instance"] = c.instance.to_json();
    j["counterexample"] = std::move(ce);
  }
  return j;
}

OptimalityReport check_criterion_optimality(CriterionTag tag, const OptimalityOptions& options) {
  if (options.trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  OptimalityReport report;
  report.criterion = tag;
  report.data = options.data.value_or(default_instance_kind(tag));
  report.allow_bias = options.allow_bias.value_or(default_allow_bias(tag));
  report.trials = options.trials;

  std::vector<std::uint8_t> matched(options.trials, 0);
  std::vector<std::optional<Counterexample>> failures(options.trials);
  parallel_for(options.trials, options.threads, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(options.seed, t);
    Instance inst = random_instance(seed, report.data);
    const auto oracle = brute_force_single_prune(inst.weights, inst.bias, inst.calib, report.allow_bias);
    const std::size_t chosen = criterion_choice(tag, inst);
    if (chosen == oracle.index) {
      matched[t] = 1;
      return;
    }
    double b = inst.bias;
    if (report.allow_bias) {
      double mean = 0.0;
      for (std::size_t r = 0; r < inst.calib.rows(); ++r) mean += inst.calib(r, chosen);
      b += mean / static_cast<double>(inst.calib.rows()) * inst.weights[chosen];
    }
    const double obj = single_prune_objective(inst.weights, inst.bias, inst.calib, chosen, b);
    failures[t] = Counterexample{t, seed, chosen, oracle.index, obj, oracle.objective, std::move(inst)};
  });

  for (std::size_t t = 0; t < options.trials; ++t) {
    if (matched[t]) {
      ++report.matches;
    } else {
      ++report.mismatches;
      if (!report.first_counterexample) report.first_counterexample = std::move(failures[t]);
    }
  }
  return report;
}

}  // namespace prunekit
