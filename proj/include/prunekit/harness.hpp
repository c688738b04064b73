// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prunekit/criteria.hpp"
#include "prunekit/mask_builder.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

enum class NormKind { LayerNorm, RmsNorm, None };

std::string_view to_string(NormKind kind) noexcept;
/// "layernorm", "rmsnorm" or "none".
std::optional<NormKind> parse_norm(std::string_view name) noexcept;

struct ToyMlpConfig {
  std::size_t d_in = 16;
  std::size_t d_hidden = 32;
  std::size_t d_out = 8;
  NormKind norm = NormKind::None;
  std::size_t samples = 1000;
};

/// Two linear layers "fc1", "fc2" with a ReLU in between, plus the dense
/// activations at each layer input ("fc1.calib", "fc2.calib").
struct ToyModel {
  TensorContainer model;
  TensorContainer calib;
};

/// Raw inputs have per-feature offsets and log-uniform scales in [0.1, 10].
///   layernorm: inputs centered per feature, stored as (x, -x) row pairs so the
///              fc1 input mean is exactly zero; fc1 flagged centered.
///   rmsnorm:   positive offsets divided by the per-row RMS, then a per-feature
///              gain; not centered.
///   none:      raw inputs.
/// fc2 always sees ReLU outputs and is flagged uncentered.
ToyModel gen_toy_mlp(std::uint64_t seed, const ToyMlpConfig& config);

/// Runs rows through the layers in container order, ReLU between layers.
MatrixD forward_mlp(const TensorContainer& model, const MatrixF& inputs);

struct ComparisonConfig {
  ToyMlpConfig model;
  std::vector<Criterion> criteria;
  SparsitySpec sparsity = SparsitySpec::unstructured(0.5);
  std::optional<bool> bias_update;  // unset: per-criterion default
  std::size_t seeds = 20;
  std::uint64_t base_seed = 1;
  double holdout_fraction = 0.2;
  unsigned threads = 1;
};

struct ComparisonCell {
  CriterionTag criterion = CriterionTag::Magnitude;  // as requested
  CriterionTag resolved = CriterionTag::Magnitude;
  std::string layer;
  std::vector<double> mse;  // one per seed
  double mean_mse = 0.0;
};

struct ComparisonTable {
  std::vector<std::string> layers;
  std::vector<CriterionTag> criteria;
  std::vector<std::uint64_t> seeds;
  std::vector<ComparisonCell> cells;                 // criterion-major
  std::vector<std::vector<double>> end_to_end;       // [criterion][seed]
  std::vector<double> end_to_end_mean;               // [criterion]

  const ComparisonCell& cell(CriterionTag criterion, std::string_view layer) const;
  /// Fraction of seeds where criterion `a` has held-out MSE <= criterion `b` on `layer`.
  double fraction_at_most(CriterionTag a, CriterionTag b, std::string_view layer) const;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// For each seed builds a fresh toy model, prunes it with every criterion and
/// records the held-out layer MSE and end-to-end output MSE against dense.
ComparisonTable run_comparison(const ComparisonConfig& config);

}  // namespace prunekit
