// SPDX-License-Identifier: Apache-2.0
//
// Layer-wise pruning of a whole container. For every layer "<name>" the
// calibration container must hold "<name>.calib", an N x M f32 matrix of that
// layer's input activations captured from the dense model. The last
// floor(holdout_fraction * N) rows are held out for the reconstruction report;
// statistics use the rest.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prunekit/calib_stats.hpp"
#include "prunekit/criteria.hpp"
#include "prunekit/mask_builder.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

struct PruneOptions {
  Criterion criterion = Criterion::make(CriterionTag::StadeW);
  SparsitySpec sparsity = SparsitySpec::unstructured(0.5);
  std::optional<bool> bias_update;  // unset: default_bias_update(resolved criterion)
  double holdout_fraction = 0.2;
  double centered_threshold = 0.1;
  unsigned threads = 1;
};

struct LayerReport {
  std::string layer;
  CriterionTag criterion = CriterionTag::Magnitude;  // resolved
  std::string sparsity;
  double achieved_sparsity = 0.0;
  bool bias_update = false;
  double bias_delta_norm = 0.0;
  bool bias_added = false;
  double reconstruction_mse = 0.0;
  std::size_t mse_rows = 0;
  bool mse_on_holdout = false;
  std::size_t stats_rows = 0;
  bool centered = false;                   // manifest flag, authoritative
  std::optional<bool> centered_estimate;   // classify_centered diagnostic
  double mean_abs_max = 0.0;
  std::string warning;
};

struct PruneReport {
  std::vector<LayerReport> layers;

  const LayerReport* find(std::string_view layer) const noexcept;
  nlohmann::json to_json() const;
};

struct LayerOutcome {
  WeightLayer pruned;
  PruneMask mask;
  LayerReport report;
};

struct PruneResult {
  TensorContainer model;
  PruneReport report;
};

/// Bias compensation default for a resolved criterion: on for Stade only.
bool default_bias_update(CriterionTag resolved) noexcept;

/// True iff max_j |mean_j| / (sqrt(var_j) + 1e-12) <= threshold. Needs n >= 2.
bool classify_centered(const ColumnStats& s, double threshold);

/// Mean over rows and outputs of the squared output difference.
double reconstruction_mse(const WeightLayer& original, const WeightLayer& pruned, const CalibrationBatch& rows);

/// Full stats -> score -> mask -> compensate pipeline for one layer.
LayerOutcome prune_layer(const std::string& name, const WeightLayer& layer, const CalibrationBatch& calib,
                         const PruneOptions& options);

/// Prunes every layer of `model`. The output keeps all input tensors (pruned
/// layers replaced in place) and appends "<layer>.mask" for every layer.
PruneResult prune_container(const TensorContainer& model, const TensorContainer& calib, const PruneOptions& options);

}  // namespace prunekit
