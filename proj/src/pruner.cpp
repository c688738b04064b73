// SPDX-License-Identifier: Apache-2.0
#include "prunekit/pruner.hpp"

#include <algorithm>
#include <cmath>

#include "prunekit/compensator.hpp"
#include "prunekit/error.hpp"
#include "prunekit/parallel.hpp"

namespace prunekit {

namespace {

constexpr std::size_t kStreamChunk = 512;

std::size_t holdout_rows(std::size_t total, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
}

}  // namespace

const LayerReport* PruneReport::find(std::string_view layer) const noexcept {
  auto it = std::find_if(layers.begin(), layers.end(), [&](const auto& r) { return r.layer == layer; });
  return it == layers.end() ? nullptr : &*it;
}

nlohmann::json PruneReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : layers) {
    nlohmann::json j;
    j["layer"] = r.layer;
    j["criterion"] = std::string(to_string(r.criterion));
    j["sparsity"] = r.sparsity;
    j["achieved_sparsity"] = r.achieved_sparsity;
    j["bias_update"] = r.bias_update;
    j["bias_delta_norm"] = r.bias_delta_norm;
    j["bias_added"] = r.bias_added;
    j["reconstruction_mse"] = r.reconstruction_mse;
    j["mse_rows"] = r.mse_rows;
    j["mse_on_holdout"] = r.mse_on_holdout;
    j["stats_rows"] = r.stats_rows;
    j["centered"] = r.centered;
    j["centered_estimate"] = r.centered_estimate ? nlohmann::json(*r.centered_estimate) : nlohmann::json(nullptr);
    j["mean_abs_max"] = r.mean_abs_max;
    if (!r.warning.empty()) j["warning"] = r.warning;
    out.push_back(std::move(j));
  }
  return {{"layers", std::move(out)}};
}

bool default_bias_update(CriterionTag resolved) noexcept { return resolved == CriterionTag::Stade; }

bool classify_centered(const ColumnStats& s, double threshold) {
  if (s.n < 2) throw Error(ErrorCode::InsufficientSamples, "centering check needs at least two rows");
  double worst = 0.0;
  for (std::size_t j = 0; j < s.dim(); ++j)
    worst = std::max(worst, std::abs(s.mean[j]) / (std::sqrt(s.variance(j)) + 1e-12));
  return worst <= threshold;
}

double reconstruction_mse(const WeightLayer& original, const WeightLayer& pruned, const CalibrationBatch& rows) {
  if (original.input_dim() != pruned.input_dim() || original.output_dim() != pruned.output_dim())
    throw Error(ErrorCode::ShapeMismatch, "original and pruned layers differ in shape");
  if (rows.cols() != original.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "calibration width does not match the layer input dimension");
  const std::size_t inputs = original.input_dim();
  const std::size_t outputs = original.output_dim();
  if (rows.rows() == 0 || outputs == 0) return 0.0;

  // Output difference is x * (W - W') + (B - B'); only changed weights contribute.
  std::vector<double> bias_diff(outputs, 0.0);
  for (std::size_t m = 0; m < outputs; ++m) {
    const double b0 = original.bias ? (*original.bias)[m] : 0.0;
    const double b1 = pruned.bias ? (*pruned.bias)[m] : 0.0;
    bias_diff[m] = b0 - b1;
  }
  MatrixD weight_diff(inputs, outputs);
  for (std::size_t j = 0; j < inputs; ++j)
    for (std::size_t m = 0; m < outputs; ++m)
      weight_diff(j, m) = static_cast<double>(original.weights(j, m)) - static_cast<double>(pruned.weights(j, m));

  double total = 0.0;
  std::vector<double> diff(outputs);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    diff = bias_diff;
    const auto x = rows.row(r);
    for (std::size_t j = 0; j < inputs; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      const auto wrow = weight_diff.row(j);
      for (std::size_t m = 0; m < outputs; ++m) diff[m] += xj * wrow[m];
    }
    for (double d : diff) total += d * d;
  }
  return total / (static_cast<double>(rows.rows()) * static_cast<double>(outputs));
}

LayerOutcome prune_layer(const std::string& name, const WeightLayer& layer, const CalibrationBatch& calib,
                         const PruneOptions& options) {
  layer.validate(name);
  options.criterion.validate();
  if (!(options.holdout_fraction >= 0.0 && options.holdout_fraction <= 0.5))
    throw Error(ErrorCode::InvalidArgument, "holdout fraction must lie in [0, 0.5]");
  if (calib.cols() != layer.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "calibration for '" + name + "' has width " +
                                                  std::to_string(calib.cols()) + ", layer expects " +
                                                  std::to_string(layer.input_dim()));
  options.sparsity.validate(layer.input_dim());

  const std::size_t held = holdout_rows(calib.rows(), options.holdout_fraction);
  const std::size_t used = calib.rows() - held;

  ColumnStats stats = stats_init(layer.input_dim());
  for (std::size_t first = 0; first < used; first += kStreamChunk)
    stats_update(stats, calib.slice_rows(first, std::min(kStreamChunk, used - first)));

  const CriterionTag resolved = select_criterion(options.criterion, layer);
  ScoreMatrix scores;
  switch (resolved) {
    case CriterionTag::Magnitude: scores = score_magnitude(layer.weights); break;
    case CriterionTag::Wanda: scores = score_wanda(layer.weights, stats); break;
    case CriterionTag::Stade: scores = score_stade(layer.weights, stats); break;
    case CriterionTag::StadeStar: scores = score_stade_star(layer.weights, stats); break;
    case CriterionTag::SparseGptScore: {
      GramAccumulator gram(layer.input_dim());
      gram.update(calib.slice_rows(0, used));
      scores = score_sparsegpt(layer.weights, gram, resolve_damping(*options.criterion.damping, gram));
      break;
    }
    case CriterionTag::StadeW: break;  // resolved above
  }

  LayerOutcome out;
  out.mask = build_mask(scores, options.sparsity);
  const bool compensate = options.bias_update.value_or(default_bias_update(resolved));
  const WeightLayer compensated = bias_update(layer, out.mask, stats, compensate);
  out.pruned = apply_mask(compensated, out.mask);

  auto& rep = out.report;
  rep.layer = name;
  rep.criterion = resolved;
  rep.sparsity = options.sparsity.to_string();
  rep.achieved_sparsity = achieved_sparsity(out.mask);
  rep.bias_update = compensate;
  rep.bias_delta_norm = bias_delta_norm(layer, compensated);
  rep.bias_added = !layer.bias.has_value() && compensated.bias.has_value();
  const CalibrationBatch eval_rows = held > 0 ? calib.slice_rows(used, held) : calib.slice_rows(0, used);
  rep.reconstruction_mse = reconstruction_mse(layer, out.pruned, eval_rows);
  rep.mse_rows = eval_rows.rows();
  rep.mse_on_holdout = held > 0;
  rep.stats_rows = used;
  rep.centered = layer.centered;
  for (double mu : stats.mean) rep.mean_abs_max = std::max(rep.mean_abs_max, std::abs(mu));
  if (stats.n >= 2) {
    rep.centered_estimate = classify_centered(stats, options.centered_threshold);
    if (*rep.centered_estimate != layer.centered)
      rep.warning = std::string("calibration statistics look ") + (*rep.centered_estimate ? "centered" : "uncentered") +
                    " but the manifest flag says otherwise; using the manifest flag";
  }
  return out;
}

PruneResult prune_container(const TensorContainer& model, const TensorContainer& calib, const PruneOptions& options) {
  const auto names = model.layer_names();
  for (const auto& name : names)
    if (!calib.contains(name + ".calib"))
      throw Error(ErrorCode::MissingCalibration, "no calibration tensor '" + name + ".calib' for layer '" + name + "'");

  std::vector<LayerOutcome> outcomes(names.size());
  parallel_for(names.size(), options.threads, [&](std::size_t i) {
    outcomes[i] = prune_layer(names[i], model.layer(names[i]), calib.matrix(names[i] + ".calib"), options);
  });

  PruneResult result{model, {}};
  for (std::size_t i = 0; i < names.size(); ++i) {
    result.model.put_layer(names[i], outcomes[i].pruned);
    put_mask(result.model, names[i], outcomes[i].mask);
    result.report.layers.push_back(std::move(outcomes[i].report));
  }
  return result;
}

}  // namespace prunekit
