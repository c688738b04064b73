// SPDX-License-Identifier: Apache-2.0
#include "prunekit/compensator.hpp"

#include <algorithm>
#include <cmath>

#include "prunekit/error.hpp"

namespace prunekit {

WeightLayer bias_update(const WeightLayer& layer, const PruneMask& mask, const ColumnStats& s, bool enabled) {
  if (mask.rows() != layer.input_dim() || mask.cols() != layer.output_dim())
    throw Error(ErrorCode::ShapeMismatch, "mask shape does not match the weight matrix");
  if (s.dim() != layer.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "statistics width does not match the layer input dimension");
  if (!enabled) return layer;
  if (s.n == 0) throw Error(ErrorCode::EmptyStats, "bias update needs calibration statistics");

  const std::size_t outputs = layer.output_dim();
  std::vector<double> delta(outputs, 0.0);
  for (std::size_t j = 0; j < layer.input_dim(); ++j)
    for (std::size_t m = 0; m < outputs; ++m)
      if (mask(j, m)) delta[m] += s.mean[j] * static_cast<double>(layer.weights(j, m));

  const bool any = std::any_of(delta.begin(), delta.end(), [](double d) { return d != 0.0; });
  if (!any) return layer;

  WeightLayer out = layer;
  if (!out.bias) out.bias = std::vector<float>(outputs, 0.0f);
  for (std::size_t m = 0; m < outputs; ++m)
    (*out.bias)[m] = static_cast<float>(static_cast<double>((*out.bias)[m]) + delta[m]);
  return out;
}

double bias_delta_norm(const WeightLayer& before, const WeightLayer& after) {
  if (before.output_dim() != after.output_dim() || before.input_dim() != after.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "layers differ in shape");
  double total = 0.0;
  for (std::size_t m = 0; m < before.output_dim(); ++m) {
    const double b0 = before.bias ? (*before.bias)[m] : 0.0;
    const double b1 = after.bias ? (*after.bias)[m] : 0.0;
    total += std::abs(b1 - b0);
  }
  return total;
}

}  // namespace prunekit
