// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prunekit/matrix.hpp"

namespace prunekit {

class TensorContainer;

/// b x M rows of one layer's input activations.
using CalibrationBatch = MatrixF;

/// Per-input-feature running statistics over a calibration stream.
///
/// Mean and sample variance follow the batched single-pass recurrence
///   n'  = n + b
///   mu' = mu*n/n' + sum(x)/n'
///   V'  = (n-1)V/(n'-1) + n*mu^2/(n'-1) - n'*mu'^2/(n'-1) + sum(x^2)/(n'-1)
/// evaluated in double precision. `sumsq` is the raw sum of squares.
struct ColumnStats {
  std::uint64_t n = 0;
  std::vector<double> mean;
  std::vector<double> var;  // raw accumulator; read through variance()
  std::vector<double> sumsq;

  std::size_t dim() const noexcept { return mean.size(); }
  /// Sample variance of feature j, clamped at zero; 0 when n <= 1.
  double variance(std::size_t j) const noexcept;
};

ColumnStats stats_init(std::size_t dim);

/// Folds one batch in. Throws DimensionMismatch / NonFiniteInput.
void stats_update(ColumnStats& s, const CalibrationBatch& batch);
ColumnStats stats_updated(ColumnStats s, const CalibrationBatch& batch);

/// Combines two accumulators as if `other`'s rows had been streamed into `s`.
void stats_merge(ColumnStats& s, const ColumnStats& other);

/// sqrt(sum x_j^2) per feature.
std::vector<double> stats_l2(const ColumnStats& s);

/// ||x_j - mean_j||_2 = sqrt((n-1) var_j). Throws EmptyStats when n == 0.
std::vector<double> stats_centered_l2(const ColumnStats& s);

/// Stored as "<layer>.stats.{mean,var,sumsq,n}" f64 tensors.
void put_stats(TensorContainer& c, const std::string& layer, const ColumnStats& s);
ColumnStats get_stats(const TensorContainer& c, const std::string& layer);

}  // namespace prunekit
