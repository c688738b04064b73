// SPDX-License-Identifier: Apache-2.0
#include "prunekit/calib_stats.hpp"

#include <algorithm>
#include <cmath>

#include "prunekit/error.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

namespace {

// Folds a batch summary (count, per-feature mean, squared deviations about
// the batch mean, raw sum of squares) into the running accumulator. The
// variance recurrence is the raw-moment update rearranged so the large
// n*mu^2 terms cancel analytically instead of in floating point.
void fold(ColumnStats& s, std::uint64_t count, const std::vector<double>& batch_mean,
          const std::vector<double>& batch_m2, const std::vector<double>& sum_sq) {
  if (count == 0) return;
  const auto n_old = static_cast<double>(s.n);
  const auto c = static_cast<double>(count);
  const std::uint64_t n_new_int = s.n + count;
  const auto n_new = static_cast<double>(n_new_int);
  for (std::size_t j = 0; j < s.dim(); ++j) {
    const double delta = batch_mean[j] - s.mean[j];
    const double m2_old = s.n > 1 ? (n_old - 1.0) * s.var[j] : 0.0;
    const double m2 = m2_old + batch_m2[j] + delta * delta * n_old * c / n_new;
    s.var[j] = n_new_int > 1 ? m2 / (n_new - 1.0) : 0.0;
    s.mean[j] = s.n == 0 ? batch_mean[j] : s.mean[j] + delta * c / n_new;
    s.sumsq[j] += sum_sq[j];
  }
  s.n = n_new_int;
}

}  // namespace

double ColumnStats::variance(std::size_t j) const noexcept {
  if (n <= 1) return 0.0;
  return std::max(var[j], 0.0);
}

ColumnStats stats_init(std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidDimension, "statistics need at least one feature");
  ColumnStats s;
  s.mean.assign(dim, 0.0);
  s.var.assign(dim, 0.0);
  s.sumsq.assign(dim, 0.0);
  return s;
}

void stats_update(ColumnStats& s, const CalibrationBatch& batch) {
  if (batch.rows() == 0) return;
  if (batch.cols() != s.dim())
    throw Error(ErrorCode::DimensionMismatch, "batch width " + std::to_string(batch.cols()) +
                                                  " does not match " + std::to_string(s.dim()) + " features");
  const std::size_t m = s.dim();
  std::vector<double> mean(m, 0.0), m2(m, 0.0), sum_sq(m, 0.0);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const auto row = batch.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      const double x = row[j];
      if (!std::isfinite(x))
        throw Error(ErrorCode::NonFiniteInput, "non-finite calibration value at row " + std::to_string(r) +
                                                   ", feature " + std::to_string(j));
      mean[j] += x;
      sum_sq[j] += x * x;
    }
  }
  const auto count = static_cast<double>(batch.rows());
  for (auto& v : mean) v /= count;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const auto row = batch.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      const double d = row[j] - mean[j];
      m2[j] += d * d;
    }
  }
  fold(s, batch.rows(), mean, m2, sum_sq);
}

ColumnStats stats_updated(ColumnStats s, const CalibrationBatch& batch) {
  stats_update(s, batch);
  return s;
}

void stats_merge(ColumnStats& s, const ColumnStats& other) {
  if (other.n == 0) return;
  if (other.dim() != s.dim()) throw Error(ErrorCode::DimensionMismatch, "cannot merge statistics of different width");
  std::vector<double> m2(s.dim());
  for (std::size_t j = 0; j < s.dim(); ++j) m2[j] = (static_cast<double>(other.n) - 1.0) * other.variance(j);
  fold(s, other.n, other.mean, m2, other.sumsq);
}

std::vector<double> stats_l2(const ColumnStats& s) {
  std::vector<double> out(s.dim());
  std::transform(s.sumsq.begin(), s.sumsq.end(), out.begin(), [](double v) { return std::sqrt(std::max(v, 0.0)); });
  return out;
}

std::vector<double> stats_centered_l2(const ColumnStats& s) {
  if (s.n == 0) throw Error(ErrorCode::EmptyStats, "no calibration rows accumulated");
  std::vector<double> out(s.dim());
  const double dof = static_cast<double>(s.n) - 1.0;
  for (std::size_t j = 0; j < s.dim(); ++j) out[j] = std::sqrt(dof * s.variance(j));
  return out;
}

void put_stats(TensorContainer& c, const std::string& layer, const ColumnStats& s) {
  c.put_vector(layer + ".stats.mean", s.mean);
  c.put_vector(layer + ".stats.var", s.var);
  c.put_vector(layer + ".stats.sumsq", s.sumsq);
  c.put_vector(layer + ".stats.n", {static_cast<double>(s.n)});
}

ColumnStats get_stats(const TensorContainer& c, const std::string& layer) {
  ColumnStats s;
  s.mean = c.vector_f64(layer + ".stats.mean");
  s.var = c.vector_f64(layer + ".stats.var");
  s.sumsq = c.vector_f64(layer + ".stats.sumsq");
  const auto n = c.vector_f64(layer + ".stats.n");
  if (n.size() != 1 || s.var.size() != s.mean.size() || s.sumsq.size() != s.mean.size())
    throw Error(ErrorCode::ShapeMismatch, "inconsistent statistics tensors for '" + layer + "'");
  s.n = static_cast<std::uint64_t>(n[0]);
  return s;
}

}  // namespace prunekit
