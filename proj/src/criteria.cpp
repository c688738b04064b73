// SPDX-License-Identifier: Apache-2.0
#include "prunekit/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "prunekit/error.hpp"

namespace prunekit {

namespace {

void require_finite(const MatrixF& w) {
  for (float x : w.data())
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite weight");
}

void require_dim(const MatrixF& w, std::size_t dim) {
  if (w.rows() != dim)
    throw Error(ErrorCode::DimensionMismatch, "weights have " + std::to_string(w.rows()) +
                                                  " inputs, statistics have " + std::to_string(dim));
}

// scores[j, m] = row_factor[j] * |W[j, m]|
ScoreMatrix scale_rows(const MatrixF& w, const std::vector<double>& row_factor) {
  ScoreMatrix out(w.rows(), w.cols());
  for (std::size_t j = 0; j < w.rows(); ++j)
    for (std::size_t m = 0; m < w.cols(); ++m) out(j, m) = row_factor[j] * std::abs(static_cast<double>(w(j, m)));
  return out;
}

}  // namespace

std::string_view to_string(CriterionTag tag) noexcept {
  switch (tag) {
    case CriterionTag::Magnitude: return "magnitude";
    case CriterionTag::Wanda: return "wanda";
    case CriterionTag::Stade: return "stade";
    case CriterionTag::StadeStar: return "stade-star";
    case CriterionTag::StadeW: return "stade-w";
    case CriterionTag::SparseGptScore: return "sparsegpt-score";
  }
  return "?";
}

std::optional<CriterionTag> parse_criterion(std::string_view name) noexcept {
  for (auto tag : {CriterionTag::Magnitude, CriterionTag::Wanda, CriterionTag::Stade, CriterionTag::StadeStar,
                   CriterionTag::StadeW, CriterionTag::SparseGptScore})
    if (to_string(tag) == name) return tag;
  return std::nullopt;
}

Criterion Criterion::make(CriterionTag tag) {
  Criterion c{tag, std::nullopt};
  if (tag == CriterionTag::SparseGptScore) c.damping = Damping{};
  return c;
}

void Criterion::validate() const {
  const bool needs = tag == CriterionTag::SparseGptScore;
  if (needs != damping.has_value())
    throw Error(ErrorCode::InvalidArgument, needs ? "sparsegpt-score requires a damping value"
                                                  : "damping is only meaningful for sparsegpt-score");
  if (damping && !(damping->lambda >= 0.0 && std::isfinite(damping->lambda)))
    throw Error(ErrorCode::InvalidArgument, "damping must be finite and non-negative");
}

void GramAccumulator::update(const CalibrationBatch& batch) {
  if (batch.rows() == 0) return;
  if (batch.cols() != dim()) throw Error(ErrorCode::DimensionMismatch, "batch width does not match Gram dimension");
  const std::size_t d = dim();
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const auto x = batch.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = x[i];
      if (!std::isfinite(xi)) throw Error(ErrorCode::NonFiniteInput, "non-finite calibration value");
      // Upper triangle only, mirrored below, so G stays exactly symmetric.
      for (std::size_t k = i; k < d; ++k) gram(i, k) += xi * static_cast<double>(x[k]);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < i; ++k) gram(i, k) = gram(k, i);
  n += batch.rows();
}

ScoreMatrix score_magnitude(const MatrixF& weights) {
  require_finite(weights);
  return scale_rows(weights, std::vector<double>(weights.rows(), 1.0));
}

ScoreMatrix score_wanda(const MatrixF& weights, const ColumnStats& s) {
  require_dim(weights, s.dim());
  if (s.n == 0) throw Error(ErrorCode::EmptyStats, "wanda needs at least one calibration row");
  require_finite(weights);
  return scale_rows(weights, stats_l2(s));
}

ScoreMatrix score_stade(const MatrixF& weights, const ColumnStats& s) {
  require_dim(weights, s.dim());
  if (s.n < 2) throw Error(ErrorCode::InsufficientSamples, "stade needs at least two calibration rows");
  require_finite(weights);
  return scale_rows(weights, stats_centered_l2(s));
}

ScoreMatrix score_stade_star(const MatrixF& weights, const ColumnStats& s) {
  require_dim(weights, s.dim());
  if (s.n < 2) throw Error(ErrorCode::InsufficientSamples, "stade-star needs at least two calibration rows");
  require_finite(weights);
  // sigma^2 + mu^2 (population variance) is the raw second moment sumsq / n.
  const auto n = static_cast<double>(s.n);
  std::vector<double> factor(s.dim());
  for (std::size_t j = 0; j < s.dim(); ++j) factor[j] = std::sqrt(std::max(s.sumsq[j], 0.0) / n);
  return scale_rows(weights, factor);
}

std::vector<double> damped_inverse_diagonal(const MatrixD& gram, double lambda) {
  if (gram.rows() != gram.cols()) throw Error(ErrorCode::DimensionMismatch, "Gram matrix must be square");
  const auto d = static_cast<Eigen::Index>(gram.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(gram.data().data(), d, d);
  Eigen::MatrixXd a = g;
  a.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularGram, "damped Gram is not positive definite");
  // A^-1 = L^-T L^-1, so diag(A^-1)_j is the squared norm of column j of L^-1.
  Eigen::MatrixXd l_inv = Eigen::MatrixXd::Identity(d, d);
  llt.matrixL().solveInPlace(l_inv);
  std::vector<double> out(gram.rows());
  for (Eigen::Index j = 0; j < d; ++j) {
    out[static_cast<std::size_t>(j)] = l_inv.col(j).squaredNorm();
    if (!std::isfinite(out[static_cast<std::size_t>(j)]) || out[static_cast<std::size_t>(j)] <= 0.0)
      throw Error(ErrorCode::SingularGram, "damped Gram inverse is degenerate");
  }
  return out;
}

double resolve_damping(const Damping& d, const GramAccumulator& g) {
  if (!d.automatic || d.lambda != 0.0) return d.lambda;
  double trace = 0.0;
  for (std::size_t i = 0; i < g.dim(); ++i) trace += g.gram(i, i);
  return 0.01 * trace / static_cast<double>(g.dim());
}

ScoreMatrix score_sparsegpt(const MatrixF& weights, const GramAccumulator& g, double lambda) {
  require_dim(weights, g.dim());
  require_finite(weights);
  const auto diag = damped_inverse_diagonal(g.gram, lambda);
  ScoreMatrix out(weights.rows(), weights.cols());
  for (std::size_t j = 0; j < weights.rows(); ++j)
    for (std::size_t m = 0; m < weights.cols(); ++m) {
      const double w = weights(j, m);
      out(j, m) = w * w / diag[j];
    }
  return out;
}

CriterionTag select_criterion(const Criterion& c, const WeightLayer& layer) noexcept {
  if (c.tag != CriterionTag::StadeW) return c.tag;
  return layer.centered ? CriterionTag::Wanda : CriterionTag::Stade;
}

}  // namespace prunekit
