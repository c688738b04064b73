// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "prunekit/calib_stats.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

enum class CriterionTag { Magnitude, Wanda, Stade, StadeStar, StadeW, SparseGptScore };

std::string_view to_string(CriterionTag tag) noexcept;
/// CLI spelling: magnitude, wanda, stade, stade-star, stade-w, sparsegpt-score.
std::optional<CriterionTag> parse_criterion(std::string_view name) noexcept;

/// Ridge term added to the Gram diagonal before inversion. `automatic` with a
/// zero `lambda` resolves to 0.01 * mean(diag(G)).
struct Damping {
  double lambda = 0.0;
  bool automatic = true;
};

struct Criterion {
  CriterionTag tag = CriterionTag::Stade;
  std::optional<Damping> damping;  // SparseGptScore only

  static Criterion make(CriterionTag tag);
  /// Throws InvalidArgument if damping presence disagrees with the tag.
  void validate() const;
};

/// M x H, same layout as the weights; entries finite and >= 0.
using ScoreMatrix = MatrixD;

/// Running X^T X over calibration rows.
struct GramAccumulator {
  MatrixD gram;
  std::uint64_t n = 0;

  explicit GramAccumulator(std::size_t dim) : gram(dim, dim, 0.0) {}
  std::size_t dim() const noexcept { return gram.rows(); }
  void update(const CalibrationBatch& batch);
};

ScoreMatrix score_magnitude(const MatrixF& weights);
ScoreMatrix score_wanda(const MatrixF& weights, const ColumnStats& s);
ScoreMatrix score_stade(const MatrixF& weights, const ColumnStats& s);
/// sqrt(E[x^2]) * |W|, i.e. sqrt(sigma^2 + mu^2) with the population variance,
/// a monotone transform of (sigma^2 + mu^2) W^2.
ScoreMatrix score_stade_star(const MatrixF& weights, const ColumnStats& s);
/// W^2 / diag((G + lambda I)^-1) using a Cholesky factorization.
ScoreMatrix score_sparsegpt(const MatrixF& weights, const GramAccumulator& g, double lambda);

/// diag((G + lambda I)^-1); throws SingularGram when not positive definite.
std::vector<double> damped_inverse_diagonal(const MatrixD& gram, double lambda);
double resolve_damping(const Damping& d, const GramAccumulator& g);

/// StadeW becomes Wanda on centered layers and Stade otherwise.
CriterionTag select_criterion(const Criterion& c, const WeightLayer& layer) noexcept;

}  // namespace prunekit
