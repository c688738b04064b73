// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prunekit/criteria.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

struct SparsitySpec {
  enum class Kind { Unstructured, Structured };

  Kind kind = Kind::Unstructured;
  double ratio = 0.0;  // Unstructured
  std::size_t n = 0;   // Structured: n pruned out of every m
  std::size_t m = 0;

  static SparsitySpec unstructured(double p) { return {Kind::Unstructured, p, 0, 0}; }
  static SparsitySpec structured(std::size_t n, std::size_t m) { return {Kind::Structured, 0.0, n, m}; }

  /// Throws InvalidRatio / IndivisibleGroup for an input dimension of `rows`.
  void validate(std::size_t rows) const;
  /// Number of pruned entries per output column of `rows` inputs.
  std::size_t pruned_per_column(std::size_t rows) const;
  std::string to_string() const;
};

/// Accepts "0.5" or "2:4".
SparsitySpec parse_sparsity(std::string_view text);

/// Boolean M x H matrix, true = weight removed.
using PruneMask = Matrix<std::uint8_t>;

/// Indices of the `k` lowest entries; ties go to the lower index.
std::vector<std::size_t> select_lowest(std::span<const double> scores, std::size_t k);

PruneMask build_mask(const ScoreMatrix& scores, const SparsitySpec& spec, unsigned threads = 1);

struct MaskCheck {
  bool valid = true;
  std::string diagnostic;  // first violating column/group when invalid
  explicit operator bool() const noexcept { return valid; }
};

MaskCheck validate_mask(const PruneMask& mask, const SparsitySpec& spec);

/// Pruned weights become exactly 0.0f; everything else is untouched.
WeightLayer apply_mask(const WeightLayer& layer, const PruneMask& mask);

double achieved_sparsity(const PruneMask& mask) noexcept;

void put_mask(TensorContainer& c, const std::string& layer, const PruneMask& mask);
PruneMask get_mask(const TensorContainer& c, const std::string& layer);

}  // namespace prunekit
