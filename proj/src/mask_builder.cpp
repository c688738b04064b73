// SPDX-License-Identifier: Apache-2.0
#include "prunekit/mask_builder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "prunekit/error.hpp"
#include "prunekit/parallel.hpp"

namespace prunekit {

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::size_t column_popcount(const PruneMask& mask, std::size_t col, std::size_t first, std::size_t count) {
  std::size_t pruned = 0;
  for (std::size_t j = first; j < first + count; ++j) pruned += mask(j, col) != 0;
  return pruned;
}

}  // namespace

void SparsitySpec::validate(std::size_t rows) const {
  if (kind == Kind::Unstructured) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
      throw Error(ErrorCode::InvalidRatio, "unstructured sparsity must lie in [0, 1], got " + std::to_string(ratio));
    return;
  }
  if (n == 0 || m == 0 || n >= m)
    throw Error(ErrorCode::InvalidRatio, "structured sparsity needs 0 < n < m, got " + to_string());
  if (rows % m != 0)
    throw Error(ErrorCode::IndivisibleGroup, "input dimension " + std::to_string(rows) +
                                                 " is not divisible by group size " + std::to_string(m));
}

std::size_t SparsitySpec::pruned_per_column(std::size_t rows) const {
  if (kind == Kind::Structured) return rows / m * n;
  // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(rows) + 1e-9));
}

std::string SparsitySpec::to_string() const {
  if (kind == Kind::Structured) return std::to_string(n) + ":" + std::to_string(m);
  std::string s = std::to_string(ratio);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

SparsitySpec parse_sparsity(std::string_view text) {
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    std::size_t n = 0, m = 0;
    if (!parse_number(text.substr(0, colon), n) || !parse_number(text.substr(colon + 1), m))
      throw Error(ErrorCode::InvalidRatio, "cannot parse structured sparsity '" + std::string(text) + "'");
    auto spec = SparsitySpec::structured(n, m);
    if (n == 0 || n >= m) throw Error(ErrorCode::InvalidRatio, "structured sparsity needs 0 < n < m");
    return spec;
  }
  double p = 0.0;
  if (!parse_number(text, p)) throw Error(ErrorCode::InvalidRatio, "cannot parse sparsity '" + std::string(text) + "'");
  auto spec = SparsitySpec::unstructured(p);
  spec.validate(0);
  return spec;
}

std::vector<std::size_t> select_lowest(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] < scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PruneMask build_mask(const ScoreMatrix& scores, const SparsitySpec& spec, unsigned threads) {
  const std::size_t rows = scores.rows();
  spec.validate(rows);
  PruneMask mask(rows, scores.cols(), 0);
  const std::size_t group = spec.kind == SparsitySpec::Kind::Structured ? spec.m : rows;
  const std::size_t keep_out = spec.kind == SparsitySpec::Kind::Structured ? spec.n : spec.pruned_per_column(rows);
  parallel_for(scores.cols(), threads, [&](std::size_t col) {
    std::vector<double> column(group);
    for (std::size_t first = 0; first < rows; first += group) {
      for (std::size_t j = 0; j < group; ++j) column[j] = scores(first + j, col);
      for (std::size_t j : select_lowest(column, keep_out)) mask(first + j, col) = 1;
    }
  });
  return mask;
}

MaskCheck validate_mask(const PruneMask& mask, const SparsitySpec& spec) {
  const std::size_t rows = mask.rows();
  try {
    spec.validate(rows);
  } catch (const Error& e) {
    return {false, e.what()};
  }
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.data()[i] > 1) return {false, "mask entry " + std::to_string(i) + " is not 0/1"};
  const bool structured = spec.kind == SparsitySpec::Kind::Structured;
  const std::size_t group = structured ? spec.m : rows;
  const std::size_t expected = structured ? spec.n : spec.pruned_per_column(rows);
  for (std::size_t col = 0; col < mask.cols(); ++col) {
    for (std::size_t first = 0; first < rows; first += group) {
      const std::size_t got = column_popcount(mask, col, first, group);
      if (got != expected)
        return {false, "column " + std::to_string(col) + ", rows [" + std::to_string(first) + ", " +
                           std::to_string(first + group) + "): " + std::to_string(got) + " pruned, expected " +
                           std::to_string(expected)};
    }
  }
  return {};
}

WeightLayer apply_mask(const WeightLayer& layer, const PruneMask& mask) {
  if (mask.rows() != layer.weights.rows() || mask.cols() != layer.weights.cols())
    throw Error(ErrorCode::ShapeMismatch, "mask shape does not match the weight matrix");
  WeightLayer out = layer;
  auto w = out.weights.data();
  const auto bits = mask.data();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (bits[i]) w[i] = 0.0f;
  return out;
}

double achieved_sparsity(const PruneMask& mask) noexcept {
  if (mask.empty()) return 0.0;
  const auto pruned = std::count_if(mask.data().begin(), mask.data().end(), [](auto b) { return b != 0; });
  return static_cast<double>(pruned) / static_cast<double>(mask.size());
}

void put_mask(TensorContainer& c, const std::string& layer, const PruneMask& mask) {
  c.put(TensorRecord{layer + ".mask", {mask.rows(), mask.cols()}, mask.storage(), std::nullopt, std::nullopt});
}

PruneMask get_mask(const TensorContainer& c, const std::string& layer) {
  const auto& r = c.at(layer + ".mask");
  if (r.dtype() != DType::U8 || r.shape.size() != 2)
    throw Error(ErrorCode::ShapeMismatch, "'" + r.name + "' is not a 2-D u8 mask");
  return PruneMask(r.shape[0], r.shape[1], std::get<std::vector<std::uint8_t>>(r.data));
}

}  // namespace prunekit
