// SPDX-License-Identifier: Apache-2.0
#include "prunekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "prunekit/error.hpp"
#include "prunekit/oracle.hpp"
#include "prunekit/parallel.hpp"
#include "prunekit/pruner.hpp"

namespace prunekit {

namespace {

MatrixF random_weights(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  MatrixF w(rows, cols);
  for (auto& x : w.data()) x = static_cast<float>(unit(rng) * scale);
  return w;
}

std::vector<float> random_bias(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(-0.1, 0.1);
  std::vector<float> b(n);
  for (auto& x : b) x = static_cast<float>(unit(rng));
  return b;
}

// y = x * W + b, in double.
MatrixD affine(const MatrixD& x, const WeightLayer& layer) {
  MatrixD y(x.rows(), layer.output_dim(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto out = y.row(r);
    if (layer.bias)
      for (std::size_t m = 0; m < out.size(); ++m) out[m] = (*layer.bias)[m];
    const auto in = x.row(r);
    for (std::size_t j = 0; j < in.size(); ++j) {
      const double xj = in[j];
      const auto w = layer.weights.row(j);
      for (std::size_t m = 0; m < out.size(); ++m) out[m] += xj * w[m];
    }
  }
  return y;
}

MatrixD widen(const MatrixF& m) {
  MatrixD out(m.rows(), m.cols());
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

MatrixF narrow(const MatrixD& m) {
  MatrixF out(m.rows(), m.cols());
  std::transform(m.data().begin(), m.data().end(), out.data().begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

double mean_squared_difference(const MatrixD& a, const MatrixD& b) {
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string_view to_string(NormKind kind) noexcept {
  switch (kind) {
    case NormKind::LayerNorm: return "layernorm";
    case NormKind::RmsNorm: return "rmsnorm";
    case NormKind::None: return "none";
  }
  return "?";
}

std::optional<NormKind> parse_norm(std::string_view name) noexcept {
  for (auto k : {NormKind::LayerNorm, NormKind::RmsNorm, NormKind::None})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

ToyModel gen_toy_mlp(std::uint64_t seed, const ToyMlpConfig& config) {
  if (config.d_in == 0 || config.d_hidden == 0 || config.d_out == 0 || config.samples < 2)
    throw Error(ErrorCode::InvalidDimension, "toy MLP needs non-zero dims and at least two samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  std::uniform_real_distribution<double> signed_offset(-3.0, 3.0);
  std::uniform_real_distribution<double> positive_offset(0.5, 3.0);

  const std::size_t n = config.samples + (config.norm == NormKind::LayerNorm ? config.samples % 2 : 0);
  const std::size_t d = config.d_in;
  std::vector<double> offset(d), scale(d);
  for (std::size_t j = 0; j < d; ++j) {
    offset[j] = config.norm == NormKind::RmsNorm ? positive_offset(rng) : signed_offset(rng);
    scale[j] = std::pow(10.0, log_scale(rng));
  }

  MatrixD x(n, d);
  switch (config.norm) {
    case NormKind::None:
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) x(r, j) = scale[j] * (offset[j] + normal(rng));
      break;
    case NormKind::RmsNorm:
      for (std::size_t r = 0; r < n; ++r) {
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          x(r, j) = offset[j] + normal(rng);
          ss += x(r, j) * x(r, j);
        }
        const double rms = std::sqrt(ss / static_cast<double>(d));
        for (std::size_t j = 0; j < d; ++j) x(r, j) = scale[j] * x(r, j) / rms;
      }
      break;
    case NormKind::LayerNorm: {
      const std::size_t half = n / 2;
      MatrixD raw(half, d);
      std::vector<double> mean(d, 0.0);
      for (std::size_t r = 0; r < half; ++r)
        for (std::size_t j = 0; j < d; ++j) {
          raw(r, j) = scale[j] * (offset[j] + normal(rng));
          mean[j] += raw(r, j) / static_cast<double>(half);
        }
      for (std::size_t r = 0; r < half; ++r)
        for (std::size_t j = 0; j < d; ++j) {
          const auto v = static_cast<float>(raw(r, j) - mean[j]);
          x(2 * r, j) = v;
          x(2 * r + 1, j) = -v;
        }
      break;
    }
  }
  const MatrixF x1 = narrow(x);

  WeightLayer fc1{random_weights(rng, config.d_in, config.d_hidden), random_bias(rng, config.d_hidden),
                  config.norm == NormKind::LayerNorm};
  WeightLayer fc2{random_weights(rng, config.d_hidden, config.d_out), random_bias(rng, config.d_out), false};

  MatrixD h = affine(widen(x1), fc1);
  for (auto& v : h.data()) v = std::max(v, 0.0);

  ToyModel toy;
  toy.model.add_layer("fc1", fc1);
  toy.model.add_layer("fc2", fc2);
  toy.calib.put_matrix("fc1.calib", x1);
  toy.calib.put_matrix("fc2.calib", narrow(h));
  return toy;
}

MatrixD forward_mlp(const TensorContainer& model, const MatrixF& inputs) {
  const auto names = model.layer_names();
  MatrixD act = widen(inputs);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto layer = model.layer(names[i]);
    if (layer.input_dim() != act.cols())
      throw Error(ErrorCode::DimensionMismatch, "layer '" + names[i] + "' does not chain with its predecessor");
    act = affine(act, layer);
    if (i + 1 < names.size())
      for (auto& v : act.data()) v = std::max(v, 0.0);
  }
  return act;
}

const ComparisonCell& ComparisonTable::cell(CriterionTag criterion, std::string_view layer) const {
  auto it = std::find_if(cells.begin(), cells.end(),
                         [&](const auto& c) { return c.criterion == criterion && c.layer == layer; });
  if (it == cells.end())
    throw Error(ErrorCode::InvalidArgument, "no comparison cell for " + std::string(to_string(criterion)) + " / " +
                                                std::string(layer));
  return *it;
}

double ComparisonTable::fraction_at_most(CriterionTag a, CriterionTag b, std::string_view layer) const {
  const auto& ca = cell(a, layer);
  const auto& cb = cell(b, layer);
  if (ca.mse.empty()) return 0.0;
  std::size_t wins = 0;
  for (std::size_t s = 0; s < ca.mse.size(); ++s) wins += ca.mse[s] <= cb.mse[s];
  return static_cast<double>(wins) / static_cast<double>(ca.mse.size());
}

nlohmann::json ComparisonTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cells)
    rows.push_back({{"criterion", std::string(to_string(c.criterion))},
                    {"resolved", std::string(to_string(c.resolved))},
                    {"layer", c.layer},
                    {"mean_mse", c.mean_mse},
                    {"mse", c.mse}});
  nlohmann::json e2e = nlohmann::json::array();
  for (std::size_t i = 0; i < criteria.size(); ++i)
    e2e.push_back({{"criterion", std::string(to_string(criteria[i]))},
                   {"mean_mse", end_to_end_mean[i]},
                   {"mse", end_to_end[i]}});
  return {{"seeds", seeds}, {"layers", layers}, {"cells", std::move(rows)}, {"end_to_end", std::move(e2e)}};
}

std::string ComparisonTable::to_text() const {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"criterion"};
  for (const auto& l : layers) header.push_back(l + " mse");
  header.push_back("end-to-end mse");
  grid.push_back(std::move(header));
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::vector<std::string> row{std::string(to_string(criteria[i]))};
    for (const auto& l : layers) row.push_back(format_number(cell(criteria[i], l).mean_mse));
    row.push_back(format_number(end_to_end_mean[i]));
    grid.push_back(std::move(row));
  }
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += "  ";
      out += c == 0 ? row[c] + std::string(width[c] - row[c].size(), ' ')
                    : std::string(width[c] - row[c].size(), ' ') + row[c];
    }
    out += '\n';
  }
  return out;
}

ComparisonTable run_comparison(const ComparisonConfig& config) {
  if (config.criteria.size() < 2) throw Error(ErrorCode::InvalidArgument, "a comparison needs at least two criteria");
  if (config.seeds == 0) throw Error(ErrorCode::InvalidArgument, "a comparison needs at least one seed");
  for (const auto& c : config.criteria) c.validate();

  const std::size_t ncrit = config.criteria.size();
  struct SeedResult {
    std::vector<std::vector<double>> layer_mse;  // [criterion][layer]
    std::vector<CriterionTag> resolved_fc;       // [criterion * layers + layer]
    std::vector<double> e2e;                     // [criterion]
    std::vector<std::string> layers;
  };
  std::vector<SeedResult> per_seed(config.seeds);

  parallel_for(config.seeds, config.threads, [&](std::size_t s) {
    const std::uint64_t seed = derive_seed(config.base_seed, s);
    const ToyModel toy = gen_toy_mlp(seed, config.model);
    const MatrixF inputs = toy.calib.matrix("fc1.calib");
    const std::size_t held = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(inputs.rows())));
    const MatrixF eval_inputs = held > 0 ? inputs.slice_rows(inputs.rows() - held, held) : inputs;
    const MatrixD dense_out = forward_mlp(toy.model, eval_inputs);

    auto& res = per_seed[s];
    res.layers = toy.model.layer_names();
    for (const auto& criterion : config.criteria) {
      PruneOptions options;
      options.criterion = criterion;
      options.sparsity = config.sparsity;
      options.bias_update = config.bias_update;
      options.holdout_fraction = config.holdout_fraction;
      const auto pruned = prune_container(toy.model, toy.calib, options);
      std::vector<double> mse;
      for (const auto& rep : pruned.report.layers) {
        mse.push_back(rep.reconstruction_mse);
        res.resolved_fc.push_back(rep.criterion);
      }
      res.layer_mse.push_back(std::move(mse));
      res.e2e.push_back(mean_squared_difference(dense_out, forward_mlp(pruned.model, eval_inputs)));
    }
  });

  ComparisonTable table;
  table.layers = per_seed.front().layers;
  for (const auto& c : config.criteria) table.criteria.push_back(c.tag);
  for (std::size_t s = 0; s < config.seeds; ++s) table.seeds.push_back(derive_seed(config.base_seed, s));
  const std::size_t nlayers = table.layers.size();
  table.end_to_end.assign(ncrit, {});
  table.end_to_end_mean.assign(ncrit, 0.0);
  for (std::size_t c = 0; c < ncrit; ++c) {
    for (std::size_t l = 0; l < nlayers; ++l) {
      ComparisonCell cell;
      cell.criterion = table.criteria[c];
      cell.resolved = per_seed.front().resolved_fc[c * nlayers + l];
      cell.layer = table.layers[l];
      for (const auto& res : per_seed) cell.mse.push_back(res.layer_mse[c][l]);
      double sum = 0.0;
      for (double v : cell.mse) sum += v;
      cell.mean_mse = sum / static_cast<double>(cell.mse.size());
      table.cells.push_back(std::move(cell));
    }
    double sum = 0.0;
    for (const auto& res : per_seed) {
      table.end_to_end[c].push_back(res.e2e[c]);
      sum += res.e2e[c];
    }
    table.end_to_end_mean[c] = sum / static_cast<double>(config.seeds);
  }
  return table;
}

}  // namespace prunekit
