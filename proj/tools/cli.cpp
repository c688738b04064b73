// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prunekit/calib_stats.hpp"
#include "prunekit/error.hpp"
#include "prunekit/harness.hpp"
#include "prunekit/oracle.hpp"
#include "prunekit/parallel.hpp"
#include "prunekit/pruner.hpp"

namespace prunekit::cli {

namespace {

using nlohmann::json;

struct CommonFlags {
  std::uint64_t seed = 7;
  std::string out;
  std::string report;
  std::string threads;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--seed", f.seed, "RNG seed");
  auto* out = cmd->add_option("--out", f.out, "Output path");
  if (out_required) out->required();
  cmd->add_option("--report", f.report, "Write a JSON report to this path");
  cmd->add_option("--threads", f.threads, "Worker cap: a positive integer or 'auto'")
      ->check([](const std::string& s) -> std::string {
        try {
          resolve_threads(s);
          return {};
        } catch (const Error& e) {
          return e.what();
        }
      });
}

unsigned threads_of(const CommonFlags& f) {
  if (!f.threads.empty()) return resolve_threads(f.threads);
  if (const char* env = std::getenv("PRUNEKIT_THREADS"); env && *env) return resolve_threads(env);
  return resolve_threads("auto");
}

CLI::Validator criterion_validator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        return parse_criterion(s) ? std::string{} : "unknown criterion '" + s + "'";
      },
      "CRITERION");
}

CLI::Validator sparsity_validator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          parse_sparsity(s);
          return {};
        } catch (const Error& e) {
          return e.what();
        }
      },
      "SPARSITY");
}

std::optional<bool> parse_switch(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  return std::nullopt;  // auto
}

Damping parse_damping(const std::string& s) {
  if (s == "auto") return Damping{0.0, true};
  return Damping{std::stod(s), false};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
}

std::vector<std::string> calib_layers(const TensorContainer& calib) {
  constexpr std::string_view suffix = ".calib";
  std::vector<std::string> names;
  for (const auto& r : calib.records())
    if (r.name.size() > suffix.size() && r.name.ends_with(suffix))
      names.push_back(r.name.substr(0, r.name.size() - suffix.size()));
  return names;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"prunekit: post-training pruning criteria, statistics and verification"};
  app.name("prunekit");
  app.require_subcommand(1);

  // gen
  CommonFlags gen_flags;
  std::vector<std::size_t> gen_dims{16, 32, 8};
  std::string gen_norm = "layernorm";
  std::size_t gen_samples = 1000;
  std::string gen_calib_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic two-layer model and its calibration activations");
  add_common(gen, gen_flags, true);
  gen->add_option("--dims", gen_dims, "d_in,d_hidden,d_out")->delimiter(',')->expected(3);
  gen->add_option("--norm", gen_norm, "layernorm | rmsnorm | none")->check(CLI::IsMember({"layernorm", "rmsnorm", "none"}));
  gen->add_option("--samples", gen_samples, "Calibration rows")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
  gen->add_option("--calib-out", gen_calib_out, "Calibration container path")->required();

  // stats
  CommonFlags stats_flags;
  std::string stats_calib;
  double stats_holdout = 0.0;
  auto* stats = app.add_subcommand("stats", "Accumulate per-feature calibration statistics");
  add_common(stats, stats_flags, true);
  stats->add_option("--calib", stats_calib, "Calibration container")->required();
  stats->add_option("--holdout", stats_holdout, "Fraction of trailing rows to skip")->check(CLI::Range(0.0, 0.5));

  // prune
  CommonFlags prune_flags;
  std::string prune_model, prune_calib, prune_criterion = "stade-w", prune_sparsity = "0.5";
  std::string prune_bias = "auto", prune_damping = "auto";
  double prune_holdout = 0.2, prune_threshold = 0.1;
  auto* prune = app.add_subcommand("prune", "Prune every layer of a model container");
  add_common(prune, prune_flags, true);
  prune->add_option("--model", prune_model, "Model container")->required();
  prune->add_option("--calib", prune_calib, "Calibration container")->required();
  prune->add_option("--criterion", prune_criterion)->check(criterion_validator());
  prune->add_option("--sparsity", prune_sparsity, "Ratio such as 0.5, or n:m such as 2:4")->check(sparsity_validator());
  prune->add_option("--bias-update", prune_bias)->check(CLI::IsMember({"on", "off", "auto"}));
  prune->add_option("--damping", prune_damping, "sparsegpt-score damping: a number or 'auto'")
      ->check(CLI::Number | CLI::IsMember({"auto"}));
  prune->add_option("--holdout", prune_holdout)->check(CLI::Range(0.0, 0.5));
  prune->add_option("--classify-threshold", prune_threshold)->check(CLI::PositiveNumber);

  // verify
  CommonFlags verify_flags;
  std::string verify_criterion, verify_data = "auto", verify_bias = "auto";
  std::size_t verify_trials = 1000;
  auto* verify = app.add_subcommand("verify", "Check a criterion against the brute-force oracle");
  add_common(verify, verify_flags, false);
  verify->add_option("--criterion", verify_criterion)->required()->check(criterion_validator());
  verify->add_option("--trials", verify_trials)->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
  verify->add_option("--data", verify_data, "auto | uncentered | centered | offset")
      ->check(CLI::IsMember({"auto", "uncentered", "centered", "offset"}));
  verify->add_option("--bias", verify_bias, "Oracle may refit the bias: auto | on | off")
      ->check(CLI::IsMember({"on", "off", "auto"}));

  // bench
  CommonFlags bench_flags;
  bench_flags.seed = 1;
  std::vector<std::string> bench_criteria{"magnitude", "wanda", "stade"};
  std::string bench_sparsity = "0.5", bench_norm = "none", bench_bias = "auto";
  std::vector<std::size_t> bench_dims{16, 32, 8};
  std::size_t bench_seeds = 20, bench_samples = 1000;
  double bench_holdout = 0.2;
  auto* bench = app.add_subcommand("bench", "Compare criteria on synthetic toy models");
  add_common(bench, bench_flags, false);
  bench->add_option("--criteria", bench_criteria)->delimiter(',')->check(criterion_validator());
  bench->add_option("--sparsity", bench_sparsity)->check(sparsity_validator());
  bench->add_option("--seeds", bench_seeds)->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  bench->add_option("--dims", bench_dims, "d_in,d_hidden,d_out")->delimiter(',')->expected(3);
  bench->add_option("--norm", bench_norm)->check(CLI::IsMember({"layernorm", "rmsnorm", "none"}));
  bench->add_option("--samples", bench_samples)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
  bench->add_option("--holdout", bench_holdout)->check(CLI::Range(0.0, 0.5));
  bench->add_option("--bias-update", bench_bias)->check(CLI::IsMember({"on", "off", "auto"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*gen) {
      const auto norm = *parse_norm(gen_norm);
      const auto toy = gen_toy_mlp(gen_flags.seed, {gen_dims[0], gen_dims[1], gen_dims[2], norm, gen_samples});
      save_container(toy.model, gen_flags.out);
      save_container(toy.calib, gen_calib_out);
      json summary{{"command", "gen"}, {"model", gen_flags.out}, {"calib", gen_calib_out},
                   {"norm", gen_norm},  {"seed", gen_flags.seed}, {"layers", toy.model.layer_names()}};
      if (!gen_flags.report.empty()) write_json(gen_flags.report, summary);
      out << summary.dump() << '\n';
      return kOk;
    }

    if (*stats) {
      const auto calib = load_container(stats_calib);
      TensorContainer result;
      json layers = json::array();
      for (const auto& name : calib_layers(calib)) {
        const MatrixF rows = calib.matrix(name + ".calib");
        const auto held = static_cast<std::size_t>(stats_holdout * static_cast<double>(rows.rows()));
        ColumnStats s = stats_init(rows.cols());
        stats_update(s, rows.slice_rows(0, rows.rows() - held));
        put_stats(result, name, s);
        layers.push_back({{"layer", name}, {"rows", s.n}, {"features", s.dim()}});
      }
      save_container(result, stats_flags.out);
      json summary{{"command", "stats"}, {"out", stats_flags.out}, {"layers", layers}};
      if (!stats_flags.report.empty()) write_json(stats_flags.report, summary);
      out << summary.dump() << '\n';
      return kOk;
    }

    if (*prune) {
      PruneOptions options;
      options.criterion = Criterion::make(*parse_criterion(prune_criterion));
      if (options.criterion.damping) options.criterion.damping = parse_damping(prune_damping);
      options.sparsity = parse_sparsity(prune_sparsity);
      options.bias_update = parse_switch(prune_bias);
      options.holdout_fraction = prune_holdout;
      options.centered_threshold = prune_threshold;
      options.threads = threads_of(prune_flags);
      const auto model = load_container(prune_model);
      const auto calib = load_container(prune_calib);
      const auto result = prune_container(model, calib, options);
      save_container(result.model, prune_flags.out);
      for (const auto& r : result.report.layers) {
        err << r.layer << ": " << to_string(r.criterion) << " sparsity=" << r.achieved_sparsity
            << " mse=" << r.reconstruction_mse << " bias_delta=" << r.bias_delta_norm << '\n';
        if (!r.warning.empty()) err << r.layer << ": warning: " << r.warning << '\n';
      }
      const json report = result.report.to_json();
      if (!prune_flags.report.empty()) write_json(prune_flags.report, report);
      json summary{{"command", "prune"}, {"out", prune_flags.out}, {"criterion", prune_criterion},
                   {"sparsity", options.sparsity.to_string()}, {"layers", report["layers"]}};
      out << summary.dump() << '\n';
      return kOk;
    }

    if (*verify) {
      const auto tag = *parse_criterion(verify_criterion);
      OptimalityOptions options;
      options.trials = verify_trials;
      options.seed = verify_flags.seed;
      if (verify_data != "auto") options.data = parse_instance_kind(verify_data);
      options.allow_bias = parse_switch(verify_bias);
      options.threads = threads_of(verify_flags);
      const auto report = check_criterion_optimality(tag, options);
      const json full = report.to_json(true);
      if (!verify_flags.report.empty()) write_json(verify_flags.report, full);
      if (!report.all_match()) {
        if (!verify_flags.out.empty()) write_json(verify_flags.out, full["counterexample"]);
        err << "counterexample: " << full["counterexample"].dump() << '\n';
      }
      out << report.to_json(false).dump() << '\n';
      return report.all_match() ? kOk : kValidationFailure;
    }

    if (*bench) {
      ComparisonConfig config;
      config.model = {bench_dims[0], bench_dims[1], bench_dims[2], *parse_norm(bench_norm), bench_samples};
      for (const auto& c : bench_criteria) config.criteria.push_back(Criterion::make(*parse_criterion(c)));
      config.sparsity = parse_sparsity(bench_sparsity);
      config.bias_update = parse_switch(bench_bias);
      config.seeds = bench_seeds;
      config.base_seed = bench_flags.seed;
      config.holdout_fraction = bench_holdout;
      config.threads = threads_of(bench_flags);
      const auto table = run_comparison(config);
      const json j = table.to_json();
      if (!bench_flags.out.empty()) write_json(bench_flags.out, j);
      if (!bench_flags.report.empty()) write_json(bench_flags.report, j);
      out << table.to_text();
      json summary{{"command", "bench"}, {"seeds", bench_seeds}, {"sparsity", config.sparsity.to_string()},
                   {"end_to_end", j["end_to_end"]}};
      for (auto& e : summary["end_to_end"]) e.erase("mse");
      out << summary.dump() << '\n';
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const bool usage = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::InvalidRatio ||
                       e.code() == ErrorCode::IndivisibleGroup;
    return usage ? kUsageError : kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
  return kUsageError;
}

}  // namespace prunekit::cli
