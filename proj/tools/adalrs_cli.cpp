// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run / grid / sweep / compare / density.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "adalrs/config.hpp"
#include "adalrs/errors.hpp"
#include "adalrs/harness.hpp"
#include "adalrs/log.hpp"
#include "adalrs/report_io.hpp"
#include "adalrs/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitFailure = 3;

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    const std::string item = text.substr(start, end - start);
    T value{};
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw adalrs::ConfigError(key, "bad list entry '" + item + "'");
    }
    out.push_back(value);
    start = end + 1;
  }
  return out;
}

adalrs::RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets) {
  auto map = adalrs::load_config_file(path);
  for (const auto& s : sets) adalrs::apply_override(map, s);
  return adalrs::run_config_from_map(map);
}

void print_report(const adalrs::RunReport& r) {
  nlohmann::json j = nlohmann::json::parse(adalrs::report_to_json(r));
  j.erase("config");
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  adalrs::init_logging_from_env();

  CLI::App app{"AdaLRS learning-rate search harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Train one configuration and write its trace");
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--seed", seed, "Run seed (overrides seed / oracle.seed)");
  run->add_option("--out", out_dir, "Output directory for trace.csv, events.json, report.json");
  run->add_option("--set", sets, "Override a config key: --set adalrs.alpha=2");

  auto* grid = app.add_subcommand("grid", "Constant-LR grid search");
  std::string lrs_text;
  std::int64_t steps = 0;
  std::int64_t tail = 100;
  grid->add_option("--config", config_path)->required();
  grid->add_option("--lrs", lrs_text, "Comma-separated learning rates")->required();
  grid->add_option("--steps", steps)->required();
  grid->add_option("--tail", tail, "Steps averaged for the final loss");
  grid->add_option("--set", sets);

  auto* sweep = app.add_subcommand("sweep", "Loss-vs-LR convexity sweep");
  std::string snaps_text;
  std::int64_t velocity_window = 50;
  std::size_t bins = 8;
  std::string table_out;
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--lrs", lrs_text)->required();
  sweep->add_option("--snapshots", snaps_text, "Comma-separated snapshot steps")->required();
  sweep->add_option("--steps", steps, "Run length (default: last snapshot + 1)");
  sweep->add_option("--velocity-window", velocity_window);
  sweep->add_option("--bins", bins, "Loss-level bins for the velocity table");
  sweep->add_option("--out", table_out, "Write the gnuplot table here instead of stdout");
  sweep->add_option("--set", sets);

  auto* compare = app.add_subcommand("compare", "Compare two run reports");
  std::string report_a;
  std::string report_b;
  compare->add_option("report_a", report_a, "report.json of run A")->required();
  compare->add_option("report_b", report_b, "report.json of run B")->required();

  auto* density = app.add_subcommand("density", "Search alpha^m beta^-n close to a target");
  double alpha = 0.0;
  double beta = 0.0;
  double target = 0.0;
  double eps = 0.0;
  std::int64_t max_exponent = 64;
  density->add_option("--alpha", alpha)->required();
  density->add_option("--beta", beta)->required();
  density->add_option("--target", target)->required();
  density->add_option("--eps", eps, "Relative tolerance")->required();
  density->add_option("--max-exponent", max_exponent);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      auto cfg = load_run_config(config_path, sets);
      if (seed) {
        cfg.seed = *seed;
        cfg.oracle.seed = *seed;
      }
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      adalrs::log_info("run: " + std::to_string(cfg.scheduler.total_steps) + " steps, " +
                       (cfg.adalrs ? "adalrs" : "baseline"));
      const auto report = adalrs::run_experiment(cfg);
      print_report(report);
      if (report.diverged) {
        adalrs::log_error("run diverged at step " + std::to_string(*report.diverged_step));
        return kExitDiverged;
      }
      return kExitOk;
    }
    if (*grid) {
      const auto cfg = load_run_config(config_path, sets);
      const auto lrs = parse_list<double>("--lrs", lrs_text);
      const auto result =
          adalrs::grid_search(adalrs::make_factory(cfg.oracle), lrs, steps, tail);
      nlohmann::json j;
      j["best_lr"] = result.best_lr;
      for (const auto& cell : result.cells) {
        j["cells"].push_back({{"lr", cell.lr},
                              {"final_loss", cell.final_loss ? nlohmann::json(*cell.final_loss)
                                                             : nlohmann::json(nullptr)}});
      }
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }
    if (*sweep) {
      const auto cfg = load_run_config(config_path, sets);
      const auto lrs = parse_list<double>("--lrs", lrs_text);
      adalrs::SweepOptions opts;
      opts.snapshots = parse_list<std::int64_t>("--snapshots", snaps_text);
      opts.steps = steps;
      opts.velocity_window = velocity_window;
      opts.level_bins = bins;
      const auto table = adalrs::convexity_sweep(cfg.oracle, lrs, opts);
      if (table_out.empty()) {
        adalrs::write_sweep_table(std::cout, table);
      } else {
        std::ofstream out(table_out);
        if (!out) throw adalrs::ConfigError("--out", "cannot write '" + table_out + "'");
        adalrs::write_sweep_table(out, table);
      }
      return kExitOk;
    }
    if (*compare) {
      const auto a = adalrs::load_report(report_a);
      const auto b = adalrs::load_report(report_b);
      const auto summary = adalrs::compare_runs(a, b);
      nlohmann::json j;
      j["final_loss_delta"] = summary.final_loss_delta;
      j["crossing_step"] = summary.crossing_step ? nlohmann::json(*summary.crossing_step)
                                                 : nlohmann::json(nullptr);
      j["acceleration_ratio"] = summary.acceleration_ratio
                                    ? nlohmann::json(*summary.acceleration_ratio)
                                    : nlohmann::json(nullptr);
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }
    if (*density) {
      const auto r = adalrs::density_approximate(alpha, beta, target, eps, max_exponent);
      nlohmann::json j{{"m", r.m},
                       {"n", r.n},
                       {"achieved", r.achieved},
                       {"relative_error", r.relative_error}};
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const adalrs::ConfigError& e) {
    adalrs::log_error(std::string("config error: ") + e.what());
    return kExitConfig;
  } catch (const adalrs::InputError& e) {
    adalrs::log_error(std::string("input error: ") + e.what());
    return kExitConfig;
  } catch (const adalrs::NotFoundError& e) {
    adalrs::log_error(e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    adalrs::log_error(std::string("error: ") + e.what());
    return kExitFailure;
  }
  return kExitOk;
}
