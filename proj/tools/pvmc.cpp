// pvmc: command-line driver for smoothing, validation and the benchmark experiments.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pvmc/baselines.hpp"
#include "pvmc/errors.hpp"
#include "pvmc/experiments.hpp"
#include "pvmc/io.hpp"
#include "pvmc/smoothing.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

const char* const kFields[] = {"seed",          "d_x",    "d_y",    "T",       "N",       "replications",
                               "proposal_kind", "method", "repeats", "ksd_time", "output_dir"};

// Config file and per-field flags shared by every subcommand.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> values = std::vector<std::string>(std::size(kFields));

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file");
    for (std::size_t k = 0; k < std::size(kFields); ++k) {
      cmd->add_option(std::string("--") + kFields[k], values[k], std::string("override ") + kFields[k]);
    }
    cmd->add_option("--out", values[10], "output directory");
  }

  pvmc::ExperimentConfig resolve(pvmc::ExperimentConfig base, CLI::App* cmd) const {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw pvmc::PreconditionError("cannot read config file " + config_path);
      base = pvmc::config_from_json(nlohmann::json::parse(in), base);
    }
    for (std::size_t k = 0; k < std::size(kFields); ++k) {
      const bool given = cmd->count(std::string("--") + kFields[k]) > 0 ||
                         (k == 10 && cmd->count("--out") > 0);
      if (given) pvmc::apply_override(base, kFields[k], values[k]);
    }
    base.validate();
    return base;
  }
};

int cmd_validate(const pvmc::ExperimentConfig& c, const std::string& grid, std::size_t instances,
                 bool corrupt) {
  pvmc::ValidateOptions options;
  options.grid = pvmc::parse_grid(grid);
  options.instances_per_point = instances;
  options.corrupt_scan = corrupt;
  options.seed = c.seed;
  const pvmc::ValidateReport report = pvmc::run_validate(options);
  std::filesystem::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "validate_report.json") << report.to_json().dump(2) << '\n';
  for (const auto& check : report.checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << "  worst=" << check.worst
              << " tol=" << check.tolerance << '\n';
  }
  std::cout << report.instances.size() << " grid instances\n";
  return report.all_passed() ? kExitOk : kExitCheckFailed;
}

int cmd_lg_experiment(const pvmc::ExperimentConfig& c) {
  const pvmc::LgExperimentReport report = pvmc::run_lg_experiment(c);
  pvmc::write_lg_experiment(report, c.output_dir);
  std::cout << report.summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_bench(const pvmc::ExperimentConfig& c, std::size_t t_min, std::size_t t_max) {
  std::vector<std::size_t> horizons;
  for (std::size_t T = t_min; T <= t_max; T *= 2) horizons.push_back(T);
  const auto rows = pvmc::run_bench(c, horizons);
  pvmc::write_bench_csv(rows, c.output_dir / "bench.csv");
  bool ok = true;
  for (const auto& r : rows) {
    std::cout << "T=" << r.T << " elements=" << r.elements << " depth=" << r.depth << "/"
              << r.depth_bound << " combines=" << r.combine_invocations << " time="
              << r.wall_time_seconds << "s\n";
    ok = ok && r.within_bounds;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_elbo_hierarchy(const pvmc::ExperimentConfig& c) {
  const pvmc::HierarchyReport report = pvmc::run_elbo_hierarchy(c);
  std::filesystem::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "hierarchy.json") << report.json.dump(2) << '\n';
  for (const auto& q : report.json["inequalities"]) {
    std::cout << (q["holds"].get<bool>() ? "holds  " : "FAILS  ") << q["name"].get<std::string>()
              << "  diff=" << q["difference"].get<double>() << " se=" << q["se"].get<double>() << '\n';
  }
  return report.all_hold ? kExitOk : kExitCheckFailed;
}

int cmd_smooth(pvmc::ExperimentConfig c, const std::string& obs_path, bool dims_given) {
  const pvmc::ObservationSequence obs = pvmc::read_observations_csv(obs_path);
  if (!dims_given) c.d_x = c.d_y = obs.dim();
  c.validate();
  if (obs.dim() != c.d_y) throw pvmc::PreconditionError("observation file dimension differs from d_y");
  const pvmc::LinearGaussianSSM lg = pvmc::lg_build(c.d_x, c.d_y);
  const pvmc::FilterOutput filter = pvmc::kalman_filter(lg, obs);
  switch (c.method) {
    case pvmc::Method::kalman:
      pvmc::write_beliefs_csv(c.output_dir / "beliefs.csv", filter.filtered);
      return kExitOk;
    case pvmc::Method::rts:
      pvmc::write_beliefs_csv(c.output_dir / "beliefs.csv", pvmc::rts_smooth(lg, filter));
      return kExitOk;
    case pvmc::Method::bootstrap:
      throw pvmc::PreconditionError("smooth: method must be pvmc, kalman or rts");
    case pvmc::Method::pvmc:
      break;
  }
  pvmc::ProposalSpec prop = pvmc::kalman_proposal(filter);
  if (c.proposal_kind == pvmc::ProposalChoice::prior) {
    prop = pvmc::prior_marginal_proposal(lg, obs.steps());
  } else if (c.proposal_kind == pvmc::ProposalChoice::learned) {
    prop = pvmc::train_affine_proposal(lg, pvmc::mix_seed(c.seed, 0x7ea1), std::min<std::size_t>(obs.horizon(), 50), 500);
  }
  pvmc::Rng rng(c.seed);
  const pvmc::SmoothingResult r = pvmc::pvmc_smooth(pvmc::lg_as_ssm(lg), prop, obs, c.N, rng);
  pvmc::write_smoothing_result(c.output_dir, r, c.seed);
  std::cout << "log_L_hat=" << r.log_L_hat << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-in-time importance smoothing for state-space models"};
  app.require_subcommand(1);

  ConfigFlags validate_flags, lg_flags, bench_flags, hierarchy_flags, smooth_flags;

  auto* validate = app.add_subcommand("validate", "oracle, invariant and gradient checks");
  validate_flags.attach(validate);
  std::string grid = "N=1..4,T=0..5";
  std::size_t instances = 5;
  bool corrupt = false;
  validate->add_option("--grid", grid, "instance grid, e.g. N=1..4,T=0..5");
  validate->add_option("--instances", instances, "random instances per grid point")->check(CLI::PositiveNumber);
  validate->add_flag("--corrupt-scan", corrupt, "inject a faulty combine into the scan");

  auto* lg = app.add_subcommand("lg-experiment", "linear-Gaussian benchmark");
  lg_flags.attach(lg);

  auto* bench = app.add_subcommand("bench", "scan structure and timing over T");
  bench_flags.attach(bench);
  std::size_t t_min = 32, t_max = 4096;
  bench->add_option("--t-min", t_min)->check(CLI::PositiveNumber);
  bench->add_option("--t-max", t_max)->check(CLI::PositiveNumber);

  auto* hierarchy = app.add_subcommand("elbo-hierarchy", "Monte Carlo ELBO ordering study");
  hierarchy_flags.attach(hierarchy);

  auto* smooth = app.add_subcommand("smooth", "smooth one observation CSV");
  smooth_flags.attach(smooth);
  std::string obs_path;
  smooth->add_option("--obs", obs_path, "observation CSV (header row, one row per step)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) {
      pvmc::ExperimentConfig base;
      base.output_dir = "pvmc-validate";
      return cmd_validate(validate_flags.resolve(base, validate), grid, instances, corrupt);
    }
    if (*lg) return cmd_lg_experiment(lg_flags.resolve({}, lg));
    if (*bench) {
      pvmc::ExperimentConfig base;
      base.d_x = base.d_y = 1;
      base.N = 8;
      base.output_dir = "pvmc-bench";
      return cmd_bench(bench_flags.resolve(base, bench), t_min, t_max);
    }
    if (*hierarchy) {
      pvmc::ExperimentConfig base;
      base.d_x = base.d_y = 1;
      base.T = 4;
      base.replications = 10000;
      base.output_dir = "pvmc-hierarchy";
      return cmd_elbo_hierarchy(hierarchy_flags.resolve(base, hierarchy));
    }
    if (*smooth) {
      pvmc::ExperimentConfig base;
      base.output_dir = "pvmc-smooth";
      const bool dims_given = smooth->count("--d_x") > 0 || smooth->count("--d_y") > 0 ||
                              !smooth_flags.config_path.empty();
      pvmc::ExperimentConfig c = smooth_flags.resolve(base, smooth);
      return cmd_smooth(c, obs_path, dims_given);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
