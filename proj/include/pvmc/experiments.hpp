#pragma once

// Experiment drivers behind the command-line tool: configuration, the
// linear-Gaussian benchmark, oracle validation, scan benchmarks and the ELBO
// ordering study.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pvmc/baselines.hpp"
#include "pvmc/elbo.hpp"
#include "pvmc/proposal.hpp"
#include "pvmc/scan.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

enum class ProposalChoice { kalman, learned, prior };
enum class Method { pvmc, kalman, rts, bootstrap };

std::string to_string(ProposalChoice p);
std::string to_string(Method m);
ProposalChoice parse_proposal_choice(std::string_view s);
Method parse_method(std::string_view s);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t d_x = 5;
  std::size_t d_y = 5;
  std::size_t T = 501;
  std::size_t N = 64;
  /// Number of simulated trajectories (or Monte Carlo replications).
  std::size_t replications = 40;
  ProposalChoice proposal_kind = ProposalChoice::kalman;
  std::filesystem::path output_dir = "pvmc-out";
  Method method = Method::pvmc;
  /// Independent reruns of the method on the same trajectories.
  std::size_t repeats = 3;
  /// Time step at which the KSD is evaluated; clipped to T.
  std::size_t ksd_time = 249;

  /// Throws PreconditionError on zero counts or d_y > d_x.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults from `base`; unknown keys throw.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
/// Sets one field from its textual value, e.g. ("N", "128").
void apply_override(ExperimentConfig& c, std::string_view key, std::string_view value);

// ---------------------------------------------------------------------------
// Linear-Gaussian benchmark

struct TrajectoryMetrics {
  std::string method;
  std::size_t trajectory = 0;
  std::size_t repeat = 0;
  double e_x = 0.0;       ///< mean squared posterior-mean error
  double e_x_norm = 0.0;  ///< mean posterior-mean error norm
  double ksd = 0.0;
  double w2 = 0.0;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct LgExperimentReport {
  std::vector<TrajectoryMetrics> rows;
  nlohmann::json summary;
};

/// Affine proposal fitted on sequences simulated independently of the test data.
ProposalSpec train_affine_proposal(const LinearGaussianSSM& lg, std::uint64_t seed,
                                   std::size_t train_horizon, std::size_t steps);

/// Metrics of one method run on one simulated trajectory.
TrajectoryMetrics evaluate_trajectory(const ExperimentConfig& c, const LinearGaussianSSM& lg,
                                      const ObservationSequence& obs,
                                      const std::optional<ProposalSpec>& learned, Rng& rng);

LgExperimentReport run_lg_experiment(const ExperimentConfig& c);
/// results.csv and summary.json.
void write_lg_experiment(const LgExperimentReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Validation

struct GridSpec {
  std::size_t n_min = 1, n_max = 4;
  std::size_t t_min = 0, t_max = 5;
  std::size_t size() const { return (n_max - n_min + 1) * (t_max - t_min + 1); }
};
/// Parses "N=a..b,T=c..d".
GridSpec parse_grid(std::string_view text);

struct ValidateOptions {
  GridSpec grid;
  std::size_t instances_per_point = 5;
  bool corrupt_scan = false;
  std::uint64_t seed = 0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;  ///< largest observed error for the check
  double tolerance = 0.0;
  std::string detail;
};

struct ValidateReport {
  std::vector<CheckResult> checks;
  nlohmann::json instances = nlohmann::json::array();
  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Random small linear-Gaussian model with d_x, d_y in {1, 2}.
LinearGaussianSSM random_lg_instance(Rng& rng, std::size_t d_x, std::size_t d_y);
/// Diagonal proposal around the prior marginals with random offsets.
ProposalSpec random_diagonal_proposal(const LinearGaussianSSM& lg, std::size_t steps, Rng& rng);

/// Largest relative error between elbo_gradient and central differences of
/// log L_hat (step 1e-5, same noise) over coordinates with |grad| > 1e-6.
double gradient_fd_error(const LinearGaussianSSM& lg, const ProposalSpec& prop,
                         const ObservationSequence& obs, const ParticleNoise& noise);

ValidateReport run_validate(const ValidateOptions& options);

// ---------------------------------------------------------------------------
// Scan benchmark

struct BenchRow {
  std::size_t T = 0;
  std::size_t N = 0;
  std::size_t elements = 0;
  std::size_t depth = 0;
  std::size_t depth_bound = 0;
  std::size_t rounds = 0;
  std::size_t combine_invocations = 0;
  double wall_time_seconds = 0.0;
  bool within_bounds = false;
};

std::vector<BenchRow> run_bench(const ExperimentConfig& c, const std::vector<std::size_t>& horizons);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// ELBO ordering

struct HierarchyReport {
  nlohmann::json json;
  bool all_hold = false;
};

/// Mean ELBOs for N in {1, 2, 4, 8} over c.replications particle draws on one
/// simulated sequence, compared with the exact log-likelihood.
HierarchyReport run_elbo_hierarchy(const ExperimentConfig& c);

}  // namespace pvmc
