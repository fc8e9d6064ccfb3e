#pragma once

// CSV and JSON serialisation for sequences, smoothing results and beliefs.
// Every CSV has a header row.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvmc/baselines.hpp"
#include "pvmc/smoothing.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

inline constexpr int kSchemaVersion = 1;

/// One row per time step, columns `prefix`0..`prefix`{d-1}.
void write_series_csv(const std::filesystem::path& path, std::span<const double> values,
                      std::size_t steps, std::size_t dim, const std::string& prefix);
void write_observations_csv(const std::filesystem::path& path, const ObservationSequence& obs);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& xs);

/// Reads a numeric CSV with a header row; throws std::runtime_error on ragged
/// rows or unparsable cells.
ObservationSequence read_observations_csv(const std::filesystem::path& path);

/// weights.csv (t, w0..w{N-1}, normalised weights in the linear domain),
/// particles.csv (t, n, x0..) and summary.json.
void write_smoothing_result(const std::filesystem::path& dir, const SmoothingResult& result,
                            std::uint64_t seed);

/// t, m0..m{d-1}, c0_0..c{d-1}_{d-1} (row-major covariance).
void write_beliefs_csv(const std::filesystem::path& path, const std::vector<GaussianBelief>& beliefs);

}  // namespace pvmc
