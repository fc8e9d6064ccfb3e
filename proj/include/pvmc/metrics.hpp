#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pvmc/gaussian.hpp"
#include "pvmc/logspace.hpp"

namespace pvmc {

/// N points (rows) with normalised log-weights.
struct WeightedSample {
  Matrix points;
  std::vector<LogValue> log_w;

  /// Throws unless shapes agree and log_w log-sum-exps to 0 within 1e-8.
  void validate() const;
  static WeightedSample uniform(Matrix points);
};

/// Mean over rows t of ||estimate_t - exact_t||.
double posterior_mean_error(const Matrix& estimate, const Matrix& exact);
/// Mean over rows t of ||estimate_t - exact_t||^2.
double posterior_mean_squared_error(const Matrix& estimate, const Matrix& exact);

/// Squared 2-Wasserstein distance between N(m1, S1) and N(m2, S2):
/// ||m1 - m2||^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).
double gaussian_w2(const Vector& m1, const Matrix& S1, const Vector& m2, const Matrix& S2);

using ScoreFunction = std::function<Vector(const Vector&)>;

/// Weighted V-statistic of the Langevin-Stein kernel built on
/// k(x, x') = exp(-||x - x'||^2 / (2 l^2)).
double ksd(const WeightedSample& sample, const ScoreFunction& score, double bandwidth);

/// sqrt of the mean over sets of the squared median pairwise distance.
double median_heuristic_bandwidth(std::span<const Matrix> sets);

/// 1 / sum_i w_i^2 for normalised log-weights.
double effective_sample_size(std::span<const LogValue> log_w);

}  // namespace pvmc
