#pragma once

// Reference methods: exact Kalman filtering and RTS smoothing for linear-Gaussian
// models, and a bootstrap particle filter for any SSMSpec.

#include <cstddef>
#include <vector>

#include "pvmc/gaussian.hpp"
#include "pvmc/logspace.hpp"
#include "pvmc/proposal.hpp"
#include "pvmc/rng.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

struct FilterOutput {
  std::vector<GaussianBelief> filtered;   ///< m_{t|t}, P_{t|t}
  std::vector<GaussianBelief> predicted;  ///< m_{t|t-1}, P_{t|t-1}; the prior at t = 0
  double log_likelihood = 0.0;            ///< log p(y_{0:T})
};

/// Predict/update recursion with Joseph-form covariance updates. Throws
/// NumericalError when an innovation covariance is not positive definite.
FilterOutput kalman_filter(const LinearGaussianSSM& lg, const ObservationSequence& obs);

/// Rauch-Tung-Striebel backward pass. The last belief is the filtering belief.
std::vector<GaussianBelief> rts_smooth(const LinearGaussianSSM& lg, const FilterOutput& filter);

struct ParticleFilterOutput {
  /// particles[t] is N x d_x (one particle per row), before any resampling at t.
  std::vector<Matrix> particles;
  LogMatrix log_w;                   ///< (T+1) x N normalised
  std::vector<double> log_increments;  ///< log of the weighted mean incremental weight per t
  double log_likelihood = 0.0;
  std::vector<bool> resampled;       ///< resampling after step t
};

/// Bootstrap filter with multinomial resampling whenever ESS/N < threshold.
/// Throws NumericalError when every weight at some step is zero.
ParticleFilterOutput bootstrap_pf(const SSMSpec& ssm, const ObservationSequence& obs,
                                  std::size_t N, Rng& rng, double resample_threshold);

/// V_t = N(m_{t|t}, P_{t|t}).
ProposalSpec kalman_proposal(const FilterOutput& filter);

/// Diagonal Gaussian matching the prior marginal mean and variances of x_t.
ProposalSpec prior_marginal_proposal(const LinearGaussianSSM& lg, std::size_t steps);

}  // namespace pvmc
