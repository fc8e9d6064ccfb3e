#pragma once

#include <cstddef>
#include <vector>

#include "pvmc/kernels.hpp"
#include "pvmc/proposal.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

/// Single-realisation ELBO estimates sharing one particle grid.
struct ELBOEstimates {
  double pvmc = 0.0;  ///< log L_hat over all N^{T+1} index trajectories
  double iwae = 0.0;  ///< log of the mean of the N diagonal trajectory weights
  double pvae = 0.0;  ///< mean of the log-weight over all index trajectories
  double vae = 0.0;   ///< mean of the diagonal trajectory log-weights
};

ELBOEstimates elbo_estimates(const KernelTensor& kernels);

struct GradientResult {
  LogValue log_L_hat = kLogZero;
  std::vector<double> model;     ///< d log L_hat / d theta, layout of SSMSpec::params
  std::vector<double> proposal;  ///< d log L_hat / d phi, layout of ProposalSpec::params
};

/// Gradient of log L_hat for the grid X = transform(noise). Throws
/// UnsupportedModelError when the model has no gradient callbacks.
GradientResult elbo_gradient_from_noise(const SSMSpec& ssm, const ProposalSpec& prop,
                                        const ObservationSequence& obs,
                                        const ParticleNoise& noise);

/// Draws the noise from `rng` and calls elbo_gradient_from_noise.
GradientResult elbo_gradient(const SSMSpec& ssm, const ProposalSpec& prop,
                             const ObservationSequence& obs, std::size_t N, Rng& rng);

enum class Optimizer { adam, sgd };

struct FitOptions {
  std::size_t steps = 1000;
  double step_size = 0.01;
  std::size_t particles = 16;
  Optimizer optimizer = Optimizer::adam;
};

struct FitResult {
  ProposalSpec proposal;
  /// log L_hat at the parameters in force before each update.
  std::vector<double> trace;
};

/// Gradient ascent on log L_hat over the proposal parameters with fresh noise
/// each step, cycling through `data`. Throws TrainingFailure on a non-finite
/// estimate or gradient.
FitResult fit_proposal(const SSMSpec& ssm, const std::vector<ObservationSequence>& data,
                       const ProposalSpec& init, const FitOptions& options, Rng& rng);
FitResult fit_proposal(const SSMSpec& ssm, const ObservationSequence& obs,
                       const ProposalSpec& init, const FitOptions& options, Rng& rng);

}  // namespace pvmc
