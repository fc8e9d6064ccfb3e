#include <cmath>

#include "pvmc/elbo.hpp"
#include "pvmc/errors.hpp"

namespace pvmc {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

FitResult fit_proposal(const SSMSpec& ssm, const std::vector<ObservationSequence>& data,
                       const ProposalSpec& init, const FitOptions& options, Rng& rng) {
  if (options.steps == 0) throw PreconditionError("fit_proposal: steps must be >= 1");
  if (options.particles == 0) throw PreconditionError("fit_proposal: particles must be >= 1");
  if (data.empty()) throw PreconditionError("fit_proposal: no observation sequences");

  std::vector<double> phi = init.params();
  std::vector<double> m(phi.size(), 0.0), v(phi.size(), 0.0);
  FitResult result{init, {}};
  result.trace.reserve(options.steps);

  for (std::size_t step = 0; step < options.steps; ++step) {
    const ObservationSequence& obs = data[step % data.size()];
    const ProposalSpec current = init.with_params(phi);
    const GradientResult g = elbo_gradient(ssm, current, obs, options.particles, rng);
    if (!std::isfinite(g.log_L_hat)) throw TrainingFailure("fit_proposal: ELBO is not finite", step);
    for (double x : g.proposal) {
      if (!std::isfinite(x)) throw TrainingFailure("fit_proposal: gradient is not finite", step);
    }
    result.trace.push_back(g.log_L_hat);
    if (options.step_size == 0.0) continue;

    if (options.optimizer == Optimizer::sgd) {
      for (std::size_t k = 0; k < phi.size(); ++k) phi[k] += options.step_size * g.proposal[k];
      continue;
    }
    const double n = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(kBeta1, n);
    const double c2 = 1.0 - std::pow(kBeta2, n);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g.proposal[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g.proposal[k] * g.proposal[k];
      phi[k] += options.step_size * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
    }
  }
  result.proposal = init.with_params(phi);
  return result;
}

FitResult fit_proposal(const SSMSpec& ssm, const ObservationSequence& obs,
                       const ProposalSpec& init, const FitOptions& options, Rng& rng) {
  return fit_proposal(ssm, std::vector<ObservationSequence>{obs}, init, options, rng);
}

}  // namespace pvmc
