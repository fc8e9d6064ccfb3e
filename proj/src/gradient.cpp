#include <cmath>

#include "pvmc/elbo.hpp"
#include "pvmc/errors.hpp"
#include "pvmc/scan.hpp"

namespace pvmc {

namespace {

bool matrices_close(const LogMatrix& a, const LogMatrix& b) { return max_abs_diff(a, b) <= 1e-9; }

}  // namespace

GradientResult elbo_gradient_from_noise(const SSMSpec& ssm, const ProposalSpec& prop,
                                        const ObservationSequence& obs,
                                        const ParticleNoise& noise) {
  if (!ssm.differentiable()) {
    throw UnsupportedModelError("elbo_gradient: model has no gradient callbacks");
  }
  const ParticleGrid grid = grid_from_noise(prop, obs, noise);
  const KernelTensor kernels = compute_kernels(ssm, grid, obs);
  const std::size_t steps = kernels.steps(), N = kernels.particles(), d = grid.dim();

  // alpha[t][j]: log mass of all partial trajectories ending at X_t^j.
  // beta[t][j]: log mass of all continuations leaving X_t^j.
  std::vector<std::vector<LogValue>> alpha(steps), beta(steps);
  if (steps == 1) {
    alpha[0].assign(kernels.initial().begin(), kernels.initial().end());
    beta[0].assign(N, 0.0);
  } else {
    const auto scan = prefix_suffix_scan(kernels.slabs, &log_matmul, LogMatrix::identity(N),
                                         &matrices_close);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto row = scan.prefix[t].row(0);
      alpha[t].assign(row.begin(), row.end());
      beta[t] = t + 1 < steps ? log_row_sums(scan.suffix[t + 1]) : std::vector<LogValue>(N, 0.0);
    }
  }
  const LogValue raw = log_sum_exp(alpha[steps - 1]);

  GradientResult out;
  out.log_L_hat = raw - static_cast<double>(steps) * std::log(static_cast<double>(N));
  out.model.assign(ssm.params.size(), 0.0);
  out.proposal.assign(prop.params().size(), 0.0);

  std::vector<double> grad_x(steps * N * d, 0.0);
  auto gx = [&](std::size_t t, std::size_t n) -> MutState {
    return {grad_x.data() + (t * N + n) * d, d};
  };
  std::vector<double> marginal(steps * N);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < N; ++j)
      marginal[t * N + j] = std::exp(alpha[t][j] + beta[t][j] - raw);

  for (std::size_t j = 0; j < N; ++j) {
    ssm.gradients.prior(grid.state(0, j), marginal[j], gx(0, j), out.model);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const auto y = obs.at(t);
    for (std::size_t j = 0; j < N; ++j) {
      ssm.gradients.observation(t, y, grid.state(t, j), marginal[t * N + j], gx(t, j), out.model);
    }
    if (t == 0) continue;
    const LogMatrix& slab = kernels.slabs[t];
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        const double pair = std::exp(alpha[t - 1][i] + slab(i, j) + beta[t][j] - raw);
        if (pair == 0.0) continue;
        ssm.gradients.transition(t, grid.state(t, j), grid.state(t - 1, i), pair, gx(t, j),
                                 gx(t - 1, i), out.model);
      }
    }
  }

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      prop.accumulate_gradient(t, obs, noise.at(t, j), gx(t, j), marginal[t * N + j],
                               out.proposal);
    }
  }
  return out;
}

GradientResult elbo_gradient(const SSMSpec& ssm, const ProposalSpec& prop,
                             const ObservationSequence& obs, std::size_t N, Rng& rng) {
  if (N == 0) throw PreconditionError("elbo_gradient: N must be >= 1");
  return elbo_gradient_from_noise(ssm, prop, obs,
                                  ParticleNoise::draw(obs.steps(), N, prop.state_dim(), rng));
}

}  // namespace pvmc
