#include "pvmc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvmc/errors.hpp"
#include "pvmc/scan.hpp"

namespace pvmc {

namespace {

void check_shapes(const SSMSpec& ssm, const ParticleGrid& grid, const ObservationSequence& obs) {
  ssm.validate();
  if (grid.steps() != obs.steps()) {
    throw DimensionError("kernels: grid has " + std::to_string(grid.steps()) +
                         " steps, observations have " + std::to_string(obs.steps()));
  }
  if (grid.dim() != ssm.state_dim || obs.dim() != ssm.obs_dim) {
    throw DimensionError("kernels: grid or observation dimension differs from the model");
  }
}

void check_density(LogValue v, std::size_t t, std::size_t n) {
  if (!std::isfinite(v)) {
    throw IllPosedWeightsError("proposal log-density is not finite at t=" + std::to_string(t) +
                               ", n=" + std::to_string(n));
  }
}

// Slab 0 plus log M_t + log H_t for t >= 1, without any proposal term.
KernelTensor model_terms(const SSMSpec& ssm, const ParticleGrid& grid,
                         const ObservationSequence& obs,
                         std::vector<std::vector<LogValue>>& obs_terms) {
  const std::size_t steps = grid.steps(), N = grid.particles();
  KernelTensor k;
  k.slabs.resize(steps);
  obs_terms.assign(steps, std::vector<LogValue>(N));
  detail::parallel_for(steps, [&](std::size_t t) {
    for (std::size_t j = 0; j < N; ++j) {
      obs_terms[t][j] = ssm.observation_logpdf(t, obs.at(t), grid.state(t, j));
    }
    LogMatrix slab(N, N);
    if (t == 0) {
      for (std::size_t j = 0; j < N; ++j) {
        const LogValue v = ssm.prior_logpdf(grid.state(0, j)) + obs_terms[0][j];
        for (std::size_t i = 0; i < N; ++i) slab(i, j) = v;
      }
    } else {
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          slab(i, j) = ssm.transition_logpdf(t, grid.state(t, j), grid.state(t - 1, i)) +
                       obs_terms[t][j];
        }
      }
    }
    k.slabs[t] = std::move(slab);
  });
  return k;
}

}  // namespace

void KernelTensor::validate() const {
  if (slabs.empty()) throw PreconditionError("KernelTensor: no slabs");
  const std::size_t N = slabs.front().rows();
  if (N == 0) throw PreconditionError("KernelTensor: empty slabs");
  for (std::size_t t = 0; t < slabs.size(); ++t) {
    const auto& s = slabs[t];
    if (s.rows() != N || s.cols() != N) {
      throw DimensionError("KernelTensor: slab " + std::to_string(t) + " is not " +
                           std::to_string(N) + "x" + std::to_string(N));
    }
    for (LogValue v : s.data()) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw PreconditionError("KernelTensor: NaN or +inf entry in slab " + std::to_string(t));
      }
    }
  }
  const auto& k0 = slabs.front();
  for (std::size_t i = 1; i < N; ++i) {
    if (!std::equal(k0.row(i).begin(), k0.row(i).end(), k0.row(0).begin())) {
      throw PreconditionError("KernelTensor: slab 0 rows differ");
    }
  }
}

KernelTensor compute_kernels(const SSMSpec& ssm, const ParticleGrid& grid,
                             const ObservationSequence& obs) {
  check_shapes(ssm, grid, obs);
  const std::size_t N = grid.particles();
  for (std::size_t t = 0; t < grid.steps(); ++t)
    for (std::size_t n = 0; n < N; ++n) check_density(grid.log_density(t, n), t, n);

  std::vector<std::vector<LogValue>> obs_terms;
  KernelTensor k = model_terms(ssm, grid, obs, obs_terms);
  detail::parallel_for(grid.steps(), [&](std::size_t t) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) k.slabs[t](i, j) -= grid.log_density(t, j);
  });
  return k;
}

KernelTensor markovian_kernels(const SSMSpec& ssm, const MarkovProposalSpec& mprop,
                               const ParticleGrid& grid, const ObservationSequence& obs) {
  check_shapes(ssm, grid, obs);
  const std::size_t N = grid.particles();
  for (std::size_t n = 0; n < N; ++n) check_density(grid.log_density(0, n), 0, n);

  std::vector<std::vector<LogValue>> denominators(grid.steps(), std::vector<LogValue>(N));
  for (std::size_t n = 0; n < N; ++n) denominators[0][n] = grid.log_density(0, n);
  detail::parallel_for(grid.steps() - 1, [&](std::size_t s) {
    const std::size_t t = s + 1;
    std::vector<LogValue> v(N);
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t k = 0; k < N; ++k) {
        v[k] = mprop.log_density(t, obs, grid.state(t - 1, k), grid.state(t, j));
      }
      const LogValue m = *std::max_element(v.begin(), v.end());
      if (!std::isfinite(m)) {
        throw IllPosedWeightsError("markovian_kernels: mixture density is zero at t=" +
                                   std::to_string(t) + ", n=" + std::to_string(j));
      }
      double s_lin = 0.0;
      for (LogValue vk : v) s_lin += std::exp(vk - m);
      denominators[t][j] = m + std::log(s_lin / static_cast<double>(N));
    }
  });

  std::vector<std::vector<LogValue>> obs_terms;
  KernelTensor k = model_terms(ssm, grid, obs, obs_terms);
  detail::parallel_for(grid.steps(), [&](std::size_t t) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) k.slabs[t](i, j) -= denominators[t][j];
  });
  return k;
}

}  // namespace pvmc
