#include "pvmc/smoothing.hpp"

#include <cmath>
#include <string>

#include "pvmc/errors.hpp"
#include "pvmc/scan.hpp"

namespace pvmc {

namespace {

LogValue reduce_row0(std::vector<LogMatrix> slabs, ScanPlan* plan) {
  const double steps = static_cast<double>(slabs.size());
  const double log_n = std::log(static_cast<double>(slabs.front().rows()));
  const LogMatrix total = parallel_reduce(std::move(slabs), &log_matmul, plan);
  return log_sum_exp(total.row(0)) - steps * log_n;
}

}  // namespace

SmoothingResult make_smoothing_result(ParticleGrid grid, const WeightResult& weights) {
  SmoothingResult r;
  const std::size_t steps = weights.log_w.rows(), N = weights.log_w.cols();
  r.log_w = weights.log_w;
  for (std::size_t t = 0; t < steps; ++t) {
    const LogValue total = log_sum_exp(weights.log_w.row(t));
    for (std::size_t n = 0; n < N; ++n) r.log_w(t, n) -= total;
  }
  r.log_L_hat = weights.log_L_hat_raw - static_cast<double>(steps) * std::log(static_cast<double>(N));
  r.particles = std::move(grid);
  return r;
}

SmoothingResult smooth_grid(const SSMSpec& ssm, ParticleGrid grid, const ObservationSequence& obs,
                            const WeightOptions& options) {
  const KernelTensor kernels = compute_kernels(ssm, grid, obs);
  return make_smoothing_result(std::move(grid), pvmc_weights(kernels, options));
}

SmoothingResult pvmc_smooth(const SSMSpec& ssm, const ProposalSpec& prop,
                            const ObservationSequence& obs, std::size_t N, Rng& rng) {
  if (N == 0) throw PreconditionError("pvmc_smooth: N must be >= 1");
  return smooth_grid(ssm, sample_proposal(prop, obs, N, rng), obs);
}

LogValue likelihood_from_kernels(const KernelTensor& kernels, ScanPlan* plan) {
  kernels.validate();
  return reduce_row0(kernels.slabs, plan);
}

LogValue log_likelihood(const SSMSpec& ssm, const ProposalSpec& prop,
                        const ObservationSequence& obs, std::size_t N, Rng& rng) {
  if (N == 0) throw PreconditionError("log_likelihood: N must be >= 1");
  const ParticleGrid grid = sample_proposal(prop, obs, N, rng);
  return likelihood_from_kernels(compute_kernels(ssm, grid, obs));
}

Vector posterior_expectation(const SmoothingResult& result,
                             const std::function<Vector(ConstState)>& f, std::size_t t) {
  if (t >= result.log_w.rows()) {
    throw PreconditionError("posterior_expectation: t=" + std::to_string(t) + " out of range");
  }
  Vector acc;
  for (std::size_t n = 0; n < result.log_w.cols(); ++n) {
    const Vector v = f(result.particles.state(t, n));
    const double w = std::exp(result.log_w(t, n));
    if (n == 0) acc = Vector::Zero(v.size());
    acc += w * v;
  }
  return acc;
}

Matrix posterior_means(const SmoothingResult& result) {
  const auto& g = result.particles;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(g.steps()), static_cast<Eigen::Index>(g.dim()));
  for (std::size_t t = 0; t < g.steps(); ++t) {
    for (std::size_t n = 0; n < g.particles(); ++n) {
      out.row(static_cast<Eigen::Index>(t)) +=
          std::exp(result.log_w(t, n)) * as_vector(g.state(t, n)).transpose();
    }
  }
  return out;
}

Matrix posterior_covariance(const SmoothingResult& result, std::size_t t) {
  const auto& g = result.particles;
  if (t >= g.steps()) throw PreconditionError("posterior_covariance: t out of range");
  const auto d = static_cast<Eigen::Index>(g.dim());
  Vector mean = Vector::Zero(d);
  for (std::size_t n = 0; n < g.particles(); ++n) {
    mean += std::exp(result.log_w(t, n)) * as_vector(g.state(t, n));
  }
  Matrix cov = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < g.particles(); ++n) {
    const Vector r = as_vector(g.state(t, n)) - mean;
    cov += std::exp(result.log_w(t, n)) * r * r.transpose();
  }
  return cov;
}

LogValue multiplicative_expectation(const KernelTensor& kernels, const IndexLogFactor& log_factor) {
  kernels.validate();
  std::vector<LogMatrix> slabs = kernels.slabs;
  const std::size_t N = kernels.particles();
  for (std::size_t t = 0; t < slabs.size(); ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        const LogValue f = log_factor(t, t == 0 ? 0 : i, j);
        if (std::isnan(f) || f == std::numeric_limits<double>::infinity()) {
          throw PreconditionError("multiplicative_expectation: factor is not log-representable at t=" +
                                  std::to_string(t));
        }
        slabs[t](i, j) += f;
      }
    }
  }
  return reduce_row0(std::move(slabs), nullptr);
}

LogValue multiplicative_expectation(
    const KernelTensor& kernels, const ParticleGrid& grid,
    const std::function<LogValue(ConstState x0)>& log_f0,
    const std::function<LogValue(std::size_t t, ConstState x_t, ConstState x_prev)>& log_ft) {
  if (grid.steps() != kernels.steps() || grid.particles() != kernels.particles()) {
    throw DimensionError("multiplicative_expectation: grid does not match kernels");
  }
  return multiplicative_expectation(kernels, [&](std::size_t t, std::size_t prev, std::size_t cur) {
    return t == 0 ? log_f0(grid.state(0, cur)) : log_ft(t, grid.state(t, cur), grid.state(t - 1, prev));
  });
}

}  // namespace pvmc
