#pragma once

#include <cstddef>
#include <functional>

#include "pvmc/kernels.hpp"
#include "pvmc/proposal.hpp"
#include "pvmc/weights.hpp"

namespace pvmc {

struct SmoothingResult {
  ParticleGrid particles;
  /// (T+1) x N normalised log-weights; every row log-sum-exps to 0.
  LogMatrix log_w;
  /// log L_hat = log_L_hat_raw - (T+1) log N.
  LogValue log_L_hat = kLogZero;
};

/// Normalises the rows of a WeightResult and attaches the particles.
SmoothingResult make_smoothing_result(ParticleGrid grid, const WeightResult& weights);

/// Kernels and weights on an existing particle grid.
SmoothingResult smooth_grid(const SSMSpec& ssm, ParticleGrid grid, const ObservationSequence& obs,
                            const WeightOptions& options = {});

/// Samples N particles per step from `prop` and smooths them.
SmoothingResult pvmc_smooth(const SSMSpec& ssm, const ProposalSpec& prop,
                            const ObservationSequence& obs, std::size_t N, Rng& rng);

/// log L_hat by a tree reduction of the slabs, read off row 0.
LogValue likelihood_from_kernels(const KernelTensor& kernels, ScanPlan* plan = nullptr);

/// Samples a grid from `prop` and returns log L_hat via the reduction path.
LogValue log_likelihood(const SSMSpec& ssm, const ProposalSpec& prop,
                        const ObservationSequence& obs, std::size_t N, Rng& rng);

/// sum_n w_t^n f(X_t^n).
Vector posterior_expectation(const SmoothingResult& result,
                             const std::function<Vector(ConstState)>& f, std::size_t t);

/// (T+1) x d matrix of weighted particle means.
Matrix posterior_means(const SmoothingResult& result);

/// Weighted covariance of the particles at step t.
Matrix posterior_covariance(const SmoothingResult& result, std::size_t t);

/// log f_t for the transition from particle `prev` at t-1 to `cur` at t.
/// At t = 0, `prev` carries no meaning.
using IndexLogFactor = std::function<LogValue(std::size_t t, std::size_t prev, std::size_t cur)>;

/// log of (1/N^{T+1}) sum over all index trajectories of prod_t K_t f_t.
LogValue multiplicative_expectation(const KernelTensor& kernels, const IndexLogFactor& log_factor);

/// State-valued variant: log f_0(x_0) and log f_t(x_t, x_{t-1}) evaluated on the grid.
LogValue multiplicative_expectation(
    const KernelTensor& kernels, const ParticleGrid& grid,
    const std::function<LogValue(ConstState x0)>& log_f0,
    const std::function<LogValue(std::size_t t, ConstState x_t, ConstState x_prev)>& log_ft);

}  // namespace pvmc
