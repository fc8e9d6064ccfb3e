#pragma once

#include <cstddef>
#include <vector>

#include "pvmc/logspace.hpp"
#include "pvmc/proposal.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

/// One N x N slab of log K_t per time step. Slab t holds
/// log K_t(X_t^col | X_{t-1}^row); slab 0 has identical rows.
struct KernelTensor {
  std::vector<LogMatrix> slabs;

  std::size_t steps() const noexcept { return slabs.size(); }
  std::size_t horizon() const noexcept { return slabs.size() - 1; }
  std::size_t particles() const noexcept { return slabs.empty() ? 0 : slabs.front().rows(); }
  /// Row 0 of slab 0, i.e. log K_0 per particle.
  std::span<const LogValue> initial() const { return slabs.front().row(0); }

  /// Throws on empty tensors, non-square or mismatched slabs, NaN/+inf entries
  /// or a slab 0 whose rows differ.
  void validate() const;
};

/// log K_0[.][j] = (log P(X_0^j) + log H_0(y_0 | X_0^j)) - log V_0(X_0^j) and for t >= 1
/// log K_t[i][j] = (log M_t(X_t^j | X_{t-1}^i) + log H_t(y_t | X_t^j)) - log V_t(X_t^j).
/// Proposal log-densities are read from the grid.
KernelTensor compute_kernels(const SSMSpec& ssm, const ParticleGrid& grid,
                             const ObservationSequence& obs);

/// Kernels for an ancestrally sampled Markov proposal: the denominator of slab
/// t >= 1 is the uniform mixture (1/N) sum_k V_t(X_t^j | X_{t-1}^k).
KernelTensor markovian_kernels(const SSMSpec& ssm, const MarkovProposalSpec& mprop,
                               const ParticleGrid& grid, const ObservationSequence& obs);

}  // namespace pvmc
