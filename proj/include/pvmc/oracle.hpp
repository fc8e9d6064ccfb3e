#pragma once

// Exhaustive enumeration of all N^{T+1} particle-index trajectories. Only
// usable on tiny instances; serves as ground truth for the scan path.

#include <cstddef>
#include <vector>

#include "pvmc/kernels.hpp"
#include "pvmc/logspace.hpp"

namespace pvmc {

inline constexpr std::size_t kMaxEnumeratedTrajectories = 10'000'000;

/// Log-weight of every index tuple (n_0, ..., n_T), stored mixed-radix with n_0
/// varying fastest.
struct TrajectoryWeightTable {
  std::size_t particles = 0;
  std::size_t steps = 0;
  std::vector<LogValue> log_weights;

  /// Index of tuple `n` in log_weights.
  std::size_t index(std::span<const std::size_t> n) const;
  /// Inverse of index().
  std::vector<std::size_t> tuple(std::size_t index) const;
};

/// Throws SizeGuardError when N^{T+1} exceeds kMaxEnumeratedTrajectories.
TrajectoryWeightTable enumerate_trajectory_weights(const KernelTensor& kernels);

struct BruteForceMarginals {
  LogMatrix log_w;  ///< (T+1) x N unnormalised
  LogValue log_L_hat_raw = kLogZero;
};

BruteForceMarginals brute_force_marginals(const TrajectoryWeightTable& table);

}  // namespace pvmc
