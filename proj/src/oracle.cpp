#include "pvmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvmc/errors.hpp"

namespace pvmc {

std::size_t TrajectoryWeightTable::index(std::span<const std::size_t> n) const {
  if (n.size() != steps) throw DimensionError("TrajectoryWeightTable::index: wrong tuple length");
  std::size_t idx = 0;
  for (std::size_t t = steps; t-- > 0;) {
    if (n[t] >= particles) throw PreconditionError("TrajectoryWeightTable::index: digit out of range");
    idx = idx * particles + n[t];
  }
  return idx;
}

std::vector<std::size_t> TrajectoryWeightTable::tuple(std::size_t index) const {
  std::vector<std::size_t> n(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    n[t] = index % particles;
    index /= particles;
  }
  return n;
}

TrajectoryWeightTable enumerate_trajectory_weights(const KernelTensor& kernels) {
  kernels.validate();
  const std::size_t N = kernels.particles(), steps = kernels.steps();
  std::size_t total = 1;
  for (std::size_t t = 0; t < steps; ++t) {
    if (total > kMaxEnumeratedTrajectories / N) {
      throw SizeGuardError("enumerate_trajectory_weights: " + std::to_string(N) + "^" +
                           std::to_string(steps) + " trajectories exceed the limit of " +
                           std::to_string(kMaxEnumeratedTrajectories));
    }
    total *= N;
  }

  TrajectoryWeightTable table{N, steps, std::vector<LogValue>(total)};
  std::vector<std::size_t> n(steps, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    LogValue w = kernels.slabs[0](0, n[0]);
    for (std::size_t t = 1; t < steps; ++t) w += kernels.slabs[t](n[t - 1], n[t]);
    table.log_weights[idx] = w;
    for (std::size_t t = 0; t < steps; ++t) {  // increment, n_0 fastest
      if (++n[t] < N) break;
      n[t] = 0;
    }
  }
  return table;
}

BruteForceMarginals brute_force_marginals(const TrajectoryWeightTable& table) {
  const std::size_t N = table.particles, steps = table.steps;
  // Two passes: per-(t, i) maxima, then max-shifted sums.
  LogMatrix peak(steps, N, kLogZero);
  LogMatrix sum(steps, N, 0.0);
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::size_t> n(steps, 0);
    for (LogValue w : table.log_weights) {
      for (std::size_t t = 0; t < steps; ++t) {
        if (pass == 0) {
          peak(t, n[t]) = std::max(peak(t, n[t]), w);
        } else if (peak(t, n[t]) != kLogZero) {
          sum(t, n[t]) += std::exp(w - peak(t, n[t]));
        }
      }
      for (std::size_t t = 0; t < steps; ++t) {
        if (++n[t] < N) break;
        n[t] = 0;
      }
    }
  }
  BruteForceMarginals out{LogMatrix(steps, N), log_sum_exp(table.log_weights)};
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      out.log_w(t, i) = peak(t, i) == kLogZero ? kLogZero : peak(t, i) + std::log(sum(t, i));
    }
  }
  return out;
}

}  // namespace pvmc
