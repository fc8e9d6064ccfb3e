#pragma once

#include <cstddef>
#include <functional>

#include "pvmc/kernels.hpp"
#include "pvmc/logspace.hpp"
#include "pvmc/scan.hpp"

namespace pvmc {

/// Pair of N x N log-matrices combined by (C1, C2) (+) (D1, D2) = (C1, C2 D1 D2).
struct ScanElement {
  LogMatrix first;
  LogMatrix second;

  /// (I, I); a right identity for combine.
  static ScanElement identity(std::size_t n);
  bool operator==(const ScanElement&) const = default;
};

ScanElement combine(const ScanElement& lhs, const ScanElement& rhs);

/// Entrywise comparison of both halves within `tol` in the log domain.
bool approx_equal(const ScanElement& a, const ScanElement& b, double tol = 1e-9);

enum class ScanStrategy {
  tree,   ///< prefix_suffix_scan
  split,  ///< split_scan
};

struct WeightOptions {
  ScanStrategy strategy = ScanStrategy::tree;
  /// Replaces combine() inside the scan when set.
  std::function<ScanElement(const ScanElement&, const ScanElement&)> combine_override;
};

struct WeightResult {
  /// (T+1) x N unnormalised log-weights; row t holds log W_t^{1:N}.
  LogMatrix log_w;
  /// log sum_i W_0^i.
  LogValue log_L_hat_raw = kLogZero;
  ScanPlan plan;
};

/// Marginal weights W_t^i = sum over all trajectories with n_t = i of prod_u K_u.
WeightResult pvmc_weights(const KernelTensor& kernels, const WeightOptions& options = {});

}  // namespace pvmc
