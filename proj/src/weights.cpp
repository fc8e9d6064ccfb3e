#include "pvmc/weights.hpp"

#include <cmath>
#include <vector>

namespace pvmc {

namespace {

// Weights for an odd number of slabs minus one, i.e. an even slab count >= 4.
// Elements pair slabs (2s, 2s+1). For every split between element s and s+1,
// alpha carries the mass arriving at slab 2s+1 and beta the mass leaving slab
// 2s+2, and the middle slab joins them.
void extract_split(std::span<const LogValue> k0, const LogMatrix& prefix_second,
                   const ScanElement& suffix_next, std::size_t s, LogMatrix& log_w) {
  const std::size_t N = k0.size();
  const std::vector<LogValue> alpha = log_vecmat(k0, prefix_second);
  const std::vector<LogValue> beta = log_row_sums(suffix_next.second);
  const LogMatrix& middle = suffix_next.first;

  LogMatrix c(N, N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < N; ++m) c(n, m) = alpha[n] + middle(n, m) + beta[m];

  std::vector<LogValue> column(N);
  for (std::size_t n = 0; n < N; ++n) log_w(2 * s + 1, n) = log_sum_exp(c.row(n));
  for (std::size_t m = 0; m < N; ++m) {
    for (std::size_t n = 0; n < N; ++n) column[n] = c(n, m);
    log_w(2 * s + 2, m) = log_sum_exp(column);
  }
}

void extract_ends(std::span<const LogValue> k0, const LogMatrix& total, LogMatrix& log_w) {
  const std::size_t N = k0.size();
  const std::size_t last = log_w.rows() - 1;
  const std::vector<LogValue> out = log_row_sums(total);
  const std::vector<LogValue> in = log_vecmat(k0, total);
  for (std::size_t n = 0; n < N; ++n) {
    log_w(0, n) = k0[n] + out[n];
    log_w(last, n) = in[n];
  }
}

WeightResult odd_horizon_weights(const std::vector<LogMatrix>& slabs,
                                 const WeightOptions& options) {
  const std::size_t steps = slabs.size();
  const std::size_t N = slabs.front().rows();
  const std::size_t count = steps / 2;

  std::vector<ScanElement> elements;
  elements.reserve(count);
  for (std::size_t s = 0; s < count; ++s) elements.push_back({slabs[2 * s], slabs[2 * s + 1]});

  auto op = [&](const ScanElement& a, const ScanElement& b) {
    return options.combine_override ? options.combine_override(a, b) : combine(a, b);
  };
  auto eq = [](const ScanElement& a, const ScanElement& b) { return approx_equal(a, b); };
  const ScanElement id = ScanElement::identity(N);

  WeightResult result;
  result.log_w = LogMatrix(steps, N);
  const std::span<const LogValue> k0 = slabs.front().row(0);

  if (options.strategy == ScanStrategy::split) {
    auto scan = split_scan(elements, op, id, eq);
    result.plan = scan.plan;
    for (std::size_t s = 0; s + 1 < count; ++s) {
      extract_split(k0, scan.splits[s].first.second, scan.splits[s].second, s, result.log_w);
    }
    const ScanElement whole = op(scan.splits.front().first, scan.splits.front().second);
    ++result.plan.combine_invocations;
    extract_ends(k0, whole.second, result.log_w);
  } else {
    auto scan = prefix_suffix_scan(elements, op, id, eq);
    result.plan = scan.plan;
    for (std::size_t s = 0; s + 1 < count; ++s) {
      extract_split(k0, scan.prefix[s].second, scan.suffix[s + 1], s, result.log_w);
    }
    extract_ends(k0, scan.suffix.front().second, result.log_w);
  }
  return result;
}

}  // namespace

ScanElement ScanElement::identity(std::size_t n) {
  return {LogMatrix::identity(n), LogMatrix::identity(n)};
}

ScanElement combine(const ScanElement& lhs, const ScanElement& rhs) {
  return {lhs.first, log_matmul(log_matmul(lhs.second, rhs.first), rhs.second)};
}

bool approx_equal(const ScanElement& a, const ScanElement& b, double tol) {
  if (a.first.rows() != b.first.rows() || a.first.cols() != b.first.cols() ||
      a.second.rows() != b.second.rows() || a.second.cols() != b.second.cols()) {
    return false;
  }
  return max_abs_diff(a.first, b.first) <= tol && max_abs_diff(a.second, b.second) <= tol;
}

WeightResult pvmc_weights(const KernelTensor& kernels, const WeightOptions& options) {
  kernels.validate();
  const std::size_t steps = kernels.steps();
  const std::size_t N = kernels.particles();
  const auto& slabs = kernels.slabs;
  const std::span<const LogValue> k0 = kernels.initial();

  WeightResult result;
  if (steps == 1) {
    result.log_w = LogMatrix(1, N);
    for (std::size_t n = 0; n < N; ++n) result.log_w(0, n) = k0[n];
    result.plan.element_count = 1;
  } else if (steps == 2) {
    result.log_w = LogMatrix(2, N);
    extract_ends(k0, slabs[1], result.log_w);
    result.plan.element_count = 1;
  } else if (steps % 2 == 0) {
    result = odd_horizon_weights(slabs, options);
  } else {
    // Even horizon: prepend an all-ones matrix. Its rows and slab 0 both sum
    // over the same N identical values, so every padded weight carries an
    // extra factor N that is removed after dropping the pad row.
    std::vector<LogMatrix> padded;
    padded.reserve(steps + 1);
    padded.push_back(LogMatrix::ones(N, N));
    padded.insert(padded.end(), slabs.begin(), slabs.end());
    WeightResult inner = odd_horizon_weights(padded, options);
    const double log_n = std::log(static_cast<double>(N));
    result.log_w = LogMatrix(steps, N);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t n = 0; n < N; ++n) result.log_w(t, n) = inner.log_w(t + 1, n) - log_n;
    result.plan = inner.plan;
  }
  result.log_L_hat_raw = log_sum_exp(result.log_w.row(0));
  return result;
}

}  // namespace pvmc
