#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pvmc/oracle.hpp"
#include "pvmc/weights.hpp"
#include "support/oracles.hpp"

using namespace pvmc;
using pvmc::testing::enumerate_marginals;
using pvmc::testing::small_instance;

namespace {

KernelTensor random_kernels(std::size_t N, std::size_t T, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-4.0, 2.0);
  KernelTensor k;
  for (std::size_t t = 0; t <= T; ++t) {
    LogMatrix s(N, N);
    for (auto& v : s.data()) v = u(gen);
    if (t == 0)
      for (std::size_t i = 1; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) s(i, j) = s(0, j);
    k.slabs.push_back(s);
  }
  return k;
}

double total_spread(const LogMatrix& w) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t t = 0; t < w.rows(); ++t) {
    const double s = log_sum_exp(w.row(t));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

}  // namespace

TEST_CASE("one particle: every weight is the single trajectory weight") {
  for (std::size_t T = 0; T <= 6; ++T) {
    const auto in = small_instance(1, T, 40 + T);
    double sum = 0.0;
    for (const auto& s : in.kernels.slabs) sum += s(0, 0);
    const WeightResult w = pvmc_weights(in.kernels);
    CHECK(std::abs(w.log_L_hat_raw - sum) <= 1e-12);
    for (std::size_t t = 0; t <= T; ++t) CHECK(std::abs(w.log_w(t, 0) - sum) <= 1e-12);
  }
}

TEST_CASE("weights match enumeration: N=3, T=3 and the even-horizon N=2, T=4 case") {
  for (const auto& [N, T] : {std::pair<std::size_t, std::size_t>{3, 3}, {2, 4}, {3, 4}}) {
    const auto in = small_instance(N, T, 50 + N * 10 + T);
    const auto oracle = enumerate_marginals(in.kernels);
    for (const auto strategy : {ScanStrategy::tree, ScanStrategy::split}) {
      WeightOptions opt;
      opt.strategy = strategy;
      const WeightResult w = pvmc_weights(in.kernels, opt);
      CHECK(max_abs_diff(w.log_w, oracle.log_w) <= 1e-9);
      CHECK(std::abs(w.log_L_hat_raw - oracle.log_total) <= 1e-9);
    }
  }
}

TEST_CASE("property: weights match enumeration on the small-instance grid") {
  for (std::size_t N = 1; N <= 4; ++N) {
    for (std::size_t T = 0; T <= 5; ++T) {
      for (std::uint64_t rep = 0; rep < 3; ++rep) {
        const auto in = small_instance(N, T, 1000 * N + 10 * T + rep, 1 + rep % 2, 1);
        const auto oracle = enumerate_marginals(in.kernels);
        const WeightResult w = pvmc_weights(in.kernels);
        CHECK(max_abs_diff(w.log_w, oracle.log_w) <= 1e-9);
        CHECK(std::abs(w.log_L_hat_raw - oracle.log_total) <= 1e-9);
      }
    }
  }
}

TEST_CASE("property: weights on synthetic kernels with spread-out magnitudes") {
  std::mt19937_64 gen(60);
  for (std::size_t N = 1; N <= 4; ++N) {
    for (std::size_t T = 0; T <= 5; ++T) {
      const KernelTensor k = random_kernels(N, T, gen);
      const auto oracle = enumerate_marginals(k);
      const WeightResult w = pvmc_weights(k);
      CHECK(max_abs_diff(w.log_w, oracle.log_w) <= 1e-9);
    }
  }
}

TEST_CASE("property: column totals agree for every t") {
  std::mt19937_64 gen(61);
  for (std::size_t T : {2u, 7u, 16u, 33u, 100u}) {
    const KernelTensor k = random_kernels(6, T, gen);
    const WeightResult w = pvmc_weights(k);
    CHECK(total_spread(w.log_w) <= 1e-8);
    CHECK(std::abs(log_sum_exp(w.log_w.row(0)) - w.log_L_hat_raw) <= 1e-12);
  }
}

TEST_CASE("property: relabelling particles at one step permutes that row only") {
  std::mt19937_64 gen(62);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = 2 + trial % 4, T = 1 + trial % 6;
    const KernelTensor k = random_kernels(N, T, gen);
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    const std::size_t s = static_cast<std::size_t>(trial) % (T + 1);

    // New label j at step s is old particle perm[j]: permute the columns of
    // slab s and the rows of slab s+1.
    KernelTensor p = k;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) p.slabs[s](i, j) = k.slabs[s](i, perm[j]);
    if (s + 1 <= T)
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) p.slabs[s + 1](i, j) = k.slabs[s + 1](perm[i], j);

    const WeightResult a = pvmc_weights(k), b = pvmc_weights(p);
    CHECK(std::abs(a.log_L_hat_raw - b.log_L_hat_raw) <= 1e-9);
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t j = 0; j < N; ++j) {
        const double expected = t == s ? a.log_w(t, perm[j]) : a.log_w(t, j);
        CHECK(std::abs(b.log_w(t, j) - expected) <= 1e-9);
      }
    }
  }
}

TEST_CASE("uniform kernels give symmetric counts") {
  for (std::size_t T : {0u, 1u, 4u, 5u}) {
    KernelTensor k;
    k.slabs.assign(T + 1, LogMatrix(3, 3, 0.0));
    const WeightResult w = pvmc_weights(k);
    for (double v : w.log_w.data()) CHECK(v == doctest::Approx(static_cast<double>(T) * std::log(3.0)).epsilon(1e-12));
  }
}

TEST_CASE("tree and split strategies agree on long horizons") {
  std::mt19937_64 gen(63);
  for (std::size_t T : {40u, 41u, 127u}) {
    const KernelTensor k = random_kernels(5, T, gen);
    WeightOptions split;
    split.strategy = ScanStrategy::split;
    const WeightResult a = pvmc_weights(k), b = pvmc_weights(k, split);
    CHECK(max_abs_diff(a.log_w, b.log_w) <= 1e-9);
  }
}

TEST_CASE("scan instrumentation stays within its bounds") {
  std::mt19937_64 gen(64);
  for (std::size_t T : {3u, 10u, 63u, 200u}) {
    const WeightResult w = pvmc_weights(random_kernels(2, T, gen));
    const std::size_t elements = (T + 1 + (T % 2 == 0 ? 1 : 0)) / 2;
    CHECK(w.plan.element_count == elements);
    CHECK(w.plan.depth <= ceil_log2(elements) + 1);
    CHECK(w.plan.combine_invocations <= 4 * elements);
  }
}

TEST_CASE("a corrupted combine is detected by the enumeration oracle") {
  const auto in = small_instance(3, 5, 65);
  WeightOptions bad;
  bad.combine_override = [](const ScanElement& a, const ScanElement& b) {
    return ScanElement{a.first, log_matmul(log_matmul(b.second, b.first), a.second)};
  };
  const WeightResult w = pvmc_weights(in.kernels, bad);
  CHECK(max_abs_diff(w.log_w, enumerate_marginals(in.kernels).log_w) > 1e-6);
}

TEST_CASE("library enumeration agrees with the test oracle") {
  const auto in = small_instance(3, 3, 66);
  const TrajectoryWeightTable table = enumerate_trajectory_weights(in.kernels);
  CHECK(table.log_weights.size() == 81);
  const BruteForceMarginals b = brute_force_marginals(table);
  const auto oracle = enumerate_marginals(in.kernels);
  CHECK(max_abs_diff(b.log_w, oracle.log_w) <= 1e-12);
  CHECK(std::abs(b.log_L_hat_raw - oracle.log_total) <= 1e-12);
  CHECK(std::abs(b.log_L_hat_raw - 4 * std::log(3.0) - (pvmc_weights(in.kernels).log_L_hat_raw - 4 * std::log(3.0))) <= 1e-9);
}
