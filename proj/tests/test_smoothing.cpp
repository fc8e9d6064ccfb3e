#include <cmath>
#include <random>

#include "doctest.h"
#include "pvmc/baselines.hpp"
#include "pvmc/smoothing.hpp"
#include "support/oracles.hpp"

using namespace pvmc;
using pvmc::testing::enumerate_marginals;
using pvmc::testing::small_instance;

TEST_CASE("pvmc_smooth with one particle") {
  const auto in = small_instance(1, 4, 80);
  const SSMSpec s = lg_as_ssm(in.lg);
  Rng a(3), b(3);
  const SmoothingResult r = pvmc_smooth(s, in.proposal, in.obs, 1, a);
  for (double v : r.log_w.data()) CHECK(v == 0.0);
  const ParticleGrid g = sample_proposal(in.proposal, in.obs, 1, b);
  const KernelTensor k = compute_kernels(s, g, in.obs);
  double sum = 0.0;
  for (const auto& slab : k.slabs) sum += slab(0, 0);
  CHECK(r.log_L_hat == doctest::Approx(sum).epsilon(1e-13));
  CHECK(posterior_expectation(r, [](ConstState x) { return Vector(as_vector(x)); }, 2)(0) == g.state(2, 0)[0]);
}

TEST_CASE("pvmc_smooth is deterministic given the seed") {
  const auto in = small_instance(5, 6, 81, 2, 2);
  const SSMSpec s = lg_as_ssm(in.lg);
  Rng a(17), b(17);
  const SmoothingResult r1 = pvmc_smooth(s, in.proposal, in.obs, 5, a);
  const SmoothingResult r2 = pvmc_smooth(s, in.proposal, in.obs, 5, b);
  CHECK(r1.particles == r2.particles);
  CHECK(r1.log_w == r2.log_w);
  CHECK(r1.log_L_hat == r2.log_L_hat);
}

TEST_CASE("property: rows are normalised and log L_hat uses the 1/N^(T+1) convention") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t N = 1 + seed % 4, T = seed % 6;
    const auto in = small_instance(N, T, 82 + seed);
    const SmoothingResult r = smooth_grid(lg_as_ssm(in.lg), in.grid, in.obs);
    for (std::size_t t = 0; t <= T; ++t) CHECK(std::abs(log_sum_exp(r.log_w.row(t))) <= 1e-8);
    const double raw = enumerate_marginals(in.kernels).log_total;
    CHECK(std::abs(r.log_L_hat - (raw - static_cast<double>(T + 1) * std::log(static_cast<double>(N)))) <= 1e-9);
  }
}

TEST_CASE("posterior mean with a Kalman proposal is near the RTS mean") {
  const LinearGaussianSSM lg = lg_build(1, 1);
  const SSMSpec s = lg_as_ssm(lg);
  Rng rng(83);
  const ObservationSequence obs = simulate(s, 3, rng).second;
  const FilterOutput f = kalman_filter(lg, obs);
  const auto rts = rts_smooth(lg, f);
  const ProposalSpec prop = kalman_proposal(f);
  // Standard error from independent replicates of the N = 64 estimator.
  const int reps = 200;
  for (std::size_t t = 0; t <= 3; ++t) {
    double sum = 0.0, sum2 = 0.0, first = 0.0;
    for (int k = 0; k < reps; ++k) {
      Rng r = rng.split(static_cast<std::uint64_t>(k));
      const double m = posterior_means(pvmc_smooth(s, prop, obs, 64, r))(static_cast<Eigen::Index>(t), 0);
      if (k == 0) first = m;
      sum += m;
      sum2 += m * m;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(sum2 / reps - mean * mean);
    CHECK(std::abs(first - rts[t].mean(0)) <= 4 * sd);
  }
}

TEST_CASE("log_likelihood reduction path agrees with the weights path") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t N = 1 + seed % 5, T = seed % 7;
    const auto in = small_instance(N, T, 84 + seed);
    const SSMSpec s = lg_as_ssm(in.lg);
    const SmoothingResult r = smooth_grid(s, in.grid, in.obs);
    CHECK(std::abs(likelihood_from_kernels(in.kernels) - r.log_L_hat) <= 1e-8);
    Rng a(seed), b(seed);
    CHECK(std::abs(log_likelihood(s, in.proposal, in.obs, N, a) - pvmc_smooth(s, in.proposal, in.obs, N, b).log_L_hat) <=
          1e-8);
  }
  const auto one = small_instance(1, 5, 90);
  double sum = 0.0;
  for (const auto& slab : one.kernels.slabs) sum += slab(0, 0);
  CHECK(likelihood_from_kernels(one.kernels) == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("posterior_expectation examples") {
  const auto in = small_instance(6, 3, 91, 2, 1);
  const SmoothingResult r = smooth_grid(lg_as_ssm(in.lg), in.grid, in.obs);
  for (std::size_t t = 0; t <= 3; ++t)
    CHECK(posterior_expectation(r, [](ConstState) { return Vector::Ones(1); }, t)(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(posterior_expectation(r, [](ConstState) { return Vector::Ones(1); }, 4), PreconditionError);

  const Matrix means = posterior_means(r);
  for (std::size_t t = 0; t <= 3; ++t) {
    Vector m = Vector::Zero(2);
    for (std::size_t n = 0; n < 6; ++n) m += std::exp(r.log_w(t, n)) * Vector(as_vector(r.particles.state(t, n)));
    CHECK((means.row(static_cast<Eigen::Index>(t)).transpose() - m).norm() <= 1e-12);
  }
  const Matrix c = posterior_covariance(r, 1);
  CHECK((c - c.transpose()).norm() <= 1e-14);
  CHECK(c.ldlt().vectorD().minCoeff() >= -1e-12);
}

TEST_CASE("multiplicative_expectation examples") {
  const auto in = small_instance(3, 4, 92);
  const double logN = std::log(3.0);
  const auto unit = [](std::size_t, std::size_t, std::size_t) { return 0.0; };
  CHECK(std::abs(multiplicative_expectation(in.kernels, unit) - likelihood_from_kernels(in.kernels)) <= 1e-10);

  const WeightResult w = pvmc_weights(in.kernels);
  for (std::size_t t = 0; t <= 4; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      const auto indicator = [t, i](std::size_t u, std::size_t, std::size_t cur) {
        return (u == t && cur != i) ? kLogZero : 0.0;
      };
      CHECK(std::abs(multiplicative_expectation(in.kernels, indicator) - (w.log_w(t, i) - 5 * logN)) <= 1e-8);
    }
  }

  const auto in2 = small_instance(2, 3, 93);
  std::mt19937_64 gen(94);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LogMatrix table(4, 4);
  for (auto& v : table.data()) v = u(gen);
  const auto factor = [&](std::size_t t, std::size_t prev, std::size_t cur) { return table(t, 2 * prev + cur); };
  const double expected = enumerate_marginals(in2.kernels, factor).log_total - 4 * std::log(2.0);
  CHECK(std::abs(multiplicative_expectation(in2.kernels, factor) - expected) <= 1e-10);
}

TEST_CASE("multiplicative_expectation on states") {
  const auto in = small_instance(3, 2, 95);
  const auto f0 = [](ConstState x) { return -x[0] * x[0]; };
  const auto ft = [](std::size_t, ConstState x, ConstState xp) { return 0.5 * x[0] * xp[0]; };
  const auto by_index = [&](std::size_t t, std::size_t prev, std::size_t cur) {
    return t == 0 ? f0(in.grid.state(0, cur)) : ft(t, in.grid.state(t, cur), in.grid.state(t - 1, prev));
  };
  CHECK(std::abs(multiplicative_expectation(in.kernels, in.grid, f0, ft) -
                 (enumerate_marginals(in.kernels, by_index).log_total - 3 * std::log(3.0))) <= 1e-10);
}
