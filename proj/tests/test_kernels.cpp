#include <cmath>
#include <vector>

#include "doctest.h"
#include "pvmc/kernels.hpp"
#include "pvmc/weights.hpp"
#include "support/oracles.hpp"

using namespace pvmc;
using pvmc::testing::small_instance;

TEST_CASE("compute_kernels with one particle and one step") {
  const auto in = small_instance(1, 0, 31);
  const SSMSpec s = lg_as_ssm(in.lg);
  const auto x = in.grid.state(0, 0);
  const double direct = (s.prior_logpdf(x) + s.observation_logpdf(0, in.obs.at(0), x)) -
                        in.proposal.log_density(0, in.obs, x);
  REQUIRE(in.kernels.steps() == 1);
  CHECK(in.kernels.slabs[0](0, 0) == direct);
}

TEST_CASE("compute_kernels with the model as proposal leaves the observation term") {
  // One particle drawn from the prior marginals of a model with A = 0, so each
  // V_t equals the transition density and only log H_t survives.
  LinearGaussianSSM lg = lg_build(1, 1);
  lg.A(0, 0) = 0.0;
  const SSMSpec s = lg_as_ssm(lg);
  Rng rng(32);
  const ObservationSequence obs = simulate(s, 3, rng).second;
  const ProposalSpec prop = ProposalSpec::per_step(std::vector<Vector>(4, Vector::Zero(1)),
                                                   std::vector<Vector>(4, Vector::Zero(1)));
  const ParticleGrid g = sample_proposal(prop, obs, 1, rng);
  const KernelTensor k = compute_kernels(s, g, obs);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(k.slabs[t](0, 0) == doctest::Approx(s.observation_logpdf(t, obs.at(t), g.state(t, 0))).epsilon(1e-14));
  }
}

TEST_CASE("compute_kernels entries match per-entry density calls") {
  const auto in = small_instance(3, 2, 33, 2, 2);
  const SSMSpec s = lg_as_ssm(in.lg);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const auto xj = in.grid.state(t, j);
        const double num = t == 0 ? s.prior_logpdf(xj) : s.transition_logpdf(t, xj, in.grid.state(t - 1, i));
        const double expected = num + s.observation_logpdf(t, in.obs.at(t), xj) - in.proposal.log_density(t, in.obs, xj);
        CHECK(std::abs(in.kernels.slabs[t](i, j) - expected) <= 1e-12);
      }
    }
  }
  CHECK_NOTHROW(in.kernels.validate());
  CHECK(in.kernels.slabs[0].row(0)[1] == in.kernels.slabs[0].row(2)[1]);
  CHECK(in.kernels.initial()[2] == in.kernels.slabs[0](0, 2));
}

TEST_CASE("compute_kernels errors") {
  auto in = small_instance(2, 2, 34);
  const SSMSpec s = lg_as_ssm(in.lg);
  ParticleGrid bad = in.grid;
  bad.log_density(1, 1) = kLogZero;
  CHECK_THROWS_AS(compute_kernels(s, bad, in.obs), IllPosedWeightsError);
  const ObservationSequence longer(5, 1, std::vector<double>(5, 0.0));
  CHECK_THROWS_AS(compute_kernels(s, in.grid, longer), DimensionError);
}

TEST_CASE("KernelTensor validation") {
  KernelTensor k;
  CHECK_THROWS(k.validate());
  k.slabs = {LogMatrix(2, 2, 0.0), LogMatrix(2, 2, 0.0)};
  CHECK_NOTHROW(k.validate());
  k.slabs[0](1, 0) = 1.0;
  CHECK_THROWS(k.validate());
  k.slabs[0](1, 0) = 0.0;
  k.slabs[1](0, 1) = std::nan("");
  CHECK_THROWS(k.validate());
  k.slabs[1](0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS(k.validate());
  k.slabs[1] = LogMatrix(3, 3, 0.0);
  CHECK_THROWS(k.validate());
}

TEST_CASE("markovian_kernels examples") {
  const auto in = small_instance(3, 2, 35);
  const SSMSpec s = lg_as_ssm(in.lg);
  const MarkovProposalSpec m{in.proposal, Matrix::Constant(1, 1, 0.4), Matrix::Constant(1, 1, 0.3),
                             Vector::Constant(1, 0.1), Vector::Constant(1, -0.2)};

  SUBCASE("one particle: the mixture is the single conditional") {
    Rng rng(1);
    const ParticleGrid g = sample_markov_proposal(m, in.obs, 1, rng);
    const KernelTensor k = markovian_kernels(s, m, g, in.obs);
    ParticleGrid h = g;
    for (std::size_t t = 1; t < 3; ++t) h.log_density(t, 0) = m.log_density(t, in.obs, g.state(t - 1, 0), g.state(t, 0));
    CHECK(k.slabs == compute_kernels(s, h, in.obs).slabs);
  }

  SUBCASE("no dependence on the previous state: identical to the factorised kernels") {
    // With F = 0, V_t(.|x_{t-1}) is the factorised proposal with mean c and log_std.
    std::vector<Vector> means(3, Vector::Zero(1)), stds(3, Vector::Zero(1));
    means[0] = in.proposal.mean(0, in.obs);
    stds[0] = in.proposal.log_std(0);
    const ProposalSpec same = ProposalSpec::per_step(means, stds);
    const MarkovProposalSpec flat{same, Matrix::Zero(1, 1), Matrix::Zero(1, 1), Vector::Zero(1), Vector::Zero(1)};
    Rng a(2);
    const ParticleGrid g = sample_markov_proposal(flat, in.obs, 3, a);
    ParticleGrid h = g;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t n = 0; n < 3; ++n) h.log_density(t, n) = same.log_density(t, in.obs, g.state(t, n));
    CHECK(markovian_kernels(s, flat, g, in.obs).slabs == compute_kernels(s, h, in.obs).slabs);
  }

  SUBCASE("mixture denominators match a direct log-sum-exp") {
    Rng rng(3);
    const ParticleGrid g = sample_markov_proposal(m, in.obs, 3, rng);
    const KernelTensor k = markovian_kernels(s, m, g, in.obs);
    for (std::size_t t = 1; t < 3; ++t) {
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          std::vector<double> terms;
          for (std::size_t q = 0; q < 3; ++q) terms.push_back(m.log_density(t, in.obs, g.state(t - 1, q), g.state(t, j)));
          const double denom = log_sum_exp(terms) - std::log(3.0);
          const auto xj = g.state(t, j);
          const double expected = s.transition_logpdf(t, xj, g.state(t - 1, i)) +
                                  s.observation_logpdf(t, in.obs.at(t), xj) - denom;
          CHECK(std::abs(k.slabs[t](i, j) - expected) <= 1e-12);
        }
      }
    }
  }
}
