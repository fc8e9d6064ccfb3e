#include <cmath>
#include <vector>

#include "doctest.h"
#include "pvmc/proposal.hpp"
#include "pvmc/ssm.hpp"
#include "support/oracles.hpp"

using namespace pvmc;
using pvmc::testing::dense_mvn_logpdf;

namespace {

Vector to_vec(ConstState x) { return as_vector(x); }

}  // namespace

TEST_CASE("lg_build fills the benchmark matrices") {
  const LinearGaussianSSM one = lg_build(1, 1);
  CHECK(one.A(0, 0) == 0.38);
  CHECK(one.H(0, 0) == 1.0);

  const LinearGaussianSSM two = lg_build(2, 2);
  CHECK(two.A(0, 0) == doctest::Approx(0.38).epsilon(1e-15));
  CHECK(two.A(0, 1) == doctest::Approx(0.1444).epsilon(1e-15));
  CHECK(two.A(1, 0) == doctest::Approx(0.1444).epsilon(1e-15));

  const LinearGaussianSSM five = lg_build(5, 5);
  const double row[] = {0.38, 0.1444, 0.054872, 0.02085136, 0.0079235168};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      CHECK(five.A(i, j) == doctest::Approx(row[std::abs(i - j)]).epsilon(1e-14));
      CHECK(five.A(i, j) == five.A(j, i));
      CHECK(five.H(i, j) == (i == j ? 1.0 : 0.0));
      CHECK(five.Q(i, j) == (i == j ? 1.0 : 0.0));
      CHECK(five.R(i, j) == (i == j ? 1.0 : 0.0));
      CHECK(five.prior_cov(i, j) == (i == j ? 1.0 : 0.0));
    }
    CHECK(five.prior_mean(i) == 0.0);
  }

  const LinearGaussianSSM rect = lg_build(3, 2);
  CHECK(rect.H.rows() == 2);
  CHECK(rect.H.cols() == 3);
  CHECK_THROWS_AS(lg_build(2, 3), PreconditionError);
}

TEST_CASE("lg_as_ssm densities at simple points") {
  const SSMSpec one = lg_as_ssm(lg_build(1, 1));
  const std::vector<double> prev{1.7}, cur{0.38 * 1.7};
  CHECK(one.transition_logpdf(1, cur, prev) == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-14));

  const SSMSpec two = lg_as_ssm(lg_build(2, 2));
  const std::vector<double> zero{0.0, 0.0};
  CHECK(two.prior_logpdf(zero) == doctest::Approx(-std::log(2 * M_PI)).epsilon(1e-14));
}

TEST_CASE("lg_as_ssm observation density integrates to one") {
  const SSMSpec s = lg_as_ssm(lg_build(1, 1));
  const std::vector<double> x{0.73};
  const double h = 1e-3;
  double total = 0.0;
  for (double y = -12.0; y <= 12.0; y += h) {
    const std::vector<double> yy{y};
    total += std::exp(s.observation_logpdf(3, yy, x)) * h;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("property: LG densities agree with a dense MVN implementation") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dx = 1 + trial % 3, dy = 1 + (trial % 3 == 0 ? 0 : trial % 2);
    LinearGaussianSSM lg = lg_build(dx, std::min(dx, dy));
    for (Eigen::Index i = 0; i < lg.A.size(); ++i) lg.A.data()[i] = 0.5 * rng.normal();
    for (Eigen::Index i = 0; i < lg.H.size(); ++i) lg.H.data()[i] = rng.normal();
    Matrix B = Matrix::Random(static_cast<Eigen::Index>(dx), static_cast<Eigen::Index>(dx));
    lg.Q = B * B.transpose() + 0.3 * Matrix::Identity(static_cast<Eigen::Index>(dx), static_cast<Eigen::Index>(dx));
    lg.prior_mean = Vector::Constant(static_cast<Eigen::Index>(dx), 0.4);
    const SSMSpec s = lg_as_ssm(lg);

    std::vector<double> xp(dx), xc(dx), y(lg.obs_dim());
    for (auto& v : xp) v = rng.normal();
    for (auto& v : xc) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const Vector vp = to_vec(xp), vc = to_vec(xc), vy = to_vec(y);
    CHECK(s.transition_logpdf(2, xc, xp) ==
          doctest::Approx(dense_mvn_logpdf(vc, lg.A * vp, lg.Q)).epsilon(1e-12));
    CHECK(std::abs(s.transition_logpdf(2, xc, xp) - dense_mvn_logpdf(vc, lg.A * vp, lg.Q)) <= 1e-10);
    CHECK(std::abs(s.observation_logpdf(2, y, xc) - dense_mvn_logpdf(vy, lg.H * vc, lg.R)) <= 1e-10);
    CHECK(std::abs(s.prior_logpdf(xc) - dense_mvn_logpdf(vc, lg.prior_mean, lg.prior_cov)) <= 1e-10);
  }
}

TEST_CASE("LinearGaussianSSM parameters round-trip") {
  LinearGaussianSSM lg = lg_build(2, 1);
  std::vector<double> theta = lg.params();
  CHECK(theta.size() == 4 + 2);
  theta[1] = 0.5;
  theta[5] = -2.0;
  const LinearGaussianSSM back = lg.with_params(theta);
  CHECK(back.A(0, 1) == 0.5);
  CHECK(back.H(0, 1) == -2.0);
  CHECK(back.params() == theta);
  CHECK_THROWS(lg.with_params(std::vector<double>(3, 0.0)));
}

TEST_CASE("LinearGaussianSSM validation rejects non-SPD covariances") {
  LinearGaussianSSM lg = lg_build(2, 2);
  lg.Q(1, 1) = -1.0;
  CHECK_THROWS(lg.validate());
  CHECK_THROWS(lg_as_ssm(lg));
}

TEST_CASE("simulate examples") {
  const SSMSpec s = lg_as_ssm(lg_build(2, 2));
  Rng rng(4);
  const auto [xs, ys] = simulate(s, 0, rng);
  CHECK(xs.steps() == 1);
  CHECK(ys.steps() == 1);
  CHECK(ys.dim() == 2);

  LinearGaussianSSM det = lg_build(1, 1);
  det.Q(0, 0) = 1e-12;
  det.R(0, 0) = 1e-12;
  Rng rng2(5);
  const auto [x2, y2] = simulate(lg_as_ssm(det), 6, rng2);
  for (std::size_t t = 0; t <= 6; ++t) {
    CHECK(std::abs(y2.at(t)[0] - std::pow(0.38, static_cast<double>(t)) * x2.at(0)[0]) <= 1e-5);
  }

  SSMSpec missing = s;
  missing.transition_sample = nullptr;
  Rng rng3(6);
  CHECK_THROWS_AS(simulate(missing, 2, rng3), PreconditionError);
}

TEST_CASE("simulate is deterministic and has the right first moment") {
  const SSMSpec s = lg_as_ssm(lg_build(1, 1));
  Rng a(77), b(77);
  CHECK(simulate(s, 5, a) == simulate(s, 5, b));

  const int sims = 100000;
  double sum = 0.0, sum2 = 0.0;
  Rng root(8);
  for (int k = 0; k < sims; ++k) {
    Rng r = root.split(static_cast<std::uint64_t>(k));
    const double x1 = simulate(s, 1, r).first.at(1)[0];
    sum += x1;
    sum2 += x1 * x1;
  }
  const double mean = sum / sims;
  const double se = std::sqrt((sum2 / sims - mean * mean) / sims);
  CHECK(std::abs(mean) <= 3 * se);
}

TEST_CASE("Series validation") {
  CHECK_THROWS_AS(ObservationSequence(2, 1, {1.0}), DimensionError);
  CHECK_THROWS_AS(ObservationSequence(1, 1, {std::nan("")}), PreconditionError);
  CHECK_THROWS_AS(ObservationSequence(0, 1, {}), PreconditionError);
  const ObservationSequence y(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(y.horizon() == 2);
  CHECK(y.at(1)[1] == 4);
}

TEST_CASE("SSMSpec validation") {
  SSMSpec s = lg_as_ssm(lg_build(1, 1));
  CHECK_NOTHROW(s.validate());
  CHECK(s.differentiable());
  s.observation_logpdf = nullptr;
  CHECK_THROWS(s.validate());
}
