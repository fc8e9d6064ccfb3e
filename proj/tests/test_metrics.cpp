#include <cmath>
#include <random>

#include "doctest.h"
#include "pvmc/metrics.hpp"
#include "support/oracles.hpp"

using namespace pvmc;

namespace {

Matrix normal_points(Eigen::Index n, Eigen::Index d, std::mt19937_64& gen) {
  std::normal_distribution<double> z;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(gen);
  return m;
}

Matrix random_spd(Eigen::Index d, std::mt19937_64& gen) {
  const Matrix B = normal_points(d, d, gen);
  return B * B.transpose() + 0.2 * Matrix::Identity(d, d);
}

const ScoreFunction standard_normal_score = [](const Vector& x) -> Vector { return -x; };

}  // namespace

TEST_CASE("posterior_mean_error examples") {
  Matrix a(3, 5);
  a.setRandom();
  CHECK(posterior_mean_error(a, a) == 0.0);
  CHECK(posterior_mean_error(a, a.array() + 0.7) == doctest::Approx(0.7 * std::sqrt(5.0)).epsilon(1e-14));
  CHECK(posterior_mean_squared_error(a, a.array() + 0.7) == doctest::Approx(0.49 * 5).epsilon(1e-14));
  CHECK_THROWS_AS(posterior_mean_error(a, Matrix::Zero(3, 4)), DimensionError);

  std::mt19937_64 gen(300);
  const Matrix b = normal_points(4, 3, gen), c = normal_points(4, 3, gen);
  double direct = 0.0, direct_sq = 0.0;
  for (Eigen::Index t = 0; t < 4; ++t) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k) s += (b(t, k) - c(t, k)) * (b(t, k) - c(t, k));
    direct += std::sqrt(s);
    direct_sq += s;
  }
  CHECK(posterior_mean_error(b, c) == doctest::Approx(direct / 4).epsilon(1e-15));
  CHECK(posterior_mean_squared_error(b, c) == doctest::Approx(direct_sq / 4).epsilon(1e-15));
  CHECK(posterior_mean_error(b.array() + 3.0, c.array() + 3.0) == doctest::Approx(posterior_mean_error(b, c)).epsilon(1e-14));
}

TEST_CASE("gaussian_w2 examples") {
  std::mt19937_64 gen(301);
  const Matrix S = random_spd(3, gen);
  const Vector m = Vector::Random(3);
  CHECK(std::abs(gaussian_w2(m, S, m, S)) <= 1e-10);
  CHECK(gaussian_w2(Vector::Zero(1), Matrix::Identity(1, 1), Vector::Ones(1), Matrix::Identity(1, 1)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  // 1-D closed form (m1 - m2)^2 + (s1 - s2)^2.
  CHECK(gaussian_w2(Vector::Constant(1, 0.5), Matrix::Constant(1, 1, 4.0), Vector::Constant(1, -1.0),
                    Matrix::Constant(1, 1, 9.0)) == doctest::Approx(2.25 + 1.0).epsilon(1e-13));
  CHECK_THROWS(gaussian_w2(m, -S, m, S));
}

TEST_CASE("property: gaussian_w2 symmetry and triangle inequality") {
  std::mt19937_64 gen(302);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 1 + trial % 4;
    const Vector ma = normal_points(d, 1, gen), mb = normal_points(d, 1, gen), mc = normal_points(d, 1, gen);
    const Matrix Sa = random_spd(d, gen), Sb = random_spd(d, gen), Sc = random_spd(d, gen);
    const double ab = gaussian_w2(ma, Sa, mb, Sb), ba = gaussian_w2(mb, Sb, ma, Sa);
    CHECK(std::abs(ab - ba) <= 1e-10);
    const double ac = gaussian_w2(ma, Sa, mc, Sc), cb = gaussian_w2(mc, Sc, mb, Sb);
    CHECK(std::sqrt(ab) <= std::sqrt(ac) + std::sqrt(cb) + 1e-8);
  }
}

TEST_CASE("gaussian_w2 against an empirical optimal transport") {
  // Exact assignment between coupled subsamples; the empirical cost converges
  // to W2^2 from above at rate ~ n^{-1/2} in 2-D, so several subsamples are pooled.
  std::mt19937_64 gen(303);
  Matrix S1(2, 2), S2(2, 2);
  S1 << 1.0, 0.3, 0.3, 0.5;
  S2 << 0.6, -0.2, -0.2, 1.4;
  const Vector m1 = Vector(Eigen::Vector2d(0.0, 0.0)), m2 = Vector(Eigen::Vector2d(0.5, -0.3));
  const Matrix L1 = S1.llt().matrixL(), L2 = S2.llt().matrixL();
  const double exact = gaussian_w2(m1, S1, m2, S2);
  const int n = 800, rounds = 6;
  double total = 0.0;
  for (int r = 0; r < rounds; ++r) {
    const Matrix X = (normal_points(n, 2, gen) * L1.transpose()).rowwise() + m1.transpose();
    const Matrix Y = (normal_points(n, 2, gen) * L2.transpose()).rowwise() + m2.transpose();
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = (X.row(i) - Y.row(j)).squaredNorm();
    total += pvmc::testing::assignment_cost(cost) / n;
  }
  CHECK(std::abs(total / rounds - exact) <= 0.05 * exact);
}

TEST_CASE("ksd examples") {
  const WeightedSample mode = WeightedSample::uniform(Matrix::Zero(1, 3));
  CHECK(ksd(mode, standard_normal_score, 0.7) == doctest::Approx(3.0 / 0.49).epsilon(1e-14));

  std::mt19937_64 gen(304);
  const WeightedSample exact = WeightedSample::uniform(normal_points(500, 2, gen));
  const WeightedSample far = WeightedSample::uniform(Matrix::Constant(1, 2, 4.0));
  CHECK(ksd(far, standard_normal_score, 1.0) > 10 * ksd(exact, standard_normal_score, 1.0));
  CHECK_THROWS_AS(ksd(exact, standard_normal_score, 0.0), PreconditionError);
  CHECK_THROWS(ksd(exact, [](const Vector& x) -> Vector { return Vector::Constant(x.size(), NAN); }, 1.0));
}

TEST_CASE("ksd matches a direct double loop") {
  std::mt19937_64 gen(305);
  const Matrix X = normal_points(7, 2, gen);
  std::vector<double> lw{-1.0, -2.0, -0.5, -3.0, -1.5, -0.2, -2.2};
  const double z = log_sum_exp(lw);
  for (auto& v : lw) v -= z;
  const WeightedSample s{X, lw};
  const double l = 0.9;
  double direct = 0.0;
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      const Vector xi = X.row(i).transpose(), xj = X.row(j).transpose();
      const Vector si = -xi, sj = -xj, r = xi - xj;
      const double r2 = r.squaredNorm(), k = std::exp(-r2 / (2 * l * l));
      // grad_x k = -r k / l^2, grad_y k = r k / l^2, tr grad_x grad_y k = k (d / l^2 - r2 / l^4)
      const double u = si.dot(sj) * k + si.dot(r) * k / (l * l) - sj.dot(r) * k / (l * l) +
                       k * (2.0 / (l * l) - r2 / (l * l * l * l));
      direct += std::exp(lw[i] + lw[j]) * u;
    }
  }
  CHECK(ksd(s, standard_normal_score, l) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("property: ksd is non-negative and permutation invariant") {
  std::mt19937_64 gen(306);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix X = normal_points(20, 3, gen).array() + 0.3 * trial;
    std::vector<double> lw(20);
    std::normal_distribution<double> z;
    for (auto& v : lw) v = z(gen);
    const double tot = log_sum_exp(lw);
    for (auto& v : lw) v -= tot;
    const double a = ksd({X, lw}, standard_normal_score, 1.3);
    CHECK(a >= 0.0);
    Matrix Xr = X.colwise().reverse();
    std::vector<double> lr(lw.rbegin(), lw.rend());
    CHECK(ksd({Xr, lr}, standard_normal_score, 1.3) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("ksd of exact samples is stable across replicates") {
  std::mt19937_64 gen(307);
  const Eigen::Index n = 10000;
  const Matrix A = normal_points(n, 2, gen), B = normal_points(n, 2, gen);
  const double ka = ksd(WeightedSample::uniform(A), standard_normal_score, 1.0);
  const double kb = ksd(WeightedSample::uniform(B), standard_normal_score, 1.0);
  // Bootstrap standard error of the first replicate.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  const int boots = 6;
  double sum = 0.0, sum2 = 0.0;
  for (int b = 0; b < boots; ++b) {
    Matrix R(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) R.row(i) = A.row(pick(gen));
    const double v = ksd(WeightedSample::uniform(R), standard_normal_score, 1.0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / boots;
  const double se = std::sqrt(std::max(0.0, sum2 / boots - mean * mean));
  CHECK(std::abs(ka - kb) <= 3 * se);
}

TEST_CASE("median_heuristic_bandwidth examples") {
  Matrix two(2, 1);
  two << 0.0, 2.0;
  const std::vector<Matrix> one_set{two};
  CHECK(median_heuristic_bandwidth(one_set) == doctest::Approx(2.0).epsilon(1e-15));

  Matrix s1(2, 1), s2(2, 1);
  s1 << 0.0, 1.0;
  s2 << 0.0, std::sqrt(3.0);
  const std::vector<Matrix> sets{s1, s2};
  CHECK(median_heuristic_bandwidth(sets) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  // 2 * median of chi^2_5, from scipy.stats.chi2.median(5).
  const double theoretical = 8.702920382191053;
  // A single 64-point set lands within 15% about 93% of the time.
  std::mt19937_64 gen(308);
  int within = 0;
  std::vector<Matrix> pooled;
  for (int k = 0; k < 20; ++k) {
    pooled.push_back(normal_points(64, 5, gen));
    const std::vector<Matrix> one{pooled.back()};
    const double l = median_heuristic_bandwidth(one);
    if (std::abs(l * l - theoretical) <= 0.15 * theoretical) ++within;
  }
  CHECK(within >= 16);
  const double l = median_heuristic_bandwidth(pooled);
  CHECK(std::abs(l * l - theoretical) <= 0.05 * theoretical);

  const std::vector<Matrix> same{Matrix::Ones(4, 2)};
  CHECK_THROWS_AS(median_heuristic_bandwidth(same), PreconditionError);
  const std::vector<Matrix> single{Matrix::Ones(1, 2)};
  CHECK_THROWS_AS(median_heuristic_bandwidth(single), PreconditionError);
}

TEST_CASE("effective_sample_size examples") {
  const std::vector<double> uniform(8, -std::log(8.0));
  CHECK(effective_sample_size(uniform) == doctest::Approx(8.0).epsilon(1e-14));
  const std::vector<double> one{0.0, kLogZero, kLogZero};
  CHECK(effective_sample_size(one) == 1.0);
  const std::vector<double> w{std::log(0.5), std::log(0.25), std::log(0.25)};
  CHECK(effective_sample_size(w) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("WeightedSample validation") {
  CHECK_THROWS(WeightedSample{Matrix::Zero(2, 1), {0.0, 0.0}}.validate());
  CHECK_THROWS(WeightedSample{Matrix::Zero(3, 1), {0.0, 0.0}}.validate());
  CHECK_NOTHROW(WeightedSample::uniform(Matrix::Zero(3, 1)).validate());
}
