#include "pvmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvmc/errors.hpp"

namespace pvmc {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shapes differ");
  }
}

Matrix spd_sqrt(const Matrix& s, const char* what) {
  cholesky_lower(s, what);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

void WeightedSample::validate() const {
  if (points.rows() == 0 || static_cast<std::size_t>(points.rows()) != log_w.size()) {
    throw DimensionError("WeightedSample: one log-weight per point required");
  }
  if (std::abs(log_sum_exp(log_w)) > 1e-8) {
    throw PreconditionError("WeightedSample: weights are not normalised");
  }
}

WeightedSample WeightedSample::uniform(Matrix points) {
  const auto n = static_cast<std::size_t>(points.rows());
  return {std::move(points), std::vector<LogValue>(n, -std::log(static_cast<double>(n)))};
}

double posterior_mean_error(const Matrix& estimate, const Matrix& exact) {
  check_same_shape(estimate, exact, "posterior_mean_error");
  if (estimate.rows() == 0) throw PreconditionError("posterior_mean_error: no time steps");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < estimate.rows(); ++t) acc += (estimate.row(t) - exact.row(t)).norm();
  return acc / static_cast<double>(estimate.rows());
}

double posterior_mean_squared_error(const Matrix& estimate, const Matrix& exact) {
  check_same_shape(estimate, exact, "posterior_mean_squared_error");
  if (estimate.rows() == 0) throw PreconditionError("posterior_mean_squared_error: no time steps");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < estimate.rows(); ++t) {
    acc += (estimate.row(t) - exact.row(t)).squaredNorm();
  }
  return acc / static_cast<double>(estimate.rows());
}

double gaussian_w2(const Vector& m1, const Matrix& S1, const Vector& m2, const Matrix& S2) {
  if (m1.size() != m2.size() || S1.rows() != m1.size() || S2.rows() != m2.size()) {
    throw DimensionError("gaussian_w2: dimensions differ");
  }
  cholesky_lower(S1, "gaussian_w2.S1");
  const Matrix r2 = spd_sqrt(S2, "gaussian_w2.S2");
  const Matrix cross = spd_sqrt(0.5 * (r2 * S1 * r2 + (r2 * S1 * r2).transpose()), "gaussian_w2.cross");
  const double value = (m1 - m2).squaredNorm() + (S1 + S2 - 2.0 * cross).trace();
  return std::max(value, 0.0);
}

double ksd(const WeightedSample& sample, const ScoreFunction& score, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw PreconditionError("ksd: bandwidth must be positive and finite");
  }
  sample.validate();
  const Eigen::Index n = sample.points.rows(), d = sample.points.cols();
  const double l2 = bandwidth * bandwidth;

  // One point per column so the pair loop reads contiguous memory.
  const Matrix X = sample.points.transpose();
  Matrix S(d, n);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector s = score(X.col(i));
    if (s.size() != d || !s.allFinite()) {
      throw PreconditionError("ksd: score is not finite at point " + std::to_string(i));
    }
    S.col(i) = s;
    w[static_cast<std::size_t>(i)] = std::exp(sample.log_w[static_cast<std::size_t>(i)]);
  }

  std::vector<double> row_sums(static_cast<std::size_t>(n), 0.0);
  // u(x, x') is symmetric, so only j >= i is visited and off-diagonal terms count twice.
#pragma omp parallel for schedule(dynamic, 64)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = X.col(i).data();
    const double* si = S.col(i).data();
    double acc = 0.0;
    for (Eigen::Index j = i; j < n; ++j) {
      const double* xj = X.col(j).data();
      const double* sj = S.col(j).data();
      double r2 = 0.0, ss = 0.0, si_diff = 0.0, sj_diff = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = xi[k] - xj[k];
        r2 += diff * diff;
        ss += si[k] * sj[k];
        si_diff += si[k] * diff;
        sj_diff += sj[k] * diff;
      }
      const double kern = std::exp(-r2 / (2.0 * l2));
      const double trace = static_cast<double>(d) / l2 - r2 / (l2 * l2);
      const double u = kern * (ss + (si_diff - sj_diff) / l2 + trace);
      acc += (j == i ? 1.0 : 2.0) * w[static_cast<std::size_t>(j)] * u;
    }
    row_sums[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] * acc;
  }
  double total = 0.0;
  for (double v : row_sums) total += v;
  return std::max(total, 0.0);
}

double median_heuristic_bandwidth(std::span<const Matrix> sets) {
  if (sets.empty()) throw PreconditionError("median_heuristic_bandwidth: no point sets");
  double acc = 0.0;
  for (const Matrix& s : sets) {
    if (s.rows() < 2) throw PreconditionError("median_heuristic_bandwidth: a set has fewer than 2 points");
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(s.rows() * (s.rows() - 1) / 2));
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = i + 1; j < s.rows(); ++j) dist.push_back((s.row(i) - s.row(j)).norm());
    const double med = median(std::move(dist));
    if (med == 0.0) throw PreconditionError("median_heuristic_bandwidth: zero median distance");
    acc += med * med;
  }
  return std::sqrt(acc / static_cast<double>(sets.size()));
}

double effective_sample_size(std::span<const LogValue> log_w) {
  if (log_w.empty()) throw PreconditionError("effective_sample_size: empty weights");
  double acc = 0.0;
  for (LogValue v : log_w) acc += std::exp(2.0 * v);
  return 1.0 / acc;
}

}  // namespace pvmc
