#include "pvmc/gaussian.hpp"

#include <cmath>
#include <string>

#include "pvmc/errors.hpp"

namespace pvmc {

Matrix cholesky_lower(const Matrix& spd, std::string_view what) {
  if (spd.rows() != spd.cols() || spd.rows() == 0) {
    throw PreconditionError(std::string(what) + ": covariance must be square and non-empty");
  }
  if (!spd.isApprox(spd.transpose(), 1e-10)) {
    throw PreconditionError(std::string(what) + ": covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(spd);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError(std::string(what) + ": covariance is not positive definite");
  }
  return llt.matrixL();
}

double mvn_logpdf(std::span<const double> x, const Vector& mean, const Matrix& chol_lower) {
  const Vector z = chol_lower.triangularView<Eigen::Lower>().solve(as_vector(x) - mean);
  const double log_det = chol_lower.diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - log_det - 0.5 * static_cast<double>(x.size()) * kLogTwoPi;
}

double diag_gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> log_std) {
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double z = (x[d] - mean[d]) / std::exp(log_std[d]);
    acc += -0.5 * z * z - log_std[d] - 0.5 * kLogTwoPi;
  }
  return acc;
}

}  // namespace pvmc
