#pragma once

#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace pvmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline Eigen::Map<const Vector> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}
inline Eigen::Map<Vector> as_vector(std::span<double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

/// Lower Cholesky factor of a symmetric positive definite matrix; throws
/// PreconditionError naming `what` otherwise.
Matrix cholesky_lower(const Matrix& spd, std::string_view what);

/// log N(x; mean, L L^T) given the lower Cholesky factor L.
double mvn_logpdf(std::span<const double> x, const Vector& mean, const Matrix& chol_lower);

/// log N(x; mean, diag(exp(2 log_std))).
double diag_gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> log_std);

}  // namespace pvmc
