#include "pvmc/ssm.hpp"

#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>

namespace pvmc {

void SSMSpec::validate() const {
  if (state_dim == 0 || obs_dim == 0) throw PreconditionError("SSMSpec: dimensions must be >= 1");
  if (!prior_logpdf || !transition_logpdf || !observation_logpdf) {
    throw PreconditionError("SSMSpec: missing density callback");
  }
}

Matrix LinearGaussianSSM::effective_H() const {
  if (h_mask.size() == 0) return H;
  return H.cwiseProduct(h_mask);
}

void LinearGaussianSSM::validate() const {
  const auto dx = A.rows(), dy = H.rows();
  if (dx == 0 || dy == 0) throw PreconditionError("LinearGaussianSSM: empty dimensions");
  if (A.cols() != dx || H.cols() != dx || Q.rows() != dx || Q.cols() != dx || R.rows() != dy ||
      R.cols() != dy || prior_mean.size() != dx || prior_cov.rows() != dx ||
      prior_cov.cols() != dx) {
    throw DimensionError("LinearGaussianSSM: inconsistent matrix shapes");
  }
  if (h_mask.size() != 0 && (h_mask.rows() != dy || h_mask.cols() != dx)) {
    throw DimensionError("LinearGaussianSSM: h_mask shape differs from H");
  }
  cholesky_lower(Q, "LinearGaussianSSM.Q");
  cholesky_lower(R, "LinearGaussianSSM.R");
  cholesky_lower(prior_cov, "LinearGaussianSSM.prior_cov");
}

std::vector<double> LinearGaussianSSM::params() const {
  std::vector<double> theta;
  theta.reserve(static_cast<std::size_t>(A.size() + H.size()));
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) theta.push_back(A(i, j));
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j) theta.push_back(H(i, j));
  return theta;
}

LinearGaussianSSM LinearGaussianSSM::with_params(std::span<const double> theta) const {
  if (theta.size() != static_cast<std::size_t>(A.size() + H.size())) {
    throw DimensionError("LinearGaussianSSM::with_params: wrong parameter count");
  }
  LinearGaussianSSM out = *this;
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) out.A(i, j) = theta[k++];
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j) out.H(i, j) = theta[k++];
  return out;
}

LinearGaussianSSM lg_build(std::size_t state_dim, std::size_t obs_dim) {
  if (state_dim == 0 || obs_dim == 0) throw PreconditionError("lg_build: dimensions must be >= 1");
  if (obs_dim > state_dim) {
    throw PreconditionError("lg_build: obs_dim (" + std::to_string(obs_dim) +
                            ") exceeds state_dim (" + std::to_string(state_dim) + ")");
  }
  const auto dx = static_cast<Eigen::Index>(state_dim);
  const auto dy = static_cast<Eigen::Index>(obs_dim);
  LinearGaussianSSM lg;
  lg.A = Matrix(dx, dx);
  for (Eigen::Index i = 0; i < dx; ++i) {
    for (Eigen::Index j = 0; j < dx; ++j) {
      double v = 0.38;
      for (Eigen::Index p = 0; p < std::abs(i - j); ++p) v *= 0.38;
      lg.A(i, j) = v;
    }
  }
  lg.H = Matrix::Identity(dy, dx);
  lg.Q = Matrix::Identity(dx, dx);
  lg.R = Matrix::Identity(dy, dy);
  lg.prior_mean = Vector::Zero(dx);
  lg.prior_cov = Matrix::Identity(dx, dx);
  return lg;
}

namespace {

// Precomputed factors shared by the callbacks of one model instance.
struct LgFactors {
  Matrix A, H, mask;
  Vector prior_mean;
  Matrix q_chol, r_chol, p_chol;           // lower Cholesky factors
  Matrix q_inv_chol, r_inv_chol, p_inv_chol;  // their inverses
  Matrix q_inv, r_inv, p_inv;
  double q_const = 0, r_const = 0, p_const = 0;  // normalising constants
};

double log_norm_const(const Matrix& chol) {
  return -chol.diagonal().array().log().sum() - 0.5 * static_cast<double>(chol.rows()) * kLogTwoPi;
}

// -0.5 |L^{-1} r|^2 with L^{-1} lower triangular.
double half_mahalanobis(const Matrix& inv_chol, const double* r) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < inv_chol.rows(); ++i) {
    double z = 0.0;
    for (Eigen::Index k = 0; k <= i; ++k) z += inv_chol(i, k) * r[k];
    acc += z * z;
  }
  return -0.5 * acc;
}

thread_local std::vector<double> scratch_a, scratch_b;

double* scratch(std::vector<double>& buf, std::size_t n) {
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

}  // namespace

SSMSpec lg_as_ssm(const LinearGaussianSSM& lg) {
  lg.validate();
  auto f = std::make_shared<LgFactors>();
  f->A = lg.A;
  f->H = lg.effective_H();
  f->mask = lg.h_mask.size() == 0 ? Matrix::Ones(lg.H.rows(), lg.H.cols()) : lg.h_mask;
  f->prior_mean = lg.prior_mean;
  f->q_chol = cholesky_lower(lg.Q, "Q");
  f->r_chol = cholesky_lower(lg.R, "R");
  f->p_chol = cholesky_lower(lg.prior_cov, "prior_cov");
  auto inv_lower = [](const Matrix& l) -> Matrix {
    return l.triangularView<Eigen::Lower>().solve(Matrix::Identity(l.rows(), l.cols()));
  };
  f->q_inv_chol = inv_lower(f->q_chol);
  f->r_inv_chol = inv_lower(f->r_chol);
  f->p_inv_chol = inv_lower(f->p_chol);
  f->q_inv = f->q_inv_chol.transpose() * f->q_inv_chol;
  f->r_inv = f->r_inv_chol.transpose() * f->r_inv_chol;
  f->p_inv = f->p_inv_chol.transpose() * f->p_inv_chol;
  f->q_const = log_norm_const(f->q_chol);
  f->r_const = log_norm_const(f->r_chol);
  f->p_const = log_norm_const(f->p_chol);

  const std::size_t dx = lg.state_dim(), dy = lg.obs_dim();
  SSMSpec ssm;
  ssm.state_dim = dx;
  ssm.obs_dim = dy;
  ssm.params = lg.params();

  ssm.prior_logpdf = [f, dx](ConstState x) {
    double* r = scratch(scratch_a, dx);
    for (std::size_t i = 0; i < dx; ++i) r[i] = x[i] - f->prior_mean(static_cast<Eigen::Index>(i));
    return half_mahalanobis(f->p_inv_chol, r) + f->p_const;
  };
  ssm.transition_logpdf = [f, dx](std::size_t, ConstState x_t, ConstState x_prev) {
    double* r = scratch(scratch_a, dx);
    for (std::size_t i = 0; i < dx; ++i) {
      double ax = 0.0;
      for (std::size_t k = 0; k < dx; ++k) ax += f->A(i, k) * x_prev[k];
      r[i] = x_t[i] - ax;
    }
    return half_mahalanobis(f->q_inv_chol, r) + f->q_const;
  };
  ssm.observation_logpdf = [f, dx, dy](std::size_t, ConstState y, ConstState x) {
    double* r = scratch(scratch_a, dy);
    for (std::size_t i = 0; i < dy; ++i) {
      double hx = 0.0;
      for (std::size_t k = 0; k < dx; ++k) hx += f->H(i, k) * x[k];
      r[i] = y[i] - hx;
    }
    return half_mahalanobis(f->r_inv_chol, r) + f->r_const;
  };

  ssm.prior_sample = [f, dx](Rng& rng, MutState out) {
    Vector z(dx);
    for (std::size_t i = 0; i < dx; ++i) z(i) = rng.normal();
    as_vector(out) = f->prior_mean + f->p_chol * z;
  };
  ssm.transition_sample = [f, dx](std::size_t, ConstState x_prev, Rng& rng, MutState out) {
    Vector z(dx);
    for (std::size_t i = 0; i < dx; ++i) z(i) = rng.normal();
    as_vector(out) = f->A * as_vector(x_prev) + f->q_chol * z;
  };
  ssm.observation_sample = [f, dy](std::size_t, ConstState x, Rng& rng, MutState out) {
    Vector z(dy);
    for (std::size_t i = 0; i < dy; ++i) z(i) = rng.normal();
    as_vector(out) = f->H * as_vector(x) + f->r_chol * z;
  };

  ssm.gradients.prior = [f, dx](ConstState x, double scale, MutState gx, MutState) {
    const Vector g = f->p_inv * (as_vector(x) - f->prior_mean);
    for (std::size_t i = 0; i < dx; ++i) gx[i] -= scale * g(static_cast<Eigen::Index>(i));
  };
  ssm.gradients.transition = [f, dx](std::size_t, ConstState x_t, ConstState x_prev, double scale,
                                     MutState gx_t, MutState gx_prev, MutState gtheta) {
    double* r = scratch(scratch_a, dx);
    double* u = scratch(scratch_b, dx);
    for (std::size_t i = 0; i < dx; ++i) {
      double ax = 0.0;
      for (std::size_t k = 0; k < dx; ++k) ax += f->A(i, k) * x_prev[k];
      r[i] = x_t[i] - ax;
    }
    for (std::size_t i = 0; i < dx; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dx; ++k) acc += f->q_inv(i, k) * r[k];
      u[i] = scale * acc;
    }
    for (std::size_t i = 0; i < dx; ++i) {
      gx_t[i] -= u[i];
      for (std::size_t k = 0; k < dx; ++k) {
        gx_prev[k] += f->A(i, k) * u[i];
        gtheta[i * dx + k] += u[i] * x_prev[k];
      }
    }
  };
  ssm.gradients.observation = [f, dx, dy](std::size_t, ConstState y, ConstState x, double scale,
                                          MutState gx, MutState gtheta) {
    double* e = scratch(scratch_a, dy);
    double* v = scratch(scratch_b, dy);
    for (std::size_t i = 0; i < dy; ++i) {
      double hx = 0.0;
      for (std::size_t k = 0; k < dx; ++k) hx += f->H(i, k) * x[k];
      e[i] = y[i] - hx;
    }
    for (std::size_t i = 0; i < dy; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dy; ++k) acc += f->r_inv(i, k) * e[k];
      v[i] = scale * acc;
    }
    const std::size_t h_offset = dx * dx;
    for (std::size_t i = 0; i < dy; ++i) {
      for (std::size_t k = 0; k < dx; ++k) {
        gx[k] += f->H(i, k) * v[i];
        gtheta[h_offset + i * dx + k] += f->mask(i, k) * v[i] * x[k];
      }
    }
  };
  return ssm;
}

std::pair<Trajectory, ObservationSequence> simulate(const SSMSpec& ssm, std::size_t horizon,
                                                    Rng& rng) {
  if (!ssm.prior_sample || !ssm.transition_sample || !ssm.observation_sample) {
    throw PreconditionError("simulate: sampler callback absent");
  }
  if (ssm.state_dim == 0 || ssm.obs_dim == 0) throw PreconditionError("simulate: empty dimensions");
  const std::size_t steps = horizon + 1;
  Trajectory xs(steps, ssm.state_dim);
  ObservationSequence ys(steps, ssm.obs_dim);
  ssm.prior_sample(rng, xs.at(0));
  ssm.observation_sample(0, xs.at(0), rng, ys.at(0));
  for (std::size_t t = 1; t < steps; ++t) {
    ssm.transition_sample(t, xs.at(t - 1), rng, xs.at(t));
    ssm.observation_sample(t, xs.at(t), rng, ys.at(t));
  }
  return {std::move(xs), std::move(ys)};
}

}  // namespace pvmc
