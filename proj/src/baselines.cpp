#include "pvmc/baselines.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pvmc/errors.hpp"
#include "pvmc/metrics.hpp"

namespace pvmc {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

FilterOutput kalman_filter(const LinearGaussianSSM& lg, const ObservationSequence& obs) {
  lg.validate();
  if (obs.dim() != lg.obs_dim()) throw DimensionError("kalman_filter: observation dimension");
  const Matrix H = lg.effective_H();
  const auto dx = static_cast<Eigen::Index>(lg.state_dim());
  const Matrix I = Matrix::Identity(dx, dx);

  FilterOutput out;
  Vector m = lg.prior_mean;
  Matrix P = lg.prior_cov;
  for (std::size_t t = 0; t < obs.steps(); ++t) {
    if (t > 0) {
      m = lg.A * m;
      P = symmetrize(lg.A * P * lg.A.transpose() + lg.Q);
    }
    out.predicted.push_back({m, P});

    const Matrix S = symmetrize(H * P * H.transpose() + lg.R);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("kalman_filter: innovation covariance is not positive definite", t);
    }
    const Vector e = as_vector(obs.at(t)) - H * m;
    const Matrix L = llt.matrixL();
    const Vector z = L.triangularView<Eigen::Lower>().solve(e);
    out.log_likelihood += -0.5 * z.squaredNorm() - L.diagonal().array().log().sum() -
                          0.5 * static_cast<double>(e.size()) * kLogTwoPi;

    const Matrix K = llt.solve(H * P).transpose();
    m = m + K * e;
    const Matrix IKH = I - K * H;
    P = symmetrize(IKH * P * IKH.transpose() + K * lg.R * K.transpose());
    out.filtered.push_back({m, P});
  }
  return out;
}

std::vector<GaussianBelief> rts_smooth(const LinearGaussianSSM& lg, const FilterOutput& filter) {
  const std::size_t steps = filter.filtered.size();
  if (steps == 0 || filter.predicted.size() != steps) {
    throw PreconditionError("rts_smooth: filter output is empty or inconsistent");
  }
  std::vector<GaussianBelief> smoothed(steps);
  smoothed[steps - 1] = filter.filtered[steps - 1];
  for (std::size_t t = steps - 1; t-- > 0;) {
    const auto& f = filter.filtered[t];
    const auto& p = filter.predicted[t + 1];
    Eigen::LLT<Matrix> llt(p.cov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("rts_smooth: predicted covariance is singular", t + 1);
    }
    const Matrix G = llt.solve(lg.A * f.cov).transpose();
    smoothed[t].mean = f.mean + G * (smoothed[t + 1].mean - p.mean);
    smoothed[t].cov = symmetrize(f.cov + G * (smoothed[t + 1].cov - p.cov) * G.transpose());
  }
  return smoothed;
}

ParticleFilterOutput bootstrap_pf(const SSMSpec& ssm, const ObservationSequence& obs,
                                  std::size_t N, Rng& rng, double resample_threshold) {
  if (N == 0) throw PreconditionError("bootstrap_pf: N must be >= 1");
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0)) {
    throw PreconditionError("bootstrap_pf: resample_threshold must lie in [0, 1]");
  }
  if (!ssm.prior_sample || !ssm.transition_sample) {
    throw PreconditionError("bootstrap_pf: sampler callback absent");
  }
  ssm.validate();
  const std::size_t steps = obs.steps(), d = ssm.state_dim;
  const auto rows = static_cast<Eigen::Index>(N), cols = static_cast<Eigen::Index>(d);
  const double log_n = std::log(static_cast<double>(N));

  ParticleFilterOutput out;
  out.log_w = LogMatrix(steps, N);
  std::vector<LogValue> lw(N, -log_n), unnorm(N);
  Matrix current(rows, cols), next(rows, cols);
  std::vector<double> buffer(d), parent(d);

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      if (t == 0) {
        ssm.prior_sample(rng, buffer);
      } else {
        for (std::size_t k = 0; k < d; ++k) parent[k] = current(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
        ssm.transition_sample(t, parent, rng, buffer);
      }
      for (std::size_t k = 0; k < d; ++k) next(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = buffer[k];
      unnorm[n] = lw[n] + ssm.observation_logpdf(t, obs.at(t), buffer);
    }
    const LogValue inc = log_sum_exp(unnorm);
    if (inc == kLogZero) throw NumericalError("bootstrap_pf: all weights are zero", t);
    out.log_increments.push_back(inc);
    out.log_likelihood += inc;
    for (std::size_t n = 0; n < N; ++n) {
      lw[n] = unnorm[n] - inc;
      out.log_w(t, n) = lw[n];
    }
    out.particles.push_back(next);
    current = next;

    const bool resample = effective_sample_size(lw) < resample_threshold * static_cast<double>(N);
    out.resampled.push_back(resample);
    if (resample) {
      std::vector<double> w(N);
      for (std::size_t n = 0; n < N; ++n) w[n] = std::exp(lw[n]);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      Matrix chosen(rows, cols);
      for (std::size_t n = 0; n < N; ++n) {
        chosen.row(static_cast<Eigen::Index>(n)) = current.row(static_cast<Eigen::Index>(pick(rng.engine())));
      }
      current = std::move(chosen);
      std::fill(lw.begin(), lw.end(), -log_n);
    }
  }
  return out;
}

ProposalSpec kalman_proposal(const FilterOutput& filter) {
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (const auto& b : filter.filtered) {
    means.push_back(b.mean);
    covs.push_back(b.cov);
  }
  return ProposalSpec::per_step_full(std::move(means), std::move(covs));
}

ProposalSpec prior_marginal_proposal(const LinearGaussianSSM& lg, std::size_t steps) {
  if (steps == 0) throw PreconditionError("prior_marginal_proposal: steps must be >= 1");
  std::vector<Vector> means, log_stds;
  Vector m = lg.prior_mean;
  Matrix P = lg.prior_cov;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      m = lg.A * m;
      P = symmetrize(lg.A * P * lg.A.transpose() + lg.Q);
    }
    means.push_back(m);
    log_stds.push_back(0.5 * P.diagonal().array().log().matrix());
  }
  return ProposalSpec::per_step(std::move(means), std::move(log_stds));
}

}  // namespace pvmc
