#include "pvmc/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pvmc/errors.hpp"

namespace pvmc {

namespace {

double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

bool clamped(double v) { return v < kLogStdMin || v > kLogStdMax; }

// out_i = (sum_k W_ik y_k) + b_i, evaluated in a fixed order so that different
// proposal types produce bit-identical means.
Vector affine_mean(const Matrix& W, const Vector& b, ConstState y) {
  Vector out(W.rows());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(i, k) * y[static_cast<std::size_t>(k)];
    out(i) = acc + b(i);
  }
  return out;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

ParticleGrid::ParticleGrid(std::size_t steps, std::size_t particles, std::size_t dim)
    : steps_(steps),
      particles_(particles),
      dim_(dim),
      states_(steps * particles * dim, 0.0),
      log_density_(steps * particles, 0.0) {
  if (steps == 0 || particles == 0 || dim == 0) {
    throw PreconditionError("ParticleGrid: steps, particles and dim must be >= 1");
  }
}

LogValue ParticleGrid::joint_log_density() const {
  double acc = 0.0;
  for (double v : log_density_) acc += v;
  return acc;
}

ParticleNoise ParticleNoise::draw(std::size_t steps, std::size_t particles, std::size_t dim,
                                  Rng& rng) {
  ParticleNoise noise{steps, particles, dim, std::vector<double>(steps * particles * dim)};
  for (double& v : noise.values) v = rng.normal();
  return noise;
}

ProposalSpec ProposalSpec::per_step(std::vector<Vector> means, std::vector<Vector> log_stds) {
  if (means.empty() || means.size() != log_stds.size()) {
    throw DimensionError("ProposalSpec::per_step: need one mean and one log_std per step");
  }
  ProposalSpec p;
  p.kind_ = ProposalKind::per_step_diagonal;
  p.dim_ = static_cast<std::size_t>(means.front().size());
  if (p.dim_ == 0) throw PreconditionError("ProposalSpec::per_step: empty state dimension");
  for (std::size_t t = 0; t < means.size(); ++t) {
    if (static_cast<std::size_t>(means[t].size()) != p.dim_ ||
        static_cast<std::size_t>(log_stds[t].size()) != p.dim_) {
      throw DimensionError("ProposalSpec::per_step: inconsistent dimension at step " +
                           std::to_string(t));
    }
  }
  p.means_ = std::move(means);
  p.log_stds_ = std::move(log_stds);
  return p;
}

ProposalSpec ProposalSpec::affine(Matrix W, Vector b, Vector log_std) {
  if (W.rows() == 0 || W.cols() == 0 || b.size() != W.rows() || log_std.size() != W.rows()) {
    throw DimensionError("ProposalSpec::affine: inconsistent shapes");
  }
  ProposalSpec p;
  p.kind_ = ProposalKind::affine_observation;
  p.dim_ = static_cast<std::size_t>(W.rows());
  p.W_ = std::move(W);
  p.b_ = std::move(b);
  p.shared_log_std_ = std::move(log_std);
  return p;
}

ProposalSpec ProposalSpec::per_step_full(std::vector<Vector> means, std::vector<Matrix> covs) {
  if (means.empty() || means.size() != covs.size()) {
    throw DimensionError("ProposalSpec::per_step_full: need one mean and one covariance per step");
  }
  ProposalSpec p;
  p.kind_ = ProposalKind::per_step_full;
  p.dim_ = static_cast<std::size_t>(means.front().size());
  for (std::size_t t = 0; t < means.size(); ++t) {
    if (static_cast<std::size_t>(means[t].size()) != p.dim_) {
      throw DimensionError("ProposalSpec::per_step_full: inconsistent mean dimension");
    }
    p.chols_.push_back(cholesky_lower(covs[t], "ProposalSpec::per_step_full"));
  }
  p.means_ = std::move(means);
  return p;
}

std::optional<std::size_t> ProposalSpec::steps() const {
  if (kind_ == ProposalKind::affine_observation) return std::nullopt;
  return means_.size();
}

void ProposalSpec::check_compatible(const ObservationSequence& obs) const {
  if (auto s = steps(); s && *s != obs.steps()) {
    throw DimensionError("proposal has " + std::to_string(*s) + " steps, observations have " +
                         std::to_string(obs.steps()));
  }
  if (kind_ == ProposalKind::affine_observation &&
      static_cast<std::size_t>(W_.cols()) != obs.dim()) {
    throw DimensionError("affine proposal expects observations of dimension " +
                         std::to_string(W_.cols()));
  }
}

Vector ProposalSpec::mean(std::size_t t, const ObservationSequence& obs) const {
  if (kind_ == ProposalKind::affine_observation) return affine_mean(W_, b_, obs.at(t));
  return means_.at(t);
}

Vector ProposalSpec::log_std(std::size_t t) const {
  switch (kind_) {
    case ProposalKind::per_step_diagonal:
      return log_stds_.at(t).unaryExpr(&clamp_log_std);
    case ProposalKind::affine_observation:
      return shared_log_std_.unaryExpr(&clamp_log_std);
    case ProposalKind::per_step_full:
      break;
  }
  throw UnsupportedModelError("ProposalSpec::log_std: full-covariance proposal has no log_std");
}

void ProposalSpec::transform(std::size_t t, const ObservationSequence& obs, ConstState eps,
                             MutState x) const {
  const Vector m = mean(t, obs);
  if (kind_ == ProposalKind::per_step_full) {
    as_vector(x) = m + chols_[t] * as_vector(eps);
    return;
  }
  const Vector s = log_std(t);
  for (std::size_t d = 0; d < dim_; ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    x[d] = m(i) + std::exp(s(i)) * eps[d];
  }
}

LogValue ProposalSpec::log_density(std::size_t t, const ObservationSequence& obs,
                                   ConstState x) const {
  const Vector m = mean(t, obs);
  if (kind_ == ProposalKind::per_step_full) return mvn_logpdf(x, m, chols_[t]);
  const Vector s = log_std(t);
  return diag_gaussian_logpdf(x, as_span(m), as_span(s));
}

std::vector<double> ProposalSpec::params() const {
  std::vector<double> phi;
  switch (kind_) {
    case ProposalKind::per_step_diagonal:
      for (const auto& m : means_) phi.insert(phi.end(), m.data(), m.data() + m.size());
      for (const auto& s : log_stds_) phi.insert(phi.end(), s.data(), s.data() + s.size());
      break;
    case ProposalKind::affine_observation:
      for (Eigen::Index i = 0; i < W_.rows(); ++i)
        for (Eigen::Index k = 0; k < W_.cols(); ++k) phi.push_back(W_(i, k));
      phi.insert(phi.end(), b_.data(), b_.data() + b_.size());
      phi.insert(phi.end(), shared_log_std_.data(), shared_log_std_.data() + shared_log_std_.size());
      break;
    case ProposalKind::per_step_full:
      for (const auto& m : means_) phi.insert(phi.end(), m.data(), m.data() + m.size());
      break;
  }
  return phi;
}

ProposalSpec ProposalSpec::with_params(std::span<const double> phi) const {
  if (phi.size() != params().size()) {
    throw DimensionError("ProposalSpec::with_params: wrong parameter count");
  }
  ProposalSpec out = *this;
  std::size_t k = 0;
  switch (kind_) {
    case ProposalKind::per_step_diagonal:
      for (auto& m : out.means_)
        for (Eigen::Index d = 0; d < m.size(); ++d) m(d) = phi[k++];
      for (auto& s : out.log_stds_)
        for (Eigen::Index d = 0; d < s.size(); ++d) s(d) = phi[k++];
      break;
    case ProposalKind::affine_observation:
      for (Eigen::Index i = 0; i < out.W_.rows(); ++i)
        for (Eigen::Index j = 0; j < out.W_.cols(); ++j) out.W_(i, j) = phi[k++];
      for (Eigen::Index d = 0; d < out.b_.size(); ++d) out.b_(d) = phi[k++];
      for (Eigen::Index d = 0; d < out.shared_log_std_.size(); ++d) out.shared_log_std_(d) = phi[k++];
      break;
    case ProposalKind::per_step_full:
      for (auto& m : out.means_)
        for (Eigen::Index d = 0; d < m.size(); ++d) m(d) = phi[k++];
      break;
  }
  return out;
}

void ProposalSpec::accumulate_gradient(std::size_t t, const ObservationSequence& obs,
                                       ConstState eps, ConstState grad_x, double density_weight,
                                       MutState grad_phi) const {
  const std::size_t d_x = dim_;
  switch (kind_) {
    case ProposalKind::per_step_diagonal: {
      const std::size_t mean_off = t * d_x;
      const std::size_t std_off = means_.size() * d_x + t * d_x;
      const Vector& raw = log_stds_[t];
      for (std::size_t d = 0; d < d_x; ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        grad_phi[mean_off + d] += grad_x[d];
        if (!clamped(raw(i))) {
          grad_phi[std_off + d] += grad_x[d] * std::exp(raw(i)) * eps[d] + density_weight;
        }
      }
      break;
    }
    case ProposalKind::affine_observation: {
      const std::size_t d_y = static_cast<std::size_t>(W_.cols());
      const std::size_t b_off = d_x * d_y;
      const std::size_t std_off = b_off + d_x;
      const auto y = obs.at(t);
      for (std::size_t d = 0; d < d_x; ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        for (std::size_t k = 0; k < d_y; ++k) grad_phi[d * d_y + k] += grad_x[d] * y[k];
        grad_phi[b_off + d] += grad_x[d];
        const double raw = shared_log_std_(i);
        if (!clamped(raw)) {
          grad_phi[std_off + d] += grad_x[d] * std::exp(raw) * eps[d] + density_weight;
        }
      }
      break;
    }
    case ProposalKind::per_step_full:
      for (std::size_t d = 0; d < d_x; ++d) grad_phi[t * d_x + d] += grad_x[d];
      break;
  }
}

ParticleGrid grid_from_noise(const ProposalSpec& prop, const ObservationSequence& obs,
                             const ParticleNoise& noise) {
  prop.check_compatible(obs);
  if (noise.steps != obs.steps() || noise.dim != prop.state_dim()) {
    throw DimensionError("grid_from_noise: noise shape does not match proposal/observations");
  }
  ParticleGrid grid(noise.steps, noise.particles, noise.dim);
  for (std::size_t t = 0; t < grid.steps(); ++t) {
    for (std::size_t n = 0; n < grid.particles(); ++n) {
      prop.transform(t, obs, noise.at(t, n), grid.state(t, n));
      grid.log_density(t, n) = prop.log_density(t, obs, grid.state(t, n));
    }
  }
  return grid;
}

ParticleGrid sample_proposal(const ProposalSpec& prop, const ObservationSequence& obs,
                             std::size_t N, Rng& rng) {
  if (N == 0) throw PreconditionError("sample_proposal: N must be >= 1");
  prop.check_compatible(obs);
  return grid_from_noise(prop, obs, ParticleNoise::draw(obs.steps(), N, prop.state_dim(), rng));
}

Vector MarkovProposalSpec::mean(std::size_t t, const ObservationSequence& obs,
                                ConstState x_prev) const {
  Vector m = affine_mean(G, c, obs.at(t));
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < F.cols(); ++k) acc += F(i, k) * x_prev[static_cast<std::size_t>(k)];
    m(i) += acc;
  }
  return m;
}

LogValue MarkovProposalSpec::log_density(std::size_t t, const ObservationSequence& obs,
                                         ConstState x_prev, ConstState x) const {
  const Vector m = mean(t, obs, x_prev);
  const Vector s = log_std.unaryExpr(&clamp_log_std);
  return diag_gaussian_logpdf(x, as_span(m), as_span(s));
}

ParticleGrid sample_markov_proposal(const MarkovProposalSpec& mprop,
                                    const ObservationSequence& obs, std::size_t N, Rng& rng) {
  if (N == 0) throw PreconditionError("sample_markov_proposal: N must be >= 1");
  mprop.initial.check_compatible(obs);
  const std::size_t d = mprop.initial.state_dim();
  if (static_cast<std::size_t>(mprop.F.rows()) != d || static_cast<std::size_t>(mprop.F.cols()) != d ||
      static_cast<std::size_t>(mprop.G.rows()) != d ||
      static_cast<std::size_t>(mprop.G.cols()) != obs.dim() ||
      static_cast<std::size_t>(mprop.c.size()) != d ||
      static_cast<std::size_t>(mprop.log_std.size()) != d) {
    throw DimensionError("sample_markov_proposal: inconsistent kernel shapes");
  }
  ParticleGrid grid(obs.steps(), N, d);
  std::vector<double> eps(d);
  for (std::size_t n = 0; n < N; ++n) {
    for (auto& e : eps) e = rng.normal();
    mprop.initial.transform(0, obs, eps, grid.state(0, n));
    grid.log_density(0, n) = mprop.initial.log_density(0, obs, grid.state(0, n));
  }
  const Vector s = mprop.log_std.unaryExpr(&clamp_log_std);
  for (std::size_t t = 1; t < grid.steps(); ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const Vector m = mprop.mean(t, obs, grid.state(t - 1, n));
      auto x = grid.state(t, n);
      for (std::size_t k = 0; k < d; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        x[k] = m(i) + std::exp(s(i)) * rng.normal();
      }
      grid.log_density(t, n) = mprop.log_density(t, obs, grid.state(t - 1, n), x);
    }
  }
  return grid;
}

}  // namespace pvmc
