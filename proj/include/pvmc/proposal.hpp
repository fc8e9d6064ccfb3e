#pragma once

// Particle grids and Gaussian proposal families, factorised across time or
// with a Markov dependence on the previous state.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pvmc/gaussian.hpp"
#include "pvmc/logspace.hpp"
#include "pvmc/rng.hpp"
#include "pvmc/ssm.hpp"

namespace pvmc {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 20.0;

/// (T+1) x N particles of dimension d together with their proposal log-densities.
class ParticleGrid {
 public:
  ParticleGrid() = default;
  ParticleGrid(std::size_t steps, std::size_t particles, std::size_t dim);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t horizon() const noexcept { return steps_ - 1; }
  std::size_t particles() const noexcept { return particles_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<double> state(std::size_t t, std::size_t n) noexcept {
    return {states_.data() + (t * particles_ + n) * dim_, dim_};
  }
  std::span<const double> state(std::size_t t, std::size_t n) const noexcept {
    return {states_.data() + (t * particles_ + n) * dim_, dim_};
  }
  LogValue& log_density(std::size_t t, std::size_t n) noexcept {
    return log_density_[t * particles_ + n];
  }
  LogValue log_density(std::size_t t, std::size_t n) const noexcept {
    return log_density_[t * particles_ + n];
  }
  /// Sum of all per-(t, n) log-densities: the joint log-density of the grid.
  LogValue joint_log_density() const;

  bool operator==(const ParticleGrid&) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t particles_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> states_;
  std::vector<LogValue> log_density_;
};

/// Standard-normal noise behind a reparameterised grid, same layout as the states.
struct ParticleNoise {
  std::size_t steps = 0;
  std::size_t particles = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  static ParticleNoise draw(std::size_t steps, std::size_t particles, std::size_t dim, Rng& rng);
  std::span<const double> at(std::size_t t, std::size_t n) const noexcept {
    return {values.data() + (t * particles + n) * dim, dim};
  }
};

enum class ProposalKind {
  per_step_diagonal,   ///< mean_t, log_std_t free for every t
  affine_observation,  ///< mean_t = W y_t + b, one shared log_std
  per_step_full,       ///< mean_t with a fixed full covariance per t
};

/// Factorised Gaussian proposal V_t(. | y_{0:T}).
///
/// Parameter vector layouts:
///   per_step_diagonal: [means (T+1)*d, log_std (T+1)*d]
///   affine_observation: [W row-major d*d_y, b d, log_std d]
///   per_step_full: [means (T+1)*d]; covariances are not parameters.
class ProposalSpec {
 public:
  static ProposalSpec per_step(std::vector<Vector> means, std::vector<Vector> log_stds);
  static ProposalSpec affine(Matrix W, Vector b, Vector log_std);
  static ProposalSpec per_step_full(std::vector<Vector> means, std::vector<Matrix> covs);

  ProposalKind kind() const noexcept { return kind_; }
  std::size_t state_dim() const noexcept { return dim_; }
  /// Number of time steps this proposal is tied to; empty for the affine kind.
  std::optional<std::size_t> steps() const;
  /// Throws DimensionError when the proposal cannot serve `obs`.
  void check_compatible(const ObservationSequence& obs) const;

  Vector mean(std::size_t t, const ObservationSequence& obs) const;
  /// Clamped log standard deviations; diagonal kinds only.
  Vector log_std(std::size_t t) const;

  /// x = mean_t + scale_t * eps.
  void transform(std::size_t t, const ObservationSequence& obs, ConstState eps, MutState x) const;
  LogValue log_density(std::size_t t, const ObservationSequence& obs, ConstState x) const;

  std::vector<double> params() const;
  ProposalSpec with_params(std::span<const double> phi) const;

  /// Adds to grad_phi the derivative of  <grad_x, x(phi)> + density_weight * (-log V_t(x(phi)))
  /// where x(phi) = transform(t, obs, eps).
  void accumulate_gradient(std::size_t t, const ObservationSequence& obs, ConstState eps,
                           ConstState grad_x, double density_weight, MutState grad_phi) const;

  const Matrix& weight() const noexcept { return W_; }
  const Vector& bias() const noexcept { return b_; }

 private:
  ProposalKind kind_ = ProposalKind::per_step_diagonal;
  std::size_t dim_ = 0;
  std::vector<Vector> means_;
  std::vector<Vector> log_stds_;
  std::vector<Matrix> chols_;
  Matrix W_;
  Vector b_;
  Vector shared_log_std_;
};

/// Reparameterised grid: X_t^n = transform(t, obs, noise(t, n)).
ParticleGrid grid_from_noise(const ProposalSpec& prop, const ObservationSequence& obs,
                             const ParticleNoise& noise);

/// N i.i.d. particles per time step from V_t.
ParticleGrid sample_proposal(const ProposalSpec& prop, const ObservationSequence& obs,
                             std::size_t N, Rng& rng);

/// V_0 as a factorised proposal, then
/// V_t(x | x_{t-1}) = N(x; (G y_t + c) + F x_{t-1}, diag(exp(2 log_std))).
struct MarkovProposalSpec {
  ProposalSpec initial;
  Matrix F;
  Matrix G;
  Vector c;
  Vector log_std;

  Vector mean(std::size_t t, const ObservationSequence& obs, ConstState x_prev) const;
  LogValue log_density(std::size_t t, const ObservationSequence& obs, ConstState x_prev,
                       ConstState x) const;
};

/// Ancestral sampling: particle n at time t is drawn given particle n at t-1.
/// log_density(t, n) holds the conditional density given that parent.
ParticleGrid sample_markov_proposal(const MarkovProposalSpec& mprop,
                                    const ObservationSequence& obs, std::size_t N, Rng& rng);

}  // namespace pvmc
