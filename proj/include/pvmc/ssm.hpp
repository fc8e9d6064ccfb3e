#pragma once

// State-space models: callback-based densities and samplers, the linear-Gaussian
// benchmark model, and trajectory simulation.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pvmc/errors.hpp"
#include "pvmc/gaussian.hpp"
#include "pvmc/logspace.hpp"
#include "pvmc/rng.hpp"

namespace pvmc {

using ConstState = std::span<const double>;
using MutState = std::span<double>;

/// (steps x dim) row-major array of reals, one row per time step. The tag
/// keeps observation sequences and latent trajectories from being mixed up.
template <class Tag>
class Series {
 public:
  Series() = default;
  Series(std::size_t steps, std::size_t dim) : steps_(steps), dim_(dim), values_(steps * dim) {}
  Series(std::size_t steps, std::size_t dim, std::vector<double> values);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Horizon T, i.e. steps() - 1.
  std::size_t horizon() const noexcept { return steps_ - 1; }

  std::span<double> at(std::size_t t) noexcept { return {values_.data() + t * dim_, dim_}; }
  std::span<const double> at(std::size_t t) const noexcept {
    return {values_.data() + t * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const Series&) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

template <class Tag>
Series<Tag>::Series(std::size_t steps, std::size_t dim, std::vector<double> values)
    : steps_(steps), dim_(dim), values_(std::move(values)) {
  if (steps_ == 0 || dim_ == 0) throw PreconditionError("Series: steps and dim must be >= 1");
  if (values_.size() != steps_ * dim_) throw DimensionError("Series: value count != steps * dim");
  for (double v : values_) {
    if (!std::isfinite(v)) throw PreconditionError("Series: non-finite entry");
  }
}

struct ObservationTag {};
struct StateTag {};
using ObservationSequence = Series<ObservationTag>;  ///< y_{0:T}
using Trajectory = Series<StateTag>;                 ///< x_{0:T}

/// Optional gradient callbacks. Each one adds `scale` times the gradient of the
/// corresponding log-density into the output spans.
struct SSMGradients {
  std::function<void(ConstState x0, double scale, MutState grad_x, MutState grad_theta)> prior;
  std::function<void(std::size_t t, ConstState x_t, ConstState x_prev, double scale,
                     MutState grad_x_t, MutState grad_x_prev, MutState grad_theta)>
      transition;
  std::function<void(std::size_t t, ConstState y_t, ConstState x_t, double scale,
                     MutState grad_x, MutState grad_theta)>
      observation;
};

/// Prior P, transitions M_t and observation densities H_t of a state-space model.
struct SSMSpec {
  std::size_t state_dim = 0;
  std::size_t obs_dim = 0;

  std::function<LogValue(ConstState x0)> prior_logpdf;
  std::function<void(Rng& rng, MutState out)> prior_sample;
  std::function<LogValue(std::size_t t, ConstState x_t, ConstState x_prev)> transition_logpdf;
  std::function<void(std::size_t t, ConstState x_prev, Rng& rng, MutState out)> transition_sample;
  std::function<LogValue(std::size_t t, ConstState y_t, ConstState x_t)> observation_logpdf;
  std::function<void(std::size_t t, ConstState x_t, Rng& rng, MutState out)> observation_sample;

  /// Model parameters theta; gradients are reported in this layout.
  std::vector<double> params;
  SSMGradients gradients;

  bool differentiable() const noexcept {
    return gradients.prior && gradients.transition && gradients.observation;
  }
  /// Checks dimensions and that all density callbacks are present.
  void validate() const;
};

/// x_t = A x_{t-1} + q_t, y_t = H x_t + r_t, q ~ N(0, Q), r ~ N(0, R),
/// x_0 ~ N(prior_mean, prior_cov).
struct LinearGaussianSSM {
  Matrix A;
  Matrix H;
  Matrix Q;
  Matrix R;
  Vector prior_mean;
  Matrix prior_cov;
  /// Elementwise mask applied to H; empty means all ones. Masked entries stay
  /// in the parameter vector with an identically zero gradient.
  Matrix h_mask;

  std::size_t state_dim() const noexcept { return static_cast<std::size_t>(A.rows()); }
  std::size_t obs_dim() const noexcept { return static_cast<std::size_t>(H.rows()); }
  Matrix effective_H() const;

  void validate() const;

  /// theta = [A row-major, H row-major].
  std::vector<double> params() const;
  LinearGaussianSSM with_params(std::span<const double> theta) const;
};

/// Benchmark model: A_ij = 0.38^(|i-j|+1), H_ij = 1(i = j), Q = R = I and a
/// standard normal prior.
LinearGaussianSSM lg_build(std::size_t state_dim, std::size_t obs_dim);

/// Exact Gaussian densities, samplers and gradients for `lg`.
SSMSpec lg_as_ssm(const LinearGaussianSSM& lg);

/// Draws x_{0:T} and y_{0:T}; deterministic given the stream.
std::pair<Trajectory, ObservationSequence> simulate(const SSMSpec& ssm, std::size_t horizon,
                                                    Rng& rng);

}  // namespace pvmc
