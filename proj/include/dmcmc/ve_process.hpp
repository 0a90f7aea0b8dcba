#pragma once

// Variance-exploding diffusion: geometric noise grid, sigma(t) schedule,
// reverse-time drift fields, Tweedie denoising and the closed-form Gaussian
// probability-flow solution used as an integrator oracle.

#include "dmcmc/common.hpp"

namespace dmcmc {

/// Geometric ladder tau_1 = sigma_min < ... < tau_M = sigma_max with prior weights
/// proportional to 1/tau. Levels are 0-based in code (index 0 is sigma_min).
/// A single-level grid holds only sigma_min; experiment configs require M >= 2.
class NoiseGrid {
 public:
  NoiseGrid(double sigma_min, double sigma_max, int levels);

  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  int size() const { return static_cast<int>(levels_.size()); }
  double level(int m) const { return levels_.at(static_cast<std::size_t>(m)); }
  const std::vector<double>& levels() const { return levels_; }
  const std::vector<double>& prior() const { return prior_; }
  const std::vector<double>& log_prior() const { return log_prior_; }

  /// Index of the level nearest to sigma in log space.
  int nearest_index(double sigma) const;

 private:
  double sigma_min_;
  double sigma_max_;
  std::vector<double> levels_;
  std::vector<double> prior_;
  std::vector<double> log_prior_;
};

/// sigma(t) = sigma_min * (sigma_max / sigma_min)^t on t in [0, 1].
class VESchedule {
 public:
  VESchedule(double sigma_min, double sigma_max);
  explicit VESchedule(const NoiseGrid& grid) : VESchedule(grid.sigma_min(), grid.sigma_max()) {}

  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }

  double sigma_of_t(double t) const;
  double t_of_sigma(double sigma) const;
  /// d sigma / dt
  double sigma_dot(double t) const;
  /// g(t)^2 = d[sigma^2(t)]/dt = 2 sigma(t)^2 ln(sigma_max / sigma_min)
  double g2(double t) const;

 private:
  double sigma_min_;
  double sigma_max_;
  double log_ratio_;
};

enum class ReverseMode { kSde, kOde };

struct ReverseDrift {
  Vector drift;
  double diffusion;
};

/// Reverse-time field for the VE process (forward drift is zero):
/// SDE drift -g^2 s, diffusion g; ODE drift -g^2 s / 2, diffusion 0.
ReverseDrift reverse_drift(const ScoreFn& score, const Vector& x, double t, const VESchedule& sched,
                           ReverseMode mode);

/// Exact probability-flow solution for the target N(0, s^2 I):
/// x(sigma1) = x0 * sqrt((s^2 + sigma1^2) / (s^2 + sigma0^2)).
Vector gaussian_ode_solution(double s, const Vector& x0, double sigma0, double sigma1);

/// Score of N(0, s^2 I) smoothed at sigma.
ScoreFn gaussian_score(double s);

/// Posterior-mean estimate x + sigma^2 s(x, sigma).
Vector tweedie_denoise(const ScoreFn& score, const Vector& x, double sigma);

}  // namespace dmcmc
