#include "dmcmc/ve_process.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmcmc {

NoiseGrid::NoiseGrid(double sigma_min, double sigma_max, int levels)
    : sigma_min_(sigma_min), sigma_max_(sigma_max) {
  if (!(std::isfinite(sigma_min) && std::isfinite(sigma_max)) || !(sigma_min > 0.0))
    throw std::domain_error("NoiseGrid: sigma_min must be finite and > 0");
  if (!(sigma_max > sigma_min)) throw std::domain_error("NoiseGrid: sigma_max must exceed sigma_min");
  if (levels < 1) throw std::domain_error("NoiseGrid: need at least 1 level");

  levels_.resize(static_cast<std::size_t>(levels));
  const double ratio = sigma_max / sigma_min;
  if (levels == 1) {
    // Degenerate single-class grid at sigma_min.
    levels_[0] = sigma_min;
  } else {
    for (int m = 0; m < levels; ++m)
      levels_[static_cast<std::size_t>(m)] =
          sigma_min * std::pow(ratio, static_cast<double>(m) / static_cast<double>(levels - 1));
    // Pin the endpoints; pow(ratio, 1.0) * sigma_min may round.
    levels_.front() = sigma_min;
    levels_.back() = sigma_max;
  }

  prior_.resize(levels_.size());
  log_prior_.resize(levels_.size());
  std::vector<double> unnorm(levels_.size());
  for (std::size_t m = 0; m < levels_.size(); ++m) unnorm[m] = -std::log(levels_[m]);
  const double mx = *std::max_element(unnorm.begin(), unnorm.end());
  double z = 0.0;
  for (double u : unnorm) z += std::exp(u - mx);
  const double log_z = mx + std::log(z);
  for (std::size_t m = 0; m < levels_.size(); ++m) {
    log_prior_[m] = unnorm[m] - log_z;
    prior_[m] = std::exp(log_prior_[m]);
  }
}

int NoiseGrid::nearest_index(double sigma) const {
  if (!(sigma > 0.0) || size() == 1) return 0;
  const double pos = std::log(sigma / sigma_min_) / std::log(sigma_max_ / sigma_min_) *
                     static_cast<double>(size() - 1);
  const long idx = std::lround(pos);
  return static_cast<int>(std::clamp<long>(idx, 0, size() - 1));
}

VESchedule::VESchedule(double sigma_min, double sigma_max)
    : sigma_min_(sigma_min), sigma_max_(sigma_max), log_ratio_(std::log(sigma_max / sigma_min)) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
    throw std::domain_error("VESchedule: require 0 < sigma_min < sigma_max < inf");
}

double VESchedule::sigma_of_t(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("sigma_of_t: t outside [0, 1]");
  if (t == 0.0) return sigma_min_;
  if (t == 1.0) return sigma_max_;
  return sigma_min_ * std::exp(t * log_ratio_);
}

double VESchedule::t_of_sigma(double sigma) const {
  if (!(sigma >= sigma_min_ && sigma <= sigma_max_))
    throw std::domain_error("t_of_sigma: sigma outside [sigma_min, sigma_max]");
  return std::log(sigma / sigma_min_) / log_ratio_;
}

double VESchedule::sigma_dot(double t) const { return sigma_of_t(t) * log_ratio_; }

double VESchedule::g2(double t) const {
  const double s = sigma_of_t(t);
  return 2.0 * s * s * log_ratio_;
}

ReverseDrift reverse_drift(const ScoreFn& score, const Vector& x, double t, const VESchedule& sched,
                           ReverseMode mode) {
  if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("reverse_drift: t must lie in (0, 1]");
  const double g2 = sched.g2(t);
  const Vector s = score(x, sched.sigma_of_t(t));
  if (mode == ReverseMode::kSde) return {-g2 * s, std::sqrt(g2)};
  return {-0.5 * g2 * s, 0.0};
}

Vector gaussian_ode_solution(double s, const Vector& x0, double sigma0, double sigma1) {
  if (!(s >= 0.0) || !(sigma0 > 0.0) || !(sigma1 > 0.0))
    throw std::domain_error("gaussian_ode_solution: need s >= 0 and positive sigmas");
  if (sigma0 == sigma1) return x0;
  const double s2 = s * s;
  return x0 * std::sqrt((s2 + sigma1 * sigma1) / (s2 + sigma0 * sigma0));
}

ScoreFn gaussian_score(double s) {
  const double s2 = s * s;
  return [s2](const Vector& x, double sigma) -> Vector { return -x / (s2 + sigma * sigma); };
}

Vector tweedie_denoise(const ScoreFn& score, const Vector& x, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("tweedie_denoise: sigma must be > 0");
  return x + (sigma * sigma) * score(x, sigma);
}

}  // namespace dmcmc
