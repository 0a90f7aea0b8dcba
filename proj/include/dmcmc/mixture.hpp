#pragma once

#include "dmcmc/common.hpp"
#include "dmcmc/ve_process.hpp"

#include <json.hpp>

namespace dmcmc {

struct MixtureMode {
  Vector mean;
  double base_variance = 0.0;  // 0 encodes a point mass
  double weight = 1.0;
};

/// Isotropic Gaussian mixture sum_k w_k N(mu_k, v_k I). Weights are normalized on
/// construction.
class GaussianMixture {
 public:
  GaussianMixture(int dim, std::vector<MixtureMode> modes);

  int dim() const { return dim_; }
  int num_modes() const { return static_cast<int>(weights_.size()); }
  const Matrix& means() const { return means_; }  // dim x K
  Eigen::Ref<const Vector> mean(int k) const { return means_.col(k); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& base_variances() const { return base_variances_; }
  const std::vector<double>& log_weights() const { return log_weights_; }

  /// Squared distances from x to every mean.
  Vector squared_distances(const Vector& x) const;
  /// Nearest mean (ties to the lowest index) and its distance.
  std::pair<int, double> nearest_mode(const Vector& x) const;

  GaussianMixture with_added_variance(double extra) const;
  GaussianMixture permuted(const std::vector<int>& order) const;
  std::vector<MixtureMode> modes() const;

 private:
  int dim_;
  Matrix means_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> base_variances_;
};

struct SmoothedEval {
  double log_density = 0.0;
  Vector score;
  Vector responsibilities;
};

/// log p(x | sigma), its gradient and the mode posteriors of the mixture convolved
/// with N(0, sigma^2 I).
SmoothedEval smoothed_score(const GaussianMixture& mix, const Vector& x, double sigma);

/// Score-only fast path with the same semantics as smoothed_score(...).score.
Vector mixture_score(const GaussianMixture& mix, const Vector& x, double sigma);

/// Wraps the analytic mixture score as a ScoreFn. The mixture must outlive the result.
ScoreFn make_score_fn(const GaussianMixture& mix);

/// Draws mode k ~ w, then x ~ N(mu_k, (v_k + sigma^2) I).
Vector sample_smoothed(const GaussianMixture& mix, double sigma, Rng& rng);

/// Same, also returning the drawn mode index.
std::pair<Vector, int> sample_smoothed_labeled(const GaussianMixture& mix, double sigma, Rng& rng);

/// Exact Bayes posterior over grid levels, p(tau_m | x) ~ p(x | tau_m) p(tau_m).
Vector sigma_posterior(const GaussianMixture& mix, const Vector& x, const NoiseGrid& grid);

/// kCyclic: the orbit of one point under a cyclic group of rotations, so every mode
/// sees the same arrangement of neighbours. kRandom: Gaussian draws with rejection.
enum class BenchmarkGeometry { kCyclic, kRandom };

/// Parameters of the synthetic benchmark mixture: point masses whose means lie in
/// the span of the lowest-frequency DCT-II basis vectors, so noise is visible in
/// the high-frequency coordinates. The cyclic geometry is scaled so its closest pair
/// sits exactly min_separation apart; amplitude and seed only affect kRandom.
struct BenchmarkMixtureSpec {
  int dim = 16;
  int modes = 50;
  BenchmarkGeometry geometry = BenchmarkGeometry::kCyclic;
  int subspace_dim = 8;
  double amplitude = 1.0;
  double min_separation = 2.0;
  double base_variance = 0.0;
  std::uint64_t seed = 7;
};

GaussianMixture make_benchmark_mixture(const BenchmarkMixtureSpec& spec);

/// Orthonormal DCT-II basis, columns are basis vectors ordered by frequency.
Matrix dct_basis(int dim);

void to_json(nlohmann::json& j, const GaussianMixture& mix);
GaussianMixture mixture_from_json(const nlohmann::json& j);
GaussianMixture load_mixture(const std::string& path);
void save_mixture(const GaussianMixture& mix, const std::string& path);

void to_json(nlohmann::json& j, const BenchmarkMixtureSpec& spec);
BenchmarkMixtureSpec benchmark_spec_from_json(const nlohmann::json& j);

}  // namespace dmcmc
