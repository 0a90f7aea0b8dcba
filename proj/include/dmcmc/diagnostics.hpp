#pragma once

#include "dmcmc/common.hpp"
#include "dmcmc/mixture.hpp"

#include <json.hpp>

namespace dmcmc {

/// Score evaluations by phase. Classifier calls are never counted.
struct NfeLedger {
  long init = 0;
  long langevin = 0;
  long denoise = 0;
  long samples = 0;

  long total() const { return init + langevin + denoise; }
  /// (init + langevin + denoise) / samples
  double average_amortized() const;
  /// (langevin + denoise) / samples
  double average_per_sample() const;
  NfeLedger& operator+=(const NfeLedger& o);
};

void to_json(nlohmann::json& j, const NfeLedger& l);

struct ModeAssignment {
  std::vector<int> mode;          // nearest mode per sample
  std::vector<double> distance;   // distance to it
  std::vector<int> coverage_curve;  // distinct assigned modes after each sample
  std::vector<int> class_counts;  // assigned samples per mode
  int covered = 0;
  int unassigned = 0;
  double threshold = 0.0;
};

/// Nearest-mode assignment; a sample counts toward coverage only when it lies within
/// threshold_multiple * sigma_min * sqrt(d) of its mode.
ModeAssignment mode_coverage(const std::vector<Vector>& samples, const GaussianMixture& mix,
                             double threshold_multiple, double sigma_min);

enum class AutocorrEstimator { kPooled, kPerClass };

/// Autocorrelation of a class-index sequence through its one-hot indicators.
/// Lag 0 is 1; a sequence with no variation has autocorrelation 1 at all lags.
std::vector<double> class_autocorrelation(const std::vector<int>& classes, int num_classes, int max_lag,
                                          AutocorrEstimator est = AutocorrEstimator::kPooled);

/// First lag whose |autocorrelation| falls below 3 / sqrt(n), or -1.
int decorrelation_lag(const std::vector<double>& acf, std::size_t n);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  /// dof - 4 sqrt(2 dof) <= statistic <= dof + 4 sqrt(2 dof)
  bool within_band() const;
};

ChiSquare chi_square_class_fit(const std::vector<int>& counts, const std::vector<double>& weights);

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)) between moment-matched Gaussians.
/// diagonal = true uses only per-coordinate variances.
double frechet_gaussian_distance(const std::vector<Vector>& a, const std::vector<Vector>& b,
                                 bool diagonal = false);

/// Chooses diagonal mode for d > 64.
double frechet_gaussian_distance_auto(const std::vector<Vector>& a, const std::vector<Vector>& b);

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues clamped to 0.
Matrix psd_sqrt(const Matrix& m);

}  // namespace dmcmc
