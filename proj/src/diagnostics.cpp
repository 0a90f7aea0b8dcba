#include "dmcmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dmcmc {

double NfeLedger::average_amortized() const {
  return samples > 0 ? static_cast<double>(total()) / static_cast<double>(samples) : 0.0;
}

double NfeLedger::average_per_sample() const {
  return samples > 0 ? static_cast<double>(langevin + denoise) / static_cast<double>(samples) : 0.0;
}

NfeLedger& NfeLedger::operator+=(const NfeLedger& o) {
  init += o.init;
  langevin += o.langevin;
  denoise += o.denoise;
  samples += o.samples;
  return *this;
}

void to_json(nlohmann::json& j, const NfeLedger& l) {
  j = nlohmann::json{{"init", l.init},
                     {"langevin", l.langevin},
                     {"denoise", l.denoise},
                     {"total", l.total()},
                     {"samples", l.samples},
                     {"average_nfe_amortized", l.average_amortized()},
                     {"average_nfe_per_sample", l.average_per_sample()}};
}

ModeAssignment mode_coverage(const std::vector<Vector>& samples, const GaussianMixture& mix,
                             double threshold_multiple, double sigma_min) {
  if (samples.empty()) throw std::invalid_argument("mode_coverage: empty sample list");
  if (!(threshold_multiple > 0.0)) throw std::invalid_argument("mode_coverage: threshold_multiple must be > 0");
  ModeAssignment out;
  out.threshold = threshold_multiple * sigma_min * std::sqrt(static_cast<double>(mix.dim()));
  out.class_counts.assign(static_cast<std::size_t>(mix.num_modes()), 0);
  std::vector<char> seen(static_cast<std::size_t>(mix.num_modes()), 0);
  for (const auto& x : samples) {
    const auto [k, dist] = mix.nearest_mode(x);
    out.mode.push_back(k);
    out.distance.push_back(dist);
    if (dist <= out.threshold) {
      ++out.class_counts[static_cast<std::size_t>(k)];
      if (!seen[static_cast<std::size_t>(k)]) {
        seen[static_cast<std::size_t>(k)] = 1;
        ++out.covered;
      }
    } else {
      ++out.unassigned;
    }
    out.coverage_curve.push_back(out.covered);
  }
  return out;
}

std::vector<double> class_autocorrelation(const std::vector<int>& classes, int num_classes, int max_lag,
                                          AutocorrEstimator est) {
  if (max_lag < 0) throw std::invalid_argument("class_autocorrelation: max_lag must be >= 0");
  if (num_classes < 1) throw std::invalid_argument("class_autocorrelation: num_classes must be >= 1");
  const std::size_t n = classes.size();
  std::vector<double> freq(static_cast<std::size_t>(num_classes), 0.0);
  for (int c : classes) {
    if (c < 0 || c >= num_classes) throw std::invalid_argument("class_autocorrelation: class index out of range");
    freq[static_cast<std::size_t>(c)] += 1.0;
  }
  if (n > 0)
    for (auto& f : freq) f /= static_cast<double>(n);

  // Covariance of indicator k at lag l: sum_t (I_k(t) - p_k)(I_k(t+l) - p_k) / n.
  auto lag_cov = [&](int k, int lag) {
    const double p = freq[static_cast<std::size_t>(k)];
    double s = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < n; ++t) {
      const double a = (classes[t] == k ? 1.0 : 0.0) - p;
      const double b = (classes[t + static_cast<std::size_t>(lag)] == k ? 1.0 : 0.0) - p;
      s += a * b;
    }
    return s / static_cast<double>(n);
  };

  std::vector<int> active;
  for (int k = 0; k < num_classes; ++k)
    if (freq[static_cast<std::size_t>(k)] > 0.0 && freq[static_cast<std::size_t>(k)] < 1.0) active.push_back(k);

  std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1, 1.0);
  if (active.empty() || n < 2) return acf;

  if (est == AutocorrEstimator::kPooled) {
    double var = 0.0;
    for (int k : active) var += lag_cov(k, 0);
    for (int lag = 1; lag <= max_lag; ++lag) {
      double cov = 0.0;
      for (int k : active) cov += lag_cov(k, lag);
      acf[static_cast<std::size_t>(lag)] = cov / var;
    }
  } else {
    std::vector<double> var;
    for (int k : active) var.push_back(lag_cov(k, 0));
    for (int lag = 1; lag <= max_lag; ++lag) {
      double s = 0.0;
      for (std::size_t i = 0; i < active.size(); ++i) s += lag_cov(active[i], lag) / var[i];
      acf[static_cast<std::size_t>(lag)] = s / static_cast<double>(active.size());
    }
  }
  return acf;
}

int decorrelation_lag(const std::vector<double>& acf, std::size_t n) {
  if (n == 0) return -1;
  const double band = 3.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t lag = 1; lag < acf.size(); ++lag)
    if (std::abs(acf[lag]) < band) return static_cast<int>(lag);
  return -1;
}

bool ChiSquare::within_band() const {
  const double half = 4.0 * std::sqrt(2.0 * dof);
  return statistic >= dof - half && statistic <= dof + half;
}

ChiSquare chi_square_class_fit(const std::vector<int>& counts, const std::vector<double>& weights) {
  if (counts.size() != weights.size() || counts.empty())
    throw std::invalid_argument("chi_square_class_fit: counts and weights must have the same nonzero length");
  double n = 0.0, wsum = 0.0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("chi_square_class_fit: negative count");
    n += c;
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("chi_square_class_fit: weights must be > 0");
    wsum += w;
  }
  ChiSquare out;
  out.dof = static_cast<int>(counts.size()) - 1;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expected = n * weights[k] / wsum;
    const double diff = counts[k] - expected;
    out.statistic += diff * diff / expected;
  }
  return out;
}

Matrix psd_sqrt(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector root = es.eigenvalues().array().max(0.0).sqrt().matrix();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

std::pair<Vector, Matrix> moments(const std::vector<Vector>& xs) {
  const Eigen::Index d = xs.front().size();
  Vector mean = Vector::Zero(d);
  for (const auto& x : xs) {
    if (x.size() != d) throw std::invalid_argument("frechet_gaussian_distance: inconsistent dimensions");
    mean += x;
  }
  mean /= static_cast<double>(xs.size());
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& x : xs) {
    const Vector c = x - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(xs.size() - 1);
  return {mean, cov};
}

}  // namespace

double frechet_gaussian_distance(const std::vector<Vector>& a, const std::vector<Vector>& b, bool diagonal) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("frechet_gaussian_distance: need >= 2 samples per set");
  if (a.front().size() != b.front().size()) throw std::invalid_argument("frechet_gaussian_distance: dimension mismatch");
  const auto [mu_a, cov_a] = moments(a);
  const auto [mu_b, cov_b] = moments(b);
  const double mean_term = (mu_a - mu_b).squaredNorm();
  if (diagonal) {
    const Eigen::ArrayXd sa = cov_a.diagonal().array().max(0.0).sqrt();
    const Eigen::ArrayXd sb = cov_b.diagonal().array().max(0.0).sqrt();
    return mean_term + (sa - sb).square().sum();
  }
  // tr((S_a S_b)^(1/2)) = tr((S_a^(1/2) S_b S_a^(1/2))^(1/2)), which is symmetric PSD.
  const Matrix ra = psd_sqrt(cov_a);
  const Matrix inner = ra * cov_b * ra;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().array().max(0.0).sqrt().sum();
  const double fd = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(fd, 0.0);
}

double frechet_gaussian_distance_auto(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  return frechet_gaussian_distance(a, b, !a.empty() && a.front().size() > 64);
}

}  // namespace dmcmc
