#include "dmcmc/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace dmcmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_point(const GaussianMixture& mix, const Vector& x) {
  if (x.size() != mix.dim())
    throw std::invalid_argument("mixture: point has length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(mix.dim()));
  if (!x.allFinite()) throw std::invalid_argument("mixture: non-finite point");
}

void check_sigma(double sigma) {
  if (std::isnan(sigma) || std::isinf(sigma)) throw std::invalid_argument("mixture: non-finite sigma");
  if (!(sigma > 0.0)) throw std::domain_error("mixture: sigma must be > 0");
}

// log-sum-exp over a span, returns max as well for reuse.
double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

}  // namespace

GaussianMixture::GaussianMixture(int dim, std::vector<MixtureMode> modes) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("GaussianMixture: dim must be positive");
  if (modes.empty()) throw std::invalid_argument("GaussianMixture: at least one mode required");
  const auto k = static_cast<Eigen::Index>(modes.size());
  means_.resize(dim, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& m = modes[static_cast<std::size_t>(i)];
    if (m.mean.size() != dim)
      throw std::invalid_argument("GaussianMixture: mode " + std::to_string(i) + " mean has length " +
                                  std::to_string(m.mean.size()));
    if (!m.mean.allFinite()) throw std::invalid_argument("GaussianMixture: non-finite mean");
    if (!(m.base_variance >= 0.0) || !std::isfinite(m.base_variance))
      throw std::invalid_argument("GaussianMixture: base_variance must be finite and >= 0");
    if (!(m.weight > 0.0) || !std::isfinite(m.weight))
      throw std::invalid_argument("GaussianMixture: weights must be finite and > 0");
    means_.col(i) = m.mean;
    total += m.weight;
  }
  for (const auto& m : modes) {
    weights_.push_back(m.weight / total);
    log_weights_.push_back(std::log(m.weight / total));
    base_variances_.push_back(m.base_variance);
  }
}

Vector GaussianMixture::squared_distances(const Vector& x) const {
  return (means_.colwise() - x).colwise().squaredNorm().transpose();
}

std::pair<int, double> GaussianMixture::nearest_mode(const Vector& x) const {
  const Vector d2 = squared_distances(x);
  Eigen::Index best = 0;
  d2.minCoeff(&best);
  return {static_cast<int>(best), std::sqrt(d2[best])};
}

GaussianMixture GaussianMixture::with_added_variance(double extra) const {
  auto m = modes();
  for (auto& mode : m) mode.base_variance += extra;
  return GaussianMixture(dim_, std::move(m));
}

GaussianMixture GaussianMixture::permuted(const std::vector<int>& order) const {
  const auto m = modes();
  std::vector<MixtureMode> out;
  out.reserve(order.size());
  for (int i : order) out.push_back(m.at(static_cast<std::size_t>(i)));
  return GaussianMixture(dim_, std::move(out));
}

std::vector<MixtureMode> GaussianMixture::modes() const {
  std::vector<MixtureMode> out;
  for (int k = 0; k < num_modes(); ++k)
    out.push_back({means_.col(k), base_variances_[static_cast<std::size_t>(k)],
                   weights_[static_cast<std::size_t>(k)]});
  return out;
}

SmoothedEval smoothed_score(const GaussianMixture& mix, const Vector& x, double sigma) {
  check_point(mix, x);
  check_sigma(sigma);
  const int kk = mix.num_modes();
  const double d = mix.dim();
  const double s2 = sigma * sigma;
  const Vector d2 = mix.squared_distances(x);

  std::vector<double> logc(static_cast<std::size_t>(kk));
  for (int k = 0; k < kk; ++k) {
    const double v = mix.base_variances()[static_cast<std::size_t>(k)] + s2;
    logc[static_cast<std::size_t>(k)] =
        mix.log_weights()[static_cast<std::size_t>(k)] - 0.5 * d * (kLog2Pi + std::log(v)) - 0.5 * d2[k] / v;
  }
  SmoothedEval out;
  out.log_density = log_sum_exp(logc.data(), logc.size());
  out.responsibilities.resize(kk);
  out.score = Vector::Zero(mix.dim());
  for (int k = 0; k < kk; ++k) {
    const double g = std::exp(logc[static_cast<std::size_t>(k)] - out.log_density);
    out.responsibilities[k] = g;
    const double v = mix.base_variances()[static_cast<std::size_t>(k)] + s2;
    if (g > 0.0) out.score += (g / v) * (mix.means().col(k) - x);
  }
  return out;
}

Vector mixture_score(const GaussianMixture& mix, const Vector& x, double sigma) {
  return smoothed_score(mix, x, sigma).score;
}

ScoreFn make_score_fn(const GaussianMixture& mix) {
  return [&mix](const Vector& x, double sigma) { return mixture_score(mix, x, sigma); };
}

std::pair<Vector, int> sample_smoothed_labeled(const GaussianMixture& mix, double sigma, Rng& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::domain_error("sample_smoothed: sigma must be >= 0");
  std::discrete_distribution<int> pick(mix.weights().begin(), mix.weights().end());
  const int k = pick(rng);
  const double var = mix.base_variances()[static_cast<std::size_t>(k)] + sigma * sigma;
  Vector x = mix.means().col(k);
  if (var > 0.0) x += std::sqrt(var) * normal_vector(rng, mix.dim());
  return {std::move(x), k};
}

Vector sample_smoothed(const GaussianMixture& mix, double sigma, Rng& rng) {
  return sample_smoothed_labeled(mix, sigma, rng).first;
}

Vector sigma_posterior(const GaussianMixture& mix, const Vector& x, const NoiseGrid& grid) {
  check_point(mix, x);
  const int kk = mix.num_modes();
  const int mm = grid.size();
  const double d = mix.dim();
  const Vector d2 = mix.squared_distances(x);
  const auto& bv = mix.base_variances();
  const bool shared_variance = std::all_of(bv.begin(), bv.end(), [&](double v) { return v == bv.front(); });

  Vector logp(mm);
  const Eigen::ArrayXd half_d2 = 0.5 * d2.array();
  const Eigen::ArrayXd logw = Eigen::Map<const Eigen::ArrayXd>(mix.log_weights().data(), kk);
  Eigen::ArrayXd terms(kk);
  for (int m = 0; m < mm; ++m) {
    const double s2 = grid.level(m) * grid.level(m);
    if (shared_variance) {
      const double v = bv.front() + s2;
      terms = logw - half_d2 / v;
      const double top = terms.maxCoeff();
      logp[m] = top + std::log((terms - top).exp().sum()) - 0.5 * d * std::log(v);
    } else {
      for (int k = 0; k < kk; ++k) {
        const double v = bv[static_cast<std::size_t>(k)] + s2;
        terms[k] = logw[k] - 0.5 * d * std::log(v) - half_d2[k] / v;
      }
      logp[m] = log_sum_exp(terms.data(), static_cast<std::size_t>(kk));
    }
    logp[m] += grid.log_prior()[static_cast<std::size_t>(m)];
  }
  const double z = log_sum_exp(logp.data(), static_cast<std::size_t>(mm));
  if (!std::isfinite(z)) throw std::logic_error("sigma_posterior: unnormalizable posterior");
  Vector post = (logp.array() - z).exp().matrix();
  post /= post.sum();
  return post;
}

Matrix dct_basis(int dim) {
  Matrix b(dim, dim);
  const double n = dim;
  for (int j = 0; j < dim; ++j) {
    const double scale = j == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < dim; ++i)
      b(i, j) = scale * std::cos(std::numbers::pi * (i + 0.5) * j / n);
  }
  return b;
}

namespace {

// Frequencies (one per rotation plane) maximizing the minimum distance of the orbit
// j -> (cos(2 pi k_i j / K), sin(2 pi k_i j / K))_i; ties go to the lexicographically first set.
std::vector<int> cyclic_frequencies(int modes, int planes, double& best_min_d2) {
  const int top = (modes - 1) / 2;
  if (planes > top) throw std::invalid_argument("benchmark mixture: too few distinct frequencies for the subspace");
  std::vector<double> cos_table(static_cast<std::size_t>(modes));
  std::vector<int> pick(static_cast<std::size_t>(planes));
  for (int i = 0; i < planes; ++i) pick[static_cast<std::size_t>(i)] = i + 1;
  std::vector<int> best;
  best_min_d2 = -1.0;
  long visited = 0;
  while (true) {
    if (++visited > 5'000'000) throw std::invalid_argument("benchmark mixture: frequency search too large");
    double min_d2 = std::numeric_limits<double>::infinity();
    for (int j = 1; j < modes && min_d2 > best_min_d2; ++j) {
      double d2 = 0.0;
      for (int k : pick) d2 += 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * k * j / modes));
      min_d2 = std::min(min_d2, d2 / planes);
    }
    if (min_d2 > best_min_d2 + 1e-12) {
      best_min_d2 = min_d2;
      best = pick;
    }
    int i = planes - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == top - (planes - 1 - i)) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int r = i + 1; r < planes; ++r) pick[static_cast<std::size_t>(r)] = pick[static_cast<std::size_t>(r - 1)] + 1;
  }
  return best;
}

std::vector<MixtureMode> cyclic_modes(const BenchmarkMixtureSpec& spec, const Matrix& basis) {
  if (spec.subspace_dim % 2 != 0) throw std::invalid_argument("benchmark mixture: cyclic geometry needs an even subspace_dim");
  if (spec.modes < 2) throw std::invalid_argument("benchmark mixture: cyclic geometry needs at least 2 modes");
  const int planes = spec.subspace_dim / 2;
  double min_d2 = 0.0;
  const std::vector<int> freq = cyclic_frequencies(spec.modes, planes, min_d2);
  if (!(min_d2 > 1e-12)) throw std::invalid_argument("benchmark mixture: cyclic orbit has coincident modes");
  const double radius = spec.min_separation / std::sqrt(min_d2) / std::sqrt(static_cast<double>(planes));
  std::vector<MixtureMode> modes;
  for (int j = 0; j < spec.modes; ++j) {
    Vector c(spec.subspace_dim);
    for (int i = 0; i < planes; ++i) {
      const double a = 2.0 * std::numbers::pi * freq[static_cast<std::size_t>(i)] * j / spec.modes;
      c[2 * i] = radius * std::cos(a);
      c[2 * i + 1] = radius * std::sin(a);
    }
    modes.push_back({basis * c, spec.base_variance, 1.0});
  }
  return modes;
}

std::vector<MixtureMode> random_modes(const BenchmarkMixtureSpec& spec, const Matrix& basis) {
  Rng rng(seed_for(spec.seed, static_cast<std::uint32_t>(StreamTag::kMixture), 0));
  std::vector<MixtureMode> modes;
  constexpr int kMaxTries = 100000;
  int tries = 0;
  while (static_cast<int>(modes.size()) < spec.modes) {
    if (++tries > kMaxTries)
      throw std::invalid_argument("benchmark mixture: cannot place modes at the requested separation");
    const Vector mu = basis * (spec.amplitude * normal_vector(rng, spec.subspace_dim));
    const bool far = std::all_of(modes.begin(), modes.end(), [&](const MixtureMode& m) {
      return (m.mean - mu).norm() >= spec.min_separation;
    });
    if (far) modes.push_back({mu, spec.base_variance, 1.0});
  }
  return modes;
}

}  // namespace

GaussianMixture make_benchmark_mixture(const BenchmarkMixtureSpec& spec) {
  if (spec.dim < 1 || spec.modes < 1 || spec.subspace_dim < 1 || spec.subspace_dim > spec.dim)
    throw std::invalid_argument("benchmark mixture: need dim >= subspace_dim >= 1 and modes >= 1");
  if (!(spec.min_separation > 0.0) || !(spec.base_variance >= 0.0))
    throw std::invalid_argument("benchmark mixture: need min_separation > 0 and base_variance >= 0");
  const Matrix basis = dct_basis(spec.dim).leftCols(spec.subspace_dim);
  auto modes = spec.geometry == BenchmarkGeometry::kCyclic ? cyclic_modes(spec, basis) : random_modes(spec, basis);
  return GaussianMixture(spec.dim, std::move(modes));
}

void to_json(nlohmann::json& j, const GaussianMixture& mix) {
  j = nlohmann::json{{"dim", mix.dim()}, {"modes", nlohmann::json::array()}};
  for (int k = 0; k < mix.num_modes(); ++k) {
    const Vector mu = mix.mean(k);
    j["modes"].push_back({{"mean", std::vector<double>(mu.data(), mu.data() + mu.size())},
                          {"base_variance", mix.base_variances()[static_cast<std::size_t>(k)]},
                          {"weight", mix.weights()[static_cast<std::size_t>(k)]}});
  }
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  if (!j.contains("dim") || !j.contains("modes") || !j["modes"].is_array())
    throw std::invalid_argument("mixture json: need fields dim and modes[]");
  const int dim = j["dim"].get<int>();
  std::vector<MixtureMode> modes;
  for (const auto& m : j["modes"]) {
    const auto mean = m.at("mean").get<std::vector<double>>();
    MixtureMode mode;
    mode.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    mode.base_variance = m.value("base_variance", 0.0);
    mode.weight = m.value("weight", 1.0);
    modes.push_back(std::move(mode));
  }
  return GaussianMixture(dim, std::move(modes));
}

GaussianMixture load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mixture file " + path);
  return mixture_from_json(nlohmann::json::parse(in));
}

void save_mixture(const GaussianMixture& mix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mixture file " + path);
  nlohmann::json j;
  to_json(j, mix);
  out << j.dump(2) << '\n';
}

void to_json(nlohmann::json& j, const BenchmarkMixtureSpec& s) {
  j = nlohmann::json{{"dim", s.dim},
                     {"modes", s.modes},
                     {"geometry", s.geometry == BenchmarkGeometry::kCyclic ? "cyclic" : "random"},
                     {"subspace_dim", s.subspace_dim},
                     {"amplitude", s.amplitude},
                     {"min_separation", s.min_separation},
                     {"base_variance", s.base_variance},
                     {"seed", s.seed}};
}

BenchmarkMixtureSpec benchmark_spec_from_json(const nlohmann::json& j) {
  BenchmarkMixtureSpec s;
  s.dim = j.value("dim", s.dim);
  s.modes = j.value("modes", s.modes);
  const std::string geometry = j.value("geometry", std::string("cyclic"));
  if (geometry == "cyclic") {
    s.geometry = BenchmarkGeometry::kCyclic;
  } else if (geometry == "random") {
    s.geometry = BenchmarkGeometry::kRandom;
  } else {
    throw std::invalid_argument("benchmark mixture: geometry must be 'cyclic' or 'random'");
  }
  s.subspace_dim = j.value("subspace_dim", s.subspace_dim);
  s.amplitude = j.value("amplitude", s.amplitude);
  s.min_separation = j.value("min_separation", s.min_separation);
  s.base_variance = j.value("base_variance", s.base_variance);
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace dmcmc
