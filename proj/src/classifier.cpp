#include "dmcmc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace dmcmc {

namespace {

constexpr double kLogFloor = 1e-12;

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp().matrix();
  return p / p.sum();
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

int argmax_index(const Vector& p) {
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

NoiseFeatureMap::NoiseFeatureMap(int dim, int bands, Matrix codebook) : dim_(dim), codebook_(std::move(codebook)) {
  if (dim < 1) throw std::invalid_argument("NoiseFeatureMap: dim must be >= 1");
  if (bands < 1) throw std::invalid_argument("NoiseFeatureMap: bands must be >= 1");
  if (codebook_.cols() > 0 && (codebook_.rows() != dim || !codebook_.allFinite()))
    throw std::invalid_argument("NoiseFeatureMap: codebook must be finite with dim rows");
  bands = std::min(bands, dim);
  dct_t_ = dct_basis(dim).transpose();
  for (int b = 0; b <= bands; ++b)
    band_edges_.push_back(static_cast<int>(std::lround(static_cast<double>(b) * dim / bands)));
}

Vector NoiseFeatureMap::operator()(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("NoiseFeatureMap: wrong input dimension");
  Vector f(size());
  f[0] = std::log(kLogFloor + x.squaredNorm() / dim_);
  if (dim_ >= 2) {
    const auto n = x.size();
    const Vector d1 = x.tail(n - 1) - x.head(n - 1);
    f[1] = std::log(kLogFloor + d1.squaredNorm() / static_cast<double>(d1.size()));
    if (dim_ >= 3) {
      const Vector d2 = d1.tail(n - 2) - d1.head(n - 2);
      f[2] = std::log(kLogFloor + d2.squaredNorm() / static_cast<double>(d2.size()));
    } else {
      f[2] = f[1];
    }
  } else {
    f[1] = f[0];
    f[2] = f[0];
  }
  const Vector c = dct_t_ * x;
  for (int b = 0; b + 1 < static_cast<int>(band_edges_.size()); ++b) {
    const int lo = band_edges_[static_cast<std::size_t>(b)];
    const int hi = band_edges_[static_cast<std::size_t>(b) + 1];
    f[3 + b] = std::log(kLogFloor + c.segment(lo, hi - lo).squaredNorm() / (hi - lo));
  }
  if (codebook_.cols() > 0) {
    const double d2 = (codebook_.colwise() - x).colwise().squaredNorm().minCoeff();
    f[size() - 1] = std::log(kLogFloor + d2 / dim_);
  }
  return f;
}

Matrix make_codebook(const GaussianMixture& mix, int size, Rng& rng) {
  if (size < 0) throw std::invalid_argument("make_codebook: size must be >= 0");
  if (size == 0) return Matrix();
  if (mix.num_modes() <= size) return mix.means();
  Matrix book(mix.dim(), size);
  for (int i = 0; i < size; ++i) book.col(i) = sample_smoothed(mix, 0.0, rng);
  return book;
}

LabeledSet make_training_set(const GaussianMixture& mix, const NoiseGrid& grid, int n_per_level, Rng& rng,
                             LevelSampling sampling) {
  if (n_per_level < 1) throw std::invalid_argument("make_training_set: n_per_level must be >= 1");
  const int m = grid.size();
  const std::size_t total = static_cast<std::size_t>(n_per_level) * static_cast<std::size_t>(m);
  LabeledSet set;
  set.x.reserve(total);
  set.label.reserve(total);
  std::discrete_distribution<int> prior(grid.prior().begin(), grid.prior().end());
  for (std::size_t i = 0; i < total; ++i) {
    const int label = sampling == LevelSampling::kPrior ? prior(rng) : static_cast<int>(i % static_cast<std::size_t>(m));
    set.x.push_back(sample_smoothed(mix, grid.level(label), rng));
    set.label.push_back(label);
  }
  return set;
}

NoiseClassifier::NoiseClassifier(NoiseGrid grid, int dim, int bands, Matrix codebook)
    : grid_(std::move(grid)), features_(dim, bands, std::move(codebook)) {
  const int f = features_.size();
  feat_mean_ = Vector::Zero(f);
  feat_scale_ = Vector::Ones(f);
  weights_ = Matrix::Zero(f, grid_.size());
  bias_ = Vector::Zero(grid_.size());
}

Vector NoiseClassifier::standardized(const Vector& x) const {
  return ((features_(x) - feat_mean_).array() / feat_scale_.array()).matrix();
}

Vector NoiseClassifier::logits(const Vector& z) const { return weights_.transpose() * z + bias_; }

Vector NoiseClassifier::predict(const Vector& x) const { return softmax(logits(standardized(x))); }

double NoiseClassifier::cross_entropy(const LabeledSet& set) const {
  if (set.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Vector l = logits(standardized(set.x[i]));
    const double mx = l.maxCoeff();
    const double lse = mx + std::log((l.array() - mx).exp().sum());
    total += lse - l[set.label[i]];
  }
  return total / static_cast<double>(set.size());
}

TrainReport NoiseClassifier::train(const LabeledSet& set, const TrainConfig& cfg, const LabeledSet* held_out) {
  if (cfg.epochs < 0 || !(cfg.lr > 0.0) || cfg.batch_size < 1)
    throw std::invalid_argument("train: need epochs >= 0, lr > 0, batch_size >= 1");
  TrainReport report;
  if (set.size() == 0) throw std::invalid_argument("train: empty training set");
  for (int lbl : set.label)
    if (lbl < 0 || lbl >= grid_.size()) throw std::invalid_argument("train: label outside the grid");

  if (cfg.epochs > 0) {
    // Feature standardization from the training set.
    const int f = features_.size();
    std::vector<Vector> raw;
    raw.reserve(set.size());
    Vector mean = Vector::Zero(f);
    for (const auto& x : set.x) {
      raw.push_back(features_(x));
      mean += raw.back();
    }
    mean /= static_cast<double>(set.size());
    Vector var = Vector::Zero(f);
    for (const auto& r : raw) var += (r - mean).array().square().matrix();
    var /= static_cast<double>(set.size());
    feat_mean_ = mean;
    feat_scale_ = var.array().sqrt().max(1e-8).matrix();

    std::vector<Vector> z;
    z.reserve(set.size());
    for (const auto& r : raw) z.push_back(((r - feat_mean_).array() / feat_scale_.array()).matrix());

    Rng rng(seed_for(cfg.seed, static_cast<std::uint32_t>(StreamTag::kTraining), 0));
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    const int m = grid_.size();
    Matrix grad_w(f, m);
    Vector grad_b(m);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        grad_w.setZero();
        grad_b.setZero();
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t i = order[k];
          Vector p = softmax(logits(z[i]));
          p[set.label[i]] -= 1.0;
          grad_w.noalias() += z[i] * p.transpose();
          grad_b += p;
        }
        const double scale = cfg.lr / static_cast<double>(stop - start);
        weights_ -= scale * grad_w;
        bias_ -= scale * grad_b;
      }
      const double loss = cross_entropy(set);
      if (!std::isfinite(loss)) throw TrainingDivergedError("train: non-finite loss at epoch " + std::to_string(epoch));
      report.loss_history.push_back(loss);
    }
  }
  report.epochs = cfg.epochs;
  report.final_cross_entropy = cross_entropy(set);
  const auto [top1, within2] = accuracy(*this, held_out ? *held_out : set, 2);
  report.top1_accuracy = top1;
  report.within2_accuracy = within2;
  return report;
}

nlohmann::json NoiseClassifier::to_json() const {
  nlohmann::json j;
  j["feature_map"] = NoiseFeatureMap::kVersion;
  j["dim"] = features_.dim();
  j["bands"] = features_.bands();
  j["grid"] = {{"sigma_min", grid_.sigma_min()}, {"sigma_max", grid_.sigma_max()}, {"M", grid_.size()}};
  j["codebook"] = nlohmann::json::array();
  const Matrix& book = features_.codebook();
  for (Eigen::Index c = 0; c < book.cols(); ++c) j["codebook"].push_back(to_vec(book.col(c)));
  j["feature_mean"] = to_vec(feat_mean_);
  j["feature_scale"] = to_vec(feat_scale_);
  j["bias"] = to_vec(bias_);
  j["W"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) j["W"].push_back(to_vec(weights_.row(r).transpose()));
  return j;
}

NoiseClassifier NoiseClassifier::from_json(const nlohmann::json& j) {
  if (j.value("feature_map", std::string()) != NoiseFeatureMap::kVersion)
    throw std::invalid_argument("classifier: unsupported feature map version");
  auto load_vec = [](const nlohmann::json& a, Eigen::Index n, const char* what) {
    const auto v = a.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != n) throw std::invalid_argument(std::string("classifier: bad ") + what);
    return Vector(Eigen::Map<const Vector>(v.data(), n));
  };
  const auto& g = j.at("grid");
  const int dim = j.at("dim").get<int>();
  const auto& entries = j.at("codebook");
  Matrix book(dim, static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i)
    book.col(static_cast<Eigen::Index>(i)) = load_vec(entries[i], dim, "codebook entry");
  NoiseClassifier c(NoiseGrid(g.at("sigma_min").get<double>(), g.at("sigma_max").get<double>(), g.at("M").get<int>()),
                    dim, j.at("bands").get<int>(), std::move(book));
  const int f = c.features_.size();
  c.feat_mean_ = load_vec(j.at("feature_mean"), f, "feature_mean");
  c.feat_scale_ = load_vec(j.at("feature_scale"), f, "feature_scale");
  c.bias_ = load_vec(j.at("bias"), c.grid_.size(), "bias");
  const auto& w = j.at("W");
  if (static_cast<int>(w.size()) != f) throw std::invalid_argument("classifier: bad W");
  for (int r = 0; r < f; ++r) c.weights_.row(r) = load_vec(w[static_cast<std::size_t>(r)], c.grid_.size(), "W row");
  return c;
}

void NoiseClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write classifier file " + path);
  out << to_json().dump() << '\n';
}

NoiseClassifier NoiseClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open classifier file " + path);
  return from_json(nlohmann::json::parse(in));
}

std::pair<double, double> accuracy(const NoiseLevelPredictor& pred, const LabeledSet& set, int k) {
  if (set.size() == 0) return {0.0, 0.0};
  std::size_t top1 = 0, within = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int guess = argmax_index(pred.predict(set.x[i]));
    top1 += guess == set.label[i];
    within += std::abs(guess - set.label[i]) <= k;
  }
  const double n = static_cast<double>(set.size());
  return {static_cast<double>(top1) / n, static_cast<double>(within) / n};
}

double argmax_agreement(const NoiseLevelPredictor& a, const NoiseLevelPredictor& b, const std::vector<Vector>& xs,
                        int k) {
  if (xs.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& x : xs) ok += std::abs(argmax_index(a.predict(x)) - argmax_index(b.predict(x))) <= k;
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

}  // namespace dmcmc
