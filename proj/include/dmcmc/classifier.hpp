#pragma once

// Noise-level prediction q(sigma | x) over a NoiseGrid. Two interchangeable
// implementations: the exact Bayes posterior of a known mixture, and a
// softmax-linear classifier trained on noisy samples.

#include "dmcmc/common.hpp"
#include "dmcmc/mixture.hpp"
#include "dmcmc/ve_process.hpp"

#include <json.hpp>

#include <memory>

namespace dmcmc {

class NoiseLevelPredictor {
 public:
  virtual ~NoiseLevelPredictor() = default;
  /// Probability vector over grid().size() levels.
  virtual Vector predict(const Vector& x) const = 0;
  virtual const NoiseGrid& grid() const = 0;
};

class ExactPosterior final : public NoiseLevelPredictor {
 public:
  ExactPosterior(const GaussianMixture& mix, NoiseGrid grid) : mix_(&mix), grid_(std::move(grid)) {}
  Vector predict(const Vector& x) const override { return sigma_posterior(*mix_, x, grid_); }
  const NoiseGrid& grid() const override { return grid_; }

 private:
  const GaussianMixture* mix_;
  NoiseGrid grid_;
};

/// Fixed features: log mean-square of x, of its first and second differences along the
/// coordinate order, of B contiguous DCT-II frequency bands and, when a codebook of clean
/// points is given, of the distance to its nearest entry.
class NoiseFeatureMap {
 public:
  static constexpr const char* kVersion = "dct-bands-codebook-v2";

  NoiseFeatureMap(int dim, int bands = 8, Matrix codebook = Matrix());
  int dim() const { return dim_; }
  int bands() const { return static_cast<int>(band_edges_.size()) - 1; }
  const Matrix& codebook() const { return codebook_; }  // dim x C, possibly empty
  int size() const { return 3 + bands() + (codebook_.cols() > 0 ? 1 : 0); }
  Vector operator()(const Vector& x) const;

 private:
  int dim_;
  Matrix dct_t_;  // dim x dim, rows are basis vectors
  std::vector<int> band_edges_;
  Matrix codebook_;
};

/// Clean reference points for the codebook feature: every mode mean when the mixture has
/// at most `size` modes, otherwise `size` draws from the clean mixture. size 0 gives none.
Matrix make_codebook(const GaussianMixture& mix, int size, Rng& rng);

struct LabeledSet {
  std::vector<Vector> x;
  std::vector<int> label;  // 0-based grid index
  std::size_t size() const { return x.size(); }
};

enum class LevelSampling { kPrior, kUniform };

/// n_per_level * M noisy samples; labels drawn from the grid prior (or uniformly).
LabeledSet make_training_set(const GaussianMixture& mix, const NoiseGrid& grid, int n_per_level, Rng& rng,
                             LevelSampling sampling = LevelSampling::kPrior);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.5;
  int batch_size = 128;
  std::uint64_t seed = 1;
};

struct TrainReport {
  int epochs = 0;
  double final_cross_entropy = 0.0;
  std::vector<double> loss_history;  // full-set cross-entropy after each epoch
  double top1_accuracy = 0.0;
  double within2_accuracy = 0.0;
};

/// Softmax-linear model softmax(W^T phi(x) + b) on standardized features.
class NoiseClassifier final : public NoiseLevelPredictor {
 public:
  NoiseClassifier(NoiseGrid grid, int dim, int bands = 8, Matrix codebook = Matrix());

  Vector predict(const Vector& x) const override;
  const NoiseGrid& grid() const override { return grid_; }

  /// Fits feature standardization on the set, then runs mini-batch gradient descent
  /// on the mean cross-entropy. Accuracies are measured on held_out when given.
  TrainReport train(const LabeledSet& set, const TrainConfig& cfg, const LabeledSet* held_out = nullptr);

  double cross_entropy(const LabeledSet& set) const;
  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }
  const NoiseFeatureMap& features() const { return features_; }

  nlohmann::json to_json() const;
  static NoiseClassifier from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static NoiseClassifier load(const std::string& path);

 private:
  Vector standardized(const Vector& x) const;
  Vector logits(const Vector& z) const;

  NoiseGrid grid_;
  NoiseFeatureMap features_;
  Vector feat_mean_;
  Vector feat_scale_;
  Matrix weights_;  // F x M
  Vector bias_;     // M
};

/// Top-1 and within-±k accuracy of any predictor against labels.
std::pair<double, double> accuracy(const NoiseLevelPredictor& pred, const LabeledSet& set, int k = 2);

/// Fraction of points whose argmax agrees with the reference argmax within ±k.
double argmax_agreement(const NoiseLevelPredictor& a, const NoiseLevelPredictor& b,
                        const std::vector<Vector>& xs, int k = 2);

int argmax_index(const Vector& p);

}  // namespace dmcmc
