#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Noise-conditional score s(x, sigma) ~ grad_x log p(x | sigma).
using ScoreFn = std::function<Vector(const Vector&, double)>;

/// Non-finite iterate inside an integrator or Markov chain.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step, long chain = -1)
      : std::runtime_error(what + " (chain " + std::to_string(chain) + ", step " +
                           std::to_string(step) + ")"),
        step_(step),
        chain_(chain) {}
  long step() const { return step_; }
  long chain() const { return chain_; }

 private:
  long step_;
  long chain_;
};

class StalledSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects every violated field so a config can be fixed in one pass.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& i : v) s += "\n  - " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

/// Wraps a score function so every call bumps `counter`.
inline ScoreFn counted(ScoreFn inner, std::atomic<long>& counter) {
  return [inner = std::move(inner), &counter](const Vector& x, double sigma) {
    counter.fetch_add(1, std::memory_order_relaxed);
    return inner(x, sigma);
  };
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Fills v with i.i.d. standard normals.
inline void fill_normal(Rng& rng, Vector& v) {
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n01(rng);
}

inline Vector normal_vector(Rng& rng, Eigen::Index d) {
  Vector v(d);
  fill_normal(rng, v);
  return v;
}

// Stream derivation: seed_for(master, tag, index) = splitmix64(master ^ splitmix64(tag << 32 | index)).
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t seed_for(std::uint64_t master, std::uint32_t tag, std::uint32_t index) {
  const std::uint64_t key = (static_cast<std::uint64_t>(tag) << 32) | index;
  return splitmix64(master ^ splitmix64(key));
}

inline constexpr const char* kRngDerivation =
    "mt19937_64 seeded with splitmix64(master ^ splitmix64(tag << 32 | index))";

/// Stream tags used by the samplers and the harness.
enum class StreamTag : std::uint32_t {
  kChain = 1,
  kGroundTruth = 2,
  kTraining = 3,
  kHeldOut = 4,
  kBenchmark = 5,
  kMixture = 6,
  kInit = 7,
};

inline Rng make_stream(std::uint64_t master, StreamTag tag, std::uint32_t index) {
  return Rng(seed_for(master, static_cast<std::uint32_t>(tag), index));
}

}  // namespace dmcmc
