#ifndef ADABON_SIMULATE_HPP
#define ADABON_SIMULATE_HPP

#include <adabon/combiner.hpp>
#include <adabon/distributions.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adabon {

class configuration_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Recorded in simulation output; exact streams depend on it.
inline constexpr const char* rng_description =
    "mt19937_64 seeded by splitmix64 key derivation; std::normal_distribution";

/// Splittable seed. child() derives an independent key from (this, index), so
/// any stream can be rebuilt from its path alone without touching siblings.
class StreamKey {
public:
  constexpr explicit StreamKey(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr StreamKey child(std::uint64_t index) const noexcept
  {
    return StreamKey(mix(seed_ ^ mix(index + 0x9e3779b97f4a7c15ULL)));
  }

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  std::mt19937_64 engine() const { return std::mt19937_64(mix(seed_)); }

private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept
  {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

struct SimulationConfig {
  std::size_t m = 500;
  std::size_t n = 4;
  double pi1 = 0.1;
  double rho = 0.2;
  double mu_magnitude = 4.0;
  unsigned u = 2;
  std::size_t reps = 1000;
  std::uint64_t master_seed = 20240917;
  /// Overrides the default block rule (5 blocks for rho >= 0, blocks of 2 otherwise).
  std::optional<std::size_t> blocks;

  std::size_t block_size() const
  {
    if (blocks) {
      if (*blocks == 0 || m % *blocks != 0)
        throw configuration_error("block count " + std::to_string(*blocks) +
                                  " does not divide m=" + std::to_string(m));
      return m / *blocks;
    }
    if (rho >= 0.0) {
      if (m % 5 != 0)
        throw configuration_error("m=" + std::to_string(m) +
                                  " is not divisible into 5 blocks");
      return m / 5;
    }
    if (m % 2 != 0)
      throw configuration_error("m=" + std::to_string(m) + " is not divisible into blocks of 2");
    return 2;
  }

  void validate() const
  {
    if (m < 2)
      throw configuration_error("m must be at least 2");
    if (n < 2)
      throw configuration_error("n must be at least 2");
    if (!(pi1 >= 0.0 && pi1 <= 1.0))
      throw configuration_error("pi1 must lie in [0, 1]");
    if (!(rho > -1.0 && rho <= 1.0))
      throw configuration_error("rho must lie in (-1, 1]");
    if (!std::isfinite(mu_magnitude))
      throw configuration_error("mu_magnitude must be finite");
    if (u < 2 || u > n)
      throw configuration_error("u must lie in [2, n]");
    const auto size = block_size();
    if (rho < 0.0 && 1.0 + (static_cast<double>(size) - 1.0) * rho <= 0.0)
      throw configuration_error("equicorrelation rho=" + std::to_string(rho) +
                                " is not positive definite for blocks of " +
                                std::to_string(size));
  }
};

/// Effect parameters and which PC nulls are false at level u.
struct TruthLabels {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> mu; ///< m x n, row-major
  std::vector<bool> is_false_pc_null;

  std::size_t false_count() const
  {
    std::size_t c = 0;
    for (bool b : is_false_pc_null)
      c += b ? 1 : 0;
    return c;
  }
};

/// H^{u/n}_i is false iff at least u of feature i's effects are non-zero.
inline std::vector<bool> label_pc_nulls(std::span<const double> mu, std::size_t m,
                                        std::size_t n, unsigned u)
{
  std::vector<bool> labels(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < n; ++j)
      nonzero += mu[i * n + j] != 0.0 ? 1 : 0;
    labels[i] = nonzero >= u;
  }
  return labels;
}

inline TruthLabels relabel(const TruthLabels& truth, unsigned u)
{
  TruthLabels out = truth;
  out.is_false_pc_null = label_pc_nulls(truth.mu, truth.m, truth.n, u);
  return out;
}

/// Each feature carries signal with probability pi1; a signal row is uniform
/// over {0, mu_magnitude}^n.
inline TruthLabels generate_effects(const SimulationConfig& cfg, std::mt19937_64& rng)
{
  std::bernoulli_distribution signal(cfg.pi1);
  std::bernoulli_distribution coin(0.5);
  TruthLabels truth;
  truth.m = cfg.m;
  truth.n = cfg.n;
  truth.mu.assign(cfg.m * cfg.n, 0.0);
  for (std::size_t i = 0; i < cfg.m; ++i) {
    if (!signal(rng))
      continue;
    for (std::size_t j = 0; j < cfg.n; ++j)
      truth.mu[i * cfg.n + j] = coin(rng) ? cfg.mu_magnitude : 0.0;
  }
  truth.is_false_pc_null = label_pc_nulls(truth.mu, cfg.m, cfg.n, cfg.u);
  return truth;
}

namespace detail {

/// Lower-triangular factor of the size x size equicorrelation matrix.
inline std::vector<double> equicorrelation_cholesky(std::size_t size, double rho)
{
  std::vector<double> l(size * size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = i == j ? 1.0 : rho;
      for (std::size_t p = 0; p < j; ++p)
        sum -= l[i * size + p] * l[j * size + p];
      if (i == j) {
        if (sum <= 0.0)
          throw configuration_error("equicorrelation matrix is not positive definite");
        l[i * size + i] = std::sqrt(sum);
      } else {
        l[i * size + j] = sum / l[j * size + j];
      }
    }
  }
  return l;
}

} // namespace detail

/// Noise for every (feature, study), m x n row-major. Studies are
/// independent; within a study, contiguous blocks of features are
/// equicorrelated with correlation rho. Each (study, block) draws from its
/// own stream `key.child(study).child(block)`.
inline std::vector<double> generate_noise(const SimulationConfig& cfg, StreamKey key)
{
  const std::size_t size = cfg.block_size();
  const std::size_t block_count = cfg.m / size;
  std::vector<double> noise(cfg.m * cfg.n);

  std::vector<double> chol;
  if (cfg.rho < 0.0)
    chol = detail::equicorrelation_cholesky(size, cfg.rho);
  const double own = std::sqrt(1.0 - std::max(cfg.rho, 0.0));
  const double shared = std::sqrt(std::max(cfg.rho, 0.0));

  std::vector<double> z(size);
  for (std::size_t j = 0; j < cfg.n; ++j) {
    const StreamKey study = key.child(j);
    for (std::size_t b = 0; b < block_count; ++b) {
      auto rng = study.child(b).engine();
      std::normal_distribution<double> normal;
      const std::size_t first = b * size;
      if (cfg.rho >= 0.0) {
        const double w = normal(rng);
        for (std::size_t r = 0; r < size; ++r)
          noise[(first + r) * cfg.n + j] = own * normal(rng) + shared * w;
      } else {
        for (auto& x : z)
          x = normal(rng);
        for (std::size_t r = 0; r < size; ++r) {
          double e = 0.0;
          for (std::size_t p = 0; p <= r; ++p)
            e += chol[r * size + p] * z[p];
          noise[(first + r) * cfg.n + j] = e;
        }
      }
    }
  }
  return noise;
}

/// P_ij = 1 - Phi(mu_ij + eps_ij).
inline PValueMatrix generate_pvalues(const TruthLabels& truth, std::span<const double> noise)
{
  if (noise.size() != truth.mu.size())
    throw std::invalid_argument("noise and effect matrices differ in shape");
  std::vector<double> p(noise.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = normal_upper_tail(truth.mu[i] + noise[i]);
  return PValueMatrix(truth.m, truth.n, std::move(p));
}

struct Replicate {
  TruthLabels truth;
  PValueMatrix pvalues;
};

/// Replicate r of a configuration. Depends only on (master_seed, r).
inline Replicate generate_replicate(const SimulationConfig& cfg, std::uint64_t replicate)
{
  const StreamKey key = StreamKey(cfg.master_seed).child(replicate);
  auto effects_rng = key.child(0).engine();
  auto truth = generate_effects(cfg, effects_rng);
  const auto noise = generate_noise(cfg, key.child(1));
  auto pvalues = generate_pvalues(truth, noise);
  return {std::move(truth), std::move(pvalues)};
}

} // namespace adabon

#endif // ADABON_SIMULATE_HPP
