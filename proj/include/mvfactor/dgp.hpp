#pragma once

/// @file
/// Synthetic matrix-variate factor series Y_t = R F_t Cᵀ + E_t.
///
/// Factor entries are independent AR(1) processes whose coefficients carry a
/// random sign, loadings are Uniform(-1, 1) scaled to the requested strength,
/// and the noise is E_t = S1^{1/2} eps_t S2^{1/2} with S1, S2 either identity
/// or equicorrelated with off-diagonal 0.1.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvfactor/error.hpp"
#include "mvfactor/linalg.hpp"
#include "mvfactor/series.hpp"

namespace mvfactor {

enum class NoiseCase { Identity, Equicorrelated };

// How factor strength enters the loadings.
//   ScaledUniform:   entries Uniform(-1, 1) * p^{-delta/2}.
//   ScaledOrthonormal: Uniform(-1, 1) draws orthonormalised, then scaled by
//                    p^{(1-delta)/2}, so RᵀR = p^{1-delta} I exactly.
enum class LoadingScheme { ScaledUniform, ScaledOrthonormal };

inline constexpr double kEquicorrelation = 0.1;

inline std::string to_string(NoiseCase c) {
  return c == NoiseCase::Identity ? "identity" : "equicorrelated";
}

inline std::string to_string(LoadingScheme s) {
  return s == LoadingScheme::ScaledUniform ? "scaled-uniform" : "scaled-orthonormal";
}

inline LoadingScheme parse_loading_scheme(const std::string& s) {
  if (s == "scaled-uniform" || s == "ScaledUniform") return LoadingScheme::ScaledUniform;
  if (s == "scaled-orthonormal" || s == "ScaledOrthonormal") return LoadingScheme::ScaledOrthonormal;
  throw ConfigError("loadings: unknown value '" + s +
                    "' (expected scaled-uniform or scaled-orthonormal)");
}

inline NoiseCase parse_noise_case(const std::string& s) {
  if (s == "identity" || s == "Identity" || s == "1") return NoiseCase::Identity;
  if (s == "equicorrelated" || s == "Equicorrelated" || s == "2") return NoiseCase::Equicorrelated;
  throw ConfigError("noise_case: unknown value '" + s + "' (expected identity or equicorrelated)");
}

struct DgpConfig {
  std::size_t p = 20;
  std::size_t q = 20;
  std::size_t r = 3;  // 0 together with c = 0 gives a pure-noise series
  std::size_t c = 3;
  std::size_t n = 200;
  double a = 0.5;
  double delta = 0.0;
  double omega = 0.0;
  NoiseCase noise_case = NoiseCase::Identity;
  LoadingScheme loadings = LoadingScheme::ScaledOrthonormal;
  double noise_scale = 1.0;  // 0 gives the noiseless model
  std::uint64_t seed = 1;

  void validate() const {
    if (p == 0) throw ConfigError("p: must be positive");
    if (q == 0) throw ConfigError("q: must be positive");
    if (r > p) throw ConfigError("r: must not exceed p");
    if (c > q) throw ConfigError("c: must not exceed q");
    if (n < 3) throw ConfigError("n: must be at least 3");
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("a: must lie in [0, 1)");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta: must lie in [0, 1]");
    if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("omega: must lie in [0, 1]");
    if (!(noise_scale >= 0.0 && std::isfinite(noise_scale)))
      throw ConfigError("noise_scale: must be finite and non-negative");
  }
};

/// The simulated series plus the latent quantities used to generate it.
struct Simulation {
  MatrixSeries series;
  Matrix row_loadings;              // p x r
  Matrix column_loadings;           // q x c
  Matrix ar_coefficients;           // r x c, entries +-a
  std::vector<Matrix> factors;      // n frames, r x c
};

/// SplitMix64 finalizer; also used to derive per-replication seeds.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Matrix equicorrelation_matrix(std::size_t dim, double rho) {
  Matrix m(dim, dim, rho);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

// Modified Gram-Schmidt on the columns; draws are continuous so rank
// deficiency has probability zero, but it is still reported.
inline Matrix orthonormalize_columns(Matrix m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) dot += m(i, k) * m(i, j);
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) -= dot * m(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) norm += m(i, j) * m(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw ValidationError("loading draw is numerically rank deficient");
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) /= norm;
  }
  return m;
}

inline Matrix draw_loadings(std::size_t dim, std::size_t count, double strength_exponent,
                            LoadingScheme scheme, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Matrix m(dim, count);
  for (double& v : m.values()) v = uniform(rng);
  const double d = static_cast<double>(dim);
  if (scheme == LoadingScheme::ScaledUniform) return m * std::pow(d, -strength_exponent / 2.0);
  return orthonormalize_columns(std::move(m)) * std::pow(d, (1.0 - strength_exponent) / 2.0);
}

inline Simulation simulate(const DgpConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  const bool has_factors = cfg.r > 0 && cfg.c > 0;
  const std::size_t r = has_factors ? cfg.r : 0;
  const std::size_t c = has_factors ? cfg.c : 0;

  Simulation sim;
  sim.ar_coefficients = Matrix(r, c);
  for (double& v : sim.ar_coefficients.values()) v = (coin(rng) ? 1.0 : -1.0) * cfg.a;

  sim.row_loadings = draw_loadings(cfg.p, r, cfg.delta, cfg.loadings, rng);
  sim.column_loadings = draw_loadings(cfg.q, c, cfg.omega, cfg.loadings, rng);

  // Stationary start: Var(F) = 1 / (1 - a^2).
  Matrix f(r, c);
  const double stationary_sd = 1.0 / std::sqrt(1.0 - cfg.a * cfg.a);
  for (double& v : f.values()) v = stationary_sd * normal(rng);

  Matrix left_root, right_root;
  const bool correlated = cfg.noise_case == NoiseCase::Equicorrelated;
  if (correlated) {
    left_root = sqrt_psd(equicorrelation_matrix(cfg.p, kEquicorrelation));
    right_root = sqrt_psd(equicorrelation_matrix(cfg.q, kEquicorrelation));
  }

  sim.factors.reserve(cfg.n);
  sim.series = MatrixSeries(cfg.p, cfg.q);
  for (std::size_t t = 0; t < cfg.n; ++t) {
    auto fv = f.values();
    auto av = sim.ar_coefficients.values();
    for (std::size_t k = 0; k < fv.size(); ++k) fv[k] = av[k] * fv[k] + normal(rng);

    Matrix eps(cfg.p, cfg.q);
    for (double& v : eps.values()) v = normal(rng);
    Matrix y = correlated ? matmul(matmul(left_root, eps), right_root) : std::move(eps);
    y *= cfg.noise_scale;
    if (has_factors) y += matmul_nt(matmul(sim.row_loadings, f), sim.column_loadings);

    sim.factors.push_back(f);
    sim.series.push_back(std::move(y));
  }
  return sim;
}

}  // namespace mvfactor
