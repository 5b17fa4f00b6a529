#pragma once

/// @file
/// Monte Carlo frequency tables and out-of-sample cross-validation.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mvfactor/dgp.hpp"
#include "mvfactor/error.hpp"
#include "mvfactor/factor_estimation.hpp"
#include "mvfactor/linalg.hpp"
#include "mvfactor/series.hpp"

namespace mvfactor {

struct MethodSpec {
  Method method = Method::SR;
  Mode mode = Mode::TwoStep;

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

inline std::vector<MethodSpec> all_methods() {
  std::vector<MethodSpec> out;
  for (Mode mode : {Mode::OneStep, Mode::TwoStep})
    for (Method m : {Method::ER, Method::SR, Method::MR}) out.push_back({m, mode});
  return out;
}

struct McCellConfig {
  DgpConfig dgp;  // dgp.seed is the master seed
  LagParams params;
  std::optional<std::size_t> m;
  std::size_t replications = 200;
  std::vector<MethodSpec> methods = all_methods();

  void validate() const {
    dgp.validate();
    params.validate();
    if (replications < 1) throw ConfigError("replications: must be at least 1");
    if (methods.empty()) throw ConfigError("methods: at least one method is required");
    if (dgp.r == 0 || dgp.c == 0) throw ConfigError("r, c: Monte Carlo cells need r, c >= 1");
  }
};

struct McTally {
  Method method = Method::SR;
  Mode mode = Mode::TwoStep;
  Side side = Side::Row;
  std::size_t exact = 0;
  std::size_t under = 0;
  std::size_t over = 0;

  std::size_t total() const noexcept { return exact + under + over; }
  double x() const noexcept { return ratio(exact); }
  double y() const noexcept { return ratio(under); }
  double z() const noexcept { return ratio(over); }

  // Column header style used in frequency tables: SR_o (one-step row),
  // SR~_o (one-step column), SR (two-step row), SR~ (two-step column).
  std::string label() const {
    std::string s = to_string(method);
    if (side == Side::Column) s += "~";
    if (mode == Mode::OneStep) s += "_o";
    return s;
  }

 private:
  double ratio(std::size_t k) const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(total());
  }
};

struct McReport {
  McCellConfig cell;
  std::vector<McTally> tallies;  // per requested method, row then column

  const McTally& tally(Method method, Mode mode, Side side) const {
    for (const auto& t : tallies)
      if (t.method == method && t.mode == mode && t.side == side) return t;
    throw ConfigError("no tally for " + to_string(method) + " " + to_string(mode) + " " +
                      to_string(side));
  }
};

namespace detail {

// Estimates for one replication, in the order of McReport::tallies.
inline std::vector<std::size_t> run_replication(const McCellConfig& cfg, std::size_t index) {
  DgpConfig dgp = cfg.dgp;
  dgp.seed = replication_seed(cfg.dgp.seed, index);
  const Simulation sim = simulate(dgp);

  bool need_one = false;
  bool need_two = false;
  for (const auto& m : cfg.methods) (m.mode == Mode::OneStep ? need_one : need_two) = true;
  const EstimationReport rep = estimate(sim.series, cfg.params, cfg.m, need_one, need_two);

  std::vector<std::size_t> out;
  out.reserve(cfg.methods.size() * 2);
  for (const auto& m : cfg.methods) {
    const FactorEstimates& fe = m.mode == Mode::OneStep ? *rep.one_step : *rep.two_step;
    out.push_back(fe.row.result(m.method).estimate);
    out.push_back(fe.column.result(m.method).estimate);
  }
  return out;
}

}  // namespace detail

/// Runs `replications` independent simulate-and-estimate rounds and tallies
/// exact / under / over counts. Replication k uses seed
/// replication_seed(master, k), so results do not depend on `threads`.
inline McReport run_monte_carlo(const McCellConfig& cfg, unsigned threads = 0) {
  cfg.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.replications));

  std::vector<std::vector<std::size_t>> estimates(cfg.replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (std::size_t k = next++; k < cfg.replications && !failed; k = next++) {
      try {
        estimates[k] = detail::run_replication(cfg, k);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  McReport report;
  report.cell = cfg;
  for (const auto& m : cfg.methods) {
    for (Side side : {Side::Row, Side::Column}) {
      McTally t;
      t.method = m.method;
      t.mode = m.mode;
      t.side = side;
      report.tallies.push_back(t);
    }
  }
  for (const auto& est : estimates) {
    for (std::size_t j = 0; j < est.size(); ++j) {
      const std::size_t truth = report.tallies[j].side == Side::Row ? cfg.dgp.r : cfg.dgp.c;
      McTally& t = report.tallies[j];
      if (est[j] == truth)
        ++t.exact;
      else if (est[j] < truth)
        ++t.under;
      else
        ++t.over;
    }
  }
  return report;
}

struct Loadings {
  Matrix row;     // p x r, orthonormal columns
  Matrix column;  // q x c, orthonormal columns
};

/// Leading r eigenvectors of the row M matrix and leading c of the column M
/// matrix, with autocovariances pooled over the given contiguous segments.
inline Loadings fit_loadings(std::span<const MatrixSeries> segments, std::size_t r, std::size_t c,
                             const LagParams& params) {
  if (segments.empty()) throw ValidationError("fit_loadings: no data");
  params.validate();
  const std::size_t p = segments.front().p();
  const std::size_t q = segments.front().q();
  if (r < 1 || r > p) throw ConfigError("r: must lie in [1, p]");
  if (c < 1 || c > q) throw ConfigError("c: must lie in [1, q]");
  const AutocovStack rows = autocov_stack(segments, Side::Row, params.h0);
  const AutocovStack cols = autocov_stack(segments, Side::Column, params.h0);
  return {eig_sym(m_matrix(rows, params.h0)).leading(r),
          eig_sym(m_matrix(cols, params.h0)).leading(c)};
}

inline Loadings fit_loadings(const MatrixSeries& series, std::size_t r, std::size_t c,
                             const LagParams& params) {
  return fit_loadings(std::span<const MatrixSeries>(&series, 1), r, c, params);
}

enum class RssNorm { Frobenius, SquaredFrobenius };

/// Sizes of L contiguous folds; the first n mod L folds get one extra frame.
inline std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t folds) {
  if (folds < 2) throw ConfigError("folds: must be at least 2");
  if (n < 2 * folds) {
    throw InsufficientSampleError("cross-validation with " + std::to_string(folds) +
                                  " folds needs n >= " + std::to_string(2 * folds));
  }
  std::vector<std::size_t> sizes(folds, n / folds);
  for (std::size_t l = 0; l < n % folds; ++l) ++sizes[l];
  return sizes;
}

namespace detail {

// P A with P = B Bᵀ, or A itself when B spans the whole space.
inline Matrix project_left(const Matrix& basis, const Matrix& a) {
  if (basis.cols() == basis.rows()) return a;
  return matmul(basis, matmul_tn(basis, a));
}

}  // namespace detail

/// Out-of-sample residual size (1 / pq) sum_l sum_{t in fold l} ||Y_t - R R' Y_t C C'||
/// with loadings fitted on the remaining folds.
inline double cv_rss(const MatrixSeries& series, std::size_t r, std::size_t c, std::size_t folds,
                     const LagParams& params, RssNorm norm = RssNorm::Frobenius) {
  const auto sizes = fold_sizes(series.n(), folds);
  double total = 0.0;
  std::size_t start = 0;
  for (std::size_t l = 0; l < folds; ++l) {
    const std::size_t len = sizes[l];
    std::vector<MatrixSeries> training;
    if (start > 0) training.push_back(series.slice(0, start));
    if (start + len < series.n()) training.push_back(series.slice(start + len, series.n() - start - len));
    const Loadings fit = fit_loadings(training, r, c, params);

    for (std::size_t t = start; t < start + len; ++t) {
      const Matrix& y = series[t];
      const Matrix left = detail::project_left(fit.row, y);
      const Matrix fitted = detail::project_left(fit.column, left.transpose()).transpose();
      const double f = frobenius_norm(y - fitted);
      total += norm == RssNorm::Frobenius ? f : f * f;
    }
    start += len;
  }
  return total / static_cast<double>(series.p() * series.q());
}

struct CvEntry {
  std::size_t r = 0;
  std::size_t c = 0;
  double rss = 0.0;
};

struct CvReport {
  std::size_t folds = 0;
  std::vector<CvEntry> entries;
};

inline CvReport cv_report(const MatrixSeries& series,
                          const std::vector<std::pair<std::size_t, std::size_t>>& candidates,
                          std::size_t folds, const LagParams& params,
                          RssNorm norm = RssNorm::Frobenius) {
  if (candidates.empty()) throw ConfigError("candidates: at least one (r, c) pair is required");
  CvReport out;
  out.folds = folds;
  for (const auto& [r, c] : candidates) out.entries.push_back({r, c, cv_rss(series, r, c, folds, params, norm)});
  return out;
}

}  // namespace mvfactor
