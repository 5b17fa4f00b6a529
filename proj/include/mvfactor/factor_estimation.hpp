#pragma once

/// @file
/// Estimating the number of row and column factors of a matrix-variate series.
///
/// Per side (row or column) the pipeline is:
///   1. lagged sample autocovariances S(1..H) of the series,
///   2. M = sum_{h <= h0} S(h)ᵀ S(h) and its full eigendecomposition M = V L Vᵀ,
///   3. whiteness curves over nested trailing eigenvector blocks V_i = (v_i..v_dim):
///        T_i = max_{h <= K} sqrt(n) max|V_iᵀ S(h) V_i|,
///        G_i = sum_{h <= K} ||V_iᵀ S(h) V_i||_F^2,
///   4. ratio estimators
///        MR: argmax_i T_i / T_{i+1}
///        SR: argmax_i (G_i - G_{i+1}) / (G_{i+1} - G_{i+2})
///        ER: argmax_i l_i / l_{i+1}.
///
/// The two-step mode first projects the other side away (Y_t C~ for rows,
/// R~ᵀ Y_t for columns, with C~, R~ the leading eigenvectors of the one-step
/// M matrices) and then runs the same pipeline on the projected series.
/// Positive normalising constants are omitted everywhere: every estimator is
/// a ratio in which they cancel.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvfactor/error.hpp"
#include "mvfactor/linalg.hpp"
#include "mvfactor/series.hpp"

namespace mvfactor {

enum class Side { Row, Column };
enum class Method { ER, MR, SR };
enum class Mode { OneStep, TwoStep };

inline std::string to_string(Side s) { return s == Side::Row ? "row" : "column"; }

inline std::string to_string(Method m) {
  switch (m) {
    case Method::ER: return "ER";
    case Method::MR: return "MR";
    case Method::SR: return "SR";
  }
  return "?";
}

inline std::string to_string(Mode m) { return m == Mode::OneStep ? "one-step" : "two-step"; }

inline Method parse_method(const std::string& s) {
  if (s == "ER" || s == "er") return Method::ER;
  if (s == "MR" || s == "mr") return Method::MR;
  if (s == "SR" || s == "sr") return Method::SR;
  throw ConfigError("method: unknown value '" + s + "' (expected ER, MR or SR)");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "one-step" || s == "OneStep" || s == "one_step") return Mode::OneStep;
  if (s == "two-step" || s == "TwoStep" || s == "two_step") return Mode::TwoStep;
  throw ConfigError("mode: unknown value '" + s + "' (expected one-step or two-step)");
}

inline constexpr std::size_t kMinCurveDim = 3;

inline std::size_t default_i_max(std::size_t dim) {
  if (dim < kMinCurveDim) {
    throw ConfigError("dimension " + std::to_string(dim) + " is too small; need at least 3");
  }
  return std::max<std::size_t>(1, std::min(dim / 2, dim - 2));
}

struct LagParams {
  std::size_t h0 = 2;     // lags summed into the M matrices
  std::size_t K = 3;      // lags scanned by the whiteness statistics
  std::size_t i_max = 0;  // argmax search bound; 0 selects floor(dim / 2)

  std::size_t depth() const noexcept { return std::max(h0, K); }

  void validate() const {
    if (h0 < 1) throw ConfigError("h0: must be at least 1");
    if (K < 1) throw ConfigError("K: must be at least 1");
  }

  std::size_t resolve_i_max(std::size_t dim) const {
    if (i_max == 0) return default_i_max(dim);
    if (dim < kMinCurveDim || i_max > dim - 2) {
      throw ConfigError("i_max: " + std::to_string(i_max) + " exceeds dim - 2 for dim " +
                        std::to_string(dim));
    }
    return i_max;
  }
};

struct AutocovStack {
  Side side = Side::Row;
  std::vector<Matrix> lags;  // lags[h - 1] holds the lag-h autocovariance
  std::size_t n = 0;

  std::size_t depth() const noexcept { return lags.size(); }
  std::size_t dim() const noexcept { return lags.empty() ? 0 : lags.front().rows(); }
  const Matrix& at(std::size_t h) const { return lags.at(h - 1); }
};

struct WhitenessCurves {
  Side side = Side::Row;
  std::vector<double> t_curve;  // T_1..T_dim
  std::vector<double> g_curve;  // G_1..G_dim

  std::size_t dim() const noexcept { return t_curve.size(); }
};

struct FactorCountResult {
  Method method = Method::SR;
  Mode mode = Mode::OneStep;
  Side side = Side::Row;
  std::size_t estimate = 0;          // 1-based
  std::vector<double> ratio_curve;   // ratio_curve[i - 1] is the ratio at index i
};

namespace detail {

// out += sum_t a_t b_tᵀ over rows of contiguous frames (row side).
inline void accumulate_row_products(Matrix& out, const Matrix& a, const Matrix& b) {
  const std::size_t d = a.rows();
  const std::size_t w = a.cols();
  for (std::size_t i = 0; i < d; ++i) {
    auto ai = a.row(i);
    auto oi = out.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      auto bk = b.row(k);
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += ai[j] * bk[j];
      oi[k] += s;
    }
  }
}

// out += aᵀ b (column side).
inline void accumulate_column_products(Matrix& out, const Matrix& a, const Matrix& b) {
  const std::size_t d = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto bi = b.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double x = ai[j];
      if (x == 0.0) continue;
      auto oj = out.row(j);
      for (std::size_t l = 0; l < d; ++l) oj[l] += x * bi[l];
    }
  }
}

inline std::size_t side_dim(const MatrixSeries& s, Side side) {
  return side == Side::Row ? s.p() : s.q();
}

}  // namespace detail

/// Lag-h sample autocovariance pooled over several contiguous segments.
///
/// Only pairs (t, t + h) inside the same segment contribute, and the sum is
/// divided by the number of such pairs. With one segment this is
/// (1 / (n - h)) sum_{t=1}^{n-h} Y_t Y_{t+h}ᵀ (row) or Y_tᵀ Y_{t+h} (column).
inline Matrix autocov(std::span<const MatrixSeries> segments, std::size_t h, Side side) {
  if (segments.empty()) throw ValidationError("autocov: no data");
  if (h < 1) throw ValidationError("autocov: lag must be at least 1");
  const std::size_t dim = detail::side_dim(segments.front(), side);
  std::size_t pairs = 0;
  for (const auto& s : segments) {
    if (s.p() != segments.front().p() || s.q() != segments.front().q())
      throw ShapeError("autocov: segments have different frame shapes");
    if (s.n() > h) pairs += s.n() - h;
  }
  if (pairs < 2) {
    throw InsufficientSampleError("autocov: lag " + std::to_string(h) +
                                  " leaves fewer than 2 pairs");
  }
  Matrix out(dim, dim);
  for (const auto& s : segments) {
    for (std::size_t t = 0; t + h < s.n(); ++t) {
      if (side == Side::Row)
        detail::accumulate_row_products(out, s[t], s[t + h]);
      else
        detail::accumulate_column_products(out, s[t], s[t + h]);
    }
  }
  out *= 1.0 / static_cast<double>(pairs);
  return out;
}

inline Matrix autocov(const MatrixSeries& series, std::size_t h, Side side) {
  if (h >= 1 && h + 1 >= series.n()) {
    throw InsufficientSampleError("autocov: lag " + std::to_string(h) + " needs n >= " +
                                  std::to_string(h + 2) + ", have n = " +
                                  std::to_string(series.n()));
  }
  return autocov(std::span<const MatrixSeries>(&series, 1), h, side);
}

inline AutocovStack autocov_stack(std::span<const MatrixSeries> segments, Side side,
                                  std::size_t depth) {
  AutocovStack stack;
  stack.side = side;
  for (const auto& s : segments) stack.n += s.n();
  stack.lags.reserve(depth);
  for (std::size_t h = 1; h <= depth; ++h) stack.lags.push_back(autocov(segments, h, side));
  return stack;
}

inline AutocovStack autocov_stack(const MatrixSeries& series, Side side, std::size_t depth) {
  if (depth + 1 >= series.n()) {
    throw InsufficientSampleError("autocov_stack: depth " + std::to_string(depth) +
                                  " needs n >= " + std::to_string(depth + 2));
  }
  return autocov_stack(std::span<const MatrixSeries>(&series, 1), side, depth);
}

/// M = sum_{h=1}^{h0} S(h)ᵀ S(h).
inline Matrix m_matrix(const AutocovStack& stack, std::size_t h0) {
  if (h0 < 1) throw ConfigError("h0: must be at least 1");
  if (h0 > stack.depth()) {
    throw ConfigError("h0 = " + std::to_string(h0) + " exceeds autocovariance stack depth " +
                      std::to_string(stack.depth()));
  }
  Matrix m(stack.dim(), stack.dim());
  for (std::size_t h = 1; h <= h0; ++h) m += gram(stack.at(h));
  return m;
}

inline void require_orthonormal_columns(const Matrix& basis, const char* who) {
  const Matrix g = gram(basis);
  if (max_abs_diff(g, Matrix::identity(basis.cols())) > 1e-8) {
    throw ValidationError(std::string(who) + ": basis columns are not orthonormal");
  }
}

/// Y_t -> Y_t B for an orthonormal q x m basis B.
inline MatrixSeries project_columns(const MatrixSeries& series, const Matrix& basis) {
  if (basis.rows() != series.q()) {
    throw ShapeError("project_columns: basis is " + basis.shape_string() + " but frames have " +
                     std::to_string(series.q()) + " columns");
  }
  require_orthonormal_columns(basis, "project_columns");
  MatrixSeries out(series.p(), basis.cols());
  for (const auto& f : series.frames()) out.push_back(matmul(f, basis));
  return out;
}

/// Y_t -> Bᵀ Y_t for an orthonormal p x m basis B.
inline MatrixSeries project_rows(const MatrixSeries& series, const Matrix& basis) {
  if (basis.rows() != series.p()) {
    throw ShapeError("project_rows: basis is " + basis.shape_string() + " but frames have " +
                     std::to_string(series.p()) + " rows");
  }
  require_orthonormal_columns(basis, "project_rows");
  MatrixSeries out(basis.cols(), series.q());
  for (const auto& f : series.frames()) out.push_back(matmul_tn(basis, f));
  return out;
}

/// Max-type and sum-type whiteness statistics over every trailing eigenvector
/// block, computed from A(h) = Vᵀ S(h) V with suffix scans.
inline WhitenessCurves whiteness_curves(const AutocovStack& stack, const EigenDecomposition& basis,
                                        std::size_t K, std::size_t n) {
  const std::size_t d = stack.dim();
  if (basis.dim() != d || basis.vectors.rows() != d) {
    throw ShapeError("whiteness_curves: basis dimension " + std::to_string(basis.dim()) +
                     " does not match stack dimension " + std::to_string(d));
  }
  if (K < 1 || K > stack.depth()) {
    throw ConfigError("K = " + std::to_string(K) + " must lie in [1, " +
                      std::to_string(stack.depth()) + "]");
  }
  WhitenessCurves out;
  out.side = stack.side;
  out.t_curve.assign(d, 0.0);
  out.g_curve.assign(d, 0.0);
  const double root_n = std::sqrt(static_cast<double>(n));
  const Matrix& v = basis.vectors;

  for (std::size_t h = 1; h <= K; ++h) {
    const Matrix a = matmul_tn(v, matmul(stack.at(h), v));
    double running_max = 0.0;
    double running_sum = 0.0;
    for (std::size_t i = d; i-- > 0;) {
      // Entries entering the trailing block at index i: row i from column i on,
      // and column i below the diagonal.
      for (std::size_t j = i; j < d; ++j) {
        running_max = std::max(running_max, std::abs(a(i, j)));
        running_sum += a(i, j) * a(i, j);
      }
      for (std::size_t k = i + 1; k < d; ++k) {
        running_max = std::max(running_max, std::abs(a(k, i)));
        running_sum += a(k, i) * a(k, i);
      }
      out.t_curve[i] = std::max(out.t_curve[i], root_n * running_max);
      out.g_curve[i] += running_sum;
    }
  }
  return out;
}

/// Values at or below this fraction of a curve's leading value are treated as
/// exact zeros by the ratio estimators.
inline constexpr double kRatioZeroTolerance = 1e-12;

/// x / y with the conventions x / 0 = +inf for x > 0 and 0 / 0 = 1.
inline double guarded_ratio(double num, double den) {
  if (den > 0.0) return num / den;
  if (num > 0.0) return std::numeric_limits<double>::infinity();
  return 1.0;
}

/// 1-based index of the first maximum.
inline std::size_t first_argmax(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax of an empty ratio range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best + 1;
}

namespace detail {

inline std::vector<double> snap_small(std::vector<double> v, double scale) {
  const double cutoff = kRatioZeroTolerance * scale;
  for (double& x : v)
    if (x <= cutoff) x = 0.0;
  return v;
}

}  // namespace detail

inline FactorCountResult mr_estimator(const WhitenessCurves& curves, std::size_t i_max) {
  const auto& t = curves.t_curve;
  if (t.empty()) throw ValidationError("mr_estimator: empty curve");
  if (i_max < 1 || i_max + 1 > t.size()) {
    throw ConfigError("mr_estimator: i_max = " + std::to_string(i_max) + " outside [1, " +
                      std::to_string(t.size() - 1) + "]");
  }
  const auto snapped = detail::snap_small(t, t.front());
  FactorCountResult res;
  res.method = Method::MR;
  res.side = curves.side;
  res.ratio_curve.resize(i_max);
  for (std::size_t i = 0; i < i_max; ++i)
    res.ratio_curve[i] = guarded_ratio(snapped[i], snapped[i + 1]);
  res.estimate = first_argmax(res.ratio_curve);
  return res;
}

inline FactorCountResult sr_estimator(const WhitenessCurves& curves, std::size_t i_max) {
  const auto& g = curves.g_curve;
  if (g.empty()) throw ValidationError("sr_estimator: empty curve");
  if (i_max < 1 || i_max + 2 > g.size()) {
    throw ConfigError("sr_estimator: i_max = " + std::to_string(i_max) + " needs at least " +
                      std::to_string(i_max + 2) + " curve entries, have " +
                      std::to_string(g.size()));
  }
  std::vector<double> diffs(g.size() - 1);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) diffs[i] = std::max(0.0, g[i] - g[i + 1]);
  diffs = detail::snap_small(std::move(diffs), g.front());
  FactorCountResult res;
  res.method = Method::SR;
  res.side = curves.side;
  res.ratio_curve.resize(i_max);
  for (std::size_t i = 0; i < i_max; ++i)
    res.ratio_curve[i] = guarded_ratio(diffs[i], diffs[i + 1]);
  res.estimate = first_argmax(res.ratio_curve);
  return res;
}

inline FactorCountResult er_estimator(const EigenDecomposition& spectrum, std::size_t i_max,
                                      Side side = Side::Row) {
  if (spectrum.values.empty()) throw ValidationError("er_estimator: empty spectrum");
  if (i_max < 1 || i_max + 1 > spectrum.dim()) {
    throw ConfigError("er_estimator: i_max = " + std::to_string(i_max) + " outside [1, " +
                      std::to_string(spectrum.dim() - 1) + "]");
  }
  std::vector<double> lambda = spectrum.values;
  for (double& x : lambda) x = std::max(0.0, x);
  lambda = detail::snap_small(std::move(lambda), lambda.front());
  FactorCountResult res;
  res.method = Method::ER;
  res.side = side;
  res.ratio_curve.resize(i_max);
  for (std::size_t i = 0; i < i_max; ++i)
    res.ratio_curve[i] = guarded_ratio(lambda[i], lambda[i + 1]);
  res.estimate = first_argmax(res.ratio_curve);
  return res;
}

/// Everything computed for one side in one mode.
struct SideEstimates {
  Side side = Side::Row;
  Mode mode = Mode::OneStep;
  std::size_t i_max = 0;
  EigenDecomposition spectrum;  // of the side's M matrix
  WhitenessCurves curves;
  FactorCountResult er, mr, sr;

  const FactorCountResult& result(Method m) const {
    switch (m) {
      case Method::ER: return er;
      case Method::MR: return mr;
      case Method::SR: return sr;
    }
    return sr;
  }
};

struct FactorEstimates {
  Mode mode = Mode::OneStep;
  SideEstimates row;
  SideEstimates column;

  const SideEstimates& side(Side s) const { return s == Side::Row ? row : column; }
};

/// Runs M matrix, eigendecomposition, whiteness curves and all three estimators
/// on one autocovariance stack.
inline SideEstimates analyze_stack(const AutocovStack& stack, const LagParams& params,
                                   std::size_t n, Mode mode) {
  SideEstimates out;
  out.side = stack.side;
  out.mode = mode;
  out.i_max = params.resolve_i_max(stack.dim());
  out.spectrum = eig_sym(m_matrix(stack, params.h0));
  out.curves = whiteness_curves(stack, out.spectrum, params.K, n);
  out.er = er_estimator(out.spectrum, out.i_max, stack.side);
  out.mr = mr_estimator(out.curves, out.i_max);
  out.sr = sr_estimator(out.curves, out.i_max);
  for (auto* r : {&out.er, &out.mr, &out.sr}) r->mode = mode;
  return out;
}

inline constexpr std::size_t kDefaultProjectionWidth = 1;

/// Two-step projection widths: columns of C~ for the row side and of R~ for
/// the column side. Both default to kDefaultProjectionWidth; wider bases pull
/// more noise into the projected autocovariances.
struct ProjectionWidths {
  std::size_t row_side = kDefaultProjectionWidth;     // width of C~ (<= q)
  std::size_t column_side = kDefaultProjectionWidth;  // width of R~ (<= p)

  static ProjectionWidths resolve(std::size_t p, std::size_t q, std::optional<std::size_t> m) {
    const std::size_t width = m.value_or(kDefaultProjectionWidth);
    if (width < 1 || width > std::min(p, q)) {
      throw ConfigError("m: projection width " + std::to_string(width) + " outside [1, " +
                        std::to_string(std::min(p, q)) + "]");
    }
    return {width, width};
  }
};

struct EstimationReport {
  std::optional<FactorEstimates> one_step;
  std::optional<FactorEstimates> two_step;
};

inline void require_estimable(const MatrixSeries& series, const LagParams& params) {
  params.validate();
  if (series.n() <= params.depth() + 2) {
    throw InsufficientSampleError("need n > max(h0, K) + 2 = " +
                                  std::to_string(params.depth() + 2) + ", have n = " +
                                  std::to_string(series.n()));
  }
}

/// One- and/or two-step estimation sharing the one-step autocovariances.
inline EstimationReport estimate(const MatrixSeries& series, const LagParams& params,
                                 std::optional<std::size_t> m, bool one_step, bool two_step) {
  require_estimable(series, params);
  const std::size_t depth = params.depth();
  const std::size_t n = series.n();
  EstimationReport report;

  const AutocovStack row_stack = autocov_stack(series, Side::Row, depth);
  const AutocovStack col_stack = autocov_stack(series, Side::Column, depth);

  if (one_step) {
    FactorEstimates fe;
    fe.mode = Mode::OneStep;
    fe.row = analyze_stack(row_stack, params, n, Mode::OneStep);
    fe.column = analyze_stack(col_stack, params, n, Mode::OneStep);
    report.one_step = std::move(fe);
  }

  if (two_step) {
    const auto widths = ProjectionWidths::resolve(series.p(), series.q(), m);
    const EigenDecomposition row_spec = report.one_step
                                            ? report.one_step->row.spectrum
                                            : eig_sym(m_matrix(row_stack, params.h0));
    const EigenDecomposition col_spec = report.one_step
                                            ? report.one_step->column.spectrum
                                            : eig_sym(m_matrix(col_stack, params.h0));
    const Matrix c_tilde = col_spec.leading(widths.row_side);
    const Matrix r_tilde = row_spec.leading(widths.column_side);

    const MatrixSeries x = project_columns(series, c_tilde);
    const MatrixSeries z = project_rows(series, r_tilde);

    FactorEstimates fe;
    fe.mode = Mode::TwoStep;
    fe.row = analyze_stack(autocov_stack(x, Side::Row, depth), params, n, Mode::TwoStep);
    fe.column = analyze_stack(autocov_stack(z, Side::Column, depth), params, n, Mode::TwoStep);
    report.two_step = std::move(fe);
  }
  return report;
}

inline FactorEstimates estimate_one_step(const MatrixSeries& series, const LagParams& params) {
  return *estimate(series, params, std::nullopt, true, false).one_step;
}

inline FactorEstimates estimate_two_step(const MatrixSeries& series, const LagParams& params,
                                         std::optional<std::size_t> m = std::nullopt) {
  return *estimate(series, params, m, false, true).two_step;
}

}  // namespace mvfactor
