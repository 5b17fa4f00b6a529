#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mvfactor/dgp.hpp"
#include "mvfactor/factor_estimation.hpp"
#include "oracles.hpp"

using namespace mvfactor;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixSeries scalar_series(std::initializer_list<double> xs) {
  MatrixSeries s(1, 1);
  for (double x : xs) s.push_back(Matrix{{x}});
  return s;
}

AutocovStack stack_of(std::vector<Matrix> lags, Side side = Side::Row, std::size_t n = 100) {
  AutocovStack s;
  s.side = side;
  s.lags = std::move(lags);
  s.n = n;
  return s;
}

EigenDecomposition identity_basis(std::size_t d) {
  EigenDecomposition e;
  e.values.assign(d, 1.0);
  e.vectors = Matrix::identity(d);
  return e;
}

WhitenessCurves curves_of(std::vector<double> t, std::vector<double> g) {
  WhitenessCurves c;
  c.t_curve = std::move(t);
  c.g_curve = std::move(g);
  return c;
}

EigenDecomposition spectrum_of(std::vector<double> values) {
  EigenDecomposition e;
  e.vectors = Matrix::identity(values.size());
  e.values = std::move(values);
  return e;
}

Simulation noiseless(std::size_t r, std::size_t c, std::uint64_t seed, double a = 0.9,
                     std::size_t p = 20, std::size_t q = 20) {
  DgpConfig cfg;
  cfg.p = p;
  cfg.q = q;
  cfg.r = r;
  cfg.c = c;
  cfg.a = a;
  cfg.noise_scale = 0.0;
  cfg.seed = seed;
  return simulate(cfg);
}

void expect_all_methods(const FactorEstimates& fe, std::size_t r, std::size_t c) {
  for (Method m : {Method::ER, Method::MR, Method::SR}) {
    EXPECT_EQ(fe.row.result(m).estimate, r) << to_string(m) << " " << to_string(fe.mode);
    EXPECT_EQ(fe.column.result(m).estimate, c) << to_string(m) << " " << to_string(fe.mode);
  }
}

}  // namespace

TEST(Autocov, HandEvaluatedScalarSeries) {
  EXPECT_EQ(autocov(scalar_series({1, 2, 3}), 1, Side::Row)(0, 0), 4.0);
  EXPECT_EQ(autocov(scalar_series({1, -1, 1}), 1, Side::Row)(0, 0), -1.0);
  EXPECT_EQ(autocov(scalar_series({1, -1, 1}), 1, Side::Column)(0, 0), -1.0);
}

TEST(Autocov, LagTooLargeIsInsufficientSample) {
  EXPECT_THROW(autocov(scalar_series({1, 2, 3}), 2, Side::Row), InsufficientSampleError);
  EXPECT_THROW(autocov(scalar_series({1, 2}), 1, Side::Row), InsufficientSampleError);
}

TEST(Autocov, MatchesNaiveOracleBothSides) {
  std::mt19937_64 rng(21);
  const MatrixSeries y = oracle::random_series(6, 4, 30, rng);
  for (Side side : {Side::Row, Side::Column})
    for (std::size_t h = 1; h <= 4; ++h)
      EXPECT_LE(max_abs_diff(autocov(y, h, side), oracle::autocov(y, h, side)), 1e-12);
}

TEST(Autocov, PooledSegmentsUseOnlyWithinSegmentPairs) {
  std::mt19937_64 rng(22);
  const MatrixSeries y = oracle::random_series(4, 3, 25, rng);
  const std::vector<MatrixSeries> segs{y.slice(0, 8), y.slice(15, 10)};
  for (Side side : {Side::Row, Side::Column}) {
    const Matrix got = autocov(std::span<const MatrixSeries>(segs), 2, side);
    EXPECT_LE(max_abs_diff(got, oracle::pooled_autocov(segs, 2, side)), 1e-12);
  }
}

TEST(Autocov, WhiteNoiseColumnSideIsNearZero) {
  std::mt19937_64 rng(23);
  const MatrixSeries y = oracle::random_series(5, 5, 100000, rng);
  // Column-side products sum p = 5 entries; per-entry comparison.
  EXPECT_LE(max_abs(autocov(y, 1, Side::Column)) / 5.0, 0.02);
}

TEST(MMatrix, DiagonalArithmetic) {
  const auto s = stack_of({Matrix{{2, 0}, {0, 0}}, Matrix(2, 2)});
  EXPECT_EQ(m_matrix(s, 2), (Matrix{{4, 0}, {0, 0}}));
  const auto id = stack_of({Matrix::identity(3), Matrix::identity(3)});
  EXPECT_EQ(m_matrix(id, 2), Matrix::identity(3) * 2.0);
  EXPECT_THROW(m_matrix(id, 3), ConfigError);
}

TEST(MMatrix, NoiselessRankOneHasRankOne) {
  const auto sim = noiseless(1, 1, 31);
  for (Side side : {Side::Row, Side::Column}) {
    const auto e = eig_sym(m_matrix(autocov_stack(sim.series, side, 2), 2));
    std::size_t rank = 0;
    for (double v : e.values) rank += v > 1e-8 * e.values.front();
    EXPECT_EQ(rank, 1u);
  }
}

TEST(Project, IdentityAndFirstBasisVector) {
  std::mt19937_64 rng(32);
  const MatrixSeries y = oracle::random_series(3, 4, 5, rng);
  EXPECT_EQ(project_columns(y, Matrix::identity(4)), y);
  Matrix e1(4, 1);
  e1(0, 0) = 1.0;
  const MatrixSeries x = project_columns(y, e1);
  for (std::size_t t = 0; t < y.n(); ++t)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x[t](i, 0), y[t](i, 0));
}

TEST(Project, IsAContraction) {
  std::mt19937_64 rng(33);
  const MatrixSeries y = oracle::random_series(6, 7, 20, rng);
  const Matrix basis = oracle::random_orthogonal(7, rng).columns(0, 3);
  const MatrixSeries x = project_columns(y, basis);
  for (std::size_t t = 0; t < y.n(); ++t) EXPECT_LE(frobenius_norm(x[t]), frobenius_norm(y[t]));
  const MatrixSeries z = project_rows(y, oracle::random_orthogonal(6, rng).columns(0, 2));
  for (std::size_t t = 0; t < y.n(); ++t) EXPECT_LE(frobenius_norm(z[t]), frobenius_norm(y[t]));
}

TEST(Project, RejectsBadBases) {
  std::mt19937_64 rng(34);
  const MatrixSeries y = oracle::random_series(3, 4, 5, rng);
  EXPECT_THROW(project_columns(y, Matrix::identity(3)), ShapeError);
  EXPECT_THROW(project_columns(y, Matrix(4, 1, 1.0)), ValidationError);
  EXPECT_THROW(project_rows(y, Matrix::identity(4)), ShapeError);
}

TEST(Whiteness, HandEvaluatedTwoByTwo) {
  const auto stack = stack_of({Matrix{{3, 1}, {0.5, 0.2}}});
  const auto c = whiteness_curves(stack, identity_basis(2), 1, 100);
  EXPECT_DOUBLE_EQ(c.t_curve[0], 30.0);
  EXPECT_DOUBLE_EQ(c.t_curve[1], 2.0);
  EXPECT_DOUBLE_EQ(c.g_curve[0], 10.29);
  EXPECT_DOUBLE_EQ(c.g_curve[1], 0.04);
}

TEST(Whiteness, LastIndexIsTheCornerEntry) {
  const auto stack = stack_of({Matrix{{1, 2}, {3, -0.5}}, Matrix{{0, 0}, {0, 0.7}}}, Side::Row, 16);
  const auto c = whiteness_curves(stack, identity_basis(2), 2, 16);
  EXPECT_DOUBLE_EQ(c.t_curve[1], 4.0 * 0.7);
}

TEST(Whiteness, MatchesExplicitSubmatrixOracle) {
  std::mt19937_64 rng(41);
  const std::size_t d = 12;
  std::vector<Matrix> lags;
  for (int h = 0; h < 3; ++h) lags.push_back(oracle::random_matrix(d, d, rng));
  const auto stack = stack_of(lags, Side::Row, 150);
  const auto basis = eig_sym(m_matrix(stack, 2));
  const auto got = whiteness_curves(stack, basis, 3, 150);
  const auto want = oracle::explicit_whiteness(lags, basis.vectors, 3, 150);
  EXPECT_LE(oracle::max_abs_diff(got.t_curve, want.t), 1e-10);
  EXPECT_LE(oracle::max_abs_diff(got.g_curve, want.g), 1e-10);
}

TEST(Whiteness, CurvesAreNonIncreasingAndNonNegative) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 3 + trial % 15;
    const MatrixSeries y = oracle::random_series(d, 4, 40, rng);
    const auto stack = autocov_stack(y, Side::Row, 3);
    const auto c = whiteness_curves(stack, eig_sym(m_matrix(stack, 2)), 3, 40);
    for (std::size_t i = 0; i + 1 < d; ++i) {
      EXPECT_LE(c.t_curve[i + 1], c.t_curve[i] + 1e-12);
      EXPECT_LE(c.g_curve[i + 1], c.g_curve[i] + 1e-12);
    }
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_GE(c.t_curve[i], 0.0);
      EXPECT_GE(c.g_curve[i], 0.0);
    }
  }
}

TEST(Whiteness, SignFlipsOfBasisLeaveCurvesBitIdentical) {
  std::mt19937_64 rng(43);
  const MatrixSeries y = oracle::random_series(9, 5, 60, rng);
  const auto stack = autocov_stack(y, Side::Row, 3);
  const auto basis = eig_sym(m_matrix(stack, 2));
  auto flipped = basis;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t j = 0; j < 9; ++j)
    if (coin(rng))
      for (std::size_t i = 0; i < 9; ++i) flipped.vectors(i, j) = -flipped.vectors(i, j);
  const auto a = whiteness_curves(stack, basis, 3, 60);
  const auto b = whiteness_curves(stack, flipped, 3, 60);
  EXPECT_EQ(a.t_curve, b.t_curve);
  EXPECT_EQ(a.g_curve, b.g_curve);
}

TEST(Whiteness, RejectsMismatchedInputs) {
  const auto stack = stack_of({Matrix::identity(3)});
  EXPECT_THROW(whiteness_curves(stack, identity_basis(2), 1, 10), ShapeError);
  EXPECT_THROW(whiteness_curves(stack, identity_basis(3), 2, 10), ConfigError);
}

TEST(GuardedRatio, Conventions) {
  EXPECT_EQ(guarded_ratio(3.0, 0.0), kInf);
  EXPECT_EQ(guarded_ratio(0.0, 0.0), 1.0);
  EXPECT_EQ(guarded_ratio(6.0, 3.0), 2.0);
  const std::vector<double> tie{1.0, 3.0, 3.0};
  EXPECT_EQ(first_argmax(tie), 2u);
}

TEST(Mr, HandArithmetic) {
  const auto r = mr_estimator(curves_of({30, 2, 1.9, 1.8}, {4, 3, 2, 1}), 2);
  ASSERT_EQ(r.ratio_curve.size(), 2u);
  EXPECT_DOUBLE_EQ(r.ratio_curve[0], 15.0);
  EXPECT_NEAR(r.ratio_curve[1], 1.0526315789, 1e-9);
  EXPECT_EQ(r.estimate, 1u);
}

TEST(Mr, ZeroTailGuardAndTies) {
  EXPECT_EQ(mr_estimator(curves_of({5, 0, 0, 0}, {1, 1, 1, 1}), 2).estimate, 1u);
  const auto flat = mr_estimator(curves_of({2, 2, 2, 2}, {1, 1, 1, 1}), 2);
  EXPECT_EQ(flat.ratio_curve, (std::vector<double>{1, 1}));
  EXPECT_EQ(flat.estimate, 1u);
  EXPECT_THROW(mr_estimator(curves_of({}, {}), 1), ValidationError);
  EXPECT_THROW(mr_estimator(curves_of({1, 1}, {1, 1}), 2), ConfigError);
}

TEST(Sr, HandArithmetic) {
  const auto r = sr_estimator(curves_of({4, 3, 2, 1}, {10.29, 0.04, 0.03, 0.02}), 2);
  EXPECT_NEAR(r.ratio_curve[0], 1025.0, 1e-9);
  EXPECT_NEAR(r.ratio_curve[1], 1.0, 1e-9);
  EXPECT_EQ(r.estimate, 1u);
}

TEST(Sr, GeometricCurveTiesToFirstIndex) {
  std::vector<double> g;
  for (int i = 1; i <= 8; ++i) g.push_back(std::ldexp(1.0, -i));
  const auto r = sr_estimator(curves_of(g, g), 4);
  for (double x : r.ratio_curve) EXPECT_EQ(x, 2.0);
  EXPECT_EQ(r.estimate, 1u);
  EXPECT_THROW(sr_estimator(curves_of({1, 1, 1}, {1, 1, 1}), 2), ConfigError);
}

TEST(Er, HandArithmetic) {
  const auto r = er_estimator(spectrum_of({100, 50, 1, 0.9}), 3);
  EXPECT_DOUBLE_EQ(r.ratio_curve[0], 2.0);
  EXPECT_DOUBLE_EQ(r.ratio_curve[1], 50.0);
  EXPECT_NEAR(r.ratio_curve[2], 1.0 / 0.9, 1e-12);
  EXPECT_EQ(r.estimate, 2u);
  EXPECT_EQ(er_estimator(spectrum_of({4, 4, 4}), 1).estimate, 1u);
  EXPECT_EQ(er_estimator(spectrum_of({7, 0, -1e-15}), 2).estimate, 1u);
  EXPECT_EQ(er_estimator(spectrum_of({7, 0, -1e-15}), 2).ratio_curve[0], kInf);
  EXPECT_THROW(er_estimator(spectrum_of({}), 1), ValidationError);
}

TEST(LagParamsTest, DefaultsAndBounds) {
  const LagParams lp;
  EXPECT_EQ(lp.h0, 2u);
  EXPECT_EQ(lp.K, 3u);
  EXPECT_EQ(lp.resolve_i_max(20), 10u);
  EXPECT_EQ(lp.resolve_i_max(3), 1u);
  EXPECT_EQ(lp.resolve_i_max(4), 2u);
  EXPECT_THROW(lp.resolve_i_max(2), ConfigError);
  LagParams bad;
  bad.i_max = 19;
  EXPECT_THROW(bad.resolve_i_max(20), ConfigError);
  bad.h0 = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Sr, NoiselessRankTwoHasZeroTailAndInfiniteRatio) {
  const auto sim = noiseless(2, 2, 51, 0.9, 10, 10);
  const auto fe = estimate_one_step(sim.series, LagParams{});
  const auto& g = fe.row.curves.g_curve;
  for (std::size_t i = 2; i < g.size(); ++i) EXPECT_LE(g[i], 1e-12 * g.front());
  EXPECT_EQ(fe.row.sr.ratio_curve[1], kInf);
  EXPECT_EQ(fe.row.sr.estimate, 2u);
}

TEST(Estimate, NoiselessRecoveryAllSixVariants) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sim = noiseless(3, 3, seed);
    const auto rep = estimate(sim.series, LagParams{}, std::nullopt, true, true);
    expect_all_methods(*rep.one_step, 3, 3);
    expect_all_methods(*rep.two_step, 3, 3);
  }
  const auto uneven = noiseless(2, 4, 99, 0.5, 20, 16);
  expect_all_methods(estimate_one_step(uneven.series, LagParams{}), 2, 4);
  expect_all_methods(estimate_two_step(uneven.series, LagParams{}), 2, 4);
}

TEST(Estimate, SharedAndSeparateCallsAgree) {
  DgpConfig cfg;
  cfg.seed = 61;
  const auto y = simulate(cfg).series;
  const auto both = estimate(y, LagParams{}, std::nullopt, true, true);
  const auto one = estimate_one_step(y, LagParams{});
  const auto two = estimate_two_step(y, LagParams{});
  EXPECT_EQ(both.one_step->row.curves.g_curve, one.row.curves.g_curve);
  EXPECT_EQ(both.two_step->column.curves.t_curve, two.column.curves.t_curve);
}

TEST(Estimate, TransposeSwapsRowAndColumnResults) {
  DgpConfig cfg;
  cfg.p = 14;
  cfg.q = 10;
  cfg.r = 2;
  cfg.c = 3;
  cfg.seed = 62;
  const auto y = simulate(cfg).series;
  const auto a = estimate(y, LagParams{}, std::nullopt, true, true);
  const auto b = estimate(y.transposed(), LagParams{}, std::nullopt, true, true);
  for (auto mode : {Mode::OneStep, Mode::TwoStep}) {
    const auto& fa = mode == Mode::OneStep ? *a.one_step : *a.two_step;
    const auto& fb = mode == Mode::OneStep ? *b.one_step : *b.two_step;
    for (Method m : {Method::ER, Method::MR, Method::SR}) {
      EXPECT_EQ(fa.row.result(m).estimate, fb.column.result(m).estimate);
      EXPECT_EQ(fa.column.result(m).estimate, fb.row.result(m).estimate);
    }
    const double scale = fa.row.curves.g_curve.front();
    EXPECT_LE(oracle::max_abs_diff(fa.row.curves.g_curve, fb.column.curves.g_curve), 1e-10 * scale);
  }
}

TEST(Estimate, ScaleEquivariance) {
  DgpConfig cfg;
  cfg.seed = 63;
  const auto y = simulate(cfg).series;
  const double kappa = 3.0;
  std::vector<Matrix> scaled;
  for (const auto& f : y.frames()) scaled.push_back(f * kappa);
  const MatrixSeries ys(y.p(), y.q(), scaled);
  const auto a = estimate(y, LagParams{}, std::nullopt, true, true);
  const auto b = estimate(ys, LagParams{}, std::nullopt, true, true);
  for (auto* pair : {&a.one_step, &a.two_step}) {
    const bool one = pair == &a.one_step;
    const auto& fa = **pair;
    const auto& fb = one ? *b.one_step : *b.two_step;
    for (Side s : {Side::Row, Side::Column}) {
      const auto& ca = fa.side(s).curves;
      const auto& cb = fb.side(s).curves;
      for (std::size_t i = 0; i < ca.dim(); ++i) {
        EXPECT_NEAR(cb.t_curve[i], kappa * kappa * ca.t_curve[i], 1e-9 * cb.t_curve[0]);
        EXPECT_NEAR(cb.g_curve[i], std::pow(kappa, 4) * ca.g_curve[i], 1e-9 * cb.g_curve[0]);
      }
      for (Method m : {Method::ER, Method::MR, Method::SR})
        EXPECT_EQ(fa.side(s).result(m).estimate, fb.side(s).result(m).estimate);
    }
  }
}

TEST(TwoStep, FullWidthProjectionMatchesOneStepCurves) {
  DgpConfig cfg;
  cfg.p = 12;
  cfg.q = 12;
  cfg.seed = 64;
  const auto y = simulate(cfg).series;
  const auto rep = estimate(y, LagParams{}, 12, true, true);
  for (Side s : {Side::Row, Side::Column}) {
    const auto& g1 = rep.one_step->side(s).curves.g_curve;
    const auto& g2 = rep.two_step->side(s).curves.g_curve;
    EXPECT_LE(oracle::max_abs_diff(g1, g2), 1e-10 * g1.front());
  }
  // Also equal to the one-step curves of the explicitly rotated series.
  const auto c_full = rep.one_step->column.spectrum.vectors;
  const auto rotated = project_columns(y, c_full);
  const auto fr = estimate_one_step(rotated, LagParams{});
  EXPECT_LE(oracle::max_abs_diff(fr.row.curves.g_curve, rep.two_step->row.curves.g_curve),
            1e-10 * fr.row.curves.g_curve.front());
}

TEST(TwoStep, NoiselessMatchesOneStepOnProjectedSeries) {
  const auto sim = noiseless(3, 2, 65, 0.7);
  for (std::size_t m : {2u, 3u, 5u}) {
    const auto rep = estimate(sim.series, LagParams{}, m, true, true);
    const Matrix c_tilde = rep.one_step->column.spectrum.leading(m);
    const auto x = project_columns(sim.series, c_tilde);
    const auto direct = analyze_stack(autocov_stack(x, Side::Row, 3), LagParams{}, x.n(), Mode::OneStep);
    for (Method meth : {Method::ER, Method::MR, Method::SR}) {
      EXPECT_EQ(rep.two_step->row.result(meth).estimate, direct.result(meth).estimate);
      EXPECT_EQ(rep.two_step->row.result(meth).estimate, 3u);
      EXPECT_EQ(rep.two_step->column.result(meth).estimate, 2u);
    }
  }
}

TEST(Estimate, PureNoiseStillReportsAtLeastOne) {
  DgpConfig cfg;
  cfg.r = cfg.c = 0;
  cfg.seed = 66;
  const auto rep = estimate(simulate(cfg).series, LagParams{}, std::nullopt, true, true);
  for (const auto* fe : {&*rep.one_step, &*rep.two_step})
    for (Method m : {Method::ER, Method::MR, Method::SR}) {
      EXPECT_GE(fe->row.result(m).estimate, 1u);
      EXPECT_LE(fe->row.result(m).estimate, fe->row.i_max);
    }
}

TEST(Estimate, Errors) {
  DgpConfig cfg;
  cfg.n = 5;
  const auto y = simulate(cfg).series;
  EXPECT_THROW(estimate_one_step(y, LagParams{}), InsufficientSampleError);
  cfg.n = 50;
  const auto z = simulate(cfg).series;
  EXPECT_THROW(estimate_two_step(z, LagParams{}, 0), ConfigError);
  EXPECT_THROW(estimate_two_step(z, LagParams{}, 21), ConfigError);
}

TEST(Estimate, RatioCurvesHaveIMaxEntriesAndEstimateIsArgmax) {
  DgpConfig cfg;
  cfg.seed = 67;
  const auto rep = estimate(simulate(cfg).series, LagParams{}, std::nullopt, true, true);
  for (const auto* fe : {&*rep.one_step, &*rep.two_step})
    for (Side s : {Side::Row, Side::Column})
      for (Method m : {Method::ER, Method::MR, Method::SR}) {
        const auto& r = fe->side(s).result(m);
        ASSERT_EQ(r.ratio_curve.size(), 10u);
        const std::size_t k = r.estimate - 1;
        for (std::size_t i = 0; i < r.ratio_curve.size(); ++i) {
          if (i < k) EXPECT_LT(r.ratio_curve[i], r.ratio_curve[k]);
          else EXPECT_LE(r.ratio_curve[i], r.ratio_curve[k]);
        }
        EXPECT_EQ(r.side, s);
        EXPECT_EQ(r.mode, fe->mode);
        EXPECT_EQ(r.method, m);
      }
}
