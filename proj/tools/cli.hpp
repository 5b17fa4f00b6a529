#pragma once

// Command-line front end: simulate, estimate, montecarlo, cv, curves.
// run_cli is kept separate from main so tests can drive it with captured
// streams. Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
// Every error is a single line "error: <kind>: <message>" on the error stream.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvfactor/mvfactor.hpp"

namespace mvfactor::cli {

struct Options {
  std::string input, output, config, candidates;
  std::optional<std::size_t> p, q, n, r, c, m, i_max, h0, K, reps, folds;
  std::optional<double> a, delta, omega, noise_scale;
  std::optional<std::string> noise_case, loadings;
  std::optional<std::uint64_t> seed;
  std::string mode = "two-step";
  unsigned threads = 0;
  bool squared = false;
  bool no_demean = false;
};

inline void add_dgp_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--p", o.p, "Rows of each observation");
  cmd->add_option("--q", o.q, "Columns of each observation");
  cmd->add_option("--n", o.n, "Series length");
  cmd->add_option("--r", o.r, "Number of row factors");
  cmd->add_option("--c", o.c, "Number of column factors");
  cmd->add_option("--a", o.a, "AR(1) coefficient magnitude");
  cmd->add_option("--delta", o.delta, "Row factor strength exponent");
  cmd->add_option("--omega", o.omega, "Column factor strength exponent");
  cmd->add_option("--noise-case", o.noise_case, "identity or equicorrelated");
  cmd->add_option("--noise-scale", o.noise_scale, "Noise multiplier, 0 for noiseless");
  cmd->add_option("--loadings", o.loadings, "scaled-orthonormal or scaled-uniform");
  cmd->add_option("--seed", o.seed, "Random seed");
}

inline void add_lag_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--h0", o.h0, "Lags summed into the M matrices (default 2)");
  cmd->add_option("--K", o.K, "Lags scanned by the whiteness statistics (default 3)");
  cmd->add_option("--i-max", o.i_max, "Upper bound of the ratio search (default dim/2)");
}

inline void apply_dgp_overrides(DgpConfig& d, const Options& o) {
  if (o.p) d.p = *o.p;
  if (o.q) d.q = *o.q;
  if (o.n) d.n = *o.n;
  if (o.r) d.r = *o.r;
  if (o.c) d.c = *o.c;
  if (o.a) d.a = *o.a;
  if (o.delta) d.delta = *o.delta;
  if (o.omega) d.omega = *o.omega;
  if (o.noise_case) d.noise_case = parse_noise_case(*o.noise_case);
  if (o.noise_scale) d.noise_scale = *o.noise_scale;
  if (o.loadings) d.loadings = parse_loading_scheme(*o.loadings);
  if (o.seed) d.seed = *o.seed;
}

inline void apply_lag_overrides(LagParams& lp, const Options& o) {
  if (o.h0) lp.h0 = *o.h0;
  if (o.K) lp.K = *o.K;
  if (o.i_max) lp.i_max = *o.i_max;
}

inline MatrixSeries read_input(const Options& o) {
  if (!o.p || !o.q) throw ConfigError("--p and --q are required to read a series");
  return io::read_series_csv(o.input, *o.p, *o.q, {.demean = !o.no_demean});
}

inline void write_curves(const FactorEstimates& fe, const std::string& dir, std::ostream& out) {
  std::filesystem::create_directories(dir);
  for (Side side : {Side::Row, Side::Column}) {
    const auto path = (std::filesystem::path(dir) / io::curves_file_name(side, fe.mode)).string();
    io::write_curves_csv(path, io::make_curve_table(fe.side(side)));
    out << "wrote " << path << "\n";
  }
}

inline std::vector<const FactorEstimates*> selected(const EstimationReport& rep) {
  std::vector<const FactorEstimates*> out;
  if (rep.one_step) out.push_back(&*rep.one_step);
  if (rep.two_step) out.push_back(&*rep.two_step);
  return out;
}

inline EstimationReport run_estimation(const MatrixSeries& y, const Options& o) {
  LagParams lp;
  apply_lag_overrides(lp, o);
  const bool both = o.mode == "both";
  const Mode mode = both ? Mode::TwoStep : parse_mode(o.mode);
  return estimate(y, lp, o.m, both || mode == Mode::OneStep, both || mode == Mode::TwoStep);
}

inline void print_estimates(const EstimationReport& rep, std::ostream& out) {
  out << std::left << std::setw(10) << "mode" << std::setw(8) << "method" << std::setw(7)
      << "r_hat" << "c_hat\n";
  for (const FactorEstimates* fe : selected(rep)) {
    for (Method m : {Method::ER, Method::MR, Method::SR}) {
      out << std::setw(10) << to_string(fe->mode) << std::setw(8) << to_string(m) << std::setw(7)
          << fe->row.result(m).estimate << fe->column.result(m).estimate << "\n";
    }
  }
}

inline void print_mc(const McReport& rep, std::ostream& out) {
  const auto& d = rep.cell.dgp;
  out << "cell p=" << d.p << " q=" << d.q << " n=" << d.n << " r=" << d.r << " c=" << d.c
      << " a=" << io::format_number(d.a) << " delta=" << io::format_number(d.delta)
      << " omega=" << io::format_number(d.omega) << " noise=" << to_string(d.noise_case)
      << " reps=" << rep.cell.replications << "\n";
  for (const auto& t : rep.tallies)
    out << "  " << std::left << std::setw(8) << t.label() << io::table_cell(t) << "\n";
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Number-of-factors estimation for matrix-variate time series"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic series CSV");
  add_dgp_flags(sim, o);
  sim->add_option("--output", o.output, "Output CSV path")->required();

  auto* est = app.add_subcommand("estimate", "Estimate (r, c) and write ratio curves");
  auto* crv = app.add_subcommand("curves", "Write whiteness and ratio curves for plotting");
  for (auto* cmd : {est, crv}) {
    cmd->add_option("--input", o.input, "Series CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--p", o.p, "Rows of each observation")->required();
    cmd->add_option("--q", o.q, "Columns of each observation")->required();
    add_lag_flags(cmd, o);
    cmd->add_option("--m", o.m, "Projection width for two-step estimation (default 1)");
    cmd->add_option("--mode", o.mode, "one-step, two-step or both")
        ->check(CLI::IsMember({"one-step", "two-step", "both"}));
    cmd->add_flag("--no-demean", o.no_demean, "Keep the per-entry temporal mean");
  }
  est->add_option("--output", o.output, "Directory for curve CSVs");
  crv->add_option("--output", o.output, "Directory for curve CSVs")->required();

  auto* mc = app.add_subcommand("montecarlo", "Run Monte Carlo cells and write frequencies");
  mc->add_option("--config", o.config, "JSON cell or grid")->check(CLI::ExistingFile);
  add_dgp_flags(mc, o);
  add_lag_flags(mc, o);
  mc->add_option("--m", o.m, "Projection width for two-step estimation (default 1)");
  mc->add_option("--reps", o.reps, "Replications per cell (default 200)");
  mc->add_option("--threads", o.threads, "Worker threads, 0 for all cores");
  mc->add_option("--output", o.output, "Frequency table CSV");

  auto* cv = app.add_subcommand("cv", "Cross-validated residual size per candidate (r, c)");
  cv->add_option("--input", o.input, "Series CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--p", o.p, "Rows of each observation")->required();
  cv->add_option("--q", o.q, "Columns of each observation")->required();
  cv->add_option("--candidates", o.candidates, "Candidate list r:c,r:c,...")->required();
  cv->add_option("--folds", o.folds, "Number of contiguous folds (default 5)");
  add_lag_flags(cv, o);
  cv->add_flag("--squared", o.squared, "Use squared Frobenius norms");
  cv->add_flag("--no-demean", o.no_demean, "Keep the per-entry temporal mean");
  cv->add_option("--output", o.output, "CV CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*sim) {
      DgpConfig d;
      apply_dgp_overrides(d, o);
      const Simulation s = simulate(d);
      io::write_series_csv(o.output, s.series);
      out << "wrote " << o.output << " (n=" << d.n << ", p=" << d.p << ", q=" << d.q << ")\n";
    } else if (*est || *crv) {
      const MatrixSeries y = read_input(o);
      const EstimationReport rep = run_estimation(y, o);
      if (*est) print_estimates(rep, out);
      if (!o.output.empty())
        for (const FactorEstimates* fe : selected(rep)) write_curves(*fe, o.output, out);
    } else if (*mc) {
      std::vector<McCellConfig> cells =
          o.config.empty() ? std::vector<McCellConfig>{McCellConfig{}} : config::load_cells(o.config);
      std::vector<McReport> reports;
      for (auto& cell : cells) {
        apply_dgp_overrides(cell.dgp, o);
        apply_lag_overrides(cell.params, o);
        if (o.m) cell.m = o.m;
        if (o.reps) cell.replications = *o.reps;
        reports.push_back(run_monte_carlo(cell, o.threads));
        print_mc(reports.back(), out);
      }
      if (!o.output.empty()) {
        io::write_mc_csv(o.output, reports);
        out << "wrote " << o.output << "\n";
      }
    } else if (*cv) {
      const MatrixSeries y = read_input(o);
      LagParams lp;
      apply_lag_overrides(lp, o);
      const CvReport rep = cv_report(y, io::parse_candidates(o.candidates), o.folds.value_or(5), lp,
                                     o.squared ? RssNorm::SquaredFrobenius : RssNorm::Frobenius);
      for (const auto& e : rep.entries)
        out << "(" << e.r << "," << e.c << ") rss=" << io::format_number(e.rss) << "\n";
      if (!o.output.empty()) {
        io::write_cv_csv(o.output, rep);
        out << "wrote " << o.output << "\n";
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: io: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mvfactor::cli
