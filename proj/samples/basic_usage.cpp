// Simulate a two-way factor series and estimate (r, c) with every method.

#include <iostream>

#include "mvfactor/mvfactor.hpp"

int main() {
  mvfactor::DgpConfig dgp;
  dgp.p = 20;
  dgp.q = 15;
  dgp.r = 2;
  dgp.c = 3;
  dgp.n = 300;
  dgp.a = 0.5;
  dgp.seed = 42;
  const mvfactor::Simulation sim = mvfactor::simulate(dgp);

  const mvfactor::LagParams params;  // h0 = 2, K = 3
  const mvfactor::EstimationReport rep =
      mvfactor::estimate(sim.series, params, std::nullopt, true, true);

  std::cout << "true (r, c) = (" << dgp.r << ", " << dgp.c << ")\n";
  for (const auto* fe : {&*rep.one_step, &*rep.two_step}) {
    for (auto m : {mvfactor::Method::ER, mvfactor::Method::MR, mvfactor::Method::SR}) {
      std::cout << mvfactor::to_string(fe->mode) << " " << mvfactor::to_string(m) << ": ("
                << fe->row.result(m).estimate << ", " << fe->column.result(m).estimate << ")\n";
    }
  }

  const auto cv = mvfactor::cv_report(sim.series, {{1, 1}, {2, 3}, {3, 3}}, 5, params);
  for (const auto& e : cv.entries)
    std::cout << "cv rss(" << e.r << ", " << e.c << ") = " << e.rss << "\n";
}
