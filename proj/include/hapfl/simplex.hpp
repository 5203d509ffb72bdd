#pragma once

// Small dense LP solver, tableau simplex with lexicographic (value, index)
// tie-breaking to avoid cycling. Standard form:
//
//   maximize c.x   subject to   A x <= b,  x >= 0
//
// b may be negative (a pseudo phase-1 pivot chain restores feasibility).
// Row updates during a pivot are independent, which is the parallel kernel.

#include <vector>

#include "hapfl/exec.hpp"

namespace hapfl {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  std::vector<double> x;
};

LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<double>& c, Exec mode = Exec::Serial);

}  // namespace hapfl
