#pragma once

#include "fairfl/lp_instance.hpp"

namespace fairfl {

struct SolverConfig {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  long max_iterations = 0;   // 0 = scale with problem size
  bool blands_rule = true;   // anti-cycling; Dantzig pricing when off

  bool operator==(const SolverConfig&) const = default;
};

// Dense two-phase primal simplex over the instance's rows plus explicit
// 0 <= x <= 1 boxes. Deterministic given (instance, config). Optimal
// solutions are re-checked row by row against the instance before being
// reported as such; infeasible instances come back with a Farkas-style
// multiplier vector over the internal <=-row system.
LpSolution solve(const LpInstance& inst, const SolverConfig& cfg = {});

// Dual multipliers of the internal <=-form at the optimum (one per internal
// row), for gap checks. Empty unless the last call produced them.
struct SolveDetail {
  std::vector<double> duals;          // lambda >= 0 per internal row
  std::vector<double> internal_rhs;   // b of the internal <= system
  double dual_objective = 0.0;        // -lambda . b
};
LpSolution solve_with_detail(const LpInstance& inst, const SolverConfig& cfg,
                             SolveDetail* detail);

}  // namespace fairfl
