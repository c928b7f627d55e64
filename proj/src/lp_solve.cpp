#include "fairfl/lp_solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fairfl/error.hpp"

namespace fairfl {

namespace {

constexpr double kPivotTol = 1e-10;

// Internal <= system: rows . x <= rhs, x >= 0. Fairness rows are doubled,
// equalities are paired, and the unit upper bounds become explicit rows.
struct StandardForm {
  size_t n = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::vector<std::string> names;
};

StandardForm to_standard(const LpInstance& inst) {
  StandardForm sf;
  sf.n = inst.total_vars();
  auto push = [&](std::vector<double> row, double b, std::string name) {
    sf.rows.push_back(std::move(row));
    sf.rhs.push_back(b);
    sf.names.push_back(std::move(name));
  };
  for (size_t r = 0; r < inst.fair_rows.size(); ++r) {
    push(inst.fair_rows[r], inst.fair_bounds[r], inst.fair_names[r] + "+");
    std::vector<double> neg(inst.fair_rows[r]);
    for (double& v : neg) v = -v;
    push(std::move(neg), inst.fair_bounds[r], inst.fair_names[r] + "-");
  }
  for (size_t r = 0; r < inst.le_rows.size(); ++r)
    push(inst.le_rows[r], inst.le_rhs[r], inst.le_names[r]);
  for (size_t r = 0; r < inst.eq_rows.size(); ++r) {
    push(inst.eq_rows[r], inst.eq_rhs[r], inst.eq_names[r] + "+");
    std::vector<double> neg(inst.eq_rows[r]);
    for (double& v : neg) v = -v;
    push(std::move(neg), -inst.eq_rhs[r], inst.eq_names[r] + "-");
  }
  for (size_t j = 0; j < sf.n; ++j) {
    std::vector<double> row(sf.n, 0.0);
    row[j] = 1.0;
    push(std::move(row), 1.0, "ub_x" + std::to_string(j));
  }
  return sf;
}

// Full-tableau primal simplex. Slack column for original row i is n + i; the
// slack columns stay addressable even if a redundant row is deleted after
// phase 1, so reduced costs over them remain per-original-row quantities.
class Simplex {
 public:
  Simplex(const StandardForm& sf, const SolverConfig& cfg)
      : n_(sf.n), m0_(sf.rows.size()), m_(sf.rows.size()), cfg_(cfg) {
    size_t na = 0;
    for (double b : sf.rhs)
      if (b < 0.0) ++na;
    ncols_ = n_ + m0_ + na;
    tab_.assign(m_, std::vector<double>(ncols_ + 1, 0.0));
    basis_.resize(m_);
    is_artificial_.assign(ncols_, false);
    size_t next_art = n_ + m0_;
    for (size_t i = 0; i < m_; ++i) {
      const double s = sf.rhs[i] < 0.0 ? -1.0 : 1.0;
      for (size_t j = 0; j < n_; ++j) tab_[i][j] = s * sf.rows[i][j];
      tab_[i][n_ + i] = s;
      tab_[i][ncols_] = s * sf.rhs[i];
      if (s < 0.0) {
        tab_[i][next_art] = 1.0;
        is_artificial_[next_art] = true;
        basis_[i] = next_art++;
      } else {
        basis_[i] = n_ + i;
      }
    }
  }

  // Phase 1: minimize the artificial sum. Returns residual infeasibility;
  // when it is positive, `slack_costs` is the Farkas multiplier vector u with
  // u'A >= 0 and u'b = -residual < 0 over the original <= system.
  double phase1(std::vector<double>& slack_costs, bool* hit_cap) {
    std::vector<double> z(ncols_ + 1, 0.0);
    for (size_t j = 0; j < ncols_; ++j)
      if (is_artificial_[j]) z[j] = 1.0;
    price_out(z);
    const bool ok = iterate(z);
    if (hit_cap) *hit_cap = !ok;
    slack_costs.assign(m0_, 0.0);
    for (size_t ri = 0; ri < m0_; ++ri) slack_costs[ri] = z[n_ + ri];
    double infeas = 0.0;
    for (size_t i = 0; i < m_; ++i)
      if (is_artificial_[basis_[i]]) infeas += std::max(0.0, tab_[i][ncols_]);
    if (ok && infeas <= cfg_.feas_tol) drive_out_artificials();
    return infeas;
  }

  // Phase 2 over the structural objective. `duals` receives lambda >= 0 per
  // original row with c + A'lambda >= 0 at optimality.
  bool phase2(const std::vector<double>& c, std::vector<double>& duals) {
    std::vector<double> z(ncols_ + 1, 0.0);
    for (size_t j = 0; j < n_; ++j) z[j] = c[j];
    price_out(z);
    const bool ok = iterate(z);
    duals.assign(m0_, 0.0);
    for (size_t ri = 0; ri < m0_; ++ri) duals[ri] = z[n_ + ri];
    return ok;
  }

  std::vector<double> extract_x() const {
    std::vector<double> x(n_, 0.0);
    for (size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = tab_[i][ncols_];
    return x;
  }

  long iterations() const { return iterations_; }

 private:
  void price_out(std::vector<double>& z) {
    for (size_t i = 0; i < m_; ++i) {
      const double cb = z[basis_[i]];
      if (cb == 0.0) continue;
      for (size_t j = 0; j <= ncols_; ++j) z[j] -= cb * tab_[i][j];
    }
  }

  void pivot(std::vector<double>& z, size_t pr, size_t pc) {
    const double piv = tab_[pr][pc];
    for (size_t j = 0; j <= ncols_; ++j) tab_[pr][j] /= piv;
    tab_[pr][pc] = 1.0;
    for (size_t i = 0; i < m_; ++i) {
      if (i == pr) continue;
      const double f = tab_[i][pc];
      if (f == 0.0) continue;
      for (size_t j = 0; j <= ncols_; ++j) tab_[i][j] -= f * tab_[pr][j];
      tab_[i][pc] = 0.0;
    }
    const double f = z[pc];
    if (f != 0.0) {
      for (size_t j = 0; j <= ncols_; ++j) z[j] -= f * tab_[pr][j];
      z[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  bool iterate(std::vector<double>& z) {
    const long cap = cfg_.max_iterations > 0
                         ? cfg_.max_iterations
                         : static_cast<long>(200 * (m_ + ncols_) + 2000);
    while (true) {
      // entering column; artificials never (re-)enter
      size_t pc = SIZE_MAX;
      if (cfg_.blands_rule) {
        for (size_t j = 0; j < ncols_; ++j) {
          if (is_artificial_[j]) continue;
          if (z[j] < -cfg_.opt_tol) {
            pc = j;
            break;
          }
        }
      } else {
        double best = -cfg_.opt_tol;
        for (size_t j = 0; j < ncols_; ++j) {
          if (is_artificial_[j]) continue;
          if (z[j] < best) {
            best = z[j];
            pc = j;
          }
        }
      }
      if (pc == SIZE_MAX) return true;  // optimal
      // leaving row: minimum ratio, ties to the smallest basis index
      size_t pr = SIZE_MAX;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < m_; ++i) {
        const double a = tab_[i][pc];
        if (a <= kPivotTol) continue;
        const double ratio = std::max(0.0, tab_[i][ncols_]) / a;
        if (ratio < best_ratio - 1e-12 ||
            (ratio <= best_ratio + 1e-12 &&
             (pr == SIZE_MAX || basis_[i] < basis_[pr]))) {
          best_ratio = std::min(ratio, best_ratio);
          pr = i;
        }
      }
      if (pr == SIZE_MAX)
        throw NumericalError("simplex: unbounded direction in a boxed LP");
      pivot(z, pr, pc);
      if (++iterations_ > cap) return false;
    }
  }

  // Artificials still basic after phase 1 sit at zero. Pivot them out on any
  // usable column; a row with no usable column reads 0 = 0 (the artificial
  // column is still the unit vector of its own row) and is deleted.
  void drive_out_artificials() {
    for (size_t i = 0; i < m_;) {
      if (!is_artificial_[basis_[i]]) {
        ++i;
        continue;
      }
      size_t pc = SIZE_MAX;
      for (size_t j = 0; j < n_ + m0_; ++j) {
        if (std::fabs(tab_[i][j]) > 1e-7) {
          pc = j;
          break;
        }
      }
      if (pc != SIZE_MAX) {
        std::vector<double> dummy(ncols_ + 1, 0.0);
        pivot(dummy, i, pc);
        ++i;
      } else {
        tab_.erase(tab_.begin() + static_cast<long>(i));
        basis_.erase(basis_.begin() + static_cast<long>(i));
        --m_;
      }
    }
  }

  size_t n_ = 0, m0_ = 0, m_ = 0, ncols_ = 0;
  SolverConfig cfg_;
  std::vector<std::vector<double>> tab_;
  std::vector<size_t> basis_;
  std::vector<bool> is_artificial_;
  long iterations_ = 0;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Largest violation of the instance's own rows and boxes at x, checked
// independently of the solver state.
double check_violation(const LpInstance& inst, const std::vector<double>& x,
                       std::string* worst_name = nullptr) {
  double worst = 0.0;
  auto consider = [&](double v, const std::string& name) {
    if (v > worst) {
      worst = v;
      if (worst_name) *worst_name = name;
    }
  };
  for (size_t r = 0; r < inst.fair_rows.size(); ++r) {
    const double v = dot(inst.fair_rows[r], x);
    consider(v - inst.fair_bounds[r], inst.fair_names[r] + "+");
    consider(-inst.fair_bounds[r] - v, inst.fair_names[r] + "-");
  }
  for (size_t r = 0; r < inst.le_rows.size(); ++r)
    consider(dot(inst.le_rows[r], x) - inst.le_rhs[r], inst.le_names[r]);
  for (size_t r = 0; r < inst.eq_rows.size(); ++r)
    consider(std::fabs(dot(inst.eq_rows[r], x) - inst.eq_rhs[r]),
             inst.eq_names[r]);
  for (size_t j = 0; j < x.size(); ++j) {
    consider(-x[j], "lb_x" + std::to_string(j));
    consider(x[j] - 1.0, "ub_x" + std::to_string(j));
  }
  return worst;
}

}  // namespace

LpSolution solve_with_detail(const LpInstance& inst, const SolverConfig& cfg,
                             SolveDetail* detail) {
  if (!(cfg.feas_tol > 0.0) || !(cfg.opt_tol > 0.0))
    throw InputError("solver tolerances must be positive");
  if (inst.objective.size() != inst.total_vars())
    throw InputError("lp instance: objective length mismatch");

  const StandardForm sf = to_standard(inst);
  Simplex simplex(sf, cfg);

  LpSolution sol;
  std::vector<double> farkas;
  bool hit_cap = false;
  const double infeas = simplex.phase1(farkas, &hit_cap);
  if (hit_cap) {
    sol.status = LpSolution::Status::NumericalFailure;
    sol.x = simplex.extract_x();
    sol.iterations = simplex.iterations();
    sol.certificate = "iteration cap exceeded in phase 1; best iterate returned";
    return sol;
  }
  if (infeas > cfg.feas_tol) {
    sol.status = LpSolution::Status::Infeasible;
    sol.x = simplex.extract_x();
    sol.iterations = simplex.iterations();
    sol.farkas = farkas;
    std::ostringstream os;
    os << "infeasible: residual " << infeas
       << " after phase 1; dominant certificate rows:";
    std::vector<size_t> order(sf.rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return farkas[a] > farkas[b]; });
    for (size_t k = 0; k < std::min<size_t>(4, order.size()); ++k) {
      if (farkas[order[k]] <= cfg.feas_tol) break;
      os << " " << sf.names[order[k]] << "(" << farkas[order[k]] << ")";
    }
    sol.certificate = os.str();
    return sol;
  }

  std::vector<double> c(sf.n, 0.0);
  for (size_t j = 0; j < sf.n; ++j) c[j] = inst.objective[j];
  std::vector<double> duals;
  const bool optimal = simplex.phase2(c, duals);
  sol.x = simplex.extract_x();
  sol.iterations = simplex.iterations();
  sol.objective_value = dot(c, sol.x);
  sol.accuracy_estimate = -sol.objective_value;
  std::string worst_name;
  sol.max_violation = check_violation(inst, sol.x, &worst_name);
  if (!optimal) {
    sol.status = LpSolution::Status::NumericalFailure;
    sol.certificate = "iteration cap exceeded; best iterate returned";
    return sol;
  }
  if (sol.max_violation > cfg.feas_tol * 10) {
    sol.status = LpSolution::Status::NumericalFailure;
    sol.certificate =
        "solution failed the independent feasibility recheck at row " + worst_name;
    return sol;
  }
  sol.status = LpSolution::Status::Optimal;
  if (detail) {
    detail->duals = duals;
    detail->internal_rhs = sf.rhs;
    detail->dual_objective = -dot(duals, sf.rhs);
  }
  return sol;
}

LpSolution solve(const LpInstance& inst, const SolverConfig& cfg) {
  return solve_with_detail(inst, cfg, nullptr);
}

}  // namespace fairfl
