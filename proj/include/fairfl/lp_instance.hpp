#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fairfl/client_stats.hpp"
#include "fairfl/fairness.hpp"

namespace fairfl {

// Server-side aggregation of the transmitted client statistics. Class and
// client indices are 0-based here.
struct AggregatedParams {
  int num_classes = 0;
  int num_clients = 0;

  std::vector<double> client_mass;  // p_c = n_c / sum(n)
  std::vector<double> p_table;      // p(y,a,c)   = Pr(Y=y, A=a, C=c)
  std::vector<double> alpha_table;  // alpha(y,a) = Pr(Y=y, A=a)
  std::vector<double> tp1_table;    // tp1(y,a,c) = TP of the base predictor
  std::vector<char> vacuous_table;  // base(y,a|c) == 0: tp1 is a placeholder 1

  // Statistical-parity tables
  std::vector<double> u_yj_table;   // u(y,j,a,c) = Pr(Y=y, Y1=j, A=a, C=c)
  std::vector<double> u_j_table;    // u(j,a,c)   = Pr(Y1=j, A=a, C=c)
  std::vector<double> u_ac_table;   // u(a,c)     = Pr(A=a, C=c)
  std::array<double, 2> u_a{0.0, 0.0};

  double p(int y, int a, int c) const { return p_table[idx_yac(y, a, c)]; }
  double alpha(int y, int a) const { return alpha_table[static_cast<size_t>(y) * 2 + a]; }
  double tp1(int y, int a, int c) const { return tp1_table[idx_yac(y, a, c)]; }
  bool vacuous(int y, int a, int c) const { return vacuous_table[idx_yac(y, a, c)] != 0; }
  double u_yj(int y, int j, int a, int c) const {
    return u_yj_table[((static_cast<size_t>(y) * num_classes + j) * 2 + a) *
                          static_cast<size_t>(num_clients) + c];
  }
  double u_j(int j, int a, int c) const {
    return u_j_table[(static_cast<size_t>(j) * 2 + a) * static_cast<size_t>(num_clients) + c];
  }
  double u_ac(int a, int c) const {
    return u_ac_table[static_cast<size_t>(a) * num_clients + c];
  }

  // TP block for one (a, c), length N.
  std::vector<double> tp1_block(int a, int c) const;

  size_t idx_yac(int y, int a, int c) const {
    return (static_cast<size_t>(y) * 2 + static_cast<size_t>(a)) *
               static_cast<size_t>(num_clients) + static_cast<size_t>(c);
  }
};

// One ClientStats per client 1..K, any order.
AggregatedParams aggregate(const std::vector<ClientStats>& stats);

enum class RegionForm { HalfSpace, Barycentric };

// Dense LP, always stated as a minimization over x in [0,1]^(num_vars+num_aux)
// with three row families:
//   fairness rows:   -bound <= row . x <= bound
//   one-sided rows:   row . x <= rhs
//   equality rows:    row . x == rhs
// For EO/EOp x is the z vector ordered [z_{01}, z_{11}, ..., z_{0K}, z_{1K}]
// (classes fastest); in barycentric form per-cell coefficients f are appended
// after z. For SP x is ordered (c, a, j, y) with y fastest.
struct LpInstance {
  Metric metric = Metric::EqualizedOdds;
  RegionForm form = RegionForm::HalfSpace;
  int num_classes = 0;
  int num_clients = 0;
  size_t num_vars = 0;  // primary variables
  size_t num_aux = 0;   // barycentric coefficients, if any

  std::vector<double> objective;

  std::vector<std::vector<double>> fair_rows;
  std::vector<double> fair_bounds;
  std::vector<std::string> fair_names;

  std::vector<std::vector<double>> le_rows;
  std::vector<double> le_rhs;
  std::vector<std::string> le_names;

  std::vector<std::vector<double>> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<std::string> eq_names;

  std::vector<std::string> var_names;
  std::vector<std::string> dropped;  // names of vacuous constraints left out

  size_t total_vars() const { return num_vars + num_aux; }

  size_t eo_var(int a, int c, int y) const {
    return (static_cast<size_t>(c) * 2 + static_cast<size_t>(a)) *
               static_cast<size_t>(num_classes) + static_cast<size_t>(y);
  }
  size_t bary_var(int a, int c, int i) const {
    return num_vars + (static_cast<size_t>(c) * 2 + static_cast<size_t>(a)) *
                          static_cast<size_t>(num_classes + 1) +
           static_cast<size_t>(i);
  }
  size_t sp_var(int a, int c, int j, int y) const {
    return ((static_cast<size_t>(c) * 2 + static_cast<size_t>(a)) *
                static_cast<size_t>(num_classes) + static_cast<size_t>(j)) *
               static_cast<size_t>(num_classes) + static_cast<size_t>(y);
  }
};

struct LpSolution {
  enum class Status { Optimal, Infeasible, NumericalFailure };
  Status status = Status::NumericalFailure;
  std::vector<double> x;
  double objective_value = std::nan("");
  double accuracy_estimate = std::nan("");  // -objective_value
  long iterations = 0;
  // Infeasibility: row multipliers y >= 0 with y'A >= 0 (componentwise over
  // x >= 0 columns) and y'b < 0 over the internal <= form, plus a summary.
  std::string certificate;
  std::vector<double> farkas;
  double max_violation = 0.0;  // re-checked against the instance rows
};

// Human-readable LP-format dump for debugging against external solvers.
std::string lp_text_dump(const LpInstance& inst);

}  // namespace fairfl
