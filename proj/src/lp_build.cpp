#include "fairfl/lp_build.hpp"

#include <numeric>

#include "fairfl/error.hpp"

namespace fairfl {

namespace {

std::string cell_name(int a, int c) {
  return "a" + std::to_string(a) + "c" + std::to_string(c + 1);
}

void name_eo_vars(LpInstance& inst) {
  inst.var_names.assign(inst.total_vars(), {});
  for (int c = 0; c < inst.num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < inst.num_classes; ++y)
        inst.var_names[inst.eo_var(a, c, y)] =
            "z_" + cell_name(a, c) + "y" + std::to_string(y + 1);
  if (inst.form == RegionForm::Barycentric) {
    for (int c = 0; c < inst.num_clients; ++c)
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i <= inst.num_classes; ++i)
          inst.var_names[inst.bary_var(a, c, i)] =
              "f_" + cell_name(a, c) + "i" + std::to_string(i);
  }
}

// Objective block c_ac = [-p^1_ac ... -p^N_ac]; minimizing it maximizes
// accuracy.
void fill_eo_objective(const AggregatedParams& params, LpInstance& inst) {
  inst.objective.assign(inst.total_vars(), 0.0);
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < params.num_classes; ++y)
        inst.objective[inst.eo_var(a, c, y)] = -params.p(y, a, c);
}

// Global row for class y: +p^y_{0c}/alpha^y_0 on z^y_{0c} and
// -p^y_{1c}/alpha^y_1 on z^y_{1c}. With the symmetric bounds the overall sign
// is immaterial; group-0-minus-group-1 is the readable choice.
bool fill_global_row(const AggregatedParams& params, const LpInstance& inst,
                     int y, std::vector<double>& row) {
  row.assign(inst.total_vars(), 0.0);
  const double a0 = params.alpha(y, 0), a1 = params.alpha(y, 1);
  if (a0 <= 0.0 || a1 <= 0.0) return false;  // no mass for this class/group
  for (int c = 0; c < params.num_clients; ++c) {
    row[inst.eo_var(0, c, y)] = params.p(y, 0, c) / a0;
    row[inst.eo_var(1, c, y)] = -params.p(y, 1, c) / a1;
  }
  return true;
}

void add_region_constraints(const AggregatedParams& params, LpInstance& inst) {
  const int N = params.num_classes;
  if (inst.form == RegionForm::HalfSpace) {
    for (int c = 0; c < params.num_clients; ++c) {
      for (int a = 0; a < 2; ++a) {
        const std::vector<double> tp = params.tp1_block(a, c);
        const double tp_sum = std::accumulate(tp.begin(), tp.end(), 0.0);
        if (tp_sum <= 1.0 + 1e-9)
          throw DegenerateSimplexError(
              "sum of TP(Y1) for cell " + cell_name(a, c) + " is " +
              std::to_string(tp_sum) +
              " <= 1: half-space simplex is degenerate, rebuild with the "
              "barycentric region form");
        std::vector<std::vector<double>> rows;
        std::vector<double> rhs;
        region_half_spaces(tp, rows, rhs);
        for (size_t r = 0; r < rows.size(); ++r) {
          std::vector<double> full(inst.total_vars(), 0.0);
          for (int y = 0; y < N; ++y)
            full[inst.eo_var(a, c, y)] = rows[r][static_cast<size_t>(y)];
          inst.le_rows.push_back(std::move(full));
          inst.le_rhs.push_back(rhs[r]);
          inst.le_names.push_back("region_" + cell_name(a, c) + "_r" +
                                  std::to_string(r));
        }
      }
    }
  } else {
    // z_ac = f_0 tp_ac + sum_y f_y e_y, f in the probability simplex. The f
    // coefficients coincide with the mixing weights beta.
    for (int c = 0; c < params.num_clients; ++c) {
      for (int a = 0; a < 2; ++a) {
        const std::vector<double> tp = params.tp1_block(a, c);
        for (int y = 0; y < N; ++y) {
          std::vector<double> row(inst.total_vars(), 0.0);
          row[inst.eo_var(a, c, y)] = 1.0;
          row[inst.bary_var(a, c, 0)] = -tp[static_cast<size_t>(y)];
          row[inst.bary_var(a, c, y + 1)] = -1.0;
          inst.eq_rows.push_back(std::move(row));
          inst.eq_rhs.push_back(0.0);
          inst.eq_names.push_back("bary_" + cell_name(a, c) + "_y" +
                                  std::to_string(y + 1));
        }
        std::vector<double> row(inst.total_vars(), 0.0);
        for (int i = 0; i <= N; ++i) row[inst.bary_var(a, c, i)] = 1.0;
        inst.eq_rows.push_back(std::move(row));
        inst.eq_rhs.push_back(1.0);
        inst.eq_names.push_back("bary_" + cell_name(a, c) + "_sum");
      }
    }
  }
}

// Variables for cells with no observed mass carry no accuracy weight and no
// fairness rows; pin them to the placeholder TP so downstream LAE input stays
// consistent.
void pin_vacuous_vars(const AggregatedParams& params, LpInstance& inst) {
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < params.num_classes; ++y) {
        if (!params.vacuous(y, a, c)) continue;
        std::vector<double> row(inst.total_vars(), 0.0);
        row[inst.eo_var(a, c, y)] = 1.0;
        inst.eq_rows.push_back(std::move(row));
        inst.eq_rhs.push_back(params.tp1(y, a, c));
        inst.eq_names.push_back("pin_" + cell_name(a, c) + "_y" +
                                std::to_string(y + 1));
      }
}

LpInstance build_eo_like(const AggregatedParams& params,
                         const FairnessSpec& spec, RegionForm form,
                         bool class1_only) {
  if (static_cast<int>(spec.eps_local.size()) != params.num_clients)
    throw InputError("eps_local length does not match the client count");
  const int N = params.num_classes;
  const int K = params.num_clients;
  LpInstance inst;
  inst.metric = class1_only ? Metric::EqualOpportunity : Metric::EqualizedOdds;
  inst.form = form;
  inst.num_classes = N;
  inst.num_clients = K;
  inst.num_vars = static_cast<size_t>(2) * N * K;
  inst.num_aux =
      form == RegionForm::Barycentric ? static_cast<size_t>(2) * K * (N + 1) : 0;
  name_eo_vars(inst);
  fill_eo_objective(params, inst);

  const int y_hi = class1_only ? 1 : N;
  for (int y = 0; y < y_hi; ++y) {
    std::vector<double> row;
    const std::string name = "global_y" + std::to_string(y + 1);
    if (fill_global_row(params, inst, y, row)) {
      inst.fair_rows.push_back(std::move(row));
      inst.fair_bounds.push_back(spec.eps_global);
      inst.fair_names.push_back(name);
    } else {
      inst.dropped.push_back(name);
    }
  }
  for (int c = 0; c < K; ++c) {
    for (int y = 0; y < y_hi; ++y) {
      const std::string name = "local_c" + std::to_string(c + 1) + "_y" +
                               std::to_string(y + 1);
      if (params.vacuous(y, 0, c) || params.vacuous(y, 1, c)) {
        inst.dropped.push_back(name);
        continue;
      }
      std::vector<double> row(inst.total_vars(), 0.0);
      row[inst.eo_var(0, c, y)] = 1.0;
      row[inst.eo_var(1, c, y)] = -1.0;
      inst.fair_rows.push_back(std::move(row));
      inst.fair_bounds.push_back(spec.eps_local[static_cast<size_t>(c)]);
      inst.fair_names.push_back(name);
    }
  }
  add_region_constraints(params, inst);
  pin_vacuous_vars(params, inst);
  return inst;
}

}  // namespace

void region_half_spaces(const std::vector<double>& tp,
                        std::vector<std::vector<double>>& rows,
                        std::vector<double>& rhs) {
  const int N = static_cast<int>(tp.size());
  rows.assign(static_cast<size_t>(N) + 1, std::vector<double>(static_cast<size_t>(N), 0.0));
  rhs.assign(static_cast<size_t>(N) + 1, 0.0);
  for (int j = 0; j < N; ++j) rows[0][static_cast<size_t>(j)] = -1.0;
  rhs[0] = -1.0;
  const double tp_sum = std::accumulate(tp.begin(), tp.end(), 0.0);
  for (int y = 0; y < N; ++y) {
    for (int j = 0; j < N; ++j)
      rows[static_cast<size_t>(y) + 1][static_cast<size_t>(j)] =
          j == y ? 1.0 - (tp_sum - tp[static_cast<size_t>(y)])
                 : tp[static_cast<size_t>(y)];
    rhs[static_cast<size_t>(y) + 1] = tp[static_cast<size_t>(y)];
  }
}

LpInstance build_lp_eo(const AggregatedParams& params, const FairnessSpec& spec,
                       RegionForm form) {
  return build_eo_like(params, spec, form, /*class1_only=*/false);
}

LpInstance build_lp_eop(const AggregatedParams& params, const FairnessSpec& spec,
                        RegionForm form) {
  return build_eo_like(params, spec, form, /*class1_only=*/true);
}

LpInstance build_lp_sp(const AggregatedParams& params, const FairnessSpec& spec) {
  if (static_cast<int>(spec.eps_local.size()) != params.num_clients)
    throw InputError("eps_local length does not match the client count");
  const int N = params.num_classes;
  const int K = params.num_clients;
  LpInstance inst;
  inst.metric = Metric::StatisticalParity;
  inst.num_classes = N;
  inst.num_clients = K;
  inst.num_vars = static_cast<size_t>(2) * K * N * N;
  inst.objective.assign(inst.total_vars(), 0.0);
  inst.var_names.assign(inst.total_vars(), {});
  for (int c = 0; c < K; ++c)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < N; ++j)
        for (int y = 0; y < N; ++y) {
          const size_t v = inst.sp_var(a, c, j, y);
          inst.var_names[v] = "z_" + cell_name(a, c) + "y" +
                              std::to_string(y + 1) + "j" + std::to_string(j + 1);
          // stated as a minimization: negate the accuracy objective
          inst.objective[v] = -params.u_yj(y, j, a, c);
        }

  // Global rows: prediction-rate difference per class.
  for (int y = 0; y < N; ++y) {
    const std::string name = "global_y" + std::to_string(y + 1);
    if (params.u_a[0] <= 0.0 || params.u_a[1] <= 0.0) {
      inst.dropped.push_back(name);
      continue;
    }
    std::vector<double> row(inst.total_vars(), 0.0);
    for (int c = 0; c < K; ++c)
      for (int j = 0; j < N; ++j) {
        row[inst.sp_var(0, c, j, y)] = params.u_j(j, 0, c) / params.u_a[0];
        row[inst.sp_var(1, c, j, y)] = -params.u_j(j, 1, c) / params.u_a[1];
      }
    inst.fair_rows.push_back(std::move(row));
    inst.fair_bounds.push_back(spec.eps_global);
    inst.fair_names.push_back(name);
  }
  // Local rows per (class, client).
  for (int c = 0; c < K; ++c) {
    const double u0 = params.u_ac(0, c), u1 = params.u_ac(1, c);
    for (int y = 0; y < N; ++y) {
      const std::string name =
          "local_c" + std::to_string(c + 1) + "_y" + std::to_string(y + 1);
      if (u0 <= 0.0 || u1 <= 0.0) {
        inst.dropped.push_back(name);
        continue;
      }
      std::vector<double> row(inst.total_vars(), 0.0);
      for (int j = 0; j < N; ++j) {
        row[inst.sp_var(0, c, j, y)] = params.u_j(j, 0, c) / u0;
        row[inst.sp_var(1, c, j, y)] = -params.u_j(j, 1, c) / u1;
      }
      inst.fair_rows.push_back(std::move(row));
      inst.fair_bounds.push_back(spec.eps_local[static_cast<size_t>(c)]);
      inst.fair_names.push_back(name);
    }
  }
  // Column-stochastic equalities: sum_y z^{yj}_ac = 1.
  for (int c = 0; c < K; ++c)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < N; ++j) {
        std::vector<double> row(inst.total_vars(), 0.0);
        for (int y = 0; y < N; ++y) row[inst.sp_var(a, c, j, y)] = 1.0;
        inst.eq_rows.push_back(std::move(row));
        inst.eq_rhs.push_back(1.0);
        inst.eq_names.push_back("col_" + cell_name(a, c) + "_j" +
                                std::to_string(j + 1));
      }
  return inst;
}

}  // namespace fairfl
