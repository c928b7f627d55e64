#include "fairfl/lp_instance.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "fairfl/error.hpp"

namespace fairfl {

std::vector<double> AggregatedParams::tp1_block(int a, int c) const {
  std::vector<double> block(static_cast<size_t>(num_classes));
  for (int y = 0; y < num_classes; ++y) block[static_cast<size_t>(y)] = tp1(y, a, c);
  return block;
}

AggregatedParams aggregate(const std::vector<ClientStats>& stats) {
  if (stats.empty()) throw InputError("aggregate: no client statistics");
  const int K = static_cast<int>(stats.size());
  std::vector<const ClientStats*> by_client(static_cast<size_t>(K), nullptr);
  const int N = stats.front().num_classes;
  long long total = 0;
  for (const ClientStats& s : stats) {
    if (s.client < 1 || s.client > K)
      throw InputError("aggregate: client id " + std::to_string(s.client) +
                       " outside {1.." + std::to_string(K) + "}");
    if (by_client[static_cast<size_t>(s.client - 1)])
      throw InputError("aggregate: duplicate statistics for client " +
                       std::to_string(s.client));
    if (s.num_classes != N)
      throw InputError("aggregate: class counts disagree across clients");
    by_client[static_cast<size_t>(s.client - 1)] = &s;
    total += s.sample_count;
  }
  for (int c = 0; c < K; ++c)
    if (!by_client[static_cast<size_t>(c)])
      throw InputError("aggregate: missing statistics for client " +
                       std::to_string(c + 1));

  AggregatedParams out;
  out.num_classes = N;
  out.num_clients = K;
  out.client_mass.resize(static_cast<size_t>(K));
  out.p_table.assign(static_cast<size_t>(N) * 2 * K, 0.0);
  out.alpha_table.assign(static_cast<size_t>(N) * 2, 0.0);
  out.tp1_table.assign(static_cast<size_t>(N) * 2 * K, 0.0);
  out.vacuous_table.assign(static_cast<size_t>(N) * 2 * K, 0);
  out.u_yj_table.assign(static_cast<size_t>(N) * N * 2 * K, 0.0);
  out.u_j_table.assign(static_cast<size_t>(N) * 2 * K, 0.0);
  out.u_ac_table.assign(static_cast<size_t>(2) * K, 0.0);

  for (int c = 0; c < K; ++c) {
    const ClientStats& s = *by_client[static_cast<size_t>(c)];
    const double pc = static_cast<double>(s.sample_count) / static_cast<double>(total);
    out.client_mass[static_cast<size_t>(c)] = pc;
    for (int y = 0; y < N; ++y) {
      for (int a = 0; a < 2; ++a) {
        const size_t i = out.idx_yac(y, a, c);
        out.p_table[i] = s.base(y, a) * pc;
        out.alpha_table[static_cast<size_t>(y) * 2 + a] += out.p_table[i];
        if (s.base(y, a) > 0.0) {
          out.tp1_table[i] = s.joint_tp(y, a) / s.base(y, a);
        } else {
          // No mass in this subgroup cell: the TP ratio is undefined. Encode
          // 1 and mark vacuous so the builders drop the affected rows.
          out.tp1_table[i] = 1.0;
          out.vacuous_table[i] = 1;
        }
        for (int j = 0; j < N; ++j)
          out.u_yj_table[((static_cast<size_t>(y) * N + j) * 2 + a) *
                             static_cast<size_t>(K) + c] = s.sp_joint(y, j, a) * pc;
      }
    }
    for (int j = 0; j < N; ++j)
      for (int a = 0; a < 2; ++a)
        out.u_j_table[(static_cast<size_t>(j) * 2 + a) * static_cast<size_t>(K) + c] =
            s.sp_pred(j, a) * pc;
    for (int a = 0; a < 2; ++a) {
      out.u_ac_table[static_cast<size_t>(a) * K + c] =
          s.group_mass[static_cast<size_t>(a)] * pc;
      out.u_a[static_cast<size_t>(a)] += s.group_mass[static_cast<size_t>(a)] * pc;
    }
  }
  return out;
}

namespace {

void append_terms(std::ostringstream& os, const std::vector<double>& row,
                  const std::vector<std::string>& names) {
  bool first = true;
  char buf[64];
  for (size_t i = 0; i < row.size(); ++i) {
    if (row[i] == 0.0) continue;
    std::snprintf(buf, sizeof(buf), "%.17g", std::fabs(row[i]));
    os << (row[i] < 0.0 ? (first ? "- " : "- ") : (first ? "" : "+ "));
    os << buf << " " << names[i] << " ";
    first = false;
  }
  if (first) os << "0 ";
}

}  // namespace

std::string lp_text_dump(const LpInstance& inst) {
  std::ostringstream os;
  char buf[64];
  os << "\\ " << metric_name(inst.metric) << " instance, N=" << inst.num_classes
     << " K=" << inst.num_clients << " form="
     << (inst.form == RegionForm::HalfSpace ? "halfspace" : "barycentric") << "\n";
  os << "Minimize\n obj: ";
  append_terms(os, inst.objective, inst.var_names);
  os << "\nSubject To\n";
  for (size_t r = 0; r < inst.fair_rows.size(); ++r) {
    os << " " << inst.fair_names[r] << "_hi: ";
    append_terms(os, inst.fair_rows[r], inst.var_names);
    std::snprintf(buf, sizeof(buf), "%.17g", inst.fair_bounds[r]);
    os << "<= " << buf << "\n";
    os << " " << inst.fair_names[r] << "_lo: ";
    append_terms(os, inst.fair_rows[r], inst.var_names);
    std::snprintf(buf, sizeof(buf), "%.17g", -inst.fair_bounds[r]);
    os << ">= " << buf << "\n";
  }
  for (size_t r = 0; r < inst.le_rows.size(); ++r) {
    os << " " << inst.le_names[r] << ": ";
    append_terms(os, inst.le_rows[r], inst.var_names);
    std::snprintf(buf, sizeof(buf), "%.17g", inst.le_rhs[r]);
    os << "<= " << buf << "\n";
  }
  for (size_t r = 0; r < inst.eq_rows.size(); ++r) {
    os << " " << inst.eq_names[r] << ": ";
    append_terms(os, inst.eq_rows[r], inst.var_names);
    std::snprintf(buf, sizeof(buf), "%.17g", inst.eq_rhs[r]);
    os << "= " << buf << "\n";
  }
  os << "Bounds\n";
  for (size_t i = 0; i < inst.total_vars(); ++i)
    os << " 0 <= " << inst.var_names[i] << " <= 1\n";
  os << "End\n";
  return os.str();
}

}  // namespace fairfl
