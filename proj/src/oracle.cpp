#include "fairfl/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

#include "fairfl/error.hpp"

namespace fairfl {

namespace {

class PosteriorModel final : public ScoreModel {
 public:
  explicit PosteriorModel(DiscreteInstance inst) : inst_(std::move(inst)) {}
  int num_classes() const override { return inst_.num_classes; }
  int feature_dim() const override { return 1; }
  std::vector<double> score(std::span<const double> x, int group,
                            int client) const override {
    const int v = static_cast<int>(std::llround(x[0]));
    return inst_.posterior(v, group, client - 1);
  }

 private:
  DiscreteInstance inst_;
};

// Solve A w = b for a small system by least squares (normal equations);
// returns nothing when the residual exceeds tol or the system is singular.
std::optional<std::vector<double>> solve_least_squares(
    const std::vector<std::vector<double>>& cols, const std::vector<double>& b,
    double tol) {
  const size_t s = cols.size(), m = b.size();
  std::vector<std::vector<double>> ata(s, std::vector<double>(s, 0.0));
  std::vector<double> atb(s, 0.0);
  for (size_t i = 0; i < s; ++i) {
    for (size_t j = 0; j < s; ++j)
      for (size_t r = 0; r < m; ++r) ata[i][j] += cols[i][r] * cols[j][r];
    for (size_t r = 0; r < m; ++r) atb[i] += cols[i][r] * b[r];
  }
  // Gaussian elimination with partial pivoting on the s x s normal system.
  std::vector<size_t> perm(s);
  std::iota(perm.begin(), perm.end(), size_t{0});
  for (size_t k = 0; k < s; ++k) {
    size_t piv = k;
    for (size_t i = k + 1; i < s; ++i)
      if (std::fabs(ata[i][k]) > std::fabs(ata[piv][k])) piv = i;
    if (std::fabs(ata[piv][k]) < 1e-12) return std::nullopt;
    std::swap(ata[k], ata[piv]);
    std::swap(atb[k], atb[piv]);
    for (size_t i = k + 1; i < s; ++i) {
      const double f = ata[i][k] / ata[k][k];
      for (size_t j = k; j < s; ++j) ata[i][j] -= f * ata[k][j];
      atb[i] -= f * atb[k];
    }
  }
  std::vector<double> w(s, 0.0);
  for (size_t k = s; k-- > 0;) {
    double v = atb[k];
    for (size_t j = k + 1; j < s; ++j) v -= ata[k][j] * w[j];
    w[k] = v / ata[k][k];
  }
  for (size_t r = 0; r < m; ++r) {
    double resid = -b[r];
    for (size_t i = 0; i < s; ++i) resid += cols[i][r] * w[i];
    if (std::fabs(resid) > tol) return std::nullopt;
  }
  return w;
}

}  // namespace

double DiscreteInstance::pr_yac(int y, int a, int c) const {
  double s = 0.0;
  for (int x = 0; x < num_values; ++x) s += pr(x, a, c, y);
  return s;
}

double DiscreteInstance::pr_ac(int a, int c) const {
  double s = 0.0;
  for (int y = 0; y < num_classes; ++y) s += pr_yac(y, a, c);
  return s;
}

double DiscreteInstance::pr_c(int c) const { return pr_ac(0, c) + pr_ac(1, c); }

double DiscreteInstance::pr_y_given_ac(int y, int a, int c) const {
  return pr_yac(y, a, c) / pr_ac(a, c);
}

std::vector<double> DiscreteInstance::posterior(int x, int a, int c) const {
  std::vector<double> p(static_cast<size_t>(num_classes), 0.0);
  double z = 0.0;
  for (int y = 0; y < num_classes; ++y) {
    p[static_cast<size_t>(y)] = pr(x, a, c, y);
    z += p[static_cast<size_t>(y)];
  }
  if (z <= 0.0)
    throw InputError("posterior requested at a zero-probability (x, a, c)");
  for (double& v : p) v /= z;
  return p;
}

void DiscreteInstance::validate() const {
  if (num_values < 1 || num_classes < 2 || num_clients < 1)
    throw InputError("discrete instance: bad dimensions");
  if (joint.size() != static_cast<size_t>(num_values) * 2 * num_clients * num_classes)
    throw InputError("discrete instance: joint table size mismatch");
  double total = 0.0;
  for (double v : joint) {
    if (v < 0.0) throw InputError("discrete instance: negative probability");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw InputError("discrete instance: joint must sum to 1");
  for (int c = 0; c < num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < num_classes; ++y)
        if (pr_yac(y, a, c) <= 0.0)
          throw InputError(
              "discrete instance: every (y, a, c) cell needs positive mass");
}

std::shared_ptr<const ScoreModel> DiscreteInstance::oracle_model() const {
  return std::make_shared<PosteriorModel>(*this);
}

ClientGroupDataset DiscreteInstance::sample(int total_samples,
                                            RngStream rng) const {
  std::vector<Record> records;
  records.reserve(static_cast<size_t>(total_samples));
  for (int i = 0; i < total_samples; ++i) {
    double u = rng.next_uniform();
    size_t cell = joint.size() - 1;
    double acc = 0.0;
    for (size_t k = 0; k < joint.size(); ++k) {
      acc += joint[k];
      if (u < acc) {
        cell = k;
        break;
      }
    }
    Record r;
    const int y = static_cast<int>(cell % static_cast<size_t>(num_classes));
    size_t rest = cell / static_cast<size_t>(num_classes);
    const int c = static_cast<int>(rest % static_cast<size_t>(num_clients));
    rest /= static_cast<size_t>(num_clients);
    const int a = static_cast<int>(rest % 2);
    const int x = static_cast<int>(rest / 2);
    r.features = {static_cast<double>(x)};
    r.group = a;
    r.client = c + 1;
    r.label = y + 1;
    records.push_back(std::move(r));
  }
  return ClientGroupDataset(std::move(records), num_classes, num_clients, 1);
}

DiscreteInstance discrete_instance_from_spec(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  if (spec.mode != SyntheticSpec::Mode::Discrete)
    throw InputError("discrete_instance_from_spec needs a discrete-mode spec");
  DiscreteInstance inst;
  inst.num_values = static_cast<int>(spec.feature_pmf[0][0].size());
  inst.num_classes = spec.num_classes;
  inst.num_clients = spec.num_clients;
  inst.joint.assign(static_cast<size_t>(inst.num_values) * 2 *
                        inst.num_clients * inst.num_classes, 0.0);
  long long total = 0;
  for (int n : spec.samples_per_client) total += n;
  for (int c = 0; c < inst.num_clients; ++c) {
    const double pc = static_cast<double>(spec.samples_per_client[static_cast<size_t>(c)]) /
                      static_cast<double>(total);
    for (int a = 0; a < 2; ++a) {
      const double qa = a == 1 ? spec.sensitive_fraction[static_cast<size_t>(c)]
                               : 1.0 - spec.sensitive_fraction[static_cast<size_t>(c)];
      for (int y = 0; y < inst.num_classes; ++y) {
        const double prior = spec.class_prior[static_cast<size_t>(c)][static_cast<size_t>(a)]
                                             [static_cast<size_t>(y)];
        for (int x = 0; x < inst.num_values; ++x)
          inst.pr(x, a, c, y) =
              pc * qa * prior *
              spec.feature_pmf[static_cast<size_t>(a)][static_cast<size_t>(y)]
                              [static_cast<size_t>(x)];
      }
    }
  }
  inst.validate();
  return inst;
}

PredictorTable argmax_table(const DiscreteInstance& inst) {
  std::vector<double> ones(static_cast<size_t>(inst.num_classes), 1.0);
  return derived_table(inst, ones);
}

PredictorTable derived_table(const DiscreteInstance& inst,
                             std::span<const double> theta) {
  PredictorTable out;
  out.num_values = inst.num_values;
  out.num_clients = inst.num_clients;
  out.table.assign(static_cast<size_t>(inst.num_values) * 2 * inst.num_clients, 0);
  for (int x = 0; x < inst.num_values; ++x)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < inst.num_clients; ++c) {
        const std::vector<double> r = inst.posterior(x, a, c);
        int best = 0;
        double best_v = theta[0] * r[0];
        for (int y = 1; y < inst.num_classes; ++y) {
          const double v = theta[static_cast<size_t>(y)] * r[static_cast<size_t>(y)];
          if (v > best_v) {
            best_v = v;
            best = y;
          }
        }
        out.table[(static_cast<size_t>(x) * 2 + a) * static_cast<size_t>(inst.num_clients) + c] =
            best + 1;
      }
  return out;
}

std::vector<double> exact_tp(const DiscreteInstance& inst,
                             const PredictorTable& pred, int a, int c) {
  std::vector<double> tp(static_cast<size_t>(inst.num_classes), 0.0);
  for (int y = 0; y < inst.num_classes; ++y) {
    double hit = 0.0;
    for (int x = 0; x < inst.num_values; ++x)
      if (pred.at(x, a, c) == y + 1) hit += inst.pr(x, a, c, y);
    tp[static_cast<size_t>(y)] = hit / inst.pr_yac(y, a, c);
  }
  return tp;
}

double exact_accuracy(const DiscreteInstance& inst, const PredictorTable& pred) {
  double acc = 0.0;
  for (int x = 0; x < inst.num_values; ++x)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < inst.num_clients; ++c)
        acc += inst.pr(x, a, c, pred.at(x, a, c) - 1);
  return acc;
}

std::vector<EnumeratedPredictor> enumerate_deterministic_predictors(
    const DiscreteInstance& inst, size_t bound) {
  const size_t slots = static_cast<size_t>(inst.num_values) * 2 * inst.num_clients;
  double count = 1.0;
  for (size_t i = 0; i < slots; ++i) {
    count *= inst.num_classes;
    if (count > static_cast<double>(bound))
      throw InputError("enumeration bound exceeded: N^(|X|*|A|*K) > " +
                       std::to_string(bound));
  }
  std::vector<EnumeratedPredictor> out;
  out.reserve(static_cast<size_t>(count));
  PredictorTable pred;
  pred.num_values = inst.num_values;
  pred.num_clients = inst.num_clients;
  pred.table.assign(slots, 1);
  while (true) {
    EnumeratedPredictor e;
    e.pred = pred;
    for (int c = 0; c < inst.num_clients; ++c)
      for (int a = 0; a < 2; ++a)
        e.tp.push_back(exact_tp(inst, pred, a, c));
    e.accuracy = exact_accuracy(inst, pred);
    out.push_back(std::move(e));
    // next map in base-N counting order
    size_t i = 0;
    for (; i < slots; ++i) {
      if (pred.table[i] < inst.num_classes) {
        ++pred.table[i];
        break;
      }
      pred.table[i] = 1;
    }
    if (i == slots) break;
  }
  return out;
}

AggregatedParams exact_aggregated_params(const DiscreteInstance& inst,
                                         const PredictorTable& base) {
  const int N = inst.num_classes, K = inst.num_clients;
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
    out.client_mass[static_cast<size_t>(c)] = inst.pr_c(c);
    for (int a = 0; a < 2; ++a) {
      const std::vector<double> tp = exact_tp(inst, base, a, c);
      out.u_ac_table[static_cast<size_t>(a) * K + c] = inst.pr_ac(a, c);
      out.u_a[static_cast<size_t>(a)] += inst.pr_ac(a, c);
      for (int y = 0; y < N; ++y) {
        const size_t i = out.idx_yac(y, a, c);
        out.p_table[i] = inst.pr_yac(y, a, c);
        out.alpha_table[static_cast<size_t>(y) * 2 + a] += out.p_table[i];
        out.tp1_table[i] = tp[static_cast<size_t>(y)];
        for (int j = 0; j < N; ++j) {
          double u = 0.0;
          for (int x = 0; x < inst.num_values; ++x)
            if (base.at(x, a, c) == j + 1) u += inst.pr(x, a, c, y);
          out.u_yj_table[((static_cast<size_t>(y) * N + j) * 2 + a) *
                             static_cast<size_t>(K) + c] = u;
          out.u_j_table[(static_cast<size_t>(j) * 2 + a) * static_cast<size_t>(K) + c] += u;
        }
      }
    }
  }
  return out;
}

MixWeights mix_weights_from_solution(const AggregatedParams& params,
                                     const LpInstance& inst,
                                     const LpSolution& sol) {
  if (inst.metric == Metric::StatisticalParity)
    throw InputError("mix weights exist for EO/EOp instances only");
  MixWeights mix;
  mix.resize(params.num_classes, params.num_clients);
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a) {
      std::vector<double> beta;
      if (inst.form == RegionForm::Barycentric) {
        beta.resize(static_cast<size_t>(params.num_classes) + 1);
        double s = 0.0;
        for (int i = 0; i <= params.num_classes; ++i) {
          beta[static_cast<size_t>(i)] =
              std::clamp(sol.x[inst.bary_var(a, c, i)], 0.0, 1.0);
          s += beta[static_cast<size_t>(i)];
        }
        if (s <= 0.0) throw NumericalError("degenerate barycentric block");
        for (double& b : beta) b /= s;
      } else {
        std::vector<double> z(static_cast<size_t>(params.num_classes));
        for (int y = 0; y < params.num_classes; ++y)
          z[static_cast<size_t>(y)] =
              std::clamp(sol.x[inst.eo_var(a, c, y)], 0.0, 1.0);
        beta = solve_lae(params.tp1_block(a, c), z);
      }
      std::copy(beta.begin(), beta.end(), mix.at(a, c).begin());
    }
  return mix;
}

SpRandomization sp_from_solution(const AggregatedParams& params,
                                 const LpInstance& inst, const LpSolution& sol) {
  if (inst.metric != Metric::StatisticalParity)
    throw InputError("sp tables exist for SP instances only");
  SpRandomization sp;
  sp.resize(params.num_classes, params.num_clients);
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < params.num_classes; ++j) {
        double sum = 0.0;
        const bool unobserved = params.u_j(j, a, c) <= 0.0;
        for (int y = 0; y < params.num_classes; ++y) {
          double v = unobserved ? (y == j ? 1.0 : 0.0)
                                : std::clamp(sol.x[inst.sp_var(a, c, j, y)], 0.0, 1.0);
          sp.at(a, c, y, j) = v;
          sum += v;
        }
        if (sum <= 0.0) throw NumericalError("degenerate randomization column");
        for (int y = 0; y < params.num_classes; ++y) sp.at(a, c, y, j) /= sum;
      }
  return sp;
}

namespace {

// max w . t_N  s.t.  sum_k w_k t_k[g] = phi_g (g < N-1), sum w = 1, w >= 0
// over mixtures of the vertex TP vectors; supports of size <= N suffice.
struct MixtureOpt {
  bool feasible = false;
  double value = 0.0;
};

MixtureOpt mixture_max_tp_n(const std::vector<std::vector<double>>& vertices,
                            std::span<const double> phi) {
  const int N = static_cast<int>(vertices.front().size());
  const size_t m = static_cast<size_t>(N);  // constraint rows: N-1 phis + sum
  std::vector<double> b(m, 0.0);
  for (int g = 0; g < N - 1; ++g) b[static_cast<size_t>(g)] = phi[static_cast<size_t>(g)];
  b[m - 1] = 1.0;
  auto col_of = [&](size_t v) {
    std::vector<double> col(m, 1.0);
    for (int g = 0; g < N - 1; ++g)
      col[static_cast<size_t>(g)] = vertices[v][static_cast<size_t>(g)];
    return col;
  };
  MixtureOpt best;
  const size_t V = vertices.size();
  std::vector<size_t> pick;
  auto try_subset = [&](const std::vector<size_t>& subset) {
    std::vector<std::vector<double>> cols;
    for (size_t v : subset) cols.push_back(col_of(v));
    const auto w = solve_least_squares(cols, b, 1e-9);
    if (!w) return;
    double value = 0.0;
    for (size_t k = 0; k < subset.size(); ++k) {
      if ((*w)[k] < -1e-9) return;
      value += (*w)[k] * vertices[subset[k]][static_cast<size_t>(N - 1)];
    }
    if (!best.feasible || value > best.value) {
      best.feasible = true;
      best.value = value;
    }
  };
  // subsets of size 1..N
  std::vector<size_t> idx(V);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::vector<size_t> subset;
  auto rec = [&](auto&& self, size_t start, int remaining) -> void {
    if (!subset.empty()) try_subset(subset);
    if (remaining == 0) return;
    for (size_t v = start; v < V; ++v) {
      subset.push_back(v);
      self(self, v + 1, remaining - 1);
      subset.pop_back();
    }
  };
  rec(rec, 0, N);
  return best;
}

}  // namespace

FrontierReport frontier_check(const DiscreteInstance& inst,
                              const std::vector<std::vector<double>>& theta_grid) {
  if (inst.num_classes != 2 && inst.num_classes != 3)
    throw InputError("frontier check supports N = 2 or 3");
  FrontierReport report;
  report.pass = true;
  const int N = inst.num_classes;

  for (int c = 0; c < inst.num_clients; ++c) {
    for (int a = 0; a < 2; ++a) {
      // All per-cell deterministic restrictions x -> y with their TPs.
      std::vector<std::vector<double>> vertices;
      {
        std::vector<int> map(static_cast<size_t>(inst.num_values), 1);
        while (true) {
          std::vector<double> tp(static_cast<size_t>(N), 0.0);
          for (int y = 0; y < N; ++y) {
            double hit = 0.0;
            for (int x = 0; x < inst.num_values; ++x)
              if (map[static_cast<size_t>(x)] == y + 1) hit += inst.pr(x, a, c, y);
            tp[static_cast<size_t>(y)] = hit / inst.pr_yac(y, a, c);
          }
          vertices.push_back(std::move(tp));
          size_t i = 0;
          for (; i < map.size(); ++i) {
            if (map[i] < N) {
              ++map[i];
              break;
            }
            map[i] = 1;
          }
          if (i == map.size()) break;
        }
      }

      // Targets realized by derived predictors over the theta grid, plus
      // midpoints of consecutive grid predictors.
      std::vector<std::vector<double>> targets;
      std::vector<double> claims;
      std::vector<std::vector<double>> derived_tps;
      for (const std::vector<double>& theta : theta_grid) {
        const PredictorTable pred = derived_table(inst, theta);
        derived_tps.push_back(exact_tp(inst, pred, a, c));
      }
      for (const std::vector<double>& tp : derived_tps) {
        targets.emplace_back(tp.begin(), tp.end() - 1);
        claims.push_back(tp.back());
      }
      for (size_t k = 0; k + 1 < derived_tps.size(); ++k) {
        for (double lambda : {0.25, 0.5, 0.75}) {
          std::vector<double> mix(static_cast<size_t>(N), 0.0);
          for (int g = 0; g < N; ++g)
            mix[static_cast<size_t>(g)] =
                lambda * derived_tps[k][static_cast<size_t>(g)] +
                (1.0 - lambda) * derived_tps[k + 1][static_cast<size_t>(g)];
          targets.emplace_back(mix.begin(), mix.end() - 1);
          claims.push_back(mix.back());
        }
      }

      for (size_t t = 0; t < targets.size(); ++t) {
        const MixtureOpt opt = mixture_max_tp_n(vertices, targets[t]);
        ++report.targets_checked;
        if (!opt.feasible) {
          ++report.infeasible_targets;
          continue;
        }
        const double gap = opt.value - claims[t];
        report.max_gap = std::max(report.max_gap, gap);
        if (gap > 1e-6) report.pass = false;
      }
      // A target outside [0,1]^{N-1} must come back infeasible.
      std::vector<double> impossible(static_cast<size_t>(N - 1), 2.0);
      const MixtureOpt opt = mixture_max_tp_n(vertices, impossible);
      ++report.targets_checked;
      if (opt.feasible) {
        report.pass = false;
        report.detail = "an unattainable target was reported feasible";
      } else {
        ++report.infeasible_targets;
      }
    }
  }
  if (!report.pass && report.detail.empty())
    report.detail = "a mixture exceeded the derived predictor's frontier value";
  return report;
}

namespace {

// Simplex grid: all nonnegative integer vectors of the given length summing
// to `total`.
void for_each_composition(int total, int length,
                          const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> parts(static_cast<size_t>(length), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == length - 1) {
      parts[static_cast<size_t>(pos)] = left;
      fn(parts);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      parts[static_cast<size_t>(pos)] = k;
      self(self, pos + 1, left - k);
    }
  };
  rec(rec, 0, total);
}

struct CellCandidates {
  // one entry per feasible (beta_0cell, beta_1cell) pair of a client
  std::vector<double> acc;
  std::vector<std::array<double, 2>> gvec;  // constrained-class global terms
  std::vector<std::pair<size_t, size_t>> which;
};

}  // namespace

BruteForceResult bruteforce_fair_optimum(const DiscreteInstance& inst,
                                         const FairnessSpec& spec,
                                         double grid_step,
                                         const MixWeights* candidate) {
  if (spec.metric == Metric::StatisticalParity)
    throw InputError("brute force covers the EO/EOp mixing-weight family");
  const int N = inst.num_classes, K = inst.num_clients;
  const int y_hi = spec.metric == Metric::EqualOpportunity ? 1 : N;
  if (K > 2) throw InputError("brute force supports K <= 2");
  if (K == 2 && y_hi > 2)
    throw InputError("brute force supports K = 2 only with up to 2 "
                     "constrained classes");
  if (static_cast<int>(spec.eps_local.size()) != K)
    throw InputError("eps_local length mismatch");

  const PredictorTable base = argmax_table(inst);
  const AggregatedParams params = exact_aggregated_params(inst, base);

  // Per-grid-point operating points per cell.
  const int M = std::max(1, static_cast<int>(std::llround(1.0 / grid_step)));
  std::vector<std::vector<std::vector<double>>> cell_z(static_cast<size_t>(2) * K);
  std::vector<std::vector<std::vector<double>>> cell_beta(static_cast<size_t>(2) * K);
  for (int c = 0; c < K; ++c)
    for (int a = 0; a < 2; ++a) {
      const std::vector<double> tp = params.tp1_block(a, c);
      auto& zs = cell_z[static_cast<size_t>(c) * 2 + a];
      auto& bs = cell_beta[static_cast<size_t>(c) * 2 + a];
      for_each_composition(M, N + 1, [&](const std::vector<int>& parts) {
        std::vector<double> beta(static_cast<size_t>(N) + 1);
        for (int i = 0; i <= N; ++i)
          beta[static_cast<size_t>(i)] =
              static_cast<double>(parts[static_cast<size_t>(i)]) / M;
        zs.push_back(expected_operating_point(beta, tp));
        bs.push_back(std::move(beta));
      });
    }

  // Grid points get a feasibility slack matched to one grid move; the
  // injected candidate is held to exact feasibility.
  const double slack = 2.0 * grid_step;
  double lipschitz = 0.0;
  for (int c = 0; c < K; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < N; ++y)
        lipschitz += params.p(y, a, c) * (params.tp1(y, a, c) + 1.0);

  BruteForceResult result;
  result.grid_step = grid_step;
  result.feasibility_slack = slack;
  result.accuracy_lipschitz = lipschitz;
  result.witness.resize(N, K);

  auto cell_acc = [&](int a, int c, const std::vector<double>& z) {
    double acc = 0.0;
    for (int y = 0; y < N; ++y) acc += params.p(y, a, c) * z[static_cast<size_t>(y)];
    return acc;
  };
  auto global_term = [&](int a, int c, const std::vector<double>& z, int y) {
    const double sgn = a == 0 ? 1.0 : -1.0;
    return sgn * params.p(y, a, c) / params.alpha(y, a) * z[static_cast<size_t>(y)];
  };

  auto consider = [&](double acc, const std::vector<const std::vector<double>*>& betas) {
    if (acc <= result.best_accuracy && result.feasible_found) return;
    result.feasible_found = true;
    result.best_accuracy = acc;
    for (int c = 0; c < K; ++c)
      for (int a = 0; a < 2; ++a) {
        std::span<double> dst = result.witness.at(a, c);
        const std::vector<double>& b = *betas[static_cast<size_t>(c) * 2 + a];
        std::copy(b.begin(), b.end(), dst.begin());
      }
  };

  // Per-client candidate lists filtered by the local constraints.
  std::vector<CellCandidates> per_client(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c) {
    const double eps_c = spec.eps_local[static_cast<size_t>(c)] + slack;
    const auto& z0s = cell_z[static_cast<size_t>(c) * 2 + 0];
    const auto& z1s = cell_z[static_cast<size_t>(c) * 2 + 1];
    CellCandidates cand;
    for (size_t i0 = 0; i0 < z0s.size(); ++i0) {
      for (size_t i1 = 0; i1 < z1s.size(); ++i1) {
        bool ok = true;
        for (int y = 0; y < y_hi && ok; ++y)
          ok = std::fabs(z0s[i0][static_cast<size_t>(y)] -
                         z1s[i1][static_cast<size_t>(y)]) <= eps_c;
        if (!ok) continue;
        std::array<double, 2> g{0.0, 0.0};
        for (int y = 0; y < y_hi; ++y)
          g[static_cast<size_t>(y)] = global_term(0, c, z0s[i0], y) +
                                      global_term(1, c, z1s[i1], y);
        cand.acc.push_back(cell_acc(0, c, z0s[i0]) + cell_acc(1, c, z1s[i1]));
        cand.gvec.push_back(g);
        cand.which.emplace_back(i0, i1);
      }
    }
    per_client[static_cast<size_t>(c)] = std::move(cand);
  }

  const double eps_g = spec.eps_global + slack;
  if (K == 1) {
    const CellCandidates& cand = per_client[0];
    for (size_t k = 0; k < cand.acc.size(); ++k) {
      bool ok = true;
      for (int y = 0; y < y_hi && ok; ++y)
        ok = std::fabs(cand.gvec[k][static_cast<size_t>(y)]) <= eps_g;
      if (!ok) continue;
      consider(cand.acc[k],
               {&cell_beta[0][cand.which[k].first], &cell_beta[1][cand.which[k].second]});
    }
  } else {
    // Bucketized accumulation over the global-constraint coordinates: store
    // client 1's best accuracy per bucket, max-filter with the +-eps window,
    // then a single lookup per client-2 candidate.
    const double res = 0.0025;
    const int B = static_cast<int>(std::ceil(2.2 / res));  // covers [-1.1, 1.1]
    const int dims = y_hi;
    auto bucket_of = [&](double v) {
      int b = static_cast<int>(std::floor((v + 1.1) / res));
      return std::clamp(b, 0, B - 1);
    };
    const size_t table_size = dims == 1 ? static_cast<size_t>(B)
                                        : static_cast<size_t>(B) * B;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> table(table_size, neg_inf);
    std::vector<size_t> best_k(table_size, SIZE_MAX);
    const CellCandidates& c1 = per_client[0];
    for (size_t k = 0; k < c1.acc.size(); ++k) {
      const size_t b = dims == 1
                           ? static_cast<size_t>(bucket_of(c1.gvec[k][0]))
                           : static_cast<size_t>(bucket_of(c1.gvec[k][0])) * B +
                                 static_cast<size_t>(bucket_of(c1.gvec[k][1]));
      if (c1.acc[k] > table[b]) {
        table[b] = c1.acc[k];
        best_k[b] = k;
      }
    }
    // Separable sliding-window max; the window half-width absorbs the bucket
    // rounding into the feasibility slack.
    const int w = static_cast<int>(std::ceil(eps_g / res)) + 1;
    result.feasibility_slack = slack + 2.0 * res;
    auto filter_axis = [&](size_t stride, size_t lines) {
      std::vector<double> vals(static_cast<size_t>(B));
      std::vector<size_t> keys(static_cast<size_t>(B));
      for (size_t line = 0; line < lines; ++line) {
        const size_t base_i = stride == 1 ? line * static_cast<size_t>(B) : line;
        for (int i = 0; i < B; ++i) {
          vals[static_cast<size_t>(i)] = table[base_i + static_cast<size_t>(i) * stride];
          keys[static_cast<size_t>(i)] = best_k[base_i + static_cast<size_t>(i) * stride];
        }
        for (int i = 0; i < B; ++i) {
          double best = neg_inf;
          size_t bk = SIZE_MAX;
          const int lo = std::max(0, i - w), hi = std::min(B - 1, i + w);
          for (int j = lo; j <= hi; ++j) {
            if (vals[static_cast<size_t>(j)] > best) {
              best = vals[static_cast<size_t>(j)];
              bk = keys[static_cast<size_t>(j)];
            }
          }
          table[base_i + static_cast<size_t>(i) * stride] = best;
          best_k[base_i + static_cast<size_t>(i) * stride] = bk;
        }
      }
    };
    if (w >= B) {
      // The window spans every bucket: one global max suffices.
      double best = neg_inf;
      size_t bk = SIZE_MAX;
      for (size_t b = 0; b < table_size; ++b)
        if (table[b] > best) {
          best = table[b];
          bk = best_k[b];
        }
      std::fill(table.begin(), table.end(), best);
      std::fill(best_k.begin(), best_k.end(), bk);
    } else if (dims == 1) {
      filter_axis(1, 1);
    } else {
      filter_axis(1, static_cast<size_t>(B));                     // inner axis
      filter_axis(static_cast<size_t>(B), static_cast<size_t>(B));  // outer axis
    }
    const CellCandidates& c2 = per_client[1];
    for (size_t k = 0; k < c2.acc.size(); ++k) {
      const size_t b = dims == 1
                           ? static_cast<size_t>(bucket_of(-c2.gvec[k][0]))
                           : static_cast<size_t>(bucket_of(-c2.gvec[k][0])) * B +
                                 static_cast<size_t>(bucket_of(-c2.gvec[k][1]));
      if (table[b] == neg_inf) continue;
      const double total = table[b] + c2.acc[k];
      if (result.feasible_found && total <= result.best_accuracy) continue;
      const size_t k1 = best_k[b];
      consider(total, {&cell_beta[0][c1.which[k1].first],
                       &cell_beta[1][c1.which[k1].second],
                       &cell_beta[2][c2.which[k].first],
                       &cell_beta[3][c2.which[k].second]});
    }
  }

  // Injected candidate at exact feasibility.
  if (candidate) {
    const std::vector<double> gdiff = closed_form_global_diff(params, *candidate);
    const std::vector<std::vector<double>> ldiff =
        closed_form_local_diff(params, *candidate);
    bool ok = true;
    for (int y = 0; y < y_hi && ok; ++y)
      ok = gdiff[static_cast<size_t>(y)] <= spec.eps_global + 1e-7;
    for (int c = 0; c < K && ok; ++c)
      for (int y = 0; y < y_hi && ok; ++y)
        ok = ldiff[static_cast<size_t>(c)][static_cast<size_t>(y)] <=
             spec.eps_local[static_cast<size_t>(c)] + 1e-7;
    if (ok) {
      const double acc = closed_form_accuracy(params, *candidate);
      if (!result.feasible_found || acc > result.best_accuracy) {
        result.feasible_found = true;
        result.best_accuracy = acc;
        result.witness = *candidate;
      }
    }
  }
  return result;
}

}  // namespace fairfl
