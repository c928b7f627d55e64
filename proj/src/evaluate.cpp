#include "fairfl/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fairfl/error.hpp"

namespace fairfl {

using nlohmann::json;

namespace {

struct Counts {
  // confusion[c][a][y_true][y_pred], plus per-cell totals
  int N = 0, K = 0;
  std::vector<long long> confusion;
  long long hits = 0;
  long long total = 0;

  Counts(int num_classes, int num_clients) : N(num_classes), K(num_clients) {
    confusion.assign(static_cast<size_t>(K) * 2 * N * N, 0);
  }
  long long& at(int c, int a, int yt, int yp) {
    return confusion[((static_cast<size_t>(c) * 2 + a) * N + yt) * N + yp];
  }
  long long at(int c, int a, int yt, int yp) const {
    return confusion[((static_cast<size_t>(c) * 2 + a) * N + yt) * N + yp];
  }
  long long true_count(int c, int a, int yt) const {
    long long s = 0;
    for (int yp = 0; yp < N; ++yp) s += at(c, a, yt, yp);
    return s;
  }
  long long pred_count(int c, int a, int yp) const {
    long long s = 0;
    for (int yt = 0; yt < N; ++yt) s += at(c, a, yt, yp);
    return s;
  }
  long long cell_count(int c, int a) const {
    long long s = 0;
    for (int yt = 0; yt < N; ++yt) s += true_count(c, a, yt);
    return s;
  }
};

}  // namespace

FairnessReport evaluate(const FairPredictor& pred,
                        const ClientGroupDataset& test, uint64_t eval_seed,
                        int repeats) {
  if (test.empty()) throw InputError("evaluate: empty test data");
  if (repeats < 1) throw InputError("evaluate: repeats must be >= 1");
  const int N = test.num_classes();
  const int K = test.num_clients();
  const Metric metric = pred.metric;

  FairnessReport report;
  report.metric = metric;
  report.sample_count = static_cast<long long>(test.size());
  report.repeats = repeats;
  report.global_disparity.assign(static_cast<size_t>(N), 0.0);
  report.local_disparity.assign(static_cast<size_t>(K),
                                std::vector<double>(static_cast<size_t>(N), 0.0));

  // Support of the conditioning cells is data-determined, not pass-dependent.
  std::vector<Counts> passes;
  for (int p = 0; p < repeats; ++p) {
    Counts counts(N, K);
    SubgroupRng rng(eval_seed, "eval.pass" + std::to_string(p + 1), K);
    for (const Record& r : test.records()) {
      const int out = predict(pred, r.features, r.group, r.client, rng);
      counts.at(r.client - 1, r.group, r.label - 1, out - 1) += 1;
      if (out == r.label) ++counts.hits;
      ++counts.total;
    }
    report.accuracy += static_cast<double>(counts.hits) /
                       static_cast<double>(counts.total) / repeats;
    passes.push_back(std::move(counts));
  }
  const Counts& support = passes.front();

  auto flag = [&](const std::string& what) {
    report.skipped_cells.push_back(what);
  };

  // Per-class global and per-(client, class) local disparities, averaged over
  // the evaluation passes.
  std::vector<char> global_ok(static_cast<size_t>(N), 1);
  std::vector<std::vector<char>> local_ok(
      static_cast<size_t>(K), std::vector<char>(static_cast<size_t>(N), 1));
  for (int y = 0; y < N; ++y) {
    for (int a = 0; a < 2; ++a) {
      long long denom = 0;
      for (int c = 0; c < K; ++c)
        denom += metric == Metric::StatisticalParity ? support.cell_count(c, a)
                                                     : support.true_count(c, a, y);
      if (denom == 0) {
        global_ok[static_cast<size_t>(y)] = 0;
        flag("global class " + std::to_string(y + 1) + " group " +
             std::to_string(a) + ": no support");
      }
    }
    for (int c = 0; c < K; ++c) {
      for (int a = 0; a < 2; ++a) {
        const long long denom = metric == Metric::StatisticalParity
                                    ? support.cell_count(c, a)
                                    : support.true_count(c, a, y);
        if (denom == 0) {
          local_ok[static_cast<size_t>(c)][static_cast<size_t>(y)] = 0;
          flag("client " + std::to_string(c + 1) + " class " +
               std::to_string(y + 1) + " group " + std::to_string(a) +
               ": no support");
        }
      }
    }
  }

  for (const Counts& counts : passes) {
    for (int y = 0; y < N; ++y) {
      if (global_ok[static_cast<size_t>(y)]) {
        double rate[2] = {0.0, 0.0};
        for (int a = 0; a < 2; ++a) {
          long long num = 0, den = 0;
          for (int c = 0; c < K; ++c) {
            if (metric == Metric::StatisticalParity) {
              num += counts.pred_count(c, a, y);
              den += counts.cell_count(c, a);
            } else {
              num += counts.at(c, a, y, y);
              den += counts.true_count(c, a, y);
            }
          }
          rate[a] = static_cast<double>(num) / static_cast<double>(den);
        }
        report.global_disparity[static_cast<size_t>(y)] +=
            std::fabs(rate[0] - rate[1]) / repeats;
      }
      for (int c = 0; c < K; ++c) {
        if (!local_ok[static_cast<size_t>(c)][static_cast<size_t>(y)]) continue;
        double rate[2] = {0.0, 0.0};
        for (int a = 0; a < 2; ++a) {
          const long long num = metric == Metric::StatisticalParity
                                    ? counts.pred_count(c, a, y)
                                    : counts.at(c, a, y, y);
          const long long den = metric == Metric::StatisticalParity
                                    ? counts.cell_count(c, a)
                                    : counts.true_count(c, a, y);
          rate[a] = static_cast<double>(num) / static_cast<double>(den);
        }
        report.local_disparity[static_cast<size_t>(c)][static_cast<size_t>(y)] +=
            std::fabs(rate[0] - rate[1]) / repeats;
      }
    }
  }

  // Headlines. Equal opportunity reads class 1 only.
  const int y_hi = metric == Metric::EqualOpportunity ? 1 : N;
  report.global_disparity_max = 0.0;
  for (int y = 0; y < y_hi; ++y)
    if (global_ok[static_cast<size_t>(y)])
      report.global_disparity_max = std::max(
          report.global_disparity_max, report.global_disparity[static_cast<size_t>(y)]);
  report.local_client_max.assign(static_cast<size_t>(K), 0.0);
  double mean = 0.0;
  int clients_with_support = 0;
  for (int c = 0; c < K; ++c) {
    double mx = 0.0;
    bool any = false;
    for (int y = 0; y < y_hi; ++y) {
      if (!local_ok[static_cast<size_t>(c)][static_cast<size_t>(y)]) continue;
      mx = std::max(mx, report.local_disparity[static_cast<size_t>(c)][static_cast<size_t>(y)]);
      any = true;
    }
    report.local_client_max[static_cast<size_t>(c)] = mx;
    report.local_disparity_max = std::max(report.local_disparity_max, mx);
    if (any) {
      mean += mx;
      ++clients_with_support;
    }
  }
  report.local_disparity_mean =
      clients_with_support > 0 ? mean / clients_with_support : 0.0;
  return report;
}

std::string FairnessReport::to_json() const {
  json j;
  j["metric"] = metric_name(metric);
  j["accuracy"] = accuracy;
  j["global_disparity_per_class"] = global_disparity;
  j["global_disparity"] = global_disparity_max;
  j["local_disparity_per_client_class"] = local_disparity;
  j["local_disparity_per_client_max"] = local_client_max;
  j["local_disparity_mean"] = local_disparity_mean;
  j["local_disparity_max"] = local_disparity_max;
  if (std::isfinite(lp_objective)) j["lp_objective"] = lp_objective;
  if (std::isfinite(lp_accuracy)) j["lp_accuracy"] = lp_accuracy;
  j["sample_count"] = sample_count;
  j["repeats"] = repeats;
  j["skipped_cells"] = skipped_cells;
  return j.dump(2);
}

std::vector<double> closed_form_operating_point(const AggregatedParams& params,
                                                const MixWeights& mix, int a,
                                                int c) {
  const std::vector<double> tp = params.tp1_block(a, c);
  const std::span<const double> beta = mix.at(a, c);
  return expected_operating_point(beta, tp);
}

std::vector<double> closed_form_global_diff(const AggregatedParams& params,
                                            const MixWeights& mix) {
  const int N = params.num_classes, K = params.num_clients;
  std::vector<double> diff(static_cast<size_t>(N), 0.0);
  for (int y = 0; y < N; ++y) {
    const double a0 = params.alpha(y, 0), a1 = params.alpha(y, 1);
    if (a0 <= 0.0 || a1 <= 0.0) continue;  // vacuous class
    double d = 0.0;
    for (int c = 0; c < K; ++c) {
      const std::vector<double> z0 = closed_form_operating_point(params, mix, 0, c);
      const std::vector<double> z1 = closed_form_operating_point(params, mix, 1, c);
      d += params.p(y, 0, c) / a0 * z0[static_cast<size_t>(y)] -
           params.p(y, 1, c) / a1 * z1[static_cast<size_t>(y)];
    }
    diff[static_cast<size_t>(y)] = std::fabs(d);
  }
  return diff;
}

std::vector<std::vector<double>> closed_form_local_diff(
    const AggregatedParams& params, const MixWeights& mix) {
  const int N = params.num_classes, K = params.num_clients;
  std::vector<std::vector<double>> diff(
      static_cast<size_t>(K), std::vector<double>(static_cast<size_t>(N), 0.0));
  for (int c = 0; c < K; ++c) {
    const std::vector<double> z0 = closed_form_operating_point(params, mix, 0, c);
    const std::vector<double> z1 = closed_form_operating_point(params, mix, 1, c);
    for (int y = 0; y < N; ++y) {
      if (params.vacuous(y, 0, c) || params.vacuous(y, 1, c)) continue;
      diff[static_cast<size_t>(c)][static_cast<size_t>(y)] =
          std::fabs(z0[static_cast<size_t>(y)] - z1[static_cast<size_t>(y)]);
    }
  }
  return diff;
}

double closed_form_accuracy(const AggregatedParams& params,
                            const MixWeights& mix) {
  double acc = 0.0;
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a) {
      const std::vector<double> z = closed_form_operating_point(params, mix, a, c);
      for (int y = 0; y < params.num_classes; ++y)
        acc += params.p(y, a, c) * z[static_cast<size_t>(y)];
    }
  return acc;
}

std::vector<double> sp_closed_form_global_diff(const AggregatedParams& params,
                                               const SpRandomization& sp) {
  const int N = params.num_classes, K = params.num_clients;
  std::vector<double> diff(static_cast<size_t>(N), 0.0);
  if (params.u_a[0] <= 0.0 || params.u_a[1] <= 0.0) return diff;
  for (int y = 0; y < N; ++y) {
    double d = 0.0;
    for (int c = 0; c < K; ++c)
      for (int j = 0; j < N; ++j)
        d += sp.at(0, c, y, j) * params.u_j(j, 0, c) / params.u_a[0] -
             sp.at(1, c, y, j) * params.u_j(j, 1, c) / params.u_a[1];
    diff[static_cast<size_t>(y)] = std::fabs(d);
  }
  return diff;
}

std::vector<std::vector<double>> sp_closed_form_local_diff(
    const AggregatedParams& params, const SpRandomization& sp) {
  const int N = params.num_classes, K = params.num_clients;
  std::vector<std::vector<double>> diff(
      static_cast<size_t>(K), std::vector<double>(static_cast<size_t>(N), 0.0));
  for (int c = 0; c < K; ++c) {
    const double u0 = params.u_ac(0, c), u1 = params.u_ac(1, c);
    if (u0 <= 0.0 || u1 <= 0.0) continue;
    for (int y = 0; y < N; ++y) {
      double d = 0.0;
      for (int j = 0; j < N; ++j)
        d += sp.at(0, c, y, j) * params.u_j(j, 0, c) / u0 -
             sp.at(1, c, y, j) * params.u_j(j, 1, c) / u1;
      diff[static_cast<size_t>(c)][static_cast<size_t>(y)] = std::fabs(d);
    }
  }
  return diff;
}

double sp_closed_form_accuracy(const AggregatedParams& params,
                               const SpRandomization& sp) {
  double acc = 0.0;
  for (int c = 0; c < params.num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < params.num_classes; ++j)
        for (int y = 0; y < params.num_classes; ++y)
          acc += params.u_yj(y, j, a, c) * sp.at(a, c, y, j);
  return acc;
}

SweepGrid sweep(std::shared_ptr<const ScoreModel> model,
                const ClientGroupDataset& stats_data,
                const ClientGroupDataset& eval_data,
                const ProtocolConfig& base,
                const std::vector<double>& eps_global_values,
                const std::vector<double>& eps_local_values,
                const std::vector<uint64_t>& seeds, int repeats) {
  for (double v : eps_global_values)
    if (v < 0.0 || v > 1.0) throw InputError("sweep: eps values must be in [0,1]");
  for (double v : eps_local_values)
    if (v < 0.0 || v > 1.0) throw InputError("sweep: eps values must be in [0,1]");
  if (seeds.empty()) throw InputError("sweep: need at least one seed");

  SweepGrid grid;
  grid.metric = base.fairness.metric;
  grid.eps_global_values = eps_global_values;
  grid.eps_local_values = eps_local_values;
  grid.seeds = seeds;
  const size_t G = eps_global_values.size(), L = eps_local_values.size();
  grid.cells.assign(G, std::vector<SweepCell>(L));
  grid.lp_objective_per_seed.assign(
      G, std::vector<std::vector<double>>(L, std::vector<double>(seeds.size(), std::nan(""))));
  grid.accuracy_per_seed = grid.lp_objective_per_seed;

  for (size_t gi = 0; gi < G; ++gi) {
    for (size_t li = 0; li < L; ++li) {
      SweepCell& cell = grid.cells[gi][li];
      double acc_sum = 0.0, obj_sum = 0.0, gd_sum = 0.0, ld_sum = 0.0;
      for (size_t si = 0; si < seeds.size(); ++si) {
        ProtocolConfig cfg = base;
        cfg.seed = seeds[si];
        cfg.fairness = make_spec(base.fairness.metric, eps_global_values[gi],
                                 eps_local_values[li], stats_data.num_clients());
        try {
          const ProtocolRun run = run_protocol_with_model(model, stats_data, cfg);
          FairnessReport rep =
              evaluate(run.predictor, eval_data, seeds[si], repeats);
          rep.lp_objective = run.solution.objective_value;
          rep.lp_accuracy = run.solution.accuracy_estimate;
          acc_sum += rep.accuracy;
          obj_sum += run.solution.objective_value;
          gd_sum += rep.global_disparity_max;
          ld_sum += rep.local_disparity_mean;
          grid.lp_objective_per_seed[gi][li][si] = run.solution.objective_value;
          grid.accuracy_per_seed[gi][li][si] = rep.accuracy;
          ++cell.solved_count;
        } catch (const InfeasibleError&) {
          ++cell.infeasible_count;
        }
      }
      if (cell.solved_count > 0) {
        cell.mean_accuracy = acc_sum / cell.solved_count;
        cell.mean_lp_objective = obj_sum / cell.solved_count;
        cell.mean_lp_accuracy = -cell.mean_lp_objective;
        cell.mean_global_disparity = gd_sum / cell.solved_count;
        cell.mean_local_disparity = ld_sum / cell.solved_count;
      }
    }
  }
  return grid;
}

namespace {

void write_matrix_csv(const SweepGrid& grid, const std::string& path,
                      double (*pick)(const SweepCell&)) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open sweep output file: " + path);
  char buf[64];
  out << "eps_local\\eps_global";
  for (double g : grid.eps_global_values) {
    std::snprintf(buf, sizeof(buf), "%.17g", g);
    out << "," << buf;
  }
  out << "\n";
  for (size_t li = 0; li < grid.eps_local_values.size(); ++li) {
    std::snprintf(buf, sizeof(buf), "%.17g", grid.eps_local_values[li]);
    out << buf;
    for (size_t gi = 0; gi < grid.eps_global_values.size(); ++gi) {
      const double v = pick(grid.cells[gi][li]);
      if (std::isnan(v)) {
        out << ",infeasible";
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << "," << buf;
      }
    }
    out << "\n";
  }
}

}  // namespace

void write_sweep_csv(const SweepGrid& grid, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(grid, dir + "/accuracy.csv",
                   [](const SweepCell& c) { return c.mean_accuracy; });
  write_matrix_csv(grid, dir + "/lp_objective.csv",
                   [](const SweepCell& c) { return c.mean_lp_objective; });
  write_matrix_csv(grid, dir + "/global_disparity.csv",
                   [](const SweepCell& c) { return c.mean_global_disparity; });
  write_matrix_csv(grid, dir + "/local_disparity.csv",
                   [](const SweepCell& c) { return c.mean_local_disparity; });
}

HeterogeneitySummary heterogeneity_experiment(
    const std::vector<SyntheticSpec>& scenarios,
    const std::vector<double>& eps_values, double loose_eps, double tight_eps,
    const std::vector<uint64_t>& seeds, int repeats) {
  if (scenarios.empty()) throw InputError("heterogeneity: no scenarios");
  size_t loose_i = SIZE_MAX, tight_i = SIZE_MAX;
  for (size_t i = 0; i < eps_values.size(); ++i) {
    if (std::fabs(eps_values[i] - loose_eps) < 1e-12) loose_i = i;
    if (std::fabs(eps_values[i] - tight_eps) < 1e-12) tight_i = i;
  }
  if (loose_i == SIZE_MAX || tight_i == SIZE_MAX)
    throw InputError("heterogeneity: loose/tight eps must appear in the grid");

  HeterogeneitySummary out;
  const size_t E = eps_values.size();
  for (size_t s = 0; s < scenarios.size(); ++s) {
    validate_synthetic_spec(scenarios[s]);
    SweepGrid grid;
    grid.metric = Metric::EqualizedOdds;
    grid.eps_global_values = eps_values;
    grid.eps_local_values = eps_values;
    grid.seeds = seeds;
    grid.cells.assign(E, std::vector<SweepCell>(E));
    grid.lp_objective_per_seed.assign(
        E, std::vector<std::vector<double>>(E, std::vector<double>(seeds.size(), std::nan(""))));
    grid.accuracy_per_seed = grid.lp_objective_per_seed;

    std::vector<double> losses;
    for (size_t si = 0; si < seeds.size(); ++si) {
      const SyntheticData gen = generate_synthetic(
          scenarios[s],
          RngStream(seeds[si], "hetero.scenario" + std::to_string(s + 1)));
      const DatasetSplit split =
          split_dataset(gen.data, SplitFractions{0.5, 0.0, 0.5},
                        RngStream(seeds[si], "hetero.split"));
      for (size_t gi = 0; gi < E; ++gi) {
        for (size_t li = 0; li < E; ++li) {
          ProtocolConfig cfg;
          cfg.seed = seeds[si];
          cfg.fairness = make_spec(Metric::EqualizedOdds, eps_values[gi],
                                   eps_values[li], gen.data.num_clients());
          try {
            const ProtocolRun run =
                run_protocol_with_model(gen.oracle, split.train, cfg);
            const FairnessReport rep =
                evaluate(run.predictor, split.test, seeds[si], repeats);
            grid.lp_objective_per_seed[gi][li][si] = run.solution.objective_value;
            grid.accuracy_per_seed[gi][li][si] = rep.accuracy;
          } catch (const InfeasibleError&) {
            ++grid.cells[gi][li].infeasible_count;
          }
        }
      }
      const double loose = grid.accuracy_per_seed[loose_i][loose_i][si];
      const double tight = grid.accuracy_per_seed[tight_i][tight_i][si];
      if (std::isfinite(loose) && std::isfinite(tight))
        losses.push_back(loose - tight);
    }
    for (size_t gi = 0; gi < E; ++gi)
      for (size_t li = 0; li < E; ++li) {
        SweepCell& cell = grid.cells[gi][li];
        double acc = 0.0, obj = 0.0;
        int n = 0;
        for (size_t si = 0; si < seeds.size(); ++si) {
          if (!std::isfinite(grid.accuracy_per_seed[gi][li][si])) continue;
          acc += grid.accuracy_per_seed[gi][li][si];
          obj += grid.lp_objective_per_seed[gi][li][si];
          ++n;
        }
        cell.solved_count = n;
        if (n > 0) {
          cell.mean_accuracy = acc / n;
          cell.mean_lp_objective = obj / n;
          cell.mean_lp_accuracy = -cell.mean_lp_objective;
        }
      }
    out.grids.push_back(std::move(grid));
    double mean = 0.0;
    for (double l : losses) mean += l;
    out.mean_loss.push_back(losses.empty() ? std::nan("") : mean / losses.size());
    out.loss_per_seed.push_back(std::move(losses));
  }
  return out;
}

}  // namespace fairfl
