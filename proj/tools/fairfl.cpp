#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairfl/error.hpp"
#include "fairfl/evaluate.hpp"
#include "fairfl/oracle.hpp"
#include "fairfl/protocol.hpp"

namespace {

using namespace fairfl;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw InputError("malformed config " + path + ": " + e.what());
  }
}

FedAvgConfig fedavg_from_json(const json& j) {
  FedAvgConfig cfg;
  if (!j.contains("fedavg")) return cfg;
  const json& f = j.at("fedavg");
  cfg.rounds = f.value("rounds", cfg.rounds);
  cfg.local_epochs = f.value("local_epochs", cfg.local_epochs);
  cfg.batch_size = f.value("batch_size", cfg.batch_size);
  cfg.learning_rate = f.value("learning_rate", cfg.learning_rate);
  cfg.model.hidden_units = f.value("hidden_units", cfg.model.hidden_units);
  cfg.model.include_client_onehot =
      f.value("include_client_onehot", cfg.model.include_client_onehot);
  return cfg;
}

std::vector<double> parse_eps_list(const std::string& text) {
  std::vector<double> values;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    try {
      values.push_back(std::stod(cur));
    } catch (const std::exception&) {
      throw InputError("cannot parse '" + cur + "' as a real number");
    }
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',') {
      flush();
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  if (values.empty()) throw InputError("empty epsilon list");
  return values;
}

FairnessSpec resolve_fairness(const std::string& metric_flag,
                              const std::string& eps_global_flag,
                              const std::string& eps_local_flag,
                              const json& config, int num_clients) {
  FairnessSpec spec;
  if (config.contains("fairness")) {
    const json& f = config.at("fairness");
    if (f.contains("metric")) spec.metric = parse_metric(f.at("metric"));
    spec.eps_global = f.value("eps_global", spec.eps_global);
    if (f.contains("eps_local")) {
      if (f.at("eps_local").is_number()) {
        spec.eps_local.assign(static_cast<size_t>(num_clients),
                              f.at("eps_local").get<double>());
      } else {
        spec.eps_local = f.at("eps_local").get<std::vector<double>>();
      }
    }
  }
  if (!metric_flag.empty()) spec.metric = parse_metric(metric_flag);
  if (!eps_global_flag.empty()) spec.eps_global = std::stod(eps_global_flag);
  if (!eps_local_flag.empty()) {
    const std::vector<double> values = parse_eps_list(eps_local_flag);
    if (values.size() == 1) {
      spec.eps_local.assign(static_cast<size_t>(num_clients), values[0]);
    } else {
      spec.eps_local = values;
    }
  }
  if (spec.eps_local.empty())
    spec.eps_local.assign(static_cast<size_t>(num_clients), 1.0);
  return spec;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_path, uint64_t seed) {
  const ClientGroupDataset data = read_csv_file(data_path);
  json config = json::object();
  if (!config_path.empty()) config = load_json_file(config_path);
  const FedAvgConfig cfg = fedavg_from_json(config);
  std::vector<RoundLog> log;
  const SoftmaxModel model =
      train_fedavg_softmax(data, cfg, RngStream(seed, "fedavg"), &log);
  for (const RoundLog& r : log)
    std::printf("round %d loss %.6f\n", r.round, r.mean_loss);
  save_checkpoint(model, out_path);
  std::printf("checkpoint written to %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_postprocess(const std::string& data_path, const std::string& model_path,
                    const std::string& metric_flag,
                    const std::string& eps_global_flag,
                    const std::string& eps_local_flag, double dp_epsilon,
                    const std::string& out_path, const std::string& report_path,
                    const std::string& eval_path,
                    const std::string& config_path, uint64_t seed) {
  const ClientGroupDataset data = read_csv_file(data_path);
  auto model = std::make_shared<SoftmaxModel>(load_checkpoint(model_path));
  json config = json::object();
  if (!config_path.empty()) config = load_json_file(config_path);

  ProtocolConfig cfg;
  cfg.seed = seed;
  cfg.fairness = resolve_fairness(metric_flag, eps_global_flag, eps_local_flag,
                                  config, data.num_clients());
  if (config.contains("dp")) {
    cfg.dp.enabled = config.at("dp").value("enabled", false);
    cfg.dp.epsilon = config.at("dp").value(
        "epsilon", std::numeric_limits<double>::infinity());
  }
  if (std::isfinite(dp_epsilon)) {
    cfg.dp.enabled = true;
    cfg.dp.epsilon = dp_epsilon;
  }

  const ProtocolRun run = run_protocol_with_model(model, data, cfg);
  save_bundle(run.predictor, model_path, out_path);

  const ClientGroupDataset eval_data =
      eval_path.empty() ? data : read_csv_file(eval_path);
  FairnessReport report = evaluate(run.predictor, eval_data, seed);
  report.lp_objective = run.solution.objective_value;
  report.lp_accuracy = run.solution.accuracy_estimate;

  const std::string rp =
      report_path.empty() ? out_path + ".report.json" : report_path;
  std::ofstream out(rp);
  if (!out) throw InputError("cannot open report file: " + rp);
  out << report.to_json() << "\n";
  if (cfg.dp.enabled) {
    std::printf("dp: epsilon %g, per-client laplace scales:", cfg.dp.epsilon);
    for (const ClientStats& s : run.sent_stats)
      std::printf(" c%d=%g", s.client, laplace_scale(s.sample_count, cfg.dp.epsilon));
    std::printf("\n");
  }
  std::printf("bundle written to %s\nreport written to %s\n", out_path.c_str(),
              rp.c_str());
  std::printf("accuracy %.4f global_disparity %.4f local_disparity_mean %.4f\n",
              report.accuracy, report.global_disparity_max,
              report.local_disparity_mean);
  return kExitOk;
}

std::pair<std::vector<double>, std::vector<double>> parse_grid(
    const std::string& spec) {
  const size_t semi = spec.find(';');
  if (semi == std::string::npos) {
    const std::vector<double> values = parse_eps_list(spec);
    return {values, values};
  }
  return {parse_eps_list(spec.substr(0, semi)),
          parse_eps_list(spec.substr(semi + 1))};
}

int cmd_sweep(const std::string& data_path, const std::string& model_path,
              const std::string& metric_flag, const std::string& grid_spec,
              int num_seeds, const std::string& out_dir,
              const std::string& eval_path, uint64_t seed) {
  const ClientGroupDataset data = read_csv_file(data_path);
  auto model = std::make_shared<SoftmaxModel>(load_checkpoint(model_path));
  const ClientGroupDataset eval_data =
      eval_path.empty() ? data : read_csv_file(eval_path);

  auto [eps_globals, eps_locals] = parse_grid(grid_spec);
  std::vector<uint64_t> seeds;
  for (int s = 0; s < num_seeds; ++s) seeds.push_back(seed + static_cast<uint64_t>(s));

  ProtocolConfig base;
  base.fairness.metric =
      metric_flag.empty() ? Metric::EqualizedOdds : parse_metric(metric_flag);
  const SweepGrid grid =
      sweep(model, data, eval_data, base, eps_globals, eps_locals, seeds);
  write_sweep_csv(grid, out_dir);
  std::printf("sweep matrices written to %s\n", out_dir.c_str());
  int infeasible = 0;
  for (const auto& row : grid.cells)
    for (const SweepCell& cell : row) infeasible += cell.infeasible_count;
  if (infeasible > 0)
    std::printf("%d infeasible (cell, seed) pairs recorded\n", infeasible);
  return kExitOk;
}

// Built-in instances for the certification suites.
DiscreteInstance builtin_instance(int which) {
  if (which == 0) {
    // N=2, K=1, |X|=4, groups deliberately asymmetric.
    DiscreteInstance inst;
    inst.num_values = 4;
    inst.num_classes = 2;
    inst.num_clients = 1;
    inst.joint.assign(static_cast<size_t>(4) * 2 * 1 * 2, 0.0);
    const double px_y1[2][4] = {{0.40, 0.30, 0.20, 0.10}, {0.34, 0.16, 0.28, 0.22}};
    const double px_y2[2][4] = {{0.08, 0.17, 0.30, 0.45}, {0.22, 0.26, 0.24, 0.28}};
    const double group_mass[2] = {0.6, 0.4};
    const double prior_y1[2] = {0.55, 0.45};
    for (int a = 0; a < 2; ++a)
      for (int x = 0; x < 4; ++x) {
        inst.pr(x, a, 0, 0) = group_mass[a] * prior_y1[a] * px_y1[a][x];
        inst.pr(x, a, 0, 1) = group_mass[a] * (1.0 - prior_y1[a]) * px_y2[a][x];
      }
    inst.validate();
    return inst;
  }
  if (which == 1) {
    // N=2, K=2, |X|=5; client 2 smaller and harder for group 1.
    DiscreteInstance inst;
    inst.num_values = 5;
    inst.num_classes = 2;
    inst.num_clients = 2;
    inst.joint.assign(static_cast<size_t>(5) * 2 * 2 * 2, 0.0);
    const double px_y1[2][5] = {{0.36, 0.27, 0.19, 0.11, 0.07},
                                {0.28, 0.22, 0.20, 0.16, 0.14}};
    const double px_y2[2][5] = {{0.06, 0.12, 0.20, 0.28, 0.34},
                                {0.14, 0.17, 0.21, 0.23, 0.25}};
    const double client_mass[2] = {0.55, 0.45};
    const double q1[2] = {0.35, 0.6};  // sensitive fraction per client
    const double prior_y1[2][2] = {{0.5, 0.42}, {0.6, 0.5}};  // [client][group]
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a) {
        const double mass = client_mass[c] * (a == 1 ? q1[c] : 1.0 - q1[c]);
        for (int x = 0; x < 5; ++x) {
          inst.pr(x, a, c, 0) = mass * prior_y1[c][a] * px_y1[a][x];
          inst.pr(x, a, c, 1) = mass * (1.0 - prior_y1[c][a]) * px_y2[a][x];
        }
      }
    inst.validate();
    return inst;
  }
  // N=3, K=1, |X|=4.
  DiscreteInstance inst;
  inst.num_values = 4;
  inst.num_classes = 3;
  inst.num_clients = 1;
  inst.joint.assign(static_cast<size_t>(4) * 2 * 1 * 3, 0.0);
  const double px[3][4] = {{0.52, 0.24, 0.14, 0.10},
                           {0.16, 0.46, 0.22, 0.16},
                           {0.10, 0.16, 0.30, 0.44}};
  const double blur[2] = {0.0, 0.25};  // group 1 flatter (harder)
  const double group_mass[2] = {0.55, 0.45};
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        const double p = (1.0 - blur[a]) * px[y][x] + blur[a] * 0.25;
        inst.pr(x, a, 0, y) = group_mass[a] * (1.0 / 3.0) * p;
      }
  inst.validate();
  return inst;
}

std::vector<std::vector<double>> theta_grid(int num_classes, int points,
                                            uint64_t seed) {
  std::vector<std::vector<double>> grid;
  grid.push_back(std::vector<double>(static_cast<size_t>(num_classes), 1.0));
  for (int y = 0; y < num_classes; ++y) {
    std::vector<double> axis(static_cast<size_t>(num_classes), 0.05);
    axis[static_cast<size_t>(y)] = 1.0;
    grid.push_back(std::move(axis));
  }
  RngStream rng(seed, "theta-grid");
  while (static_cast<int>(grid.size()) < points) {
    std::vector<double> theta(static_cast<size_t>(num_classes));
    for (double& t : theta) t = std::exp(3.0 * (rng.next_uniform() - 0.5));
    grid.push_back(std::move(theta));
  }
  return grid;
}

int suite_region(uint64_t seed) {
  bool all_pass = true;
  for (int which : {0, 2}) {
    const DiscreteInstance inst = builtin_instance(which);
    const auto predictors = enumerate_deterministic_predictors(inst);
    const auto thetas = theta_grid(inst.num_classes, 200, seed);
    // Half-space checks of every deterministic predictor against every
    // derived-predictor hyperplane.
    double worst = 0.0;
    for (int c = 0; c < inst.num_clients; ++c)
      for (int a = 0; a < 2; ++a)
        for (const auto& theta : thetas) {
          const PredictorTable d = derived_table(inst, theta);
          const std::vector<double> dtp = exact_tp(inst, d, a, c);
          double rhs = 0.0;
          for (int y = 0; y < inst.num_classes; ++y)
            rhs += theta[static_cast<size_t>(y)] * inst.pr_y_given_ac(y, a, c) *
                   dtp[static_cast<size_t>(y)];
          for (const auto& e : predictors) {
            double lhs = 0.0;
            const auto& tp = e.tp[static_cast<size_t>(c) * 2 + a];
            for (int y = 0; y < inst.num_classes; ++y)
              lhs += theta[static_cast<size_t>(y)] * inst.pr_y_given_ac(y, a, c) *
                     tp[static_cast<size_t>(y)];
            worst = std::max(worst, lhs - rhs);
          }
        }
    const bool hs_pass = worst <= 1e-9;
    std::printf("[%s] region half-spaces instance %d (worst excess %.3e)\n",
                hs_pass ? "PASS" : "FAIL", which, worst);
    all_pass = all_pass && hs_pass;

    // Convexity: midpoints of achievable TP vectors are achieved by the
    // 50/50 randomized mixture, computed independently from the joint table.
    double worst_mid = 0.0;
    RngStream rng(seed, "midpoints");
    for (int rep = 0; rep < 200; ++rep) {
      const auto& p1 = predictors[static_cast<size_t>(rng.next_below(predictors.size()))];
      const auto& p2 = predictors[static_cast<size_t>(rng.next_below(predictors.size()))];
      for (int c = 0; c < inst.num_clients; ++c)
        for (int a = 0; a < 2; ++a) {
          const auto& t1 = p1.tp[static_cast<size_t>(c) * 2 + a];
          const auto& t2 = p2.tp[static_cast<size_t>(c) * 2 + a];
          for (int y = 0; y < inst.num_classes; ++y) {
            double hit = 0.0;
            for (int x = 0; x < inst.num_values; ++x) {
              const double ind1 = p1.pred.at(x, a, c) == y + 1 ? 1.0 : 0.0;
              const double ind2 = p2.pred.at(x, a, c) == y + 1 ? 1.0 : 0.0;
              hit += 0.5 * (ind1 + ind2) * inst.pr(x, a, c, y);
            }
            const double mix_tp = hit / inst.pr_yac(y, a, c);
            const double mid = 0.5 * (t1[static_cast<size_t>(y)] + t2[static_cast<size_t>(y)]);
            worst_mid = std::max(worst_mid, std::fabs(mix_tp - mid));
          }
        }
    }
    const bool mid_pass = worst_mid <= 1e-12;
    std::printf("[%s] region midpoint mixtures instance %d (worst gap %.3e)\n",
                mid_pass ? "PASS" : "FAIL", which, worst_mid);
    all_pass = all_pass && mid_pass;
  }
  return all_pass ? kExitOk : 1;
}

int suite_frontier(uint64_t seed) {
  bool all_pass = true;
  for (int which : {0, 2}) {
    const DiscreteInstance inst = builtin_instance(which);
    const FrontierReport report =
        frontier_check(inst, theta_grid(inst.num_classes, 40, seed));
    std::printf("[%s] frontier instance %d (%d targets, %d infeasible, max gap %.3e)%s%s\n",
                report.pass ? "PASS" : "FAIL", which, report.targets_checked,
                report.infeasible_targets, report.max_gap,
                report.detail.empty() ? "" : " -- ", report.detail.c_str());
    all_pass = all_pass && report.pass;
  }
  return all_pass ? kExitOk : 1;
}

int suite_lp() {
  bool all_pass = true;
  for (int which : {0, 1}) {
    const DiscreteInstance inst = builtin_instance(which);
    const PredictorTable base = argmax_table(inst);
    const AggregatedParams params = exact_aggregated_params(inst, base);
    for (double eps : {1.0, 0.10, 0.05}) {
      const FairnessSpec spec =
          make_spec(Metric::EqualizedOdds, eps, eps, inst.num_clients);
      const LpInstance li = build_lp_eo(params, spec);
      const LpSolution sol = solve(li);
      if (sol.status != LpSolution::Status::Optimal) {
        std::printf("[FAIL] lp suite instance %d eps %.2f: solver status\n",
                    which, eps);
        all_pass = false;
        continue;
      }
      const MixWeights mix = mix_weights_from_solution(params, li, sol);
      // Inner-approximation soundness: exact disparities respect the bounds.
      const auto gdiff = closed_form_global_diff(params, mix);
      const auto ldiff = closed_form_local_diff(params, mix);
      bool feasible = true;
      for (double d : gdiff) feasible = feasible && d <= eps + 1e-7;
      for (const auto& row : ldiff)
        for (double d : row) feasible = feasible && d <= eps + 1e-7;
      // Agreement with the grid-search certifier.
      const BruteForceResult bf =
          bruteforce_fair_optimum(inst, spec, 0.02, &mix);
      const double lp_acc = sol.accuracy_estimate;
      const bool agree =
          lp_acc <= bf.best_accuracy + 1e-6 &&
          lp_acc >= bf.best_accuracy - bf.grid_step * bf.accuracy_lipschitz -
                        bf.feasibility_slack - 1e-9;
      std::printf(
          "[%s] lp-vs-bruteforce instance %d eps %.2f (lp %.5f, grid %.5f)\n",
          (feasible && agree) ? "PASS" : "FAIL", which, eps, lp_acc,
          bf.best_accuracy);
      all_pass = all_pass && feasible && agree;
    }
  }
  return all_pass ? kExitOk : 1;
}

int cmd_oracle(const std::string& suite, uint64_t seed) {
  if (suite == "region") return suite_region(seed);
  if (suite == "frontier") return suite_frontier(seed);
  if (suite == "lp") return suite_lp();
  throw InputError("unknown oracle suite '" + suite + "' (expected region|frontier|lp)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-fair federated post-processing toolkit"};
  app.require_subcommand(1);

  uint64_t seed = 1234;
  app.add_option("--seed", seed, "deterministic seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "train the score model with FedAvg");
  std::string train_data, train_config, train_out;
  train->add_option("--data", train_data, "training CSV")->required();
  train->add_option("--config", train_config, "JSON config");
  train->add_option("--out", train_out, "checkpoint output path")->required();

  auto* post = app.add_subcommand(
      "postprocess", "run the fairness post-processing protocol (steps 2-4)");
  std::string post_data, post_model, post_metric, post_eps_g, post_eps_l;
  std::string post_out, post_report, post_eval, post_config;
  double post_dp = std::numeric_limits<double>::infinity();
  post->add_option("--data", post_data, "statistics CSV")->required();
  post->add_option("--model", post_model, "score-model checkpoint")->required();
  post->add_option("--metric", post_metric, "eo|eop|sp");
  post->add_option("--eps-global", post_eps_g, "global fairness level");
  post->add_option("--eps-local", post_eps_l, "local level (scalar or comma list)");
  post->add_option("--dp-epsilon", post_dp, "Laplace privacy budget");
  post->add_option("--out", post_out, "predictor bundle output")->required();
  post->add_option("--report", post_report, "report output path");
  post->add_option("--eval-data", post_eval, "held-out CSV for the report");
  post->add_option("--config", post_config, "JSON config");

  auto* sweep_cmd = app.add_subcommand("sweep", "epsilon-grid tradeoff sweep");
  std::string sweep_data, sweep_model, sweep_metric, sweep_grid, sweep_out, sweep_eval;
  int sweep_seeds = 1;
  sweep_cmd->add_option("--data", sweep_data, "statistics CSV")->required();
  sweep_cmd->add_option("--model", sweep_model, "score-model checkpoint")->required();
  sweep_cmd->add_option("--metric", sweep_metric, "eo|eop|sp");
  sweep_cmd->add_option("--grid", sweep_grid,
                        "eps grid 'g1,g2,..;l1,l2,..' (one list = both axes)")
      ->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeds per cell");
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_cmd->add_option("--eval-data", sweep_eval, "held-out CSV");

  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force certification suites");
  std::string suite;
  oracle_cmd->add_option("--suite", suite, "region|frontier|lp")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*train) return cmd_train(train_data, train_config, train_out, seed);
    if (*post)
      return cmd_postprocess(post_data, post_model, post_metric, post_eps_g,
                             post_eps_l, post_dp, post_out, post_report,
                             post_eval, post_config, seed);
    if (*sweep_cmd)
      return cmd_sweep(sweep_data, sweep_model, sweep_metric, sweep_grid,
                       sweep_seeds, sweep_out, sweep_eval, seed);
    if (*oracle_cmd) return cmd_oracle(suite, seed);
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
