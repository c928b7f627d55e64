#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fairfl/protocol.hpp"
#include "fairfl/synthetic.hpp"

namespace fairfl {

// Empirical accuracy and disparity of a (randomized) predictor, averaged over
// a number of seeded evaluation passes. Disparity terms whose conditioning
// cell has no support are skipped and flagged, never imputed.
struct FairnessReport {
  Metric metric = Metric::EqualizedOdds;
  double accuracy = 0.0;
  std::vector<double> global_disparity;              // per class
  double global_disparity_max = 0.0;                 // headline for the metric
  std::vector<std::vector<double>> local_disparity;  // [client][class]
  std::vector<double> local_client_max;              // per client
  double local_disparity_mean = 0.0;  // mean over clients of per-client max
  double local_disparity_max = 0.0;   // max over clients
  double lp_objective = std::nan(""); // filled by pipeline callers
  double lp_accuracy = std::nan("");
  long long sample_count = 0;
  int repeats = 0;
  std::vector<std::string> skipped_cells;

  std::string to_json() const;
};

FairnessReport evaluate(const FairPredictor& pred,
                        const ClientGroupDataset& test, uint64_t eval_seed,
                        int repeats = 5);

// Closed-form quantities of the installed predictor computed from the
// aggregated parameters (no sampling): what the LP promises.
std::vector<double> closed_form_operating_point(const AggregatedParams& params,
                                                const MixWeights& mix, int a,
                                                int c);
std::vector<double> closed_form_global_diff(const AggregatedParams& params,
                                            const MixWeights& mix);
std::vector<std::vector<double>> closed_form_local_diff(
    const AggregatedParams& params, const MixWeights& mix);
double closed_form_accuracy(const AggregatedParams& params,
                            const MixWeights& mix);

std::vector<double> sp_closed_form_global_diff(const AggregatedParams& params,
                                               const SpRandomization& sp);
std::vector<std::vector<double>> sp_closed_form_local_diff(
    const AggregatedParams& params, const SpRandomization& sp);
double sp_closed_form_accuracy(const AggregatedParams& params,
                               const SpRandomization& sp);

struct SweepCell {
  double mean_accuracy = std::nan("");
  double mean_lp_objective = std::nan("");
  double mean_lp_accuracy = std::nan("");
  double mean_global_disparity = std::nan("");
  double mean_local_disparity = std::nan("");
  int infeasible_count = 0;
  int solved_count = 0;
};

struct SweepGrid {
  Metric metric = Metric::EqualizedOdds;
  std::vector<double> eps_global_values;
  std::vector<double> eps_local_values;  // scalar broadcast to all clients
  std::vector<uint64_t> seeds;
  std::vector<std::vector<SweepCell>> cells;  // [global][local]
  // [global][local][seed]; NaN where infeasible
  std::vector<std::vector<std::vector<double>>> lp_objective_per_seed;
  std::vector<std::vector<std::vector<double>>> accuracy_per_seed;
};

// One run per (cell, seed); the score model and the statistics data are fixed
// so only Steps 2-4 re-execute per cell.
SweepGrid sweep(std::shared_ptr<const ScoreModel> model,
                const ClientGroupDataset& stats_data,
                const ClientGroupDataset& eval_data,
                const ProtocolConfig& base,
                const std::vector<double>& eps_global_values,
                const std::vector<double>& eps_local_values,
                const std::vector<uint64_t>& seeds, int repeats = 5);

// accuracy.csv, lp_objective.csv, global_disparity.csv, local_disparity.csv
// with the eps axes in header row/column.
void write_sweep_csv(const SweepGrid& grid, const std::string& dir);

struct HeterogeneitySummary {
  std::vector<SweepGrid> grids;                    // one per scenario
  std::vector<std::vector<double>> loss_per_seed;  // [scenario][seed]
  std::vector<double> mean_loss;                   // per scenario
};

// One sweep per scenario over eps_values x eps_values (data regenerated per
// seed with the scenario's exact-score oracle); the loss summary compares the
// (loose, loose) and (tight, tight) diagonal cells.
HeterogeneitySummary heterogeneity_experiment(
    const std::vector<SyntheticSpec>& scenarios,
    const std::vector<double>& eps_values, double loose_eps, double tight_eps,
    const std::vector<uint64_t>& seeds, int repeats = 3);

}  // namespace fairfl
