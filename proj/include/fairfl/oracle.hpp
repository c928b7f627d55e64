#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fairfl/evaluate.hpp"
#include "fairfl/fair_predictor.hpp"
#include "fairfl/lp_instance.hpp"
#include "fairfl/synthetic.hpp"

namespace fairfl {

// Tiny instance with a finite feature alphabet and an exact joint
// distribution, the ground truth for all brute-force certifiers. Every
// (y, a, c) cell must carry positive mass so true-positive vectors are
// defined everywhere.
struct DiscreteInstance {
  int num_values = 0;   // |X|
  int num_classes = 0;  // N
  int num_clients = 0;  // K
  std::vector<double> joint;  // Pr(x, a, c, y)

  double pr(int x, int a, int c, int y) const { return joint[idx(x, a, c, y)]; }
  double& pr(int x, int a, int c, int y) { return joint[idx(x, a, c, y)]; }

  double pr_yac(int y, int a, int c) const;   // Pr(Y=y, A=a, C=c)
  double pr_ac(int a, int c) const;           // Pr(A=a, C=c)
  double pr_c(int c) const;                   // Pr(C=c)
  double pr_y_given_ac(int y, int a, int c) const;
  // Exact posterior vector R(x, a, c).
  std::vector<double> posterior(int x, int a, int c) const;

  void validate() const;

  std::shared_ptr<const ScoreModel> oracle_model() const;
  ClientGroupDataset sample(int total_samples, RngStream rng) const;

  size_t idx(int x, int a, int c, int y) const {
    return ((static_cast<size_t>(x) * 2 + a) * static_cast<size_t>(num_clients) + c) *
               static_cast<size_t>(num_classes) + static_cast<size_t>(y);
  }
};

// Exact joint table realized by a discrete-mode synthetic spec.
DiscreteInstance discrete_instance_from_spec(const SyntheticSpec& spec);

// A deterministic predictor as a finite table over (x, a, c); entries are
// 1-based classes.
struct PredictorTable {
  int num_values = 0, num_clients = 0;
  std::vector<int> table;  // [(x*2 + a)*K + c]

  int at(int x, int a, int c) const {
    return table[(static_cast<size_t>(x) * 2 + a) * static_cast<size_t>(num_clients) + c];
  }
};

// The argmax-of-posterior predictor, ties to the lowest class.
PredictorTable argmax_table(const DiscreteInstance& inst);
// Derived predictor table for a theta weighting.
PredictorTable derived_table(const DiscreteInstance& inst,
                             std::span<const double> theta);

// Exact TP vector of a deterministic predictor for one (a, c).
std::vector<double> exact_tp(const DiscreteInstance& inst,
                             const PredictorTable& pred, int a, int c);
double exact_accuracy(const DiscreteInstance& inst, const PredictorTable& pred);

struct EnumeratedPredictor {
  PredictorTable pred;
  std::vector<std::vector<double>> tp;  // [(c*2)+a] -> TP vector
  double accuracy = 0.0;
};

// Every deterministic map (x, a, c) -> y with its exact TP vectors; errors
// out above `bound` maps.
std::vector<EnumeratedPredictor> enumerate_deterministic_predictors(
    const DiscreteInstance& inst, size_t bound = 1000000);

// Aggregation identical to the empirical path but fed by the exact joint
// table, so LP/LAE pipelines can run against population quantities.
AggregatedParams exact_aggregated_params(const DiscreteInstance& inst,
                                         const PredictorTable& base);

// Mixing weights / SP tables extracted directly from a solved instance (the
// out-of-protocol path used by certifiers and tests).
MixWeights mix_weights_from_solution(const AggregatedParams& params,
                                     const LpInstance& inst,
                                     const LpSolution& sol);
SpRandomization sp_from_solution(const AggregatedParams& params,
                                 const LpInstance& inst, const LpSolution& sol);

struct FrontierReport {
  bool pass = false;
  int targets_checked = 0;
  int infeasible_targets = 0;
  double max_gap = 0.0;
  std::string detail;
};

// Constrained-frontier check of the generalized NP lemma: for targets phi on
// the first N-1 true positives realized by derived predictors (and adjacent
// 2-mixtures), the mixture-optimal TP_N must match the derived predictor's
// within 1e-6.
FrontierReport frontier_check(const DiscreteInstance& inst,
                              const std::vector<std::vector<double>>& theta_grid);

struct BruteForceResult {
  bool feasible_found = false;
  double best_accuracy = 0.0;
  MixWeights witness;
  double grid_step = 0.0;
  double feasibility_slack = 0.0;  // constraint relaxation granted to grid points
  double accuracy_lipschitz = 0.0; // accuracy change bound per unit grid move
};

// Grid search over per-(a, c) mixing weights on the simplex. Grid points get
// a feasibility slack matched to the grid resolution; `candidate`, when
// given, is admitted at exact feasibility (1e-7) so pipeline solutions can be
// compared one-to-one.
BruteForceResult bruteforce_fair_optimum(const DiscreteInstance& inst,
                                         const FairnessSpec& spec,
                                         double grid_step = 0.02,
                                         const MixWeights* candidate = nullptr);

}  // namespace fairfl
