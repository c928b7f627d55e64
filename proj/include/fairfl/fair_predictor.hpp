#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fairfl/fairness.hpp"
#include "fairfl/rng.hpp"
#include "fairfl/score_model.hpp"

namespace fairfl {

// Per-(group, client) mixing weights beta = [beta^0, beta^1 .. beta^N]:
// emit the base predictor's output with probability beta^0 and the constant
// class y with probability beta^y.
struct MixWeights {
  int num_classes = 0;
  int num_clients = 0;
  std::vector<double> table;  // [(c*2 + a) * (N+1) + i]

  void resize(int N, int K) {
    num_classes = N;
    num_clients = K;
    table.assign(static_cast<size_t>(2) * K * (N + 1), 0.0);
  }
  std::span<double> at(int a, int c) {
    return {table.data() + offset(a, c), static_cast<size_t>(num_classes + 1)};
  }
  std::span<const double> at(int a, int c) const {
    return {table.data() + offset(a, c), static_cast<size_t>(num_classes + 1)};
  }

  bool operator==(const MixWeights&) const = default;

 private:
  size_t offset(int a, int c) const {
    return (static_cast<size_t>(c) * 2 + static_cast<size_t>(a)) *
           static_cast<size_t>(num_classes + 1);
  }
};

// Per-(group, client) column-stochastic table z[y][j] = Pr(output y | Y1 = j).
struct SpRandomization {
  int num_classes = 0;
  int num_clients = 0;
  std::vector<double> table;  // [((c*2 + a) * N + j) * N + y]

  void resize(int N, int K) {
    num_classes = N;
    num_clients = K;
    table.assign(static_cast<size_t>(2) * K * N * N, 0.0);
  }
  double& at(int a, int c, int y, int j) { return table[idx(a, c, y, j)]; }
  double at(int a, int c, int y, int j) const { return table[idx(a, c, y, j)]; }
  // column over outputs y for a fixed base output j
  std::vector<double> column(int a, int c, int j) const;

  bool operator==(const SpRandomization&) const = default;

 private:
  size_t idx(int a, int c, int y, int j) const {
    return ((static_cast<size_t>(c) * 2 + static_cast<size_t>(a)) *
                static_cast<size_t>(num_classes) + static_cast<size_t>(j)) *
               static_cast<size_t>(num_classes) + static_cast<size_t>(y);
  }
};

// Solve the (N+1)x(N+1) linear system [1 1..1; tp1 I] beta = [1; z] in closed
// form: beta^0 = (sum z - 1) / (sum tp1 - 1), beta^y = z^y - tp1^y beta^0.
// Entries within 1e-9 of [0,1] are clamped and the vector renormalized;
// larger violations throw (they indicate an inconsistent target).
std::vector<double> solve_lae(std::span<const double> tp1,
                              std::span<const double> z);

// TP of the mixed predictor: tp1 * beta^0 + beta^[1..N], elementwise.
std::vector<double> expected_operating_point(std::span<const double> beta,
                                             std::span<const double> tp1);

// True iff z lies in the simplex spanned by {tp1, e_1..e_N} within tol
// (barycentric coordinate test).
bool in_simplex_hull(std::span<const double> tp1, std::span<const double> z,
                     double tol = 1e-7);

// Band lookup of Algorithm 1: s <= beta^0 keeps the base output, afterwards
// consecutive cumulative beta bands select the constant classes 1..N.
int eo_class_from_uniform(std::span<const double> beta, double s,
                          int base_class);
// Inverse-CDF over an SP column (probabilities over outputs 1..N).
int sp_class_from_uniform(std::span<const double> column, double s);

// One named stream per (group, client) cell, so per-subgroup draws do not
// depend on evaluation order.
class SubgroupRng {
 public:
  SubgroupRng(uint64_t seed, std::string_view label, int num_clients);
  RngStream& stream(int a, int c);

 private:
  std::vector<RngStream> streams_;
};

struct FairPredictor {
  Metric metric = Metric::EqualizedOdds;
  std::shared_ptr<const ScoreModel> base;
  MixWeights mix;       // EO / EOp
  SpRandomization sp;   // SP

  int num_classes() const { return base ? base->num_classes() : 0; }
};

int predict_eo(const FairPredictor& pred, std::span<const double> x, int a,
               int c, SubgroupRng& rng);
int predict_sp(const FairPredictor& pred, std::span<const double> x, int a,
               int c, SubgroupRng& rng);
// Dispatch on the predictor's metric.
int predict(const FairPredictor& pred, std::span<const double> x, int a, int c,
            SubgroupRng& rng);

// Bundle files carry the metric tag, the weight tables and a reference to the
// score-model checkpoint; tables round-trip bit-exactly.
void save_bundle(const FairPredictor& pred, const std::string& model_ref,
                 const std::string& path);
struct LoadedBundle {
  FairPredictor predictor;  // base is left empty; attach after loading
  std::string model_ref;
};
LoadedBundle load_bundle(const std::string& path);

}  // namespace fairfl
