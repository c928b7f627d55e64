#pragma once

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fairfl/dataset.hpp"
#include "fairfl/rng.hpp"
#include "fairfl/score_model.hpp"

namespace fairfl {

// Evaluates the base predictor on (features, group, client); returns a
// 1-based class.
using BasePredictor =
    std::function<int(std::span<const double>, int group, int client)>;

BasePredictor make_argmax_predictor(std::shared_ptr<const ScoreModel> model);

// Empirical per-client statistics: the payload a client transmits. Tables are
// relative frequencies over the client's n_c samples, classes indexed
// 0-based.
struct ClientStats {
  int client = 0;
  long long sample_count = 0;
  int num_classes = 0;

  // joint_tp(y, a) = Pr(Y1 = y, Y = y, A = a | C = c)
  // base(y, a)     = Pr(Y = y, A = a | C = c)
  std::vector<double> joint_tp_table;
  std::vector<double> base_table;
  // sp_joint(y, j, a) = Pr(Y = y, Y1 = j, A = a | C = c)
  // sp_pred(j, a)     = Pr(Y1 = j, A = a | C = c)
  std::vector<double> sp_joint_table;
  std::vector<double> sp_pred_table;
  // group_mass(a) = Pr(A = a | C = c)
  std::array<double, 2> group_mass{0.0, 0.0};

  double& joint_tp(int y, int a) { return joint_tp_table[idx2(y, a)]; }
  double joint_tp(int y, int a) const { return joint_tp_table[idx2(y, a)]; }
  double& base(int y, int a) { return base_table[idx2(y, a)]; }
  double base(int y, int a) const { return base_table[idx2(y, a)]; }
  double& sp_joint(int y, int j, int a) { return sp_joint_table[idx3(y, j, a)]; }
  double sp_joint(int y, int j, int a) const { return sp_joint_table[idx3(y, j, a)]; }
  double& sp_pred(int j, int a) { return sp_pred_table[idx2(j, a)]; }
  double sp_pred(int j, int a) const { return sp_pred_table[idx2(j, a)]; }

  bool operator==(const ClientStats&) const = default;

 private:
  size_t idx2(int y, int a) const {
    return static_cast<size_t>(y) * 2 + static_cast<size_t>(a);
  }
  size_t idx3(int y, int j, int a) const {
    return (static_cast<size_t>(y) * static_cast<size_t>(num_classes) +
            static_cast<size_t>(j)) * 2 + static_cast<size_t>(a);
  }
};

// Relative-frequency estimates over the client slice; every record must
// belong to `client`.
ClientStats compute_client_stats(const ClientGroupDataset& slice, int client,
                                 const BasePredictor& base_predictor);

struct DpConfig {
  bool enabled = false;
  double epsilon = std::numeric_limits<double>::infinity();

  bool operator==(const DpConfig&) const = default;
};

// Laplace scale for a client holding n_c samples: 1 / (n_c * epsilon).
double laplace_scale(long long sample_count, double epsilon);

// Adds independent Laplace(0, b_c) noise to every transmitted table entry,
// then sanitizes: clips to [0,1], renormalizes `base`, `sp_pred` and
// `group_mass` to total 1, and caps joint_tp at base. epsilon = infinity
// returns the input bit-identically.
ClientStats apply_laplace(const ClientStats& stats, const DpConfig& dp,
                          RngStream rng);

// Versioned key-ordered message payload; the only client-to-server record
// besides model weights.
std::string stats_to_message(const ClientStats& stats);
ClientStats stats_from_message(const std::string& payload);

}  // namespace fairfl
