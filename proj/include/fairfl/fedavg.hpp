#pragma once

#include <functional>
#include <vector>

#include "fairfl/dataset.hpp"
#include "fairfl/rng.hpp"
#include "fairfl/softmax.hpp"

namespace fairfl {

struct FedAvgConfig {
  int rounds = 10;           // T
  int local_epochs = 1;      // E
  int batch_size = 64;       // B
  double learning_rate = 0.1;
  SoftmaxConfig model;
  // Clients are weighted by sample count; the coefficients n_c / sum(n) sum
  // to 1 by construction.

  bool operator==(const FedAvgConfig&) const = default;
};

struct RoundLog {
  int round = 0;
  double mean_loss = 0.0;    // global model loss over the pooled training data
};

// Hooks for recording the weight traffic of each round (the protocol layer
// turns these into transcript messages).
struct FedAvgObserver {
  std::function<void(int round, const std::vector<double>& global_params)>
      on_broadcast;
  std::function<void(int round, int client, const std::vector<double>& params,
                     long long sample_count)>
      on_update;
};

// Iterated local-update / weighted-average training of the softmax score
// model. Deterministic given (data, config, seed): minibatch orders are drawn
// from streams forked per (round, epoch) and shared across clients, so
// clients holding identical data produce identical local updates.
SoftmaxModel train_fedavg_softmax(const ClientGroupDataset& train,
                                  const FedAvgConfig& cfg, RngStream rng,
                                  std::vector<RoundLog>* log = nullptr,
                                  const FedAvgObserver* observer = nullptr);

// Plain pooled-data SGD with the same machinery; the reference the federated
// run is compared against in tests.
SoftmaxModel train_centralized_softmax(const ClientGroupDataset& train,
                                       int epochs, int batch_size,
                                       double learning_rate, SoftmaxConfig mcfg,
                                       RngStream rng);

}  // namespace fairfl
