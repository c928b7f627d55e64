#include "fairfl/fedavg.hpp"

#include <cmath>
#include <numeric>

#include "fairfl/error.hpp"

namespace fairfl {

namespace {

void check_config(const FedAvgConfig& cfg) {
  if (cfg.rounds < 1) throw InputError("fedavg rounds must be >= 1");
  if (cfg.local_epochs < 1) throw InputError("fedavg local_epochs must be >= 1");
  if (cfg.batch_size < 1) throw InputError("fedavg batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw InputError("fedavg learning_rate must be positive");
}

std::vector<size_t> shuffled_order(size_t n, RngStream stream) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  stream.shuffle(order);
  return order;
}

}  // namespace

SoftmaxModel train_fedavg_softmax(const ClientGroupDataset& train,
                                  const FedAvgConfig& cfg, RngStream rng,
                                  std::vector<RoundLog>* log,
                                  const FedAvgObserver* observer) {
  check_config(cfg);
  if (train.empty()) throw InputError("fedavg training data is empty");

  const int K = train.num_clients();
  std::vector<std::vector<Record>> client_data(static_cast<size_t>(K));
  std::vector<double> weight(static_cast<size_t>(K), 0.0);
  for (int c = 1; c <= K; ++c) {
    client_data[static_cast<size_t>(c - 1)] = train.client_records(c);
    weight[static_cast<size_t>(c - 1)] =
        static_cast<double>(client_data[static_cast<size_t>(c - 1)].size()) /
        static_cast<double>(train.size());
  }

  SoftmaxModel global(train.num_classes(), train.feature_dim(), K, cfg.model);
  RngStream init_rng = rng.fork("fedavg.init");
  global.randomize(init_rng);

  for (int t = 1; t <= cfg.rounds; ++t) {
    if (observer && observer->on_broadcast)
      observer->on_broadcast(t, global.params());
    std::vector<double> averaged(global.params().size(), 0.0);
    for (int c = 1; c <= K; ++c) {
      const std::vector<Record>& data = client_data[static_cast<size_t>(c - 1)];
      if (data.empty()) continue;
      SoftmaxModel local = global;
      for (int e = 1; e <= cfg.local_epochs; ++e) {
        // The shuffle stream depends on (round, epoch) but not on the client:
        // clients with identical data take identical minibatch sequences.
        const std::vector<size_t> order = shuffled_order(
            data.size(),
            rng.fork("fedavg.shuffle.r" + std::to_string(t) + ".e" + std::to_string(e)));
        const double loss = local.sgd_epoch(data, order, cfg.batch_size,
                                            cfg.learning_rate);
        if (!std::isfinite(loss))
          throw NumericalError("fedavg diverged (non-finite loss) at round " +
                               std::to_string(t) + ", client " + std::to_string(c));
        for (double p : local.params())
          if (!std::isfinite(p))
            throw NumericalError("fedavg diverged (non-finite weights) at round " +
                                 std::to_string(t) + ", client " + std::to_string(c));
      }
      if (observer && observer->on_update)
        observer->on_update(t, c, local.params(),
                            static_cast<long long>(data.size()));
      const double w = weight[static_cast<size_t>(c - 1)];
      for (size_t i = 0; i < averaged.size(); ++i)
        averaged[i] += w * local.params()[i];
    }
    global.params() = averaged;
    if (log) {
      const double loss = global.mean_loss(train.records());
      if (!std::isfinite(loss))
        throw NumericalError("fedavg diverged (non-finite loss) at round " +
                             std::to_string(t));
      log->push_back(RoundLog{t, loss});
    }
  }
  return global;
}

SoftmaxModel train_centralized_softmax(const ClientGroupDataset& train,
                                       int epochs, int batch_size,
                                       double learning_rate, SoftmaxConfig mcfg,
                                       RngStream rng) {
  if (train.empty()) throw InputError("training data is empty");
  SoftmaxModel model(train.num_classes(), train.feature_dim(),
                     train.num_clients(), mcfg);
  RngStream init_rng = rng.fork("central.init");
  model.randomize(init_rng);
  const std::vector<Record>& records = train.records();
  for (int e = 1; e <= epochs; ++e) {
    const std::vector<size_t> order =
        shuffled_order(records.size(), rng.fork("central.shuffle.e" + std::to_string(e)));
    const double loss = model.sgd_epoch(records, order, batch_size, learning_rate);
    if (!std::isfinite(loss))
      throw NumericalError("training diverged (non-finite loss) at epoch " +
                           std::to_string(e));
  }
  return model;
}

}  // namespace fairfl
