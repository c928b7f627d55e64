#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairfl/rng.hpp"
#include "fairfl/score_model.hpp"

namespace fairfl {

struct SoftmaxConfig {
  int hidden_units = 0;              // 0 = plain softmax regression
  bool include_client_onehot = false;

  bool operator==(const SoftmaxConfig&) const = default;
};

// Multinomial logistic model over the input [x, a] (optionally extended with
// a one-hot client encoding). With hidden_units > 0 a single ReLU layer is
// inserted before the softmax.
class SoftmaxModel final : public ScoreModel {
 public:
  SoftmaxModel() = default;
  SoftmaxModel(int num_classes, int feature_dim, int num_clients,
               SoftmaxConfig cfg);

  void randomize(RngStream& rng, double scale = 0.05);

  int num_classes() const override { return num_classes_; }
  int feature_dim() const override { return feature_dim_; }
  int num_clients() const { return num_clients_; }
  const SoftmaxConfig& config() const { return cfg_; }

  std::vector<double> score(std::span<const double> x, int group,
                            int client) const override;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // One pass over the records in the given order, minibatch SGD on the
  // categorical cross-entropy. Returns the mean loss over the pass.
  double sgd_epoch(const std::vector<Record>& records,
                   const std::vector<size_t>& order, int batch_size,
                   double learning_rate);

  double mean_loss(const std::vector<Record>& records) const;
  double training_accuracy(const std::vector<Record>& records) const;

  bool operator==(const SoftmaxModel& other) const {
    return num_classes_ == other.num_classes_ &&
           feature_dim_ == other.feature_dim_ &&
           num_clients_ == other.num_clients_ && cfg_ == other.cfg_ &&
           params_ == other.params_;
  }

 private:
  int input_dim() const;
  void assemble_input(std::span<const double> x, int group, int client,
                      std::vector<double>& in) const;
  // forward to class probabilities; hidden activations written when h > 0
  void forward(const std::vector<double>& in, std::vector<double>& hidden,
               std::vector<double>& probs) const;

  int num_classes_ = 0;
  int feature_dim_ = 0;
  int num_clients_ = 0;
  SoftmaxConfig cfg_;
  std::vector<double> params_;
};

// Checkpoint files embed (N, d, K, input convention) and round-trip the
// parameters bit-exactly.
void save_checkpoint(const SoftmaxModel& model, const std::string& path);
SoftmaxModel load_checkpoint(const std::string& path);

}  // namespace fairfl
