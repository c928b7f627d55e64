#include "fairfl/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fairfl/error.hpp"

namespace fairfl {

using nlohmann::json;

SoftmaxModel::SoftmaxModel(int num_classes, int feature_dim, int num_clients,
                           SoftmaxConfig cfg)
    : num_classes_(num_classes),
      feature_dim_(feature_dim),
      num_clients_(num_clients),
      cfg_(cfg) {
  if (num_classes_ < 2) throw InputError("softmax model needs >= 2 classes");
  if (feature_dim_ < 1) throw InputError("softmax model needs feature_dim >= 1");
  const int in = input_dim();
  size_t n;
  if (cfg_.hidden_units > 0) {
    const size_t h = static_cast<size_t>(cfg_.hidden_units);
    n = h * static_cast<size_t>(in) + h +
        static_cast<size_t>(num_classes_) * h + static_cast<size_t>(num_classes_);
  } else {
    n = static_cast<size_t>(num_classes_) * static_cast<size_t>(in) +
        static_cast<size_t>(num_classes_);
  }
  params_.assign(n, 0.0);
}

void SoftmaxModel::randomize(RngStream& rng, double scale) {
  for (double& p : params_) p = scale * rng.next_gaussian();
}

int SoftmaxModel::input_dim() const {
  return feature_dim_ + 1 + (cfg_.include_client_onehot ? num_clients_ : 0);
}

void SoftmaxModel::assemble_input(std::span<const double> x, int group,
                                  int client, std::vector<double>& in) const {
  in.assign(static_cast<size_t>(input_dim()), 0.0);
  std::copy(x.begin(), x.end(), in.begin());
  in[static_cast<size_t>(feature_dim_)] = static_cast<double>(group);
  if (cfg_.include_client_onehot)
    in[static_cast<size_t>(feature_dim_ + client)] = 1.0;  // client is 1-based
}

void SoftmaxModel::forward(const std::vector<double>& in,
                           std::vector<double>& hidden,
                           std::vector<double>& probs) const {
  const int d = input_dim();
  const int N = num_classes_;
  const int h = cfg_.hidden_units;
  std::vector<double> logits(static_cast<size_t>(N), 0.0);
  if (h > 0) {
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<size_t>(h) * static_cast<size_t>(d);
    const double* w2 = b1 + h;
    const double* b2 = w2 + static_cast<size_t>(N) * static_cast<size_t>(h);
    hidden.assign(static_cast<size_t>(h), 0.0);
    for (int i = 0; i < h; ++i) {
      double s = b1[i];
      for (int j = 0; j < d; ++j) s += w1[static_cast<size_t>(i) * d + j] * in[static_cast<size_t>(j)];
      hidden[static_cast<size_t>(i)] = s > 0.0 ? s : 0.0;
    }
    for (int y = 0; y < N; ++y) {
      double s = b2[y];
      for (int i = 0; i < h; ++i) s += w2[static_cast<size_t>(y) * h + i] * hidden[static_cast<size_t>(i)];
      logits[static_cast<size_t>(y)] = s;
    }
  } else {
    const double* w = params_.data();
    const double* b = w + static_cast<size_t>(N) * static_cast<size_t>(d);
    for (int y = 0; y < N; ++y) {
      double s = b[y];
      for (int j = 0; j < d; ++j) s += w[static_cast<size_t>(y) * d + j] * in[static_cast<size_t>(j)];
      logits[static_cast<size_t>(y)] = s;
    }
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  probs.assign(static_cast<size_t>(N), 0.0);
  for (int y = 0; y < N; ++y) {
    probs[static_cast<size_t>(y)] = std::exp(logits[static_cast<size_t>(y)] - mx);
    z += probs[static_cast<size_t>(y)];
  }
  for (double& p : probs) p /= z;
}

std::vector<double> SoftmaxModel::score(std::span<const double> x, int group,
                                        int client) const {
  std::vector<double> in, hidden, probs;
  assemble_input(x, group, client, in);
  forward(in, hidden, probs);
  return probs;
}

double SoftmaxModel::sgd_epoch(const std::vector<Record>& records,
                               const std::vector<size_t>& order,
                               int batch_size, double learning_rate) {
  if (records.empty()) throw InputError("sgd_epoch on empty record set");
  const int d = input_dim();
  const int N = num_classes_;
  const int h = cfg_.hidden_units;
  std::vector<double> grad(params_.size(), 0.0);
  std::vector<double> in, hidden, probs;
  double total_loss = 0.0;

  size_t pos = 0;
  while (pos < order.size()) {
    const size_t end = std::min(order.size(), pos + static_cast<size_t>(batch_size));
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(end - pos);
    for (size_t k = pos; k < end; ++k) {
      const Record& r = records[order[k]];
      assemble_input(r.features, r.group, r.client, in);
      forward(in, hidden, probs);
      const int target = r.label - 1;
      total_loss += -std::log(std::max(probs[static_cast<size_t>(target)], 1e-300));

      // d(loss)/d(logit_y) = p_y - 1{y == target}
      std::vector<double> dlogit(probs);
      dlogit[static_cast<size_t>(target)] -= 1.0;
      if (h > 0) {
        double* gw1 = grad.data();
        double* gb1 = gw1 + static_cast<size_t>(h) * static_cast<size_t>(d);
        double* gw2 = gb1 + h;
        double* gb2 = gw2 + static_cast<size_t>(N) * static_cast<size_t>(h);
        const double* w2 = params_.data() + static_cast<size_t>(h) * static_cast<size_t>(d) + h;
        std::vector<double> dhidden(static_cast<size_t>(h), 0.0);
        for (int y = 0; y < N; ++y) {
          gb2[y] += dlogit[static_cast<size_t>(y)];
          for (int i = 0; i < h; ++i) {
            gw2[static_cast<size_t>(y) * h + i] += dlogit[static_cast<size_t>(y)] * hidden[static_cast<size_t>(i)];
            dhidden[static_cast<size_t>(i)] += dlogit[static_cast<size_t>(y)] * w2[static_cast<size_t>(y) * h + i];
          }
        }
        for (int i = 0; i < h; ++i) {
          if (hidden[static_cast<size_t>(i)] <= 0.0) continue;  // ReLU gate
          gb1[i] += dhidden[static_cast<size_t>(i)];
          for (int j = 0; j < d; ++j)
            gw1[static_cast<size_t>(i) * d + j] += dhidden[static_cast<size_t>(i)] * in[static_cast<size_t>(j)];
        }
      } else {
        double* gw = grad.data();
        double* gb = gw + static_cast<size_t>(N) * static_cast<size_t>(d);
        for (int y = 0; y < N; ++y) {
          gb[y] += dlogit[static_cast<size_t>(y)];
          for (int j = 0; j < d; ++j)
            gw[static_cast<size_t>(y) * d + j] += dlogit[static_cast<size_t>(y)] * in[static_cast<size_t>(j)];
        }
      }
    }
    for (size_t i = 0; i < params_.size(); ++i)
      params_[i] -= learning_rate * inv_b * grad[i];
    pos = end;
  }
  return total_loss / static_cast<double>(order.size());
}

double SoftmaxModel::mean_loss(const std::vector<Record>& records) const {
  double total = 0.0;
  std::vector<double> in, hidden, probs;
  for (const Record& r : records) {
    assemble_input(r.features, r.group, r.client, in);
    forward(in, hidden, probs);
    total += -std::log(std::max(probs[static_cast<size_t>(r.label - 1)], 1e-300));
  }
  return records.empty() ? 0.0 : total / static_cast<double>(records.size());
}

double SoftmaxModel::training_accuracy(const std::vector<Record>& records) const {
  if (records.empty()) return 0.0;
  size_t hits = 0;
  for (const Record& r : records)
    if (predict_argmax(*this, r) == r.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

void save_checkpoint(const SoftmaxModel& model, const std::string& path) {
  json j;
  j["version"] = 1;
  j["kind"] = "softmax";
  j["num_classes"] = model.num_classes();
  j["feature_dim"] = model.feature_dim();
  j["num_clients"] = model.num_clients();
  j["hidden_units"] = model.config().hidden_units;
  j["include_client_onehot"] = model.config().include_client_onehot;
  j["params"] = model.params();
  std::ofstream out(path);
  if (!out) throw InputError("cannot open checkpoint file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw InputError("failed writing checkpoint: " + path);
}

SoftmaxModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("version", 0) != 1)
    throw InputError("unsupported checkpoint version in " + path);
  if (j.value("kind", "") != "softmax")
    throw InputError("unsupported checkpoint kind in " + path);
  SoftmaxConfig cfg;
  cfg.hidden_units = j.at("hidden_units").get<int>();
  cfg.include_client_onehot = j.at("include_client_onehot").get<bool>();
  SoftmaxModel model(j.at("num_classes").get<int>(),
                     j.at("feature_dim").get<int>(),
                     j.at("num_clients").get<int>(), cfg);
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != model.params().size())
    throw InputError("checkpoint parameter count mismatch in " + path);
  model.params() = std::move(params);
  return model;
}

}  // namespace fairfl
