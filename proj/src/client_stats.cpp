#include "fairfl/client_stats.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fairfl/error.hpp"

namespace fairfl {

using nlohmann::json;

BasePredictor make_argmax_predictor(std::shared_ptr<const ScoreModel> model) {
  return [model = std::move(model)](std::span<const double> x, int group,
                                    int client) {
    return predict_argmax(*model, x, group, client);
  };
}

ClientStats compute_client_stats(const ClientGroupDataset& slice, int client,
                                 const BasePredictor& base_predictor) {
  if (slice.empty())
    throw InputError("client " + std::to_string(client) + ": empty slice");
  const int N = slice.num_classes();
  ClientStats stats;
  stats.client = client;
  stats.num_classes = N;
  stats.sample_count = static_cast<long long>(slice.size());
  stats.joint_tp_table.assign(static_cast<size_t>(N) * 2, 0.0);
  stats.base_table.assign(static_cast<size_t>(N) * 2, 0.0);
  stats.sp_joint_table.assign(static_cast<size_t>(N) * N * 2, 0.0);
  stats.sp_pred_table.assign(static_cast<size_t>(N) * 2, 0.0);

  const double inv_n = 1.0 / static_cast<double>(slice.size());
  for (const Record& r : slice.records()) {
    if (r.client != client)
      throw InputError("record for client " + std::to_string(r.client) +
                       " in slice of client " + std::to_string(client));
    const int pred = base_predictor(r.features, r.group, r.client);
    const int y = r.label - 1, j = pred - 1, a = r.group;
    stats.base(y, a) += inv_n;
    if (pred == r.label) stats.joint_tp(y, a) += inv_n;
    stats.sp_joint(y, j, a) += inv_n;
    stats.sp_pred(j, a) += inv_n;
    stats.group_mass[static_cast<size_t>(a)] += inv_n;
  }
  return stats;
}

double laplace_scale(long long sample_count, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("dp epsilon must be positive");
  if (std::isinf(epsilon)) return 0.0;
  return 1.0 / (static_cast<double>(sample_count) * epsilon);
}

namespace {

void clip01(std::vector<double>& v) {
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
}

void renormalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s > 0.0)
    for (double& x : v) x /= s;
}

}  // namespace

ClientStats apply_laplace(const ClientStats& stats, const DpConfig& dp,
                          RngStream rng) {
  const double b = laplace_scale(stats.sample_count, dp.epsilon);
  if (!dp.enabled || b == 0.0) return stats;

  ClientStats noised = stats;
  RngStream stream = rng.fork("dp.client" + std::to_string(stats.client));
  for (double& x : noised.joint_tp_table) x += stream.next_laplace(b);
  for (double& x : noised.base_table) x += stream.next_laplace(b);
  for (double& x : noised.sp_joint_table) x += stream.next_laplace(b);
  for (double& x : noised.sp_pred_table) x += stream.next_laplace(b);
  for (double& x : noised.group_mass) x += stream.next_laplace(b);

  // Sanitation happens after the noise, so the released values stay
  // differentially private by post-processing.
  clip01(noised.joint_tp_table);
  clip01(noised.base_table);
  clip01(noised.sp_joint_table);
  clip01(noised.sp_pred_table);
  renormalize(noised.base_table);
  renormalize(noised.sp_pred_table);
  for (int y = 0; y < noised.num_classes; ++y)
    for (int a = 0; a < 2; ++a)
      noised.joint_tp(y, a) = std::min(noised.joint_tp(y, a), noised.base(y, a));
  for (size_t a = 0; a < 2; ++a)
    noised.group_mass[a] = std::clamp(noised.group_mass[a], 0.0, 1.0);
  const double gm = noised.group_mass[0] + noised.group_mass[1];
  if (gm > 0.0) {
    noised.group_mass[0] /= gm;
    noised.group_mass[1] /= gm;
  }
  return noised;
}

std::string stats_to_message(const ClientStats& stats) {
  json j;
  j["version"] = 1;
  j["type"] = "client_stats";
  j["client"] = stats.client;
  j["sample_count"] = stats.sample_count;
  j["num_classes"] = stats.num_classes;
  j["joint_tp"] = stats.joint_tp_table;
  j["base"] = stats.base_table;
  j["sp_joint"] = stats.sp_joint_table;
  j["sp_pred"] = stats.sp_pred_table;
  j["group_mass"] = std::vector<double>{stats.group_mass[0], stats.group_mass[1]};
  return j.dump();
}

ClientStats stats_from_message(const std::string& payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed statistics message: ") + e.what());
  }
  if (j.value("version", 0) != 1)
    throw InputError("unsupported statistics message version");
  if (j.value("type", "") != "client_stats")
    throw InputError("unexpected message type for statistics payload");
  ClientStats stats;
  try {
    stats.client = j.at("client").get<int>();
    stats.sample_count = j.at("sample_count").get<long long>();
    stats.num_classes = j.at("num_classes").get<int>();
    stats.joint_tp_table = j.at("joint_tp").get<std::vector<double>>();
    stats.base_table = j.at("base").get<std::vector<double>>();
    stats.sp_joint_table = j.at("sp_joint").get<std::vector<double>>();
    stats.sp_pred_table = j.at("sp_pred").get<std::vector<double>>();
    const auto gm = j.at("group_mass").get<std::vector<double>>();
    if (gm.size() != 2) throw InputError("group_mass must have two entries");
    stats.group_mass = {gm[0], gm[1]};
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed statistics message: ") + e.what());
  }
  const size_t n = static_cast<size_t>(stats.num_classes);
  if (stats.num_classes < 2 || stats.joint_tp_table.size() != n * 2 ||
      stats.base_table.size() != n * 2 ||
      stats.sp_joint_table.size() != n * n * 2 ||
      stats.sp_pred_table.size() != n * 2)
    throw InputError("statistics message has inconsistent table sizes");
  return stats;
}

}  // namespace fairfl
