#include "fairfl/fair_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fairfl/error.hpp"

namespace fairfl {

using nlohmann::json;

std::vector<double> SpRandomization::column(int a, int c, int j) const {
  std::vector<double> col(static_cast<size_t>(num_classes));
  for (int y = 0; y < num_classes; ++y) col[static_cast<size_t>(y)] = at(a, c, y, j);
  return col;
}

bool in_simplex_hull(std::span<const double> tp1, std::span<const double> z,
                     double tol) {
  const double tp_sum = std::accumulate(tp1.begin(), tp1.end(), 0.0);
  const double z_sum = std::accumulate(z.begin(), z.end(), 0.0);
  if (std::fabs(tp_sum - 1.0) < 1e-9) return false;  // degenerate vertex set
  const double f0 = (z_sum - 1.0) / (tp_sum - 1.0);
  if (f0 < -tol || f0 > 1.0 + tol) return false;
  for (size_t y = 0; y < z.size(); ++y) {
    const double fy = z[y] - tp1[y] * f0;
    if (fy < -tol || fy > 1.0 + tol) return false;
  }
  return true;
}

std::vector<double> solve_lae(std::span<const double> tp1,
                              std::span<const double> z) {
  if (tp1.size() != z.size() || tp1.empty())
    throw InputError("solve_lae: tp1 and z must have equal nonzero length");
  const double tp_sum = std::accumulate(tp1.begin(), tp1.end(), 0.0);
  if (std::fabs(tp_sum - 1.0) < 1e-9)
    throw NumericalError(
        "solve_lae: sum of TP(Y1) equals 1, the system matrix is singular; "
        "use the barycentric LP form, whose coefficients are the weights");
  if (!in_simplex_hull(tp1, z))
    throw InputError("solve_lae: target z lies outside the simplex hull");

  const size_t N = z.size();
  std::vector<double> beta(N + 1, 0.0);
  const double z_sum = std::accumulate(z.begin(), z.end(), 0.0);
  beta[0] = (z_sum - 1.0) / (tp_sum - 1.0);
  for (size_t y = 0; y < N; ++y) beta[y + 1] = z[y] - tp1[y] * beta[0];

  // Clamp near-boundary round-off; anything larger is a real inconsistency.
  constexpr double kClampTol = 1e-9;
  double sum = 0.0;
  for (double& b : beta) {
    if (b < 0.0) {
      if (b < -kClampTol)
        throw NumericalError("solve_lae: weight " + std::to_string(b) +
                             " below 0 beyond clamp tolerance");
      b = 0.0;
    } else if (b > 1.0) {
      if (b > 1.0 + kClampTol)
        throw NumericalError("solve_lae: weight " + std::to_string(b) +
                             " above 1 beyond clamp tolerance");
      b = 1.0;
    }
    sum += b;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw NumericalError("solve_lae: weights sum to " + std::to_string(sum));
  for (double& b : beta) b /= sum;
  // Snap the exact identity so an inert LP reproduces the base predictor
  // bit for bit.
  if (std::fabs(beta[0] - 1.0) < 1e-12) {
    std::fill(beta.begin(), beta.end(), 0.0);
    beta[0] = 1.0;
  }
  return beta;
}

std::vector<double> expected_operating_point(std::span<const double> beta,
                                             std::span<const double> tp1) {
  if (beta.size() != tp1.size() + 1)
    throw InputError("expected_operating_point: beta must have length N+1");
  std::vector<double> z(tp1.size());
  for (size_t y = 0; y < tp1.size(); ++y)
    z[y] = tp1[y] * beta[0] + beta[y + 1];
  return z;
}

int eo_class_from_uniform(std::span<const double> beta, double s,
                          int base_class) {
  if (s <= beta[0]) return base_class;
  double acc = beta[0];
  for (size_t y = 1; y < beta.size(); ++y) {
    acc += beta[y];
    if (s <= acc) return static_cast<int>(y);
  }
  return static_cast<int>(beta.size()) - 1;  // s beyond round-off tail
}

int sp_class_from_uniform(std::span<const double> column, double s) {
  double acc = 0.0;
  for (size_t y = 0; y < column.size(); ++y) {
    acc += column[y];
    if (s <= acc) return static_cast<int>(y) + 1;
  }
  return static_cast<int>(column.size());
}

SubgroupRng::SubgroupRng(uint64_t seed, std::string_view label,
                         int num_clients) {
  streams_.reserve(static_cast<size_t>(2) * num_clients);
  for (int c = 0; c < num_clients; ++c)
    for (int a = 0; a < 2; ++a)
      streams_.push_back(RngStream(seed, std::string(label) + "/cell.a" +
                                             std::to_string(a) + ".c" +
                                             std::to_string(c + 1)));
}

RngStream& SubgroupRng::stream(int a, int c) {
  const size_t i = static_cast<size_t>(c - 1) * 2 + static_cast<size_t>(a);
  if (i >= streams_.size())
    throw InputError("subgroup rng: no stream for client " + std::to_string(c));
  return streams_[i];
}

int predict_eo(const FairPredictor& pred, std::span<const double> x, int a,
               int c, SubgroupRng& rng) {
  if (pred.mix.num_classes == 0 || c < 1 || c > pred.mix.num_clients)
    throw InputError("predict: no mixing weights for client " + std::to_string(c));
  const std::span<const double> beta = pred.mix.at(a, c - 1);
  const int base_class = predict_argmax(*pred.base, x, a, c);
  if (beta[0] == 1.0) return base_class;  // skip the draw: exact identity
  const double s = rng.stream(a, c).next_open_uniform();
  return eo_class_from_uniform(beta, s, base_class);
}

int predict_sp(const FairPredictor& pred, std::span<const double> x, int a,
               int c, SubgroupRng& rng) {
  if (pred.sp.num_classes == 0 || c < 1 || c > pred.sp.num_clients)
    throw InputError("predict: no randomization table for client " +
                     std::to_string(c));
  const int j = predict_argmax(*pred.base, x, a, c);
  const std::vector<double> col = pred.sp.column(a, c - 1, j - 1);
  double sum = 0.0;
  for (double v : col) sum += v;
  if (std::fabs(sum - 1.0) > 1e-6)
    throw NumericalError("predict: randomization column for base output " +
                         std::to_string(j) + " sums to " + std::to_string(sum));
  if (col[static_cast<size_t>(j - 1)] == 1.0) return j;
  const double s = rng.stream(a, c).next_open_uniform();
  return sp_class_from_uniform(col, s);
}

int predict(const FairPredictor& pred, std::span<const double> x, int a, int c,
            SubgroupRng& rng) {
  return pred.metric == Metric::StatisticalParity
             ? predict_sp(pred, x, a, c, rng)
             : predict_eo(pred, x, a, c, rng);
}

void save_bundle(const FairPredictor& pred, const std::string& model_ref,
                 const std::string& path) {
  json j;
  j["version"] = 1;
  j["kind"] = "fair_predictor";
  j["metric"] = metric_name(pred.metric);
  j["model_ref"] = model_ref;
  if (pred.metric == Metric::StatisticalParity) {
    j["num_classes"] = pred.sp.num_classes;
    j["num_clients"] = pred.sp.num_clients;
    j["sp_table"] = pred.sp.table;
  } else {
    j["num_classes"] = pred.mix.num_classes;
    j["num_clients"] = pred.mix.num_clients;
    j["mix_table"] = pred.mix.table;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot open bundle file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw InputError("failed writing bundle: " + path);
}

LoadedBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open bundle file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed bundle " + path + ": " + e.what());
  }
  if (j.value("version", 0) != 1)
    throw InputError("unsupported bundle version in " + path);
  if (j.value("kind", "") != "fair_predictor")
    throw InputError("unsupported bundle kind in " + path);
  LoadedBundle out;
  out.model_ref = j.value("model_ref", "");
  out.predictor.metric = parse_metric(j.at("metric").get<std::string>());
  const int N = j.at("num_classes").get<int>();
  const int K = j.at("num_clients").get<int>();
  if (out.predictor.metric == Metric::StatisticalParity) {
    out.predictor.sp.resize(N, K);
    auto t = j.at("sp_table").get<std::vector<double>>();
    if (t.size() != out.predictor.sp.table.size())
      throw InputError("bundle table size mismatch in " + path);
    out.predictor.sp.table = std::move(t);
  } else {
    out.predictor.mix.resize(N, K);
    auto t = j.at("mix_table").get<std::vector<double>>();
    if (t.size() != out.predictor.mix.table.size())
      throw InputError("bundle table size mismatch in " + path);
    out.predictor.mix.table = std::move(t);
  }
  return out;
}

}  // namespace fairfl
