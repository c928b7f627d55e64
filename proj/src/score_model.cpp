#include "fairfl/score_model.hpp"

#include "fairfl/error.hpp"

namespace fairfl {

int argmax_class(std::span<const double> scores) {
  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<int>(best) + 1;
}

int predict_argmax(const ScoreModel& model, std::span<const double> x,
                   int group, int client) {
  const std::vector<double> r = model.score(x, group, client);
  return argmax_class(r);
}

int predict_argmax(const ScoreModel& model, const Record& r) {
  return predict_argmax(model, r.features, r.group, r.client);
}

int predict_derived(const ScoreModel& model, std::span<const double> x,
                    int group, int client, std::span<const double> theta) {
  const std::vector<double> r = model.score(x, group, client);
  if (theta.size() != r.size())
    throw InputError("theta length does not match the number of classes");
  bool any_positive = false;
  for (double t : theta) {
    if (t < 0.0) throw InputError("theta entries must be nonnegative");
    if (t > 0.0) any_positive = true;
  }
  if (!any_positive) throw InputError("theta must not be all zero");
  size_t best = 0;
  double best_v = theta[0] * r[0];
  for (size_t i = 1; i < r.size(); ++i) {
    const double v = theta[i] * r[i];
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return static_cast<int>(best) + 1;
}

}  // namespace fairfl
