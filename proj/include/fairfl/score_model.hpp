#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fairfl/dataset.hpp"

namespace fairfl {

// A score function maps (features, group, client) to a probability vector
// over the N classes. Implementations must return entries that are
// nonnegative and sum to 1 within 1e-9.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual int num_classes() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::vector<double> score(std::span<const double> x, int group,
                                    int client) const = 0;
};

// Index of the maximal entry, lowest index on ties; returns a 1-based class.
int argmax_class(std::span<const double> scores);

// The plain argmax predictor derived with unit weights.
int predict_argmax(const ScoreModel& model, std::span<const double> x,
                   int group, int client);
int predict_argmax(const ScoreModel& model, const Record& r);

// Predictor derived via theta: argmax_y theta_y * r_y, lowest index on ties.
// theta must be entrywise nonnegative and not all zero.
int predict_derived(const ScoreModel& model, std::span<const double> x,
                    int group, int client, std::span<const double> theta);

}  // namespace fairfl
