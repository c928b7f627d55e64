#pragma once

#include <memory>
#include <vector>

#include "fairfl/dataset.hpp"
#include "fairfl/rng.hpp"
#include "fairfl/score_model.hpp"

namespace fairfl {

struct GaussianComponent {
  std::vector<double> mean;   // length feature_dim
  double stddev = 1.0;        // isotropic
};

// Generative description of a client group. Two modes:
//  - Gaussian: features drawn from per-(group, class) isotropic Gaussians;
//  - Discrete: a single categorical feature with per-(group, class) pmf,
//    which makes exact brute-force enumeration possible.
// Posteriors are available in closed form either way, so the generator also
// returns the exact Bayes-optimal score model.
struct SyntheticSpec {
  enum class Mode { Gaussian, Discrete };
  Mode mode = Mode::Gaussian;

  int num_classes = 0;
  int num_clients = 0;
  int feature_dim = 0;

  std::vector<double> sensitive_fraction;  // per client: Pr(A=1 | C=c)
  std::vector<std::vector<std::vector<double>>> class_prior;  // [client][group][class]
  std::vector<int> samples_per_client;

  // Gaussian mode
  std::vector<std::vector<GaussianComponent>> feature_dist;  // [group][class]
  // Per-client widening of the feature noise (difficulty); 1.0 everywhere by
  // default. Lets scenarios make clients genuinely non-identical.
  std::vector<double> client_stddev_scale;

  // Discrete mode: pmf over feature values, feature_dim must be 1
  std::vector<std::vector<std::vector<double>>> feature_pmf;  // [group][class][value]
};

void validate_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticData {
  ClientGroupDataset data;
  std::shared_ptr<const ScoreModel> oracle;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, RngStream rng);

// Just the oracle, no sampling.
std::shared_ptr<const ScoreModel> make_oracle_model(const SyntheticSpec& spec);

// 3-class, 2-feature Gaussian scenario with group 1 noisier than group 0 and
// per-client difficulty spread; `sensitive_fraction` is the per-client
// sensitive-group proportion vector that distinguishes scenarios.
SyntheticSpec make_gaussian_scenario(const std::vector<double>& sensitive_fraction,
                                     int samples_per_client);

}  // namespace fairfl
