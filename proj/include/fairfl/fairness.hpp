#pragma once

#include <string>
#include <vector>

#include "fairfl/dataset.hpp"

namespace fairfl {

enum class Metric { EqualizedOdds, EqualOpportunity, StatisticalParity };

std::string metric_name(Metric m);
Metric parse_metric(const std::string& name);  // "eo" | "eop" | "sp"

// Requested fairness levels. eps value 1 makes the corresponding constraint
// inert.
struct FairnessSpec {
  Metric metric = Metric::EqualizedOdds;
  double eps_global = 1.0;               // epsilon_0
  std::vector<double> eps_local;         // [epsilon_1 .. epsilon_K]

  bool operator==(const FairnessSpec&) const = default;
};

// Broadcast a scalar local level to all K clients.
FairnessSpec make_spec(Metric metric, double eps_global, double eps_local,
                       int num_clients);

// Checks lengths and ranges against the dataset; returns the spec unchanged.
FairnessSpec validate_spec(const FairnessSpec& spec,
                           const ClientGroupDataset& data);

}  // namespace fairfl
