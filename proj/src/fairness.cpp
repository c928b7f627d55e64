#include "fairfl/fairness.hpp"

#include "fairfl/error.hpp"

namespace fairfl {

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::EqualizedOdds: return "eo";
    case Metric::EqualOpportunity: return "eop";
    case Metric::StatisticalParity: return "sp";
  }
  return "?";
}

Metric parse_metric(const std::string& name) {
  if (name == "eo") return Metric::EqualizedOdds;
  if (name == "eop") return Metric::EqualOpportunity;
  if (name == "sp") return Metric::StatisticalParity;
  throw InputError("unknown fairness metric '" + name + "' (expected eo|eop|sp)");
}

FairnessSpec make_spec(Metric metric, double eps_global, double eps_local,
                       int num_clients) {
  FairnessSpec spec;
  spec.metric = metric;
  spec.eps_global = eps_global;
  spec.eps_local.assign(static_cast<size_t>(num_clients), eps_local);
  return spec;
}

FairnessSpec validate_spec(const FairnessSpec& spec,
                           const ClientGroupDataset& data) {
  if (static_cast<int>(spec.eps_local.size()) != data.num_clients())
    throw InputError("eps_local has length " +
                     std::to_string(spec.eps_local.size()) + " but K = " +
                     std::to_string(data.num_clients()));
  if (spec.eps_global < 0.0 || spec.eps_global > 1.0)
    throw InputError("eps_global must lie in [0,1]");
  for (size_t c = 0; c < spec.eps_local.size(); ++c) {
    if (spec.eps_local[c] < 0.0 || spec.eps_local[c] > 1.0)
      throw InputError("eps_local[" + std::to_string(c + 1) +
                       "] must lie in [0,1]");
  }
  return spec;
}

}  // namespace fairfl
