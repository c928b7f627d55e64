#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fairfl/rng.hpp"

namespace fairfl {

// One labeled observation. Group, client and class labels use the external
// convention: a in {0,1}, c in {1..K}, y in {1..N}. Conversion to 0-based
// table indices happens at the single boundary where tables are built.
struct Record {
  std::vector<double> features;
  int group = 0;
  int client = 0;
  int label = 0;

  bool operator==(const Record&) const = default;
};

class ClientGroupDataset {
 public:
  ClientGroupDataset() = default;

  // Validates label ranges on construction. When require_all_clients is set,
  // every client id in {1..K} must own at least one record; split outputs and
  // filtered slices relax this.
  ClientGroupDataset(std::vector<Record> records, int num_classes,
                     int num_clients, int feature_dim,
                     bool require_all_clients = true);

  const std::vector<Record>& records() const { return records_; }
  int num_classes() const { return num_classes_; }
  int num_clients() const { return num_clients_; }
  int feature_dim() const { return feature_dim_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Records belonging to client c (1-based), in dataset order.
  std::vector<Record> client_records(int client) const;
  ClientGroupDataset client_slice(int client) const;
  size_t client_count(int client) const;

  bool operator==(const ClientGroupDataset&) const = default;

 private:
  std::vector<Record> records_;
  int num_classes_ = 0;
  int num_clients_ = 0;
  int feature_dim_ = 0;
};

// CSV schema: header `f0,...,f{d-1},a,c,y`; one record per line.
ClientGroupDataset read_csv(std::istream& in);
ClientGroupDataset read_csv_file(const std::string& path);
void write_csv(const ClientGroupDataset& data, std::ostream& out);
void write_csv_file(const ClientGroupDataset& data, const std::string& path);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct DatasetSplit {
  ClientGroupDataset train;
  ClientGroupDataset validation;
  ClientGroupDataset test;
};

// Per-client partition: each client's records are shuffled (stream forked by
// client id) and allotted by largest remainder, so per-client part sizes are
// within one record of the requested proportions. Union of parts equals the
// input, parts are disjoint.
DatasetSplit split_dataset(const ClientGroupDataset& data,
                           const SplitFractions& fractions, RngStream rng);

}  // namespace fairfl
