#include "fairfl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fairfl/error.hpp"

namespace fairfl {

ClientGroupDataset::ClientGroupDataset(std::vector<Record> records,
                                       int num_classes, int num_clients,
                                       int feature_dim,
                                       bool require_all_clients)
    : records_(std::move(records)),
      num_classes_(num_classes),
      num_clients_(num_clients),
      feature_dim_(feature_dim) {
  if (num_classes_ < 2) throw InputError("num_classes must be >= 2");
  if (num_clients_ < 1) throw InputError("num_clients must be >= 1");
  if (feature_dim_ < 1) throw InputError("feature_dim must be >= 1");
  std::vector<char> seen(static_cast<size_t>(num_clients_), 0);
  for (size_t i = 0; i < records_.size(); ++i) {
    const Record& r = records_[i];
    if (r.group != 0 && r.group != 1)
      throw InputError("record " + std::to_string(i) + ": group must be 0 or 1");
    if (r.client < 1 || r.client > num_clients_)
      throw InputError("record " + std::to_string(i) + ": client " +
                       std::to_string(r.client) + " outside {1.." +
                       std::to_string(num_clients_) + "}");
    if (r.label < 1 || r.label > num_classes_)
      throw InputError("record " + std::to_string(i) + ": class " +
                       std::to_string(r.label) + " outside {1.." +
                       std::to_string(num_classes_) + "}");
    if (static_cast<int>(r.features.size()) != feature_dim_)
      throw InputError("record " + std::to_string(i) + ": feature dim " +
                       std::to_string(r.features.size()) + " != " +
                       std::to_string(feature_dim_));
    seen[static_cast<size_t>(r.client - 1)] = 1;
  }
  if (require_all_clients) {
    for (int c = 1; c <= num_clients_; ++c) {
      if (!seen[static_cast<size_t>(c - 1)])
        throw InputError("client " + std::to_string(c) + " owns no records");
    }
  }
}

std::vector<Record> ClientGroupDataset::client_records(int client) const {
  std::vector<Record> out;
  for (const Record& r : records_)
    if (r.client == client) out.push_back(r);
  return out;
}

ClientGroupDataset ClientGroupDataset::client_slice(int client) const {
  return ClientGroupDataset(client_records(client), num_classes_, num_clients_,
                            feature_dim_, /*require_all_clients=*/false);
}

size_t ClientGroupDataset::client_count(int client) const {
  size_t n = 0;
  for (const Record& r : records_)
    if (r.client == client) ++n;
  return n;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_real(const std::string& s, size_t line_no, const std::string& col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse '" +
                     s + "' as real for column " + col);
  }
}

int parse_int(const std::string& s, size_t line_no, const std::string& col) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw InputError("line " + std::to_string(line_no) + ": cannot parse '" +
                     s + "' as integer for column " + col);
  return v;
}

}  // namespace

ClientGroupDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV: missing header");
  const std::vector<std::string> header = split_line(line);
  for (const char* col : {"a", "c", "y"})
    if (std::find(header.begin(), header.end(), std::string(col)) == header.end())
      throw InputError(std::string("CSV header: missing column ") + col);
  if (header.size() < 4)
    throw InputError("CSV header must contain f0..f{d-1},a,c,y");
  const int d = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < d; ++j) {
    if (header[static_cast<size_t>(j)] != "f" + std::to_string(j))
      throw InputError("CSV header: expected column f" + std::to_string(j) +
                       ", found '" + header[static_cast<size_t>(j)] + "'");
  }
  const char* tail[3] = {"a", "c", "y"};
  for (int j = 0; j < 3; ++j) {
    if (header[static_cast<size_t>(d + j)] != tail[j])
      throw InputError(std::string("CSV header: missing column ") + tail[j]);
  }

  std::vector<Record> records;
  size_t line_no = 1;
  int max_client = 0, max_class = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    Record r;
    r.features.resize(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j)
      r.features[static_cast<size_t>(j)] =
          parse_real(cells[static_cast<size_t>(j)], line_no, "f" + std::to_string(j));
    r.group = parse_int(cells[static_cast<size_t>(d)], line_no, "a");
    r.client = parse_int(cells[static_cast<size_t>(d + 1)], line_no, "c");
    r.label = parse_int(cells[static_cast<size_t>(d + 2)], line_no, "y");
    max_client = std::max(max_client, r.client);
    max_class = std::max(max_class, r.label);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw InputError("CSV contains no records");
  return ClientGroupDataset(std::move(records), std::max(2, max_class),
                            max_client, d);
}

ClientGroupDataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path);
  return read_csv(in);
}

void write_csv(const ClientGroupDataset& data, std::ostream& out) {
  for (int j = 0; j < data.feature_dim(); ++j) out << "f" << j << ",";
  out << "a,c,y\n";
  char buf[64];
  for (const Record& r : data.records()) {
    for (double v : r.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << buf << ",";
    }
    out << r.group << "," << r.client << "," << r.label << "\n";
  }
}

void write_csv_file(const ClientGroupDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_csv(data, out);
  if (!out) throw InputError("failed writing dataset file: " + path);
}

DatasetSplit split_dataset(const ClientGroupDataset& data,
                           const SplitFractions& fractions, RngStream rng) {
  const double f[3] = {fractions.train, fractions.validation, fractions.test};
  double sum = 0.0;
  for (double v : f) {
    if (v < 0.0) throw InputError("split fractions must be nonnegative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw InputError("split fractions must sum to 1");
  int parts = 0;
  for (double v : f) parts += v > 0.0 ? 1 : 0;
  if (parts == 0) throw InputError("at least one split fraction must be positive");

  // The shuffle decides membership only; each part keeps the input's record
  // order, so a fraction-1 part reproduces the input exactly.
  std::vector<std::vector<size_t>> part_indices(3);
  for (int c = 1; c <= data.num_clients(); ++c) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < data.size(); ++i)
      if (data.records()[i].client == c) idx.push_back(i);
    const size_t n = idx.size();
    if (static_cast<int>(n) < parts)
      throw InputError("client " + std::to_string(c) + " has " +
                       std::to_string(n) + " records, fewer than the " +
                       std::to_string(parts) + " requested parts");
    RngStream client_rng = rng.fork("split.client" + std::to_string(c));
    client_rng.shuffle(idx);

    // Largest-remainder allotment over the three parts.
    size_t counts[3];
    double rem[3];
    size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      const double want = f[k] * static_cast<double>(n);
      counts[k] = static_cast<size_t>(std::floor(want + 1e-12));
      rem[k] = want - static_cast<double>(counts[k]);
      assigned += counts[k];
    }
    while (assigned < n) {
      int best = -1;
      for (int k = 0; k < 3; ++k) {
        if (f[k] <= 0.0) continue;
        if (best < 0 || rem[k] > rem[best]) best = k;
      }
      counts[static_cast<size_t>(best)]++;
      rem[best] -= 1.0;
      ++assigned;
    }

    size_t pos = 0;
    for (int k = 0; k < 3; ++k)
      for (size_t i = 0; i < counts[k]; ++i)
        part_indices[static_cast<size_t>(k)].push_back(idx[pos++]);
  }

  auto make = [&](std::vector<size_t>& indices) {
    std::sort(indices.begin(), indices.end());
    std::vector<Record> recs;
    recs.reserve(indices.size());
    for (size_t i : indices) recs.push_back(data.records()[i]);
    return ClientGroupDataset(std::move(recs), data.num_classes(),
                              data.num_clients(), data.feature_dim(),
                              /*require_all_clients=*/false);
  };
  return DatasetSplit{make(part_indices[0]), make(part_indices[1]),
                      make(part_indices[2])};
}

}  // namespace fairfl
