#include <doctest.h>

#include <sstream>

#include "fairfl/dataset.hpp"
#include "fairfl/error.hpp"
#include "fairfl/fairness.hpp"
#include "fairfl/rng.hpp"

using namespace fairfl;

namespace {

ClientGroupDataset toy_dataset(int per_client, int num_clients, uint64_t seed) {
  RngStream rng(seed, "toy");
  std::vector<Record> records;
  for (int c = 1; c <= num_clients; ++c)
    for (int i = 0; i < per_client; ++i) {
      Record r;
      r.features = {rng.next_gaussian(), rng.next_gaussian()};
      r.group = static_cast<int>(rng.next_below(2));
      r.client = c;
      r.label = 1 + static_cast<int>(rng.next_below(3));
      records.push_back(std::move(r));
    }
  return ClientGroupDataset(std::move(records), 3, num_clients, 2);
}

}  // namespace

TEST_CASE("rng streams are deterministic and label-separated") {
  RngStream a(42, "alpha"), a2(42, "alpha"), b(42, "beta");
  std::vector<uint64_t> xs, ys, zs;
  for (int i = 0; i < 16; ++i) {
    xs.push_back(a.next_u64());
    ys.push_back(a2.next_u64());
    zs.push_back(b.next_u64());
  }
  CHECK(xs == ys);
  CHECK(xs != zs);
  RngStream forked = a.fork("child");
  RngStream forked2 = a2.fork("child");
  CHECK(forked.next_u64() == forked2.next_u64());
}

TEST_CASE("uniform draws stay in range") {
  RngStream rng(7, "u");
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double o = rng.next_open_uniform();
    CHECK(o > 0.0);
    CHECK(o < 1.0);
  }
}

TEST_CASE("dataset construction validates labels") {
  std::vector<Record> records{{{0.0}, 0, 1, 1}, {{1.0}, 1, 1, 2}};
  CHECK_NOTHROW(ClientGroupDataset(records, 2, 1, 1));
  auto bad_group = records;
  bad_group[0].group = 2;
  CHECK_THROWS_AS(ClientGroupDataset(bad_group, 2, 1, 1), InputError);
  auto bad_class = records;
  bad_class[0].label = 3;
  CHECK_THROWS_AS(ClientGroupDataset(bad_class, 2, 1, 1), InputError);
  auto bad_client = records;
  bad_client[0].client = 2;
  CHECK_THROWS_AS(ClientGroupDataset(bad_client, 2, 1, 1), InputError);
  // client 2 owns no records
  CHECK_THROWS_AS(ClientGroupDataset(records, 2, 2, 1), InputError);
}

TEST_CASE("split proportions per client") {
  const ClientGroupDataset data = toy_dataset(10, 2, 1);
  const DatasetSplit split =
      split_dataset(data, SplitFractions{0.6, 0.2, 0.2}, RngStream(5, "split"));
  for (int c = 1; c <= 2; ++c) {
    CHECK(split.train.client_count(c) == 6);
    CHECK(split.validation.client_count(c) == 2);
    CHECK(split.test.client_count(c) == 2);
  }
  CHECK(split.train.size() + split.validation.size() + split.test.size() ==
        data.size());
}

TEST_CASE("identity split returns the input unchanged") {
  const ClientGroupDataset data = toy_dataset(7, 3, 2);
  const DatasetSplit split =
      split_dataset(data, SplitFractions{1.0, 0.0, 0.0}, RngStream(5, "split"));
  CHECK(split.train == data);
  CHECK(split.validation.empty());
  CHECK(split.test.empty());
}

TEST_CASE("split is deterministic and disjoint") {
  const ClientGroupDataset data = toy_dataset(23, 3, 3);
  const SplitFractions f{0.6, 0.2, 0.2};
  const DatasetSplit s1 = split_dataset(data, f, RngStream(11, "split"));
  const DatasetSplit s2 = split_dataset(data, f, RngStream(11, "split"));
  CHECK(s1.train == s2.train);
  CHECK(s1.validation == s2.validation);
  CHECK(s1.test == s2.test);

  // union equals input (order-preserving parts partition the records)
  std::vector<Record> merged;
  size_t ti = 0, vi = 0, ei = 0;
  const auto &t = s1.train.records(), &v = s1.validation.records(),
             &e = s1.test.records();
  for (const Record& r : data.records()) {
    if (ti < t.size() && t[ti] == r) {
      ++ti;
    } else if (vi < v.size() && v[vi] == r) {
      ++vi;
    } else {
      REQUIRE(ei < e.size());
      CHECK(e[ei] == r);
      ++ei;
    }
  }
  CHECK(ti == t.size());
  CHECK(vi == v.size());
  CHECK(ei == e.size());
}

TEST_CASE("split errors name the offending client") {
  std::vector<Record> records{{{0.0}, 0, 1, 1}, {{1.0}, 1, 1, 2},
                              {{2.0}, 0, 1, 1}, {{3.0}, 1, 2, 2},
                              {{4.0}, 0, 2, 1}};
  const ClientGroupDataset data(records, 2, 2, 1);
  try {
    split_dataset(data, SplitFractions{0.6, 0.2, 0.2}, RngStream(1, "s"));
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("client 2") != std::string::npos);
  }
  // two records suffice when only two fractions are positive
  CHECK_NOTHROW(
      split_dataset(data, SplitFractions{0.5, 0.5, 0.0}, RngStream(1, "s")));
}

TEST_CASE("csv round-trip is record-identical") {
  const ClientGroupDataset data = toy_dataset(31, 2, 9);
  std::stringstream ss;
  write_csv(data, ss);
  const ClientGroupDataset back = read_csv(ss);
  CHECK(back == data);
}

TEST_CASE("csv parse errors carry line numbers") {
  std::stringstream missing_col("f0,a,y\n0.5,0,1\n");
  CHECK_THROWS_WITH_AS(read_csv(missing_col),
                       doctest::Contains("missing column c"), InputError);

  std::stringstream bad_cell("f0,a,c,y\n0.5,0,1,1\nx,0,1,1\n");
  try {
    read_csv(bad_cell);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::stringstream short_row("f0,a,c,y\n0.5,0,1\n");
  CHECK_THROWS_AS(read_csv(short_row), InputError);
}

TEST_CASE("validate_spec checks lengths and ranges") {
  const ClientGroupDataset data = toy_dataset(4, 2, 4);
  FairnessSpec ok = make_spec(Metric::EqualizedOdds, 0.01, 0.01, 2);
  CHECK_NOTHROW(validate_spec(ok, data));

  FairnessSpec wrong_len = make_spec(Metric::EqualizedOdds, 0.01, 0.01, 3);
  CHECK_THROWS_AS(validate_spec(wrong_len, data), InputError);

  FairnessSpec bad_global = make_spec(Metric::EqualizedOdds, 1.2, 0.01, 2);
  CHECK_THROWS_AS(validate_spec(bad_global, data), InputError);

  FairnessSpec bad_local = make_spec(Metric::EqualizedOdds, 0.5, -0.1, 2);
  CHECK_THROWS_AS(validate_spec(bad_local, data), InputError);
}

TEST_CASE("metric names round-trip") {
  for (Metric m : {Metric::EqualizedOdds, Metric::EqualOpportunity,
                   Metric::StatisticalParity})
    CHECK(parse_metric(metric_name(m)) == m);
  CHECK_THROWS_AS(parse_metric("nope"), InputError);
}
