#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "fairfl/error.hpp"
#include "fairfl/fedavg.hpp"
#include "fairfl/score_model.hpp"
#include "fairfl/softmax.hpp"
#include "fairfl/synthetic.hpp"
#include "fairfl/oracle.hpp"

using namespace fairfl;

namespace {

// Fixed-output model for predictor-rule tests.
class FixedModel final : public ScoreModel {
 public:
  explicit FixedModel(std::vector<double> r) : r_(std::move(r)) {}
  int num_classes() const override { return static_cast<int>(r_.size()); }
  int feature_dim() const override { return 1; }
  std::vector<double> score(std::span<const double>, int, int) const override {
    return r_;
  }

 private:
  std::vector<double> r_;
};

// Well-separated 3-class Gaussian blobs, two clients.
ClientGroupDataset separable_data(int per_client, uint64_t seed) {
  SyntheticSpec spec = make_gaussian_scenario({0.4, 0.4}, per_client);
  for (auto& per_class : spec.feature_dist)
    for (GaussianComponent& g : per_class) g.stddev = 0.6;
  spec.client_stddev_scale = {1.0, 1.0};
  return generate_synthetic(spec, RngStream(seed, "sep")).data;
}

}  // namespace

TEST_CASE("argmax predictor picks the max, lowest index on ties") {
  const double x[1] = {0.0};
  CHECK(predict_argmax(FixedModel({0.2, 0.5, 0.3}), x, 0, 1) == 2);
  CHECK(predict_argmax(FixedModel({0.5, 0.5}), x, 0, 1) == 1);
}

TEST_CASE("derived predictor weights the scores") {
  const double x[1] = {0.0};
  const FixedModel m({0.3, 0.4, 0.3});
  const double theta_a[3] = {2.0, 1.0, 1.0};
  CHECK(predict_derived(m, x, 0, 1, theta_a) == 1);
  const double ones[3] = {1.0, 1.0, 1.0};
  CHECK(predict_derived(m, x, 0, 1, ones) == 2);

  const double zero[3] = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(predict_derived(m, x, 0, 1, zero), InputError);
  const double neg[3] = {1.0, -0.5, 1.0};
  CHECK_THROWS_AS(predict_derived(m, x, 0, 1, neg), InputError);
}

TEST_CASE("derived predictor is invariant under positive rescaling") {
  const SyntheticSpec spec = make_gaussian_scenario({0.3, 0.7}, 50);
  const SyntheticData gen = generate_synthetic(spec, RngStream(3, "r"));
  RngStream rng(4, "theta");
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> theta(3);
    for (double& t : theta) t = 0.1 + rng.next_uniform();
    std::vector<double> scaled(theta);
    const double lambda = 0.25 + 3.0 * rng.next_uniform();
    for (double& t : scaled) t *= lambda;
    for (const Record& r : gen.data.records()) {
      const int base = predict_derived(*gen.oracle, r.features, r.group, r.client, theta);
      CHECK(predict_derived(*gen.oracle, r.features, r.group, r.client, scaled) == base);
      // theta = 1 reproduces the plain argmax
      const std::vector<double> ones(3, 1.0);
      CHECK(predict_derived(*gen.oracle, r.features, r.group, r.client, ones) ==
            predict_argmax(*gen.oracle, r));
    }
  }
}

TEST_CASE("score outputs are normalized probability vectors") {
  const SyntheticSpec spec = make_gaussian_scenario({0.2, 0.5, 0.8}, 40);
  const SyntheticData gen = generate_synthetic(spec, RngStream(5, "r"));
  FedAvgConfig cfg;
  cfg.rounds = 2;
  const SoftmaxModel model =
      train_fedavg_softmax(gen.data, cfg, RngStream(6, "fedavg"));
  for (const Record& r : gen.data.records()) {
    for (const ScoreModel* m :
         {static_cast<const ScoreModel*>(&model), gen.oracle.get()}) {
      const std::vector<double> s = m->score(r.features, r.group, r.client);
      double sum = 0.0;
      for (double v : s) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("fedavg round 1 equals one local pass plus the weighted average") {
  const ClientGroupDataset data = separable_data(40, 11);
  FedAvgConfig cfg;
  cfg.rounds = 1;
  cfg.local_epochs = 1;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.2;
  CHECK_THROWS_AS(
      [&] {
        FedAvgConfig bad = cfg;
        bad.rounds = 0;
        train_fedavg_softmax(data, bad, RngStream(1, "fedavg"));
      }(),
      InputError);

  const SoftmaxModel got = train_fedavg_softmax(data, cfg, RngStream(1, "fedavg"));

  // manual replication of the single round
  RngStream rng(1, "fedavg");
  SoftmaxModel global(data.num_classes(), data.feature_dim(), data.num_clients(),
                      cfg.model);
  RngStream init = rng.fork("fedavg.init");
  global.randomize(init);
  std::vector<double> averaged(global.params().size(), 0.0);
  for (int c = 1; c <= data.num_clients(); ++c) {
    const std::vector<Record> recs = data.client_records(c);
    SoftmaxModel local = global;
    std::vector<size_t> order(recs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    RngStream shuffle = rng.fork("fedavg.shuffle.r1.e1");
    shuffle.shuffle(order);
    local.sgd_epoch(recs, order, cfg.batch_size, cfg.learning_rate);
    const double w = static_cast<double>(recs.size()) / data.size();
    for (size_t i = 0; i < averaged.size(); ++i)
      averaged[i] += w * local.params()[i];
  }
  CHECK(got.params() == averaged);
}

TEST_CASE("clients with identical data reproduce single-client training") {
  // same records, tagged client 1 and client 2
  std::vector<Record> one, two;
  RngStream rng(21, "data");
  for (int i = 0; i < 60; ++i) {
    Record r;
    r.features = {rng.next_gaussian(), rng.next_gaussian()};
    r.group = static_cast<int>(rng.next_below(2));
    r.label = 1 + static_cast<int>(rng.next_below(3));
    r.client = 1;
    one.push_back(r);
    two.push_back(r);
    two.back().client = 2;
  }
  std::vector<Record> both = one;
  both.insert(both.end(), two.begin(), two.end());

  FedAvgConfig cfg;
  cfg.rounds = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.3;
  const SoftmaxModel single = train_fedavg_softmax(
      ClientGroupDataset(one, 3, 1, 2), cfg, RngStream(9, "fedavg"));
  const SoftmaxModel fed = train_fedavg_softmax(
      ClientGroupDataset(both, 3, 2, 2), cfg, RngStream(9, "fedavg"));
  CHECK(single.params() == fed.params());
}

TEST_CASE("fedavg reaches high accuracy on separable data") {
  const ClientGroupDataset data = separable_data(300, 31);
  FedAvgConfig cfg;
  cfg.rounds = 50;
  cfg.local_epochs = 1;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.5;
  std::vector<RoundLog> log;
  const SoftmaxModel fed =
      train_fedavg_softmax(data, cfg, RngStream(13, "fedavg"), &log);
  CHECK(log.size() == 50);
  CHECK(fed.training_accuracy(data.records()) >= 0.95);

  // the centralized reference must reach the same bar on the pooled data
  const SoftmaxModel central = train_centralized_softmax(
      data, 50, 32, 0.5, SoftmaxConfig{}, RngStream(13, "central"));
  CHECK(central.training_accuracy(data.records()) >= 0.95);
}

TEST_CASE("fedavg is deterministic given the seed") {
  const ClientGroupDataset data = separable_data(50, 41);
  FedAvgConfig cfg;
  cfg.rounds = 3;
  const SoftmaxModel a = train_fedavg_softmax(data, cfg, RngStream(7, "fedavg"));
  const SoftmaxModel b = train_fedavg_softmax(data, cfg, RngStream(7, "fedavg"));
  const SoftmaxModel c = train_fedavg_softmax(data, cfg, RngStream(8, "fedavg"));
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
}

TEST_CASE("divergent training reports the failing round") {
  const ClientGroupDataset data = separable_data(30, 43);
  FedAvgConfig cfg;
  cfg.rounds = 8;
  cfg.learning_rate = 1e308;
  try {
    std::vector<RoundLog> log;
    train_fedavg_softmax(data, cfg, RngStream(3, "fedavg"), &log);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("round") != std::string::npos);
  }
}

TEST_CASE("synthetic sensitive proportions match the scenario") {
  const std::vector<double> s1{0.4, 0.4, 0.4, 0.4, 0.4};
  const SyntheticSpec spec = make_gaussian_scenario(s1, 10000);
  const SyntheticData gen = generate_synthetic(spec, RngStream(17, "gen"));
  for (int c = 1; c <= 5; ++c) {
    long long sensitive = 0, total = 0;
    for (const Record& r : gen.data.records()) {
      if (r.client != c) continue;
      ++total;
      sensitive += r.group;
    }
    CHECK(total == 10000);
    CHECK(std::fabs(static_cast<double>(sensitive) / total - 0.4) <= 0.03);
  }

  const std::vector<double> s3{0.1, 0.3, 0.5, 0.7, 0.9};
  const SyntheticData gen3 =
      generate_synthetic(make_gaussian_scenario(s3, 4000), RngStream(18, "gen"));
  for (int c = 1; c <= 5; ++c) {
    long long sensitive = 0, total = 0;
    for (const Record& r : gen3.data.records()) {
      if (r.client != c) continue;
      ++total;
      sensitive += r.group;
    }
    CHECK(std::fabs(static_cast<double>(sensitive) / total -
                    s3[static_cast<size_t>(c - 1)]) <= 0.03);
  }
}

TEST_CASE("degenerate class prior gives a unit posterior") {
  SyntheticSpec spec = make_gaussian_scenario({0.5, 0.5}, 10);
  spec.class_prior[0][1] = {0.0, 1.0, 0.0};  // client 1, group 1: always class 2
  const SyntheticData gen = generate_synthetic(spec, RngStream(19, "gen"));
  for (const Record& r : gen.data.records()) {
    if (r.client != 1 || r.group != 1) continue;
    CHECK(r.label == 2);
    const std::vector<double> s = gen.oracle->score(r.features, 1, 1);
    CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("degenerate spread is rejected") {
  SyntheticSpec spec = make_gaussian_scenario({0.5}, 10);
  spec.feature_dist[0][0].stddev = 0.0;
  CHECK_THROWS_AS(generate_synthetic(spec, RngStream(1, "gen")), InputError);
}

TEST_CASE("discrete oracle equals the enumerated-table posterior") {
  SyntheticSpec spec;
  spec.mode = SyntheticSpec::Mode::Discrete;
  spec.num_classes = 3;
  spec.num_clients = 2;
  spec.feature_dim = 1;
  spec.sensitive_fraction = {0.35, 0.6};
  spec.samples_per_client = {120, 80};
  spec.class_prior = {{{0.5, 0.3, 0.2}, {0.25, 0.5, 0.25}},
                      {{0.4, 0.4, 0.2}, {0.2, 0.3, 0.5}}};
  spec.feature_pmf = {{{0.5, 0.3, 0.1, 0.1},
                       {0.2, 0.4, 0.3, 0.1},
                       {0.1, 0.2, 0.3, 0.4}},
                      {{0.4, 0.3, 0.2, 0.1},
                       {0.25, 0.25, 0.25, 0.25},
                       {0.1, 0.1, 0.3, 0.5}}};
  const auto oracle = make_oracle_model(spec);
  const DiscreteInstance inst = discrete_instance_from_spec(spec);
  for (int x = 0; x < 4; ++x)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) {
        const std::vector<double> expect = inst.posterior(x, a, c);
        const double xv[1] = {static_cast<double>(x)};
        const std::vector<double> got = oracle->score(xv, a, c + 1);
        for (int y = 0; y < 3; ++y)
          CHECK(std::fabs(got[static_cast<size_t>(y)] -
                          expect[static_cast<size_t>(y)]) <= 1e-12);
      }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const ClientGroupDataset data = separable_data(40, 51);
  FedAvgConfig cfg;
  cfg.rounds = 2;
  cfg.model.hidden_units = 8;
  const SoftmaxModel model = train_fedavg_softmax(data, cfg, RngStream(5, "f"));
  const std::string path = "checkpoint_test.json";
  save_checkpoint(model, path);
  const SoftmaxModel back = load_checkpoint(path);
  CHECK(back == model);
  REQUIRE(back.params().size() == model.params().size());
  for (size_t i = 0; i < model.params().size(); ++i)
    CHECK(std::memcmp(&back.params()[i], &model.params()[i], sizeof(double)) == 0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_checkpoint("does_not_exist.json"), InputError);
}
