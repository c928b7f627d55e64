#include "fairfl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairfl/error.hpp"

namespace fairfl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

class GaussianOracle final : public ScoreModel {
 public:
  explicit GaussianOracle(SyntheticSpec spec) : spec_(std::move(spec)) {}

  int num_classes() const override { return spec_.num_classes; }
  int feature_dim() const override { return spec_.feature_dim; }

  std::vector<double> score(std::span<const double> x, int group,
                            int client) const override {
    const int N = spec_.num_classes;
    const size_t a = static_cast<size_t>(group);
    const size_t c = static_cast<size_t>(client - 1);
    const double scale = spec_.client_stddev_scale.empty()
                             ? 1.0
                             : spec_.client_stddev_scale[c];
    std::vector<double> logp(static_cast<size_t>(N));
    for (int y = 0; y < N; ++y) {
      const double prior = spec_.class_prior[c][a][static_cast<size_t>(y)];
      if (prior <= 0.0) {
        logp[static_cast<size_t>(y)] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const GaussianComponent& g = spec_.feature_dist[a][static_cast<size_t>(y)];
      const double sd = g.stddev * scale;
      double ll = std::log(prior);
      for (int j = 0; j < spec_.feature_dim; ++j) {
        const double z = (x[static_cast<size_t>(j)] - g.mean[static_cast<size_t>(j)]) / sd;
        ll += -0.5 * (z * z + kLog2Pi) - std::log(sd);
      }
      logp[static_cast<size_t>(y)] = ll;
    }
    return softmax_of(logp);
  }

 private:
  static std::vector<double> softmax_of(const std::vector<double>& logp) {
    const double mx = *std::max_element(logp.begin(), logp.end());
    std::vector<double> p(logp.size(), 0.0);
    double z = 0.0;
    for (size_t i = 0; i < logp.size(); ++i) {
      p[i] = std::isfinite(logp[i]) ? std::exp(logp[i] - mx) : 0.0;
      z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
  }

  SyntheticSpec spec_;
};

class DiscreteOracle final : public ScoreModel {
 public:
  explicit DiscreteOracle(SyntheticSpec spec) : spec_(std::move(spec)) {}

  int num_classes() const override { return spec_.num_classes; }
  int feature_dim() const override { return 1; }

  std::vector<double> score(std::span<const double> x, int group,
                            int client) const override {
    const int N = spec_.num_classes;
    const size_t a = static_cast<size_t>(group);
    const size_t c = static_cast<size_t>(client - 1);
    const size_t v = static_cast<size_t>(std::llround(x[0]));
    std::vector<double> p(static_cast<size_t>(N), 0.0);
    double z = 0.0;
    for (int y = 0; y < N; ++y) {
      const double w = spec_.class_prior[c][a][static_cast<size_t>(y)] *
                       spec_.feature_pmf[a][static_cast<size_t>(y)][v];
      p[static_cast<size_t>(y)] = w;
      z += w;
    }
    if (z <= 0.0)
      throw InputError("discrete oracle queried at a zero-probability feature value");
    for (double& w : p) w /= z;
    return p;
  }

 private:
  SyntheticSpec spec_;
};

int sample_categorical(std::span<const double> pmf, RngStream& rng) {
  const double u = rng.next_uniform();
  double acc = 0.0;
  for (size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(pmf.size()) - 1;
}

}  // namespace

void validate_synthetic_spec(const SyntheticSpec& spec) {
  const int N = spec.num_classes, K = spec.num_clients, d = spec.feature_dim;
  if (N < 2 || K < 1 || d < 1)
    throw InputError("synthetic spec: need N >= 2, K >= 1, d >= 1");
  if (static_cast<int>(spec.sensitive_fraction.size()) != K)
    throw InputError("synthetic spec: sensitive_fraction must have length K");
  for (double q : spec.sensitive_fraction)
    if (q < 0.0 || q > 1.0)
      throw InputError("synthetic spec: sensitive fractions must lie in [0,1]");
  if (static_cast<int>(spec.samples_per_client.size()) != K)
    throw InputError("synthetic spec: samples_per_client must have length K");
  for (int n : spec.samples_per_client)
    if (n < 1) throw InputError("synthetic spec: samples_per_client must be >= 1");
  if (static_cast<int>(spec.class_prior.size()) != K)
    throw InputError("synthetic spec: class_prior must have length K");
  for (const auto& per_group : spec.class_prior) {
    if (per_group.size() != 2)
      throw InputError("synthetic spec: class_prior needs entries for both groups");
    for (const auto& prior : per_group) {
      if (static_cast<int>(prior.size()) != N)
        throw InputError("synthetic spec: class prior must have length N");
      double s = 0.0;
      for (double p : prior) {
        if (p < 0.0) throw InputError("synthetic spec: negative class prior");
        s += p;
      }
      if (std::fabs(s - 1.0) > 1e-9)
        throw InputError("synthetic spec: class priors must sum to 1");
    }
  }
  if (!spec.client_stddev_scale.empty()) {
    if (static_cast<int>(spec.client_stddev_scale.size()) != K)
      throw InputError("synthetic spec: client_stddev_scale must have length K");
    for (double s : spec.client_stddev_scale)
      if (!(s > 0.0))
        throw InputError("synthetic spec: client_stddev_scale must be positive");
  }
  if (spec.mode == SyntheticSpec::Mode::Gaussian) {
    if (spec.feature_dist.size() != 2)
      throw InputError("synthetic spec: feature_dist needs entries for both groups");
    for (const auto& per_class : spec.feature_dist) {
      if (static_cast<int>(per_class.size()) != N)
        throw InputError("synthetic spec: feature_dist must cover all classes");
      for (const GaussianComponent& g : per_class) {
        if (static_cast<int>(g.mean.size()) != d)
          throw InputError("synthetic spec: component mean must have length d");
        if (!(g.stddev > 0.0))
          throw InputError("synthetic spec: degenerate spread (stddev must be > 0)");
      }
    }
  } else {
    if (d != 1)
      throw InputError("synthetic spec: discrete mode requires feature_dim 1");
    if (spec.feature_pmf.size() != 2)
      throw InputError("synthetic spec: feature_pmf needs entries for both groups");
    size_t values = 0;
    for (const auto& per_class : spec.feature_pmf) {
      if (static_cast<int>(per_class.size()) != N)
        throw InputError("synthetic spec: feature_pmf must cover all classes");
      for (const auto& pmf : per_class) {
        if (pmf.empty()) throw InputError("synthetic spec: empty feature pmf");
        if (values == 0) values = pmf.size();
        if (pmf.size() != values)
          throw InputError("synthetic spec: feature pmf sizes disagree");
        double s = 0.0;
        for (double p : pmf) {
          if (p < 0.0) throw InputError("synthetic spec: negative feature pmf entry");
          s += p;
        }
        if (std::fabs(s - 1.0) > 1e-9)
          throw InputError("synthetic spec: feature pmf must sum to 1");
      }
    }
  }
}

std::shared_ptr<const ScoreModel> make_oracle_model(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  if (spec.mode == SyntheticSpec::Mode::Gaussian)
    return std::make_shared<GaussianOracle>(spec);
  return std::make_shared<DiscreteOracle>(spec);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, RngStream rng) {
  validate_synthetic_spec(spec);
  std::vector<Record> records;
  for (int c = 1; c <= spec.num_clients; ++c) {
    RngStream client_rng = rng.fork("synth.client" + std::to_string(c));
    const size_t ci = static_cast<size_t>(c - 1);
    const double q = spec.sensitive_fraction[ci];
    const double scale = spec.client_stddev_scale.empty()
                             ? 1.0
                             : spec.client_stddev_scale[ci];
    for (int i = 0; i < spec.samples_per_client[ci]; ++i) {
      Record r;
      r.client = c;
      r.group = client_rng.next_uniform() < q ? 1 : 0;
      const auto& prior = spec.class_prior[ci][static_cast<size_t>(r.group)];
      const int y0 = sample_categorical(prior, client_rng);
      r.label = y0 + 1;
      if (spec.mode == SyntheticSpec::Mode::Gaussian) {
        const GaussianComponent& g =
            spec.feature_dist[static_cast<size_t>(r.group)][static_cast<size_t>(y0)];
        r.features.resize(static_cast<size_t>(spec.feature_dim));
        for (int j = 0; j < spec.feature_dim; ++j)
          r.features[static_cast<size_t>(j)] =
              g.mean[static_cast<size_t>(j)] +
              g.stddev * scale * client_rng.next_gaussian();
      } else {
        const auto& pmf =
            spec.feature_pmf[static_cast<size_t>(r.group)][static_cast<size_t>(y0)];
        r.features = {static_cast<double>(sample_categorical(pmf, client_rng))};
      }
      records.push_back(std::move(r));
    }
  }
  ClientGroupDataset data(std::move(records), spec.num_classes,
                          spec.num_clients, spec.feature_dim);
  return SyntheticData{std::move(data), make_oracle_model(spec)};
}

SyntheticSpec make_gaussian_scenario(const std::vector<double>& sensitive_fraction,
                                     int samples_per_client) {
  const int K = static_cast<int>(sensitive_fraction.size());
  const int N = 3;
  SyntheticSpec spec;
  spec.mode = SyntheticSpec::Mode::Gaussian;
  spec.num_classes = N;
  spec.num_clients = K;
  spec.feature_dim = 2;
  spec.sensitive_fraction = sensitive_fraction;
  spec.samples_per_client.assign(static_cast<size_t>(K), samples_per_client);

  // Class means on a triangle; the sensitive group sees noisier features, so
  // its true positives sit below group 0's and the unconstrained predictor is
  // unfair by construction.
  const double radius = 3.0;
  spec.feature_dist.resize(2);
  for (int a = 0; a < 2; ++a) {
    spec.feature_dist[static_cast<size_t>(a)].resize(static_cast<size_t>(N));
    for (int y = 0; y < N; ++y) {
      GaussianComponent g;
      const double angle = 2.0 * 3.14159265358979323846 * y / N;
      g.mean = {radius * std::cos(angle), radius * std::sin(angle)};
      g.stddev = a == 0 ? 1.0 : 2.1;
      spec.feature_dist[static_cast<size_t>(a)][static_cast<size_t>(y)] = g;
    }
  }
  spec.class_prior.resize(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c)
    spec.class_prior[static_cast<size_t>(c)] = {
        std::vector<double>(static_cast<size_t>(N), 1.0 / N),
        std::vector<double>(static_cast<size_t>(N), 1.0 / N)};
  // Clients differ in difficulty, so client-level operating points genuinely
  // spread out and the global constraint is not implied by the local ones.
  spec.client_stddev_scale.resize(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c)
    spec.client_stddev_scale[static_cast<size_t>(c)] =
        K == 1 ? 1.0 : 0.75 + 0.5 * c / (K - 1);
  return spec;
}

}  // namespace fairfl
