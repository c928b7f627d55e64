#include "fairfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairfl/error.hpp"

namespace fairfl {

using nlohmann::json;

std::string message_kind_name(Message::Kind kind) {
  switch (kind) {
    case Message::Kind::ModelDown: return "model_down";
    case Message::Kind::ModelUp: return "model_up";
    case Message::Kind::StatsUp: return "stats_up";
    case Message::Kind::TargetsDown: return "targets_down";
  }
  return "?";
}

namespace {

Message::Kind parse_kind(const std::string& s) {
  if (s == "model_down") return Message::Kind::ModelDown;
  if (s == "model_up") return Message::Kind::ModelUp;
  if (s == "stats_up") return Message::Kind::StatsUp;
  if (s == "targets_down") return Message::Kind::TargetsDown;
  throw InputError("unknown message kind '" + s + "'");
}

bool is_upstream(Message::Kind kind) {
  return kind == Message::Kind::ModelUp || kind == Message::Kind::StatsUp;
}

}  // namespace

std::string message_to_line(const Message& msg) {
  json j;
  j["version"] = 1;
  j["kind"] = message_kind_name(msg.kind);
  j["client"] = msg.client;
  j["payload"] = msg.payload;
  return j.dump();
}

Message message_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed transcript line: ") + e.what());
  }
  if (j.value("version", 0) != 1)
    throw InputError("unsupported transcript line version");
  Message msg;
  try {
    msg.kind = parse_kind(j.at("kind").get<std::string>());
    msg.client = j.at("client").get<int>();
    msg.payload = j.at("payload").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed transcript line: ") + e.what());
  }
  return msg;
}

std::string targets_to_message(const TargetsPayload& t) {
  json j;
  j["version"] = 1;
  j["type"] = "targets";
  j["client"] = t.client;
  j["metric"] = metric_name(t.metric);
  j["z0"] = t.z0;
  j["z1"] = t.z1;
  j["f0"] = t.f0;
  j["f1"] = t.f1;
  j["sp0"] = t.sp0;
  j["sp1"] = t.sp1;
  return j.dump();
}

TargetsPayload targets_from_message(const std::string& payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed targets message: ") + e.what());
  }
  if (j.value("version", 0) != 1)
    throw InputError("unsupported targets message version");
  if (j.value("type", "") != "targets")
    throw InputError("unexpected message type for targets payload");
  TargetsPayload t;
  try {
    t.client = j.at("client").get<int>();
    t.metric = parse_metric(j.at("metric").get<std::string>());
    t.z0 = j.at("z0").get<std::vector<double>>();
    t.z1 = j.at("z1").get<std::vector<double>>();
    t.f0 = j.at("f0").get<std::vector<double>>();
    t.f1 = j.at("f1").get<std::vector<double>>();
    t.sp0 = j.at("sp0").get<std::vector<double>>();
    t.sp1 = j.at("sp1").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed targets message: ") + e.what());
  }
  return t;
}

namespace {

double snap01(double v) {
  if (std::fabs(v) < 1e-9) return 0.0;
  if (std::fabs(v - 1.0) < 1e-9) return 1.0;
  return std::clamp(v, 0.0, 1.0);
}

// Server side of Step 3: build (with the fallback), solve, package targets.
struct ServerResult {
  AggregatedParams params;
  LpInstance instance;
  LpSolution solution;
  RegionForm form = RegionForm::HalfSpace;
  std::vector<TargetsPayload> targets;  // one per client
};

LpInstance build_instance(const AggregatedParams& params,
                          const FairnessSpec& spec, RegionForm form) {
  switch (spec.metric) {
    case Metric::EqualizedOdds: return build_lp_eo(params, spec, form);
    case Metric::EqualOpportunity: return build_lp_eop(params, spec, form);
    case Metric::StatisticalParity: return build_lp_sp(params, spec);
  }
  throw InputError("unknown metric");
}

ServerResult server_step3(const std::vector<ClientStats>& stats,
                          const ProtocolConfig& cfg) {
  ServerResult out;
  out.params = aggregate(stats);
  const FairnessSpec& spec = cfg.fairness;

  if (spec.metric == Metric::StatisticalParity) {
    out.instance = build_lp_sp(out.params, spec);
  } else {
    try {
      out.instance = build_instance(out.params, spec, RegionForm::HalfSpace);
      out.form = RegionForm::HalfSpace;
    } catch (const DegenerateSimplexError&) {
      out.instance = build_instance(out.params, spec, RegionForm::Barycentric);
      out.form = RegionForm::Barycentric;
    }
  }
  out.solution = solve(out.instance, cfg.solver);
  if (out.solution.status == LpSolution::Status::Infeasible)
    throw InfeasibleError("fairness LP infeasible: " + out.solution.certificate,
                          out.solution.certificate);
  if (out.solution.status != LpSolution::Status::Optimal)
    throw NumericalError("fairness LP solve failed: " + out.solution.certificate);

  if (cfg.crosscheck_region_forms && spec.metric != Metric::StatisticalParity &&
      out.form == RegionForm::HalfSpace) {
    const LpInstance other =
        build_instance(out.params, spec, RegionForm::Barycentric);
    const LpSolution other_sol = solve(other, cfg.solver);
    if (other_sol.status != LpSolution::Status::Optimal ||
        std::fabs(other_sol.objective_value - out.solution.objective_value) >
            1e-6)
      throw NumericalError(
          "region form cross-check failed: half-space and barycentric optima "
          "disagree");
  }

  const int N = out.params.num_classes;
  const int K = out.params.num_clients;
  for (int c = 0; c < K; ++c) {
    TargetsPayload t;
    t.client = c + 1;
    t.metric = spec.metric;
    if (spec.metric == Metric::StatisticalParity) {
      // Snap round-off and renormalize columns; unobserved base outputs get
      // the identity column, which carries no mass in any constraint.
      for (int a = 0; a < 2; ++a) {
        std::vector<double>& flat = a == 0 ? t.sp0 : t.sp1;
        flat.assign(static_cast<size_t>(N) * N, 0.0);
        for (int j = 0; j < N; ++j) {
          double col_sum = 0.0;
          std::vector<double> col(static_cast<size_t>(N), 0.0);
          const bool unobserved = out.params.u_j(j, a, c) <= 0.0;
          for (int y = 0; y < N; ++y) {
            double v = unobserved
                           ? (y == j ? 1.0 : 0.0)
                           : snap01(out.solution.x[out.instance.sp_var(a, c, j, y)]);
            col[static_cast<size_t>(y)] = v;
            col_sum += v;
          }
          if (col_sum <= 0.0)
            throw NumericalError("statistical parity column degenerated");
          for (int y = 0; y < N; ++y)
            flat[static_cast<size_t>(j) * N + y] =
                col[static_cast<size_t>(y)] / col_sum;
        }
      }
    } else {
      for (int a = 0; a < 2; ++a) {
        std::vector<double>& z = a == 0 ? t.z0 : t.z1;
        z.resize(static_cast<size_t>(N));
        for (int y = 0; y < N; ++y)
          z[static_cast<size_t>(y)] =
              std::clamp(out.solution.x[out.instance.eo_var(a, c, y)], 0.0, 1.0);
        if (out.form == RegionForm::Barycentric) {
          std::vector<double>& f = a == 0 ? t.f0 : t.f1;
          f.resize(static_cast<size_t>(N) + 1);
          for (int i = 0; i <= N; ++i)
            f[static_cast<size_t>(i)] =
                snap01(out.solution.x[out.instance.bary_var(a, c, i)]);
          double s = 0.0;
          for (double v : f) s += v;
          if (s <= 0.0) throw NumericalError("barycentric block degenerated");
          for (double& v : f) v /= s;
        }
      }
    }
    out.targets.push_back(std::move(t));
  }
  return out;
}

// Client side of Step 4: turn the received targets into mixing weights. The
// LAE runs against the TP block of the statistics the client transmitted, so
// targets and weights stay consistent under DP noise.
void client_step4(const TargetsPayload& t, const ClientStats& sent,
                  FairPredictor& predictor) {
  const int N = sent.num_classes;
  const int c = t.client;
  if (t.metric == Metric::StatisticalParity) {
    for (int a = 0; a < 2; ++a) {
      const std::vector<double>& flat = a == 0 ? t.sp0 : t.sp1;
      if (flat.size() != static_cast<size_t>(N) * N)
        throw InputError("targets message: bad table size");
      for (int j = 0; j < N; ++j)
        for (int y = 0; y < N; ++y)
          predictor.sp.at(a, c - 1, y, j) = flat[static_cast<size_t>(j) * N + y];
    }
    return;
  }
  for (int a = 0; a < 2; ++a) {
    const std::vector<double>& z = a == 0 ? t.z0 : t.z1;
    const std::vector<double>& f = a == 0 ? t.f0 : t.f1;
    if (z.size() != static_cast<size_t>(N))
      throw InputError("targets message: bad z size");
    std::vector<double> tp(static_cast<size_t>(N));
    for (int y = 0; y < N; ++y)
      tp[static_cast<size_t>(y)] =
          sent.base(y, a) > 0.0 ? sent.joint_tp(y, a) / sent.base(y, a) : 1.0;
    std::vector<double> beta;
    if (!f.empty()) {
      beta = f;  // barycentric coefficients are the mixing weights
    } else {
      beta = solve_lae(tp, z);
    }
    std::span<double> dst = predictor.mix.at(a, c - 1);
    std::copy(beta.begin(), beta.end(), dst.begin());
  }
}

ProtocolRun run_steps_2_to_4(std::shared_ptr<const ScoreModel> model,
                             const ClientGroupDataset& stats_data,
                             const ProtocolConfig& cfg,
                             std::vector<Message> transcript) {
  validate_spec(cfg.fairness, stats_data);
  const int K = stats_data.num_clients();
  const int N = stats_data.num_classes();
  RngStream rng(cfg.seed, "protocol");

  // Step 2: per-client statistics, optional DP noise, one message per client.
  const BasePredictor base = make_argmax_predictor(model);
  std::vector<ClientStats> sent;
  for (int c = 1; c <= K; ++c) {
    const ClientGroupDataset slice = stats_data.client_slice(c);
    ClientStats stats = compute_client_stats(slice, c, base);
    stats = apply_laplace(stats, cfg.dp, rng);
    transcript.push_back(Message{Message::Kind::StatsUp, c,
                                 stats_to_message(stats)});
    sent.push_back(std::move(stats));
  }

  // Step 3: the server reads only the transmitted messages.
  std::vector<ClientStats> received;
  for (const Message& m : transcript)
    if (m.kind == Message::Kind::StatsUp)
      received.push_back(stats_from_message(m.payload));
  ServerResult server = server_step3(received, cfg);
  for (const TargetsPayload& t : server.targets)
    transcript.push_back(Message{Message::Kind::TargetsDown, t.client,
                                 targets_to_message(t)});

  // Step 4: each client installs its weights from its own targets message.
  ProtocolRun run;
  run.config = cfg;
  run.model = model;
  run.predictor.metric = cfg.fairness.metric;
  run.predictor.base = model;
  if (cfg.fairness.metric == Metric::StatisticalParity)
    run.predictor.sp.resize(N, K);
  else
    run.predictor.mix.resize(N, K);
  for (const Message& m : transcript) {
    if (m.kind != Message::Kind::TargetsDown) continue;
    const TargetsPayload t = targets_from_message(m.payload);
    client_step4(t, sent[static_cast<size_t>(t.client - 1)], run.predictor);
  }

  run.transcript = std::move(transcript);
  run.sent_stats = std::move(sent);
  run.params = std::move(server.params);
  run.instance = std::move(server.instance);
  run.solution = std::move(server.solution);
  run.region_form_used = server.form;
  return run;
}

}  // namespace

ProtocolRun run_protocol_with_model(std::shared_ptr<const ScoreModel> model,
                                    const ClientGroupDataset& stats_data,
                                    const ProtocolConfig& config) {
  if (!model) throw InputError("run_protocol: null score model");
  return run_steps_2_to_4(std::move(model), stats_data, config, {});
}

ProtocolRun run_protocol(const ClientGroupDataset& train,
                         const ClientGroupDataset& stats_data,
                         const ProtocolConfig& config) {
  std::vector<Message> transcript;
  FedAvgObserver observer;
  observer.on_broadcast = [&](int round, const std::vector<double>& params) {
    json j;
    j["version"] = 1;
    j["type"] = "model_down";
    j["round"] = round;
    j["params"] = params;
    transcript.push_back(Message{Message::Kind::ModelDown, 0, j.dump()});
  };
  observer.on_update = [&](int round, int client,
                           const std::vector<double>& params, long long n) {
    json j;
    j["version"] = 1;
    j["type"] = "model_up";
    j["round"] = round;
    j["client"] = client;
    j["sample_count"] = n;
    j["params"] = params;
    transcript.push_back(Message{Message::Kind::ModelUp, client, j.dump()});
  };
  auto model = std::make_shared<SoftmaxModel>(train_fedavg_softmax(
      train, config.fedavg, RngStream(config.seed, "fedavg"), nullptr,
      &observer));
  return run_steps_2_to_4(std::move(model), stats_data, config,
                          std::move(transcript));
}

bool transcript_respects_privacy(const std::vector<Message>& transcript,
                                 std::string* why) {
  static const std::set<std::string> kAllowedStatsKeys = {
      "version", "type",     "client",  "sample_count", "num_classes",
      "joint_tp", "base",    "sp_joint", "sp_pred",     "group_mass"};
  size_t last_model_up = 0;
  bool any_model_up = false;
  for (size_t i = 0; i < transcript.size(); ++i) {
    if (transcript[i].kind == Message::Kind::ModelUp) {
      last_model_up = i;
      any_model_up = true;
    }
  }
  for (size_t i = any_model_up ? last_model_up + 1 : 0; i < transcript.size();
       ++i) {
    const Message& m = transcript[i];
    if (!is_upstream(m.kind)) continue;
    if (m.kind != Message::Kind::StatsUp) {
      if (why) *why = "post-step-1 upstream message of kind " +
                      message_kind_name(m.kind);
      return false;
    }
    json j;
    try {
      j = json::parse(m.payload);
    } catch (const json::exception&) {
      if (why) *why = "unparseable statistics payload";
      return false;
    }
    for (const auto& item : j.items()) {
      if (!kAllowedStatsKeys.count(item.key())) {
        if (why) *why = "unexpected field '" + item.key() +
                        "' in a statistics payload";
        return false;
      }
    }
  }
  return true;
}

std::string transcript_dump(const std::vector<Message>& transcript) {
  std::ostringstream os;
  for (const Message& m : transcript) os << message_to_line(m) << "\n";
  return os.str();
}

}  // namespace fairfl
