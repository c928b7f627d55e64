#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fairfl/client_stats.hpp"
#include "fairfl/fair_predictor.hpp"
#include "fairfl/fedavg.hpp"
#include "fairfl/lp_build.hpp"
#include "fairfl/lp_solve.hpp"

namespace fairfl {

// One protocol message. Payloads are versioned JSON strings; the transcript
// is the audit record of everything that crossed the client/server boundary.
struct Message {
  enum class Kind { ModelDown, ModelUp, StatsUp, TargetsDown };
  Kind kind = Kind::ModelDown;
  int client = 0;  // 0 = broadcast / server-side
  std::string payload;

  bool operator==(const Message&) const = default;
};

std::string message_kind_name(Message::Kind kind);

// Lossless serialization of a transcript line; parse errors throw InputError.
std::string message_to_line(const Message& msg);
Message message_from_line(const std::string& line);

struct TargetsPayload {
  int version = 1;
  int client = 0;
  Metric metric = Metric::EqualizedOdds;
  // EO / EOp: per group, the z block for this client; optional barycentric
  // coefficients when the region was built in that form.
  std::vector<double> z0, z1;
  std::vector<double> f0, f1;
  // SP: flattened column-stochastic tables [j][y] per group.
  std::vector<double> sp0, sp1;
};

std::string targets_to_message(const TargetsPayload& t);
TargetsPayload targets_from_message(const std::string& payload);

struct ProtocolConfig {
  FedAvgConfig fedavg;
  FairnessSpec fairness;
  DpConfig dp;
  SolverConfig solver;
  uint64_t seed = 0;
  // Cross-check mode solves both region forms and requires agreement.
  bool crosscheck_region_forms = false;
};

struct ProtocolRun {
  ProtocolConfig config;
  std::vector<Message> transcript;
  std::shared_ptr<const ScoreModel> model;
  std::vector<ClientStats> sent_stats;   // post-DP, as transmitted
  AggregatedParams params;
  LpInstance instance;
  LpSolution solution;
  FairPredictor predictor;
  RegionForm region_form_used = RegionForm::HalfSpace;
};

// Steps 2-4 with a given score model (Step 1 already done elsewhere), all
// client/server exchanges recorded in the transcript.
ProtocolRun run_protocol_with_model(std::shared_ptr<const ScoreModel> model,
                                    const ClientGroupDataset& stats_data,
                                    const ProtocolConfig& config);

// Full Steps 1-4: FedAvg on `train`, statistics on `stats_data`.
ProtocolRun run_protocol(const ClientGroupDataset& train,
                         const ClientGroupDataset& stats_data,
                         const ProtocolConfig& config);

// Structural privacy audit: every client-to-server message after the Step 1
// model updates must be a statistics payload with only the statistics fields.
bool transcript_respects_privacy(const std::vector<Message>& transcript,
                                 std::string* why = nullptr);

// Newline-delimited transcript dump.
std::string transcript_dump(const std::vector<Message>& transcript);

}  // namespace fairfl
