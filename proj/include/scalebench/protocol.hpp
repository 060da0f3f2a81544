#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/metrics.hpp"
#include "scalebench/policies.hpp"
#include "scalebench/simenv.hpp"
#include "scalebench/transport.hpp"

namespace scalebench {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kDefaultPort = 7781;

// Wire format: one JSON object per line, every message carrying "proto":1.
//
//   agent -> env   {"proto":1,"type":"hello"}
//                  {"proto":1,"type":"reset","seed":S,"workload":"bursty"}
//                  {"proto":1,"type":"step","action":A}            A in -2..2
//                  {"proto":1,"type":"close"}
//   env -> agent   {"proto":1,"type":"ack","config_hash":H}
//                  {"proto":1,"type":"obs","obs":[cpu,mem,qps,p95,err,replicas]}
//                  {"proto":1,"type":"outcome","obs":[...],"reward":R,"terminated":B,
//                   "info":{"cost":C,"slo_violated":V,"replicas":N}}
//                  {"proto":1,"type":"error","code":K,"message":M}
//
// "reward" is the normalized reward; info.cost the raw per-step USD cost.
// Floats are written with 17 significant digits. Unknown fields are ignored.

enum class MessageType { Hello, Reset, Step, Close, Ack, Obs, Outcome, Error };

std::string_view to_string(MessageType type);

struct WireMessage {
  MessageType type = MessageType::Hello;

  // hello / ack
  std::string config_hash;
  // reset; seed/workload also annotate driver-sent obs messages
  std::optional<std::uint64_t> seed;
  std::optional<WorkloadKind> workload;
  std::optional<std::uint64_t> episode;
  // step
  std::int64_t action = 0;
  // obs / outcome
  std::array<double, 6> obs{};
  double reward = 0.0;
  bool terminated = false;
  double cost = 0.0;
  bool slo_violated = false;
  int replicas = 0;
  // error
  std::string code;
  std::string message;

  bool operator==(const WireMessage&) const = default;

  static WireMessage make_error(std::string code, std::string message);
  static WireMessage make_obs(const Observation& obs);
  static WireMessage make_outcome(const StepOutcome& out);
};

/// Decoding failure; `code()` is the wire error code ("parse", "proto", "type").
class WireError : public std::runtime_error {
 public:
  WireError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

std::string encode(const WireMessage& msg);
WireMessage decode(std::string_view line);

/// Observation rebuilt from a wire array.
Observation observation_from_wire(const std::array<double, 6>& values);

struct SessionState {
  std::string config_hash;
  std::uint64_t episode_id = 0;
  int step_index = 0;
  bool episode_active = false;
  bool terminated = false;
  bool closed = false;
};

struct SessionResult {
  std::uint64_t requests = 0;
  std::uint64_t errors = 0;
  std::uint64_t episodes = 0;
};

/// Server side of one connection: owns an environment and answers one
/// request line with one response line. Errors never end the session.
class Session {
 public:
  explicit Session(EnvConfig cfg);

  std::string handle_line(std::string_view line);

  const SessionState& state() const { return state_; }
  const SessionResult& result() const { return result_; }

 private:
  WireMessage handle(const WireMessage& request);

  EnvConfig base_cfg_;
  std::optional<Environment> env_;
  SessionState state_;
  SessionResult result_;
};

/// Serves one session until `close` or end of input.
SessionResult serve(const EnvConfig& cfg, std::istream& in, std::ostream& out);
SessionResult serve(const EnvConfig& cfg, LineChannel& channel);

/// Accepts connections forever, one thread and environment per session.
/// `max_sessions` > 0 stops after that many sessions have finished.
void serve_tcp(const EnvConfig& cfg, TcpListener& listener, int max_sessions = 0);

// ---------------------------------------------------------------------------
// Driving a remote agent. Here the harness owns the environment and the agent
// answers each obs/outcome with a step (or, after a terminal outcome, reset).
// Driver obs messages additionally carry "episode", "seed" and "workload".

struct EpisodeRequest {
  WorkloadKind workload = WorkloadKind::Constant;
  std::uint64_t seed = 0;
};

struct DriveOptions {
  std::string policy_id = "external";
  double timeout_s = 30.0;
};

/// Runs the episodes over one channel. After a transport failure the
/// remaining episodes are reported failed.
std::vector<EpisodeMetrics> drive(LineChannel& agent, const std::vector<EpisodeRequest>& episodes,
                                  const EnvConfig& env_cfg, const DriveOptions& options = {});

/// Connects to "tcp:HOST:PORT" or spawns "exec:COMMAND", reconnecting after
/// each failed episode. Never throws for agent failures: they become failed
/// records.
std::vector<EpisodeMetrics> drive(const std::string& endpoint, const std::vector<EpisodeRequest>& episodes,
                                  const EnvConfig& env_cfg, const DriveOptions& options = {});

/// Agent side of drive(): answers obs/outcome messages with the policy's
/// action until `close` or end of input. Returns the number of episodes seen.
int run_agent(LineChannel& channel, Policy& policy);

}  // namespace scalebench
