#include "scalebench/protocol.hpp"

#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "scalebench/config.hpp"
#include "scalebench/errors.hpp"
#include "scalebench/wire_format.hpp"

namespace scalebench {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kMaxConsecutiveAgentErrors = 8;

struct MessageName {
  MessageType type;
  std::string_view name;
};

constexpr std::array<MessageName, 8> kMessageNames = {{{MessageType::Hello, "hello"},
                                                       {MessageType::Reset, "reset"},
                                                       {MessageType::Step, "step"},
                                                       {MessageType::Close, "close"},
                                                       {MessageType::Ack, "ack"},
                                                       {MessageType::Obs, "obs"},
                                                       {MessageType::Outcome, "outcome"},
                                                       {MessageType::Error, "error"}}};

ordered_json obs_array(const std::array<double, 6>& values) {
  ordered_json arr = ordered_json::array();
  for (double v : values) arr.push_back(v);
  return arr;
}

template <typename T>
T field(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw WireError("parse", std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw WireError("parse", std::string("field '") + key + "' has the wrong type");
  }
}

std::array<double, 6> read_obs(const json& doc) {
  const auto it = doc.find("obs");
  if (it == doc.end() || !it->is_array() || it->size() != 6) {
    throw WireError("parse", "'obs' must be an array of six numbers");
  }
  std::array<double, 6> values{};
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(*it)[i].is_number()) throw WireError("parse", "'obs' must be an array of six numbers");
    values[i] = (*it)[i].get<double>();
  }
  return values;
}

std::optional<WorkloadKind> read_workload(const json& doc) {
  const auto it = doc.find("workload");
  if (it == doc.end() || it->is_null()) return std::nullopt;
  const auto kind = it->is_string() ? parse_workload(it->get<std::string>()) : std::nullopt;
  if (!kind) throw WireError("workload", "unknown workload; expected one of " + workload_names());
  return kind;
}

std::optional<std::uint64_t> read_u64(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw WireError("parse", std::string("'") + key + "' must be an integer");
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  const auto v = it->get<std::int64_t>();
  if (v < 0) throw WireError("parse", std::string("'") + key + "' must be non-negative");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

std::string_view to_string(MessageType type) {
  for (const auto& entry : kMessageNames) {
    if (entry.type == type) return entry.name;
  }
  return "unknown";
}

WireMessage WireMessage::make_error(std::string code, std::string message) {
  WireMessage msg;
  msg.type = MessageType::Error;
  msg.code = std::move(code);
  msg.message = std::move(message);
  return msg;
}

WireMessage WireMessage::make_obs(const Observation& obs) {
  WireMessage msg;
  msg.type = MessageType::Obs;
  msg.obs = obs.to_array();
  return msg;
}

WireMessage WireMessage::make_outcome(const StepOutcome& out) {
  WireMessage msg;
  msg.type = MessageType::Outcome;
  msg.obs = out.obs.to_array();
  msg.reward = out.reward_norm;
  msg.terminated = out.terminated;
  msg.cost = out.step_cost;
  msg.slo_violated = out.slo_violated;
  msg.replicas = out.obs.replicas;
  return msg;
}

std::string encode(const WireMessage& msg) {
  ordered_json doc;
  doc["proto"] = kProtocolVersion;
  doc["type"] = to_string(msg.type);
  switch (msg.type) {
    case MessageType::Hello:
    case MessageType::Ack:
      if (!msg.config_hash.empty() || msg.type == MessageType::Ack) doc["config_hash"] = msg.config_hash;
      break;
    case MessageType::Reset:
      if (msg.seed) doc["seed"] = *msg.seed;
      if (msg.workload) doc["workload"] = to_string(*msg.workload);
      break;
    case MessageType::Step:
      doc["action"] = msg.action;
      break;
    case MessageType::Close:
      break;
    case MessageType::Obs:
      doc["obs"] = obs_array(msg.obs);
      if (msg.episode) doc["episode"] = *msg.episode;
      if (msg.seed) doc["seed"] = *msg.seed;
      if (msg.workload) doc["workload"] = to_string(*msg.workload);
      break;
    case MessageType::Outcome:
      doc["obs"] = obs_array(msg.obs);
      doc["reward"] = msg.reward;
      doc["terminated"] = msg.terminated;
      doc["info"] = {{"cost", msg.cost}, {"slo_violated", msg.slo_violated}, {"replicas", msg.replicas}};
      break;
    case MessageType::Error:
      doc["code"] = msg.code;
      doc["message"] = msg.message;
      break;
  }
  return dump_wire(doc);
}

WireMessage decode(std::string_view line) {
  json doc = json::parse(line.begin(), line.end(), nullptr, false);
  if (doc.is_discarded()) throw WireError("parse", "malformed JSON");
  if (!doc.is_object()) throw WireError("parse", "message must be a JSON object");

  const auto proto = doc.find("proto");
  if (proto == doc.end() || !proto->is_number_integer() || proto->get<std::int64_t>() != kProtocolVersion) {
    throw WireError("proto", "expected \"proto\":1");
  }
  const auto type_it = doc.find("type");
  if (type_it == doc.end() || !type_it->is_string()) throw WireError("parse", "missing message type");
  const std::string type_name = type_it->get<std::string>();

  WireMessage msg;
  bool known = false;
  for (const auto& entry : kMessageNames) {
    if (entry.name == type_name) {
      msg.type = entry.type;
      known = true;
    }
  }
  if (!known) throw WireError("type", "unknown message type '" + type_name + "'");

  switch (msg.type) {
    case MessageType::Hello:
    case MessageType::Ack:
      if (doc.contains("config_hash")) msg.config_hash = field<std::string>(doc, "config_hash");
      break;
    case MessageType::Reset:
      msg.seed = read_u64(doc, "seed");
      msg.workload = read_workload(doc);
      break;
    case MessageType::Step: {
      const auto it = doc.find("action");
      if (it == doc.end() || !it->is_number()) throw WireError("parse", "'action' must be a number");
      if (it->is_number_float()) {
        const double v = it->get<double>();
        if (v != std::floor(v) || v < Action::kMin || v > Action::kMax) {
          throw WireError("action_range", "action must be an integer in [-2, 2]");
        }
        msg.action = static_cast<std::int64_t>(v);
      } else if (it->is_number_unsigned()) {
        const auto v = it->get<std::uint64_t>();
        msg.action = v > static_cast<std::uint64_t>(Action::kMax) ? Action::kMax + 1 : static_cast<std::int64_t>(v);
      } else {
        msg.action = it->get<std::int64_t>();
      }
      break;
    }
    case MessageType::Close:
      break;
    case MessageType::Obs:
      msg.obs = read_obs(doc);
      msg.episode = read_u64(doc, "episode");
      msg.seed = read_u64(doc, "seed");
      msg.workload = read_workload(doc);
      break;
    case MessageType::Outcome: {
      msg.obs = read_obs(doc);
      msg.reward = field<double>(doc, "reward");
      msg.terminated = field<bool>(doc, "terminated");
      const auto info = doc.find("info");
      if (info == doc.end() || !info->is_object()) throw WireError("parse", "missing 'info' object");
      msg.cost = field<double>(*info, "cost");
      msg.slo_violated = field<bool>(*info, "slo_violated");
      msg.replicas = field<int>(*info, "replicas");
      break;
    }
    case MessageType::Error:
      msg.code = field<std::string>(doc, "code");
      if (doc.contains("message")) msg.message = field<std::string>(doc, "message");
      break;
  }
  return msg;
}

Observation observation_from_wire(const std::array<double, 6>& values) {
  Observation obs;
  obs.cpu = values[0];
  obs.mem = values[1];
  obs.qps = values[2];
  obs.p95 = values[3];
  obs.err_rate = values[4];
  obs.replicas = static_cast<int>(std::lround(values[5]));
  return obs;
}

// ---------------------------------------------------------------------------

Session::Session(EnvConfig cfg) : base_cfg_(std::move(cfg)) {
  base_cfg_.validate();
  state_.config_hash = config_hash(base_cfg_);
}

std::string Session::handle_line(std::string_view line) {
  ++result_.requests;
  WireMessage response;
  try {
    response = handle(decode(line));
  } catch (const WireError& e) {
    response = WireMessage::make_error(e.code(), e.what());
  }
  if (response.type == MessageType::Error) ++result_.errors;
  return encode(response);
}

WireMessage Session::handle(const WireMessage& request) {
  switch (request.type) {
    case MessageType::Hello: {
      WireMessage ack;
      ack.type = MessageType::Ack;
      ack.config_hash = state_.config_hash;
      return ack;
    }
    case MessageType::Reset: {
      env_.emplace(request.workload ? with_workload(base_cfg_, *request.workload) : base_cfg_);
      const Observation obs = env_->reset(request.seed.value_or(0));
      ++state_.episode_id;
      ++result_.episodes;
      state_.step_index = 0;
      state_.episode_active = true;
      state_.terminated = false;
      return WireMessage::make_obs(obs);
    }
    case MessageType::Step: {
      if (!state_.episode_active) return WireMessage::make_error("protocol", "step before reset");
      if (state_.terminated) return WireMessage::make_error("protocol", "step after termination; send reset");
      if (request.action < Action::kMin || request.action > Action::kMax) {
        return WireMessage::make_error("action_range", "action must be an integer in [-2, 2]");
      }
      const StepOutcome out = env_->step(Action{static_cast<int>(request.action)});
      state_.step_index = env_->step_index();
      state_.terminated = out.terminated;
      return WireMessage::make_outcome(out);
    }
    case MessageType::Close: {
      state_.closed = true;
      WireMessage ack;
      ack.type = MessageType::Ack;
      ack.config_hash = state_.config_hash;
      return ack;
    }
    default:
      return WireMessage::make_error("type", "'" + std::string(to_string(request.type)) +
                                                 "' is not a request type");
  }
}

SessionResult serve(const EnvConfig& cfg, std::istream& in, std::ostream& out) {
  Session session(cfg);
  std::string line;
  while (!session.state().closed && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << session.handle_line(line) << '\n';
    out.flush();
  }
  return session.result();
}

SessionResult serve(const EnvConfig& cfg, LineChannel& channel) {
  Session session(cfg);
  std::string line;
  while (!session.state().closed && channel.read_line(line) == LineChannel::ReadStatus::Line) {
    if (line.empty()) continue;
    if (!channel.write_line(session.handle_line(line))) break;
  }
  return session.result();
}

void serve_tcp(const EnvConfig& cfg, TcpListener& listener, int max_sessions) {
  std::vector<std::thread> workers;
  for (int served = 0; max_sessions <= 0 || served < max_sessions; ++served) {
    LineChannel channel = listener.accept();
    workers.emplace_back([&cfg, ch = std::move(channel)]() mutable { serve(cfg, ch); });
  }
  for (auto& worker : workers) worker.join();
}

// ---------------------------------------------------------------------------

namespace {

WireMessage close_message() {
  WireMessage msg;
  msg.type = MessageType::Close;
  return msg;
}

struct DriveResult {
  EpisodeMetrics metrics;
  bool broken = false;
};

EpisodeMetrics failed_record(const DriveOptions& options, const EpisodeRequest& ep, int steps,
                             std::string why) {
  EpisodeMetrics m;
  m.policy = options.policy_id;
  m.workload = ep.workload;
  m.seed = ep.seed;
  m.steps = steps;
  m.failed = true;
  m.failure = std::move(why);
  return m;
}

DriveResult drive_one(LineChannel& agent, const EpisodeRequest& ep, std::uint64_t index, const EnvConfig& env_cfg,
                      const DriveOptions& options) {
  const EnvConfig cfg = with_workload(env_cfg, ep.workload);
  Environment env(cfg);
  EpisodeAccumulator acc(cfg.calibration.cost_per_replica_step);
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(options.timeout_s * 1000.0));

  auto fail = [&](std::string why, bool broken) {
    return DriveResult{failed_record(options, ep, acc.steps(), std::move(why)), broken};
  };

  WireMessage first = WireMessage::make_obs(env.reset(ep.seed));
  first.episode = index;
  first.seed = ep.seed;
  first.workload = ep.workload;
  if (!agent.write_line(encode(first))) return fail("connection lost at step 0", true);

  int consecutive_errors = 0;
  for (;;) {
    std::string line;
    switch (agent.read_line(line, timeout)) {
      case LineChannel::ReadStatus::Timeout:
        return fail("agent timeout at step " + std::to_string(acc.steps()), true);
      case LineChannel::ReadStatus::Closed:
        return fail("connection lost at step " + std::to_string(acc.steps()), true);
      case LineChannel::ReadStatus::Line:
        break;
    }

    WireMessage reply;
    try {
      reply = decode(line);
    } catch (const WireError& e) {
      agent.write_line(encode(WireMessage::make_error(e.code(), e.what())));
      if (++consecutive_errors >= kMaxConsecutiveAgentErrors) return fail("agent kept sending invalid messages", true);
      continue;
    }

    if (env.terminated()) {
      // Terminal outcome already sent; the agent acknowledges with reset or close.
      EpisodeMetrics m = acc.finish(options.policy_id, ep.workload, ep.seed);
      if (reply.type == MessageType::Reset) return {std::move(m), false};
      return {std::move(m), true};
    }

    if (reply.type == MessageType::Reset) return fail("agent reset mid-episode at step " + std::to_string(acc.steps()), false);
    if (reply.type == MessageType::Close) return fail("agent closed at step " + std::to_string(acc.steps()), true);
    if (reply.type != MessageType::Step) {
      agent.write_line(encode(WireMessage::make_error("type", "expected step or reset")));
      if (++consecutive_errors >= kMaxConsecutiveAgentErrors) return fail("agent kept sending invalid messages", true);
      continue;
    }
    if (reply.action < Action::kMin || reply.action > Action::kMax) {
      agent.write_line(encode(WireMessage::make_error("action_range", "action must be an integer in [-2, 2]")));
      if (++consecutive_errors >= kMaxConsecutiveAgentErrors) return fail("agent kept sending invalid actions", true);
      continue;
    }
    consecutive_errors = 0;

    const StepOutcome out = env.step(Action{static_cast<int>(reply.action)});
    acc.add(out);
    if (!agent.write_line(encode(WireMessage::make_outcome(out)))) {
      return fail("connection lost at step " + std::to_string(acc.steps()), true);
    }
  }
}

/// An agent connection: either a TCP socket or a spawned child's pipes.
class AgentConnection {
 public:
  explicit AgentConnection(const std::string& endpoint) {
    if (endpoint.rfind("tcp:", 0) == 0) {
      const std::string rest = endpoint.substr(4);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos) throw ValidationError("endpoint", "expected tcp:HOST:PORT");
      int port = 0;
      try {
        port = std::stoi(rest.substr(colon + 1));
      } catch (const std::exception&) {
        throw ValidationError("endpoint", "bad port in " + endpoint);
      }
      tcp_ = LineChannel::connect_tcp(rest.substr(0, colon), port);
    } else if (endpoint.rfind("exec:", 0) == 0) {
      child_ = std::make_unique<ChildProcess>(endpoint.substr(5));
    } else {
      throw ValidationError("endpoint", "expected tcp:HOST:PORT or exec:COMMAND, got '" + endpoint + "'");
    }
  }

  LineChannel& channel() { return child_ ? child_->channel() : tcp_; }

 private:
  LineChannel tcp_;
  std::unique_ptr<ChildProcess> child_;
};

}  // namespace

std::vector<EpisodeMetrics> drive(LineChannel& agent, const std::vector<EpisodeRequest>& episodes,
                                  const EnvConfig& env_cfg, const DriveOptions& options) {
  std::vector<EpisodeMetrics> records;
  records.reserve(episodes.size());
  bool broken = false;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (broken) {
      records.push_back(failed_record(options, episodes[i], 0, "connection unavailable"));
      continue;
    }
    DriveResult r = drive_one(agent, episodes[i], i, env_cfg, options);
    broken = r.broken;
    records.push_back(std::move(r.metrics));
  }
  if (!broken) agent.write_line(encode(close_message()));
  return records;
}

std::vector<EpisodeMetrics> drive(const std::string& endpoint, const std::vector<EpisodeRequest>& episodes,
                                  const EnvConfig& env_cfg, const DriveOptions& options) {
  if (endpoint.rfind("tcp:", 0) != 0 && endpoint.rfind("exec:", 0) != 0) {
    throw ValidationError("endpoint", "expected tcp:HOST:PORT or exec:COMMAND, got '" + endpoint + "'");
  }
  std::vector<EpisodeMetrics> records;
  records.reserve(episodes.size());
  std::unique_ptr<AgentConnection> conn;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (!conn) {
      try {
        conn = std::make_unique<AgentConnection>(endpoint);
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception& e) {
        records.push_back(failed_record(options, episodes[i], 0, std::string("agent unreachable: ") + e.what()));
        continue;
      }
    }
    DriveResult r = drive_one(conn->channel(), episodes[i], i, env_cfg, options);
    if (r.broken) conn.reset();
    records.push_back(std::move(r.metrics));
  }
  if (conn) conn->channel().write_line(encode(close_message()));
  return records;
}

int run_agent(LineChannel& channel, Policy& policy) {
  int episodes = 0;
  std::string line;
  while (channel.read_line(line) == LineChannel::ReadStatus::Line) {
    if (line.empty()) continue;
    WireMessage msg;
    try {
      msg = decode(line);
    } catch (const WireError&) {
      continue;
    }
    WireMessage reply;
    if (msg.type == MessageType::Close) break;
    if (msg.type == MessageType::Obs) {
      if (msg.seed) policy.reset(*msg.seed);
      reply.type = MessageType::Step;
      reply.action = policy.decide(observation_from_wire(msg.obs)).delta;
    } else if (msg.type == MessageType::Outcome) {
      if (msg.terminated) {
        ++episodes;
        reply.type = MessageType::Reset;
      } else {
        reply.type = MessageType::Step;
        reply.action = policy.decide(observation_from_wire(msg.obs)).delta;
      }
    } else {
      continue;
    }
    if (!channel.write_line(encode(reply))) break;
  }
  return episodes;
}

}  // namespace scalebench
