#include <doctest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <sstream>
#include <thread>

#include <json.hpp>

#include "scalebench/config.hpp"
#include "scalebench/errors.hpp"
#include "scalebench/evalharness.hpp"
#include "scalebench/protocol.hpp"

using namespace scalebench;
using nlohmann::json;

namespace {

std::pair<LineChannel, LineChannel> socket_pair() {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  return {LineChannel(fds[0], fds[0], true), LineChannel(fds[1], fds[1], true)};
}

std::string error_code(const std::string& line) {
  const json doc = json::parse(line);
  if (doc.value("type", "") != "error") return "";
  return doc.value("code", "");
}

WireMessage random_message(Rng& rng) {
  WireMessage m;
  m.type = static_cast<MessageType>(rng.uniform_below(8));
  auto real = [&] { return (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.uniform_int(-6, 6))); };
  switch (m.type) {
    case MessageType::Hello:
    case MessageType::Ack:
      m.config_hash = fnv1a_hex(std::to_string(rng.next()));
      break;
    case MessageType::Reset:
      if (rng.uniform() < 0.7) m.seed = rng.next();
      if (rng.uniform() < 0.7) m.workload = kAllWorkloads[rng.uniform_below(6)];
      break;
    case MessageType::Step:
      m.action = rng.uniform_int(-2, 2);
      break;
    case MessageType::Close:
      break;
    case MessageType::Obs:
      for (auto& v : m.obs) v = real();
      if (rng.uniform() < 0.5) m.episode = rng.uniform_below(1000);
      if (rng.uniform() < 0.5) m.seed = rng.next();
      if (rng.uniform() < 0.5) m.workload = kAllWorkloads[rng.uniform_below(6)];
      break;
    case MessageType::Outcome:
      for (auto& v : m.obs) v = real();
      m.reward = -rng.uniform();
      m.terminated = rng.uniform() < 0.5;
      m.cost = real();
      m.slo_violated = rng.uniform() < 0.5;
      m.replicas = static_cast<int>(rng.uniform_int(1, 10));
      break;
    case MessageType::Error:
      m.code = "parse";
      m.message = "bad \"quote\"\n";
      break;
  }
  return m;
}

/// Agent that answers `steps` observations with action 0, then hangs up.
void quitting_agent(LineChannel channel, int steps) {
  std::string line;
  for (int i = 0; i < steps && channel.read_line(line) == LineChannel::ReadStatus::Line; ++i) {
    channel.write_line(R"({"proto":1,"type":"step","action":0})");
  }
}

}  // namespace

TEST_CASE("every message survives encode then decode") {
  Rng rng(2718);
  for (int i = 0; i < 5000; ++i) {
    const WireMessage m = random_message(rng);
    const std::string line = encode(m);
    REQUIRE(line.find('\n') == std::string::npos);
    REQUIRE(line.rfind(R"({"proto":1,"type":)", 0) == 0);
    REQUIRE(decode(line) == m);
  }
}

TEST_CASE("encoding of the documented messages") {
  WireMessage reset;
  reset.type = MessageType::Reset;
  reset.seed = 7;
  reset.workload = WorkloadKind::Bursty;
  CHECK(encode(reset) == R"({"proto":1,"type":"reset","seed":7,"workload":"bursty"})");

  StepOutcome out;
  out.obs = Observation{40.0, 125.0, 100.0, 78.5, 0.0, 2};
  out.reward_norm = -0.25;
  out.step_cost = 0.02;
  out.terminated = true;
  CHECK(encode(WireMessage::make_outcome(out)) ==
        R"({"proto":1,"type":"outcome","obs":[40,125,100,78.5,0,2],"reward":-0.25,"terminated":true,)"
        R"("info":{"cost":0.02,"slo_violated":false,"replicas":2}})");
}

TEST_CASE("decode errors carry codes") {
  auto code_of = [](const std::string& line) {
    try {
      decode(line);
    } catch (const WireError& e) {
      return e.code();
    }
    return std::string("ok");
  };
  CHECK(code_of("{not json") == "parse");
  CHECK(code_of("[1,2]") == "parse");
  CHECK(code_of(R"({"type":"hello"})") == "proto");
  CHECK(code_of(R"({"proto":2,"type":"hello"})") == "proto");
  CHECK(code_of(R"({"proto":1,"type":"dance"})") == "type");
  CHECK(code_of(R"({"proto":1,"type":"step"})") == "parse");
  CHECK(code_of(R"({"proto":1,"type":"step","action":1.5})") == "action_range");
  CHECK(code_of(R"({"proto":1,"type":"step","action":2.0})") == "ok");
  CHECK(code_of(R"({"proto":1,"type":"reset","workload":"spiky"})") == "workload");
  CHECK(code_of(R"({"proto":1,"type":"hello","extra":{"ignored":true}})") == "ok");
}

TEST_CASE("session handshake, errors and lifecycle") {
  EnvConfig cfg;
  cfg.episode_steps = 3;
  Session s(cfg);

  const json ack = json::parse(s.handle_line(R"({"proto":1,"type":"hello"})"));
  CHECK(ack["type"] == "ack");
  CHECK(ack["proto"] == 1);
  CHECK(ack["config_hash"] == config_hash(cfg));

  CHECK(error_code(s.handle_line(R"({"proto":1,"type":"step","action":0})")) == "protocol");
  CHECK(error_code(s.handle_line("garbage")) == "parse");
  CHECK(error_code(s.handle_line(R"({"proto":1,"type":"obs","obs":[0,0,0,0,0,1]})")) == "type");

  const json obs = json::parse(s.handle_line(R"({"proto":1,"type":"reset","seed":42,"workload":"ramp"})"));
  CHECK(obs["type"] == "obs");
  CHECK(obs["obs"].size() == 6);
  CHECK(obs["obs"][5] == 1);

  CHECK(error_code(s.handle_line(R"({"proto":1,"type":"step","action":7})")) == "action_range");
  CHECK(error_code(s.handle_line(R"({"proto":1,"type":"step","action":-3})")) == "action_range");
  for (int k = 0; k < 3; ++k) {
    const json out = json::parse(s.handle_line(R"({"proto":1,"type":"step","action":1})"));
    REQUIRE(out["type"] == "outcome");
    CHECK(out["terminated"] == (k == 2));
    CHECK(out["info"]["replicas"] == k + 2);
  }
  CHECK(error_code(s.handle_line(R"({"proto":1,"type":"step","action":0})")) == "protocol");
  CHECK(s.state().terminated);
  CHECK(s.state().episode_id == 1);

  CHECK(json::parse(s.handle_line(R"({"proto":1,"type":"close"})"))["type"] == "ack");
  CHECK(s.state().closed);
  CHECK(s.result().errors == 6);
}

TEST_CASE("wire trajectory equals the in-process trajectory") {
  for (WorkloadKind kind : kAllWorkloads) {
    CAPTURE(to_string(kind));
    const EnvConfig cfg = with_workload(EnvConfig{}, kind);
    Session session(EnvConfig{});
    Environment env(cfg);
    Rng script(static_cast<std::uint64_t>(kind));

    const WireMessage first =
        decode(session.handle_line(R"({"proto":1,"type":"reset","seed":123,"workload":")" +
                                   std::string(to_string(kind)) + "\"}"));
    CHECK(first.obs == env.reset(123).to_array());
    bool done = false;
    while (!done) {
      const auto action = script.uniform_int(-2, 2);
      const WireMessage remote =
          decode(session.handle_line(R"({"proto":1,"type":"step","action":)" + std::to_string(action) + "}"));
      const StepOutcome local = env.step(Action{static_cast<int>(action)});
      REQUIRE(remote.type == MessageType::Outcome);
      REQUIRE(remote.obs == local.obs.to_array());
      REQUIRE(remote.reward == local.reward_norm);
      REQUIRE(remote.cost == local.step_cost);
      REQUIRE(remote.slo_violated == local.slo_violated);
      REQUIRE(remote.terminated == local.terminated);
      done = local.terminated;
    }
  }
}

TEST_CASE("serve over streams stops at close") {
  std::istringstream in(
      "{\"proto\":1,\"type\":\"hello\"}\n"
      "\n"
      "{\"proto\":1,\"type\":\"reset\",\"seed\":1}\r\n"
      "{\"proto\":1,\"type\":\"step\",\"action\":0}\n"
      "{\"proto\":1,\"type\":\"close\"}\n"
      "{\"proto\":1,\"type\":\"hello\"}\n");
  std::ostringstream out;
  const SessionResult r = serve(EnvConfig{}, in, out);
  CHECK(r.requests == 4);
  CHECK(r.episodes == 1);
  std::istringstream lines(out.str());
  std::vector<std::string> types;
  for (std::string line; std::getline(lines, line);) types.push_back(json::parse(line)["type"]);
  CHECK(types == std::vector<std::string>{"ack", "obs", "outcome", "ack"});
}

TEST_CASE("tcp server hosts a session") {
  TcpListener listener(0, true);
  std::thread server([&] { serve_tcp(EnvConfig{}, listener, 1); });
  LineChannel client = LineChannel::connect_tcp("127.0.0.1", listener.port());
  std::string line;
  client.write_line(R"({"proto":1,"type":"reset","seed":5,"workload":"flash"})");
  REQUIRE(client.read_line(line, std::chrono::seconds(5)) == LineChannel::ReadStatus::Line);
  CHECK(decode(line).obs[2] == 80.0);
  client.write_line(R"({"proto":1,"type":"close"})");
  REQUIRE(client.read_line(line, std::chrono::seconds(5)) == LineChannel::ReadStatus::Line);
  CHECK(decode(line).type == MessageType::Ack);
  server.join();
}

TEST_CASE("remote agents reproduce in-process metrics") {
  std::vector<EpisodeRequest> episodes;
  for (WorkloadKind kind : kAllWorkloads) {
    for (std::uint64_t seed : kDefaultSeeds) episodes.push_back({kind, seed});
  }

  SUBCASE("hpa") {
    auto [ours, theirs] = socket_pair();
    std::thread agent([ch = std::move(theirs)]() mutable {
      HpaPolicy p{HpaConfig{}};
      run_agent(ch, p);
    });
    DriveOptions opts;
    opts.policy_id = "hpa";
    const auto remote = drive(ours, episodes, EnvConfig{}, opts);
    agent.join();
    REQUIRE(remote.size() == episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      HpaPolicy local_policy{HpaConfig{}};
      const auto local = run_episode(with_workload(EnvConfig{}, episodes[i].workload), local_policy, "hpa",
                                     episodes[i].seed);
      CHECK(remote[i] == local);
    }
  }

  SUBCASE("random") {
    auto [ours, theirs] = socket_pair();
    std::thread agent([ch = std::move(theirs)]() mutable {
      RandomPolicy p;
      run_agent(ch, p);
    });
    const std::vector<EpisodeRequest> constant(episodes.begin(), episodes.begin() + 5);
    DriveOptions opts;
    opts.policy_id = "random";
    const auto remote = drive(ours, constant, EnvConfig{}, opts);
    agent.join();
    REQUIRE(remote.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(remote[i].steps == 240);
      CHECK_FALSE(remote[i].failed);
      RandomPolicy local_policy;
      CHECK(remote[i] == run_episode(with_workload(EnvConfig{}, WorkloadKind::Constant), local_policy, "random",
                                     constant[i].seed));
    }
  }
}

TEST_CASE("agent failures become failed records") {
  const std::vector<EpisodeRequest> episodes = {{WorkloadKind::Constant, 1}, {WorkloadKind::Constant, 2}};

  SUBCASE("dropped connection mid-episode") {
    auto [ours, theirs] = socket_pair();
    std::thread agent(quitting_agent, std::move(theirs), 17);
    const auto records = drive(ours, episodes, EnvConfig{});
    agent.join();
    REQUIRE(records.size() == 2);
    CHECK(records[0].failed);
    CHECK(records[0].steps == 17);
    CHECK(records[0].failure.find("step 17") != std::string::npos);
    CHECK(records[1].failed);
    CHECK(records[1].steps == 0);
  }

  SUBCASE("silent agent times out") {
    auto [ours, theirs] = socket_pair();
    DriveOptions opts;
    opts.timeout_s = 0.2;
    const auto records = drive(ours, {episodes[0]}, EnvConfig{}, opts);
    REQUIRE(records.size() == 1);
    CHECK(records[0].failed);
    CHECK(records[0].failure.find("timeout") != std::string::npos);
  }

  SUBCASE("unreachable endpoint") {
    int free_port = 0;
    {
      TcpListener tmp(0, true);
      free_port = tmp.port();
    }
    const auto failed = drive("tcp:127.0.0.1:" + std::to_string(free_port), episodes, EnvConfig{});
    REQUIRE(failed.size() == 2);
    CHECK(failed[0].failed);
    CHECK(failed[1].failed);
    CHECK(failed[0].failure.find("unreachable") != std::string::npos);
  }

  SUBCASE("bad endpoint syntax is a usage error") {
    CHECK_THROWS_AS(drive("udp:1.2.3.4:5", episodes, EnvConfig{}), ValidationError);
  }

  SUBCASE("persistent invalid actions fail the episode") {
    auto [ours, theirs] = socket_pair();
    std::thread agent([ch = std::move(theirs)]() mutable {
      std::string line;
      while (ch.read_line(line) == LineChannel::ReadStatus::Line) {
        if (decode(line).type == MessageType::Close) break;
        ch.write_line(R"({"proto":1,"type":"step","action":9})");
      }
    });
    DriveOptions opts;
    opts.timeout_s = 2.0;
    const auto records = drive(ours, {episodes[0]}, EnvConfig{}, opts);
    ours = LineChannel();
    agent.join();
    CHECK(records[0].failed);
  }
}

#ifdef SCALEBENCH_AGENT_PATH
TEST_CASE("exec endpoint drives the reference agent binary") {
  const std::vector<EpisodeRequest> episodes = {{WorkloadKind::Bursty, 42}, {WorkloadKind::Flash, 123}};
  DriveOptions opts;
  opts.policy_id = "hpa";
  const auto remote = drive(std::string("exec:") + SCALEBENCH_AGENT_PATH + " --policy hpa", episodes, EnvConfig{}, opts);
  REQUIRE(remote.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    HpaPolicy p{HpaConfig{}};
    CHECK(remote[i] == run_episode(with_workload(EnvConfig{}, episodes[i].workload), p, "hpa", episodes[i].seed));
  }
}
#endif
