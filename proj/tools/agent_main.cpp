// Reference agent for the driver side of the protocol. Speaks on
// stdin/stdout by default (use it as "exec:scalebench-agent ...") or
// listens on a TCP port ("tcp:HOST:PORT" endpoints).

#include <unistd.h>

#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "scalebench/policies.hpp"
#include "scalebench/protocol.hpp"
#include "scalebench/transport.hpp"

using namespace scalebench;

namespace {

std::unique_ptr<Policy> make_policy(const std::string& name, const std::string& qtable_path, double target) {
  if (name == "hpa") {
    HpaConfig cfg;
    cfg.target_cpu = target;
    cfg.validate();
    return std::make_unique<HpaPolicy>(cfg);
  }
  if (name == "random") return std::make_unique<RandomPolicy>();
  if (name == "qlearn") {
    if (qtable_path.empty()) throw std::invalid_argument("qlearn needs --qtable");
    return std::make_unique<QLearningPolicy>(std::make_shared<const QTable>(load_qtable(std::filesystem::path(qtable_path))));
  }
  throw std::invalid_argument("unknown policy '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference agent answering driver observations with a built-in policy", "scalebench-agent"};
  std::string policy_name = "hpa";
  std::string qtable;
  double target = 70.0;
  int port = -1;
  int max_sessions = 0;
  app.add_option("--policy", policy_name, "hpa, random or qlearn");
  app.add_option("--qtable", qtable, "Q-table file for qlearn");
  app.add_option("--hpa-target", target, "HPA target CPU percent");
  app.add_option("--listen", port, "Listen on this loopback TCP port instead of stdio");
  app.add_option("--max-sessions", max_sessions, "With --listen, exit after this many sessions");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<Policy> policy;
  try {
    policy = make_policy(policy_name, qtable, target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (port < 0) {
      LineChannel channel(STDIN_FILENO, STDOUT_FILENO, false);
      run_agent(channel, *policy);
      return 0;
    }
    TcpListener listener(port, true);
    std::cerr << "agent listening on 127.0.0.1:" << listener.port() << '\n';
    for (int served = 0; max_sessions <= 0 || served < max_sessions; ++served) {
      LineChannel channel = listener.accept();
      run_agent(channel, *policy);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
