#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "scalebench/config.hpp"
#include "scalebench/errors.hpp"
#include "scalebench/evalharness.hpp"
#include "scalebench/protocol.hpp"
#include "scalebench/wire_format.hpp"
#include "scalebench/workload.hpp"

namespace scalebench::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) parts.push_back(item.substr(b, e - b + 1));
  }
  return parts;
}

WorkloadKind parse_workload_or_throw(const std::string& name) {
  const auto kind = parse_workload(name);
  if (!kind) throw UsageError("unknown workload '" + name + "'; valid names: " + workload_names());
  return *kind;
}

std::vector<WorkloadKind> parse_workloads(const std::string& text) {
  if (text == "all") return {kAllWorkloads.begin(), kAllWorkloads.end()};
  std::vector<WorkloadKind> kinds;
  for (const auto& name : split(text, ',')) kinds.push_back(parse_workload_or_throw(name));
  if (kinds.empty()) throw UsageError("no workloads given");
  return kinds;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  if (text == "default") return kDefaultSeeds;
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') throw UsageError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

double parse_number(const std::string& text, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw UsageError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

/// "50,60,70" or "50:90:5" (inclusive).
std::vector<double> parse_targets(const std::string& text) {
  std::vector<double> targets;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw UsageError("target range must be LO:HI:STEP");
    const double lo = parse_number(parts[0], "target");
    const double hi = parse_number(parts[1], "target");
    const double step = parse_number(parts[2], "target step");
    if (!(step > 0.0) || hi < lo) throw UsageError("target range must have LO <= HI and STEP > 0");
    for (int i = 0;; ++i) {
      const double t = lo + step * i;
      if (t > hi + 1e-9 * std::max(1.0, std::abs(hi))) break;
      targets.push_back(t);
    }
  } else {
    for (const auto& item : split(text, ',')) targets.push_back(parse_number(item, "target"));
  }
  if (targets.empty()) throw UsageError("no targets given");
  for (double t : targets) {
    if (!(t > 0.0 && t <= 100.0)) throw UsageError("target " + format_double(t) + " outside (0, 100]");
  }
  return targets;
}

EnvConfig load_config(const std::string& path_flag) {
  std::string path = path_flag;
  if (path.empty()) {
    if (const char* env = std::getenv("SCALEBENCH_CONFIG"); env != nullptr) path = env;
  }
  if (path.empty()) return EnvConfig{};
  return load_env_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::shared_ptr<const QTable> load_table(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const QTable>(load_qtable(fs::path(path)));
}

struct Options {
  std::string config;

  // trace
  std::string workload;
  std::uint64_t seed = 42;
  int steps = 240;
  std::string out;

  // run / calibrate
  std::string policies = "hpa,random";
  std::vector<std::string> agents;
  std::string workloads = "all";
  std::string seeds = "default";
  int parallel = 0;
  std::string qtable;
  double hpa_target = 70.0;
  double agent_timeout = 30.0;
  std::string targets = "50:90:5";

  // report
  std::string results;
  double threshold = 100.0;
  std::string train_workload = "variable";

  // serve
  int port = kDefaultPort;
  bool stdio = false;
  bool public_bind = false;
  int max_sessions = 0;

  // train
  int training_steps = 50000;
};

int cmd_trace(const Options& o, std::ostream& out) {
  const WorkloadKind kind = parse_workload_or_throw(o.workload);
  if (o.steps < 1) throw UsageError("--steps must be >= 1");
  const EnvConfig cfg = with_workload(load_config(o.config), kind);
  const Trace trace = generate_trace(cfg.workload, o.seed, o.steps);
  if (o.out.empty() || o.out == "-") {
    write_trace_csv(trace, out);
  } else {
    auto file = open_out(o.out);
    write_trace_csv(trace, file);
  }
  return kExitOk;
}

std::vector<PolicySpec> parse_policies(const Options& o) {
  std::vector<PolicySpec> specs;
  const auto table = load_table(o.qtable);
  HpaConfig hpa;
  hpa.target_cpu = o.hpa_target;
  hpa.validate();
  auto add_external = [&](const std::string& item) {
    const auto eq = item.find('=');
    const std::string id = item.substr(0, eq);
    const std::string endpoint = item.substr(eq + 1);
    if (id.empty() || endpoint.empty()) throw UsageError("external agent must be NAME=ENDPOINT");
    auto spec = PolicySpec::external_policy(id, endpoint);
    spec.agent_timeout_s = o.agent_timeout;
    specs.push_back(std::move(spec));
  };
  for (const auto& item : split(o.policies, ',')) {
    if (item == "hpa") {
      specs.push_back(PolicySpec::hpa_policy("hpa", hpa));
    } else if (item == "random") {
      specs.push_back(PolicySpec::random_policy());
    } else if (item == "qlearn") {
      auto spec = PolicySpec::qlearn_policy();
      spec.qtable = table;
      specs.push_back(std::move(spec));
    } else if (item.find('=') != std::string::npos) {
      add_external(item);
    } else {
      throw UsageError("unknown policy '" + item + "'; use hpa, random, qlearn or NAME=ENDPOINT");
    }
  }
  for (const auto& item : o.agents) {
    if (item.find('=') == std::string::npos) throw UsageError("--agent expects NAME=ENDPOINT");
    add_external(item);
  }
  for (const auto& spec : specs) {
    if (spec.kind != PolicyKind::External) continue;
    if (spec.endpoint.rfind("tcp:", 0) != 0 && spec.endpoint.rfind("exec:", 0) != 0) {
      throw UsageError("endpoint for '" + spec.id + "' must start with tcp: or exec:");
    }
  }
  return specs;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  EvalProtocol protocol;
  protocol.policies = parse_policies(o);
  protocol.workloads = parse_workloads(o.workloads);
  protocol.seeds = parse_seeds(o.seeds);
  protocol.parallelism = o.parallel;
  const EnvConfig cfg = load_config(o.config);
  protocol.episode_steps = cfg.episode_steps;
  protocol.validate();

  const fs::path dir = o.out.empty() ? fs::path("results") : fs::path(o.out);
  ensure_dir(dir);
  const auto records = run_grid(protocol, cfg);
  {
    auto file = open_out(dir / "results.jsonl");
    write_results(records, file);
  }

  int failed = 0;
  for (const auto& r : records) {
    if (!r.failed) continue;
    ++failed;
    err << "failed: " << r.policy << ' ' << to_string(r.workload) << " seed " << r.seed << ": " << r.failure
        << '\n';
  }
  out << records.size() << " records (" << protocol.policies.size() << " policies x " << protocol.workloads.size()
      << " workloads x " << protocol.seeds.size() << " seeds), " << failed << " failed -> "
      << (dir / "results.jsonl").string() << '\n';
  return failed > 0 ? kExitFailure : kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  fs::path path = o.results;
  if (fs::is_directory(path)) path /= "results.jsonl";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read results file " + path.string());
  std::vector<EpisodeMetrics> records;
  try {
    records = read_results(in);
  } catch (const ValidationError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  if (records.empty()) throw UsageError("results file " + path.string() + " has no records");

  ReportOptions options;
  options.viable_threshold = o.threshold;
  options.train_workload = parse_workload_or_throw(o.train_workload);
  for (const auto& r : records) {
    if (std::find(options.policy_order.begin(), options.policy_order.end(), r.policy) == options.policy_order.end()) {
      options.policy_order.push_back(r.policy);
    }
  }
  const EvalReport report = build_report(records, options);
  const fs::path dir = o.out.empty() ? fs::path("report") : fs::path(o.out);
  write_report(report, dir);
  if (!report.transfer_error.empty()) err << "transfer summary skipped: " << report.transfer_error << '\n';
  out << "report: " << report.aggregates.policies.size() << " policies x " << report.aggregates.workloads.size()
      << " workloads, " << report.aggregates.failed_episodes << " failed episodes -> " << dir.string() << '\n';
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  const EnvConfig cfg = load_config(o.config);
  cfg.validate();
  if (o.stdio) {
    serve(cfg, std::cin, out);
    return kExitOk;
  }
  if (o.port < 0 || o.port > 65535) throw UsageError("--port must be in [0, 65535]");
  TcpListener listener(o.port, !o.public_bind);
  err << "serving on " << (o.public_bind ? "0.0.0.0" : "127.0.0.1") << ':' << listener.port() << '\n';
  serve_tcp(cfg, listener, o.max_sessions);
  return kExitOk;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
  const auto targets = parse_targets(o.targets);
  EvalProtocol protocol;
  protocol.workloads = parse_workloads(o.workloads);
  protocol.seeds = parse_seeds(o.seeds);
  protocol.parallelism = o.parallel;
  const EnvConfig cfg = load_config(o.config);
  protocol.episode_steps = cfg.episode_steps;
  std::vector<std::string> ids;
  for (double t : targets) {
    HpaConfig hpa;
    hpa.target_cpu = t;
    ids.push_back("hpa@" + format_double(t));
    protocol.policies.push_back(PolicySpec::hpa_policy(ids.back(), hpa));
  }
  protocol.validate();
  const AggregateTable table = aggregate(run_grid(protocol, cfg), ids);

  // One row per target: means across the selected workloads, then per-workload columns.
  std::vector<ParetoPoint> points;
  std::vector<std::array<double, 3>> overall;
  for (const auto& id : ids) {
    std::array<double, 3> sum{};
    for (WorkloadKind w : protocol.workloads) {
      const CellStats& c = table.at(id, w);
      sum[0] += c.cost.mean;
      sum[1] += c.violations.mean;
      sum[2] += c.replicas.mean;
    }
    for (double& s : sum) s /= static_cast<double>(protocol.workloads.size());
    overall.push_back(sum);
    points.push_back({id, WorkloadKind::Constant, sum[0], sum[1]});
  }
  const auto front = pareto_front(points);

  const fs::path dir = o.out.empty() ? fs::path("calibration") : fs::path(o.out);
  ensure_dir(dir);
  auto file = open_out(dir / "calibration.csv");
  file << "target_cpu,mean_cost,mean_violations,mean_replicas,on_frontier";
  for (WorkloadKind w : protocol.workloads) {
    file << ",cost_" << to_string(w) << ",violations_" << to_string(w) << ",replicas_" << to_string(w);
  }
  file << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool on_front = std::any_of(front.begin(), front.end(), [&](const ParetoPoint& p) { return p.policy == ids[i]; });
    file << format_double(targets[i]) << ',' << format_double(overall[i][0]) << ',' << format_double(overall[i][1])
         << ',' << format_double(overall[i][2]) << ',' << (on_front ? "true" : "false");
    for (WorkloadKind w : protocol.workloads) {
      const CellStats& c = table.at(ids[i], w);
      file << ',' << format_double(c.cost.mean) << ',' << format_double(c.violations.mean) << ','
           << format_double(c.replicas.mean);
    }
    file << '\n';
  }
  out << targets.size() << " targets x " << protocol.workloads.size() << " workloads x " << protocol.seeds.size()
      << " seeds -> " << (dir / "calibration.csv").string() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const EnvConfig cfg = load_config(o.config);
  QTableConfig qcfg;
  qcfg.training_steps = o.training_steps;
  qcfg.train_workload = parse_workload_or_throw(o.train_workload);
  qcfg.validate();
  const QTable table = qlearn_train(cfg, qcfg, o.seed);
  const fs::path path = o.out.empty() ? fs::path("qtable.txt") : fs::path(o.out);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  save_qtable(table, path);
  out << "trained " << o.training_steps << " steps on " << to_string(qcfg.train_workload) << " (seed " << o.seed
      << ") -> " << path.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Autoscaling benchmark: traces, evaluation grids, reports and the agent protocol server",
               "scalebench"};
  app.require_subcommand(1);
  app.add_option("--config", o.config, "Environment config file (JSON); falls back to $SCALEBENCH_CONFIG");

  auto* trace = app.add_subcommand("trace", "Export a workload trace as CSV");
  trace->add_option("--workload", o.workload, "Workload kind")->required();
  trace->add_option("--seed", o.seed, "Trace seed");
  trace->add_option("--steps", o.steps, "Number of steps");
  trace->add_option("--out", o.out, "Output CSV file (stdout when omitted)");

  auto* run_cmd = app.add_subcommand("run", "Run policies x workloads x seeds and write results.jsonl");
  run_cmd->add_option("--policies", o.policies, "Comma list: hpa, random, qlearn, NAME=tcp:HOST:PORT|exec:CMD");
  run_cmd->add_option("--agent", o.agents, "External agent NAME=ENDPOINT (repeatable)");
  run_cmd->add_option("--workloads", o.workloads, "'all' or a comma list");
  run_cmd->add_option("--seeds", o.seeds, "'default' or a comma list");
  run_cmd->add_option("--out", o.out, "Output directory");
  run_cmd->add_option("--parallel", o.parallel, "Episode concurrency (0 = logical cores)");
  run_cmd->add_option("--qtable", o.qtable, "Q-table file used by qlearn for every seed");
  run_cmd->add_option("--hpa-target", o.hpa_target, "HPA target CPU percent");
  run_cmd->add_option("--agent-timeout", o.agent_timeout, "Seconds to wait for each agent reply");

  auto* report = app.add_subcommand("report", "Aggregate a results file into CSV tables");
  report->add_option("--results", o.results, "results.jsonl or the directory holding it")->required();
  report->add_option("--out", o.out, "Output directory");
  report->add_option("--threshold", o.threshold, "Viability threshold on mean violations");
  report->add_option("--train-workload", o.train_workload, "Workload learned policies trained on");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the environment over the JSON-lines protocol");
  serve_cmd->add_option("--port", o.port, "TCP port (0 picks a free one)");
  serve_cmd->add_flag("--stdio", o.stdio, "Serve one session on stdin/stdout");
  serve_cmd->add_flag("--public", o.public_bind, "Listen on all interfaces instead of loopback");
  serve_cmd->add_option("--max-sessions", o.max_sessions, "Exit after this many sessions (0 = never)");

  auto* calibrate = app.add_subcommand("calibrate", "Sweep the HPA target and write a cost/violation frontier");
  calibrate->add_option("--targets", o.targets, "LO:HI:STEP or a comma list, each in (0, 100]");
  calibrate->add_option("--workloads", o.workloads, "'all' or a comma list");
  calibrate->add_option("--seeds", o.seeds, "'default' or a comma list");
  calibrate->add_option("--out", o.out, "Output directory");
  calibrate->add_option("--parallel", o.parallel, "Episode concurrency (0 = logical cores)");

  auto* train = app.add_subcommand("train", "Train the tabular Q-learning agent and save its table");
  train->add_option("--seed", o.seed, "Training seed");
  train->add_option("--steps", o.training_steps, "Training transitions");
  train->add_option("--workload", o.train_workload, "Training workload");
  train->add_option("--out", o.out, "Q-table file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (trace->parsed()) return cmd_trace(o, out);
    if (run_cmd->parsed()) return cmd_run(o, out, err);
    if (report->parsed()) return cmd_report(o, out, err);
    if (serve_cmd->parsed()) return cmd_serve(o, out, err);
    if (calibrate->parsed()) return cmd_calibrate(o, out);
    if (train->parsed()) return cmd_train(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace scalebench::cli
