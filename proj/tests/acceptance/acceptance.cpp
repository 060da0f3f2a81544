// Acceptance gate. Each criterion prints one PASS/FAIL line; the exit code
// is non-zero when any selected criterion fails.
//
//   acceptance_tests            run every criterion
//   acceptance_tests NAME...    run the named criteria

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "scalebench/evalharness.hpp"
#include "scalebench/policies.hpp"
#include "scalebench/rng.hpp"
#include "scalebench/simenv.hpp"

using namespace scalebench;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

std::vector<EpisodeMetrics> grid(std::vector<PolicySpec> policies, std::vector<WorkloadKind> workloads = {
                                                                       kAllWorkloads.begin(), kAllWorkloads.end()}) {
  EvalProtocol protocol;
  protocol.policies = std::move(policies);
  protocol.workloads = std::move(workloads);
  return run_grid(protocol, EnvConfig{});
}

bool close_rel(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::max(std::abs(want), 1e-300);
}

// ---------------------------------------------------------------------------

Verdict hpa_zero_violations() {
  const auto records =
      grid({PolicySpec::hpa_policy()}, {WorkloadKind::Constant, WorkloadKind::Periodic, WorkloadKind::Ramp});
  std::int64_t total = 0;
  int bad = 0;
  for (const auto& r : records) {
    total += r.total_violations;
    bad += r.total_violations != 0;
  }
  return {records.size() == 15 && bad == 0,
          std::to_string(records.size()) + " episodes, " + std::to_string(bad) + " with violations (sum " +
              std::to_string(total) + ")"};
}

Verdict cost_ordering() {
  const auto table = aggregate(grid({PolicySpec::hpa_policy(), PolicySpec::random_policy()}));
  bool ok = true;
  std::string detail;
  for (WorkloadKind w : kAllWorkloads) {
    const double hpa = table.at("hpa", w).cost.mean;
    std::vector<std::pair<double, std::string>> costs;
    for (const auto& id : table.policies) {
      costs.push_back({table.at(id, w).cost.mean, id});
      if (id != "hpa" && !(hpa < table.at(id, w).cost.mean)) ok = false;
    }
    std::sort(costs.rbegin(), costs.rend());
    const bool random_high = costs[0].second == "random" || (costs.size() > 1 && costs[1].second == "random");
    ok = ok && random_high;
    detail += std::string(to_string(w)) + fmt(" hpa=%.3f random=%.3f; ", hpa, table.at("random", w).cost.mean);
  }
  return {ok, detail};
}

Verdict hpa_replica_band() {
  const auto table = aggregate(grid({PolicySpec::hpa_policy()}));
  bool ok = true;
  std::string detail;
  for (WorkloadKind w : kAllWorkloads) {
    const double m = table.at("hpa", w).replicas.mean;
    const bool in = m >= 2.0 && m <= 3.0;
    ok = ok && in;
    detail += std::string(to_string(w)) + fmt("=%.3f", m) + (in ? "" : "(out)") + " ";
  }
  return {ok, detail};
}

Verdict determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "scalebench_acceptance_determinism";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto run_to = [&](const std::string& name, int parallelism) {
    EvalProtocol protocol;
    protocol.policies = {PolicySpec::hpa_policy(), PolicySpec::random_policy(), PolicySpec::qlearn_policy()};
    protocol.parallelism = parallelism;
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    write_results(run_grid(protocol, EnvConfig{}), out);
    out.close();
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = run_to("a.jsonl", 1);
  const std::string b = run_to("b.jsonl", 0);
  std::filesystem::remove_all(dir);
  return {!a.empty() && a == b, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " bytes, " +
                                    (a == b ? "identical" : "different")};
}

Verdict dynamics_oracle() {
  const CalibrationParams cal{};
  const RewardParams rp{};
  const double rel = 1e-9;
  const double cpu = cpu_util(100.0, 1, cal).raw;
  const double p95 = p95_latency(100.0, 1, cpu, cal);
  const Reward r = reward(3, false, rp);
  // Hand-computed: 5 + 0.7 * 100, 50 + 100^1.5 * 0.08, -(0.01 * 3), then
  // min-max scaling over [-1.10, -0.01] shifted down by one.
  const double want_norm = (-0.03 - -1.10) / (-0.01 - -1.10) - 1.0;
  const bool ok = close_rel(cpu, 75.0, rel) && close_rel(p95, 130.0, rel) && close_rel(r.raw, -0.03, rel) &&
                  close_rel(r.norm, want_norm, rel) && std::abs(r.norm - -0.018349) < 5e-7;
  return {ok, fmt("cpu=%.12g p95=%.12g", cpu, p95) + fmt(" reward=(%.12g, %.12g)", r.raw, r.norm)};
}

Verdict wrapper() {
  // Closed-form rule: count how many edges lie at or below x.
  auto expected = [](double x) {
    const double edges[] = {-0.6, -0.2, 0.2, 0.6};
    int bin = 0;
    for (double e : edges) bin += x >= e;
    return bin - 2;
  };
  std::vector<double> xs;
  const int n = 100000;
  for (int i = 0; i < n; ++i) xs.push_back(-1.0 + 2.0 * i / (n - 1));
  for (double e : {-0.6, -0.2, 0.2, 0.6}) {
    xs.push_back(e);
    xs.push_back(std::nextafter(e, -2.0));
    xs.push_back(std::nextafter(e, 2.0));
  }
  int mismatches = 0;
  for (double x : xs) mismatches += map_box_action(x).delta != expected(x);

  Rng rng(42);
  std::array<int, 5> counts{};
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(map_box_action(-1.0 + 2.0 * rng.uniform()).index())];
  bool freq_ok = true;
  std::string freqs;
  for (int c : counts) {
    const double f = c / static_cast<double>(n);
    freq_ok = freq_ok && std::abs(f - 0.2) <= 0.01;
    freqs += fmt("%.4f ", f);
  }
  return {mismatches == 0 && freq_ok,
          std::to_string(xs.size()) + " grid points, " + std::to_string(mismatches) + " mismatches; freqs " + freqs};
}

Verdict reward_bounds() {
  Rng rng(7);
  long steps = 0;
  long outside = 0;
  double lo = 0.0;
  double hi = -1.0;
  while (steps < 1000000) {
    EnvConfig cfg;
    cfg.workload = default_spec(kAllWorkloads[rng.uniform_below(kAllWorkloads.size())]);
    Environment env(cfg);
    env.reset(rng.next());
    bool done = false;
    while (!done) {
      const auto out = env.step(Action{static_cast<int>(rng.uniform_int(-2, 2))});
      outside += !(out.reward_norm >= -1.0 && out.reward_norm <= 0.0);
      lo = std::min(lo, out.reward_norm);
      hi = std::max(hi, out.reward_norm);
      ++steps;
      done = out.terminated;
    }
  }
  const RewardParams rp{};
  const double best = reward(1, false, rp).norm;
  const double worst = reward(10, true, rp).norm;
  return {outside == 0 && best == 0.0 && worst == -1.0,
          std::to_string(steps) + " steps, " + std::to_string(outside) + " outside" +
              fmt("; observed [%.6f, %.6f]; (1, ok)=%g", lo, hi, best) + fmt(" (10, violated)=%g", worst)};
}

Verdict pareto_oracle() {
  auto brute = [](const std::vector<ParetoPoint>& pts) {
    std::vector<ParetoPoint> unique;
    for (const auto& p : pts) {
      if (std::none_of(unique.begin(), unique.end(),
                       [&](const ParetoPoint& q) { return q.policy == p.policy && q.workload == p.workload; })) {
        unique.push_back(p);
      }
    }
    std::vector<ParetoPoint> front;
    for (const auto& p : unique) {
      const bool dominated = std::any_of(unique.begin(), unique.end(), [&](const ParetoPoint& q) {
        return q.cost <= p.cost && q.violations <= p.violations && (q.cost < p.cost || q.violations < p.violations);
      });
      if (!dominated) front.push_back(p);
    }
    return front;
  };
  Rng rng(2024);
  int mismatches = 0;
  const int instances = 10000;
  for (int i = 0; i < instances; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const bool coarse = i % 2 == 0;
    std::vector<ParetoPoint> pts;
    for (std::size_t k = 0; k < n; ++k) {
      const double c = coarse ? static_cast<double>(rng.uniform_below(8)) : rng.uniform() * 10.0;
      const double v = coarse ? static_cast<double>(rng.uniform_below(8)) : rng.uniform() * 100.0;
      pts.push_back({"p" + std::to_string(rng.uniform_below(16)), kAllWorkloads[rng.uniform_below(6)], c, v});
    }
    auto fast = pareto_front(pts);
    auto slow = brute(pts);
    auto key = [](const ParetoPoint& a, const ParetoPoint& b) {
      return std::tie(a.policy, a.workload, a.cost, a.violations) < std::tie(b.policy, b.workload, b.cost, b.violations);
    };
    std::sort(fast.begin(), fast.end(), key);
    std::sort(slow.begin(), slow.end(), key);
    mismatches += fast != slow;
  }
  return {mismatches == 0, std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches"};
}

Verdict learning_path() {
  const auto table = std::make_shared<const QTable>(qlearn_train(EnvConfig{}, QTableConfig{}, 42));
  const auto random = aggregate(grid({PolicySpec::random_policy()}, {WorkloadKind::Constant}));
  const double random_cost = random.at("random", WorkloadKind::Constant).cost.mean;
  const EnvConfig cfg = with_workload(EnvConfig{}, WorkloadKind::Constant);
  bool ok = true;
  std::string detail = fmt("random mean cost %.3f; qlearn", random_cost);
  for (std::uint64_t seed : kDefaultSeeds) {
    QLearningPolicy policy(table);
    const auto m = run_episode(cfg, policy, "qlearn", seed);
    ok = ok && m.total_violations == 0 && m.total_cost_usd < random_cost;
    detail += " " + std::to_string(seed) + fmt(":(%.3f, %g)", m.total_cost_usd, static_cast<double>(m.total_violations));
  }
  return {ok, detail};
}

Verdict distribution_shift() {
  const auto table =
      aggregate(grid({PolicySpec::qlearn_policy()}, {WorkloadKind::Constant, WorkloadKind::Bursty}));
  const double constant = table.at("qlearn", WorkloadKind::Constant).violations.mean;
  const double bursty = table.at("qlearn", WorkloadKind::Bursty).violations.mean;
  return {bursty > constant, fmt("mean violations bursty=%.2f constant=%.2f", bursty, constant)};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> check;
  double budget_s;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"hpa_zero_violations", hpa_zero_violations, 5},
      {"cost_ordering", cost_ordering, 30},
      {"hpa_replica_band", hpa_replica_band, 30},
      {"determinism", determinism, 600},
      {"dynamics_oracle", dynamics_oracle, 1},
      {"wrapper", wrapper, 10},
      {"reward_bounds", reward_bounds, 60},
      {"pareto_oracle", pareto_oracle, 60},
      {"learning_path", learning_path, 120},
      {"distribution_shift", distribution_shift, 600},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("%s %s (%.2fs%s): %s\n", pass ? "PASS" : "FAIL", c.name, secs, in_time ? "" : ", over budget",
                v.detail.c_str());
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matched\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
