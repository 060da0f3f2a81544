#include "scalebench/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "scalebench/errors.hpp"
#include "scalebench/protocol.hpp"
#include "scalebench/rng.hpp"
#include "scalebench/wire_format.hpp"

namespace scalebench {

namespace {

constexpr int kBootstrapResamples = 1000;
constexpr std::uint64_t kBootstrapStream = 0xb007;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::Cost: return "cost";
    case Metric::Violations: return "violations";
    case Metric::Replicas: return "replicas";
  }
  return "?";
}

void run_parallel(std::vector<std::function<void()>>& jobs, int parallelism) {
  int workers = parallelism > 0 ? parallelism : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (workers == 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          jobs[i]();
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Type-7 percentile of sorted data.
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

double sorted_sum(const std::vector<double>& sorted) {
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return sum;
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void open_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------

PolicySpec PolicySpec::hpa_policy(std::string id, HpaConfig cfg) {
  PolicySpec spec;
  spec.id = std::move(id);
  spec.kind = PolicyKind::Hpa;
  spec.hpa = cfg;
  return spec;
}

PolicySpec PolicySpec::random_policy(std::string id) {
  PolicySpec spec;
  spec.id = std::move(id);
  spec.kind = PolicyKind::Random;
  return spec;
}

PolicySpec PolicySpec::qlearn_policy(std::string id, QTableConfig cfg) {
  PolicySpec spec;
  spec.id = std::move(id);
  spec.kind = PolicyKind::QLearning;
  spec.qlearn = cfg;
  return spec;
}

PolicySpec PolicySpec::external_policy(std::string id, std::string endpoint) {
  PolicySpec spec;
  spec.id = std::move(id);
  spec.kind = PolicyKind::External;
  spec.endpoint = std::move(endpoint);
  return spec;
}

void EvalProtocol::validate() const {
  if (seeds.empty()) throw ValidationError("seeds", "at least one seed is required");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("seeds", "seeds must be distinct");
  }
  if (episode_steps < 1) throw ValidationError("episode_steps", "must be >= 1");
  if (workloads.empty()) throw ValidationError("workloads", "at least one workload is required");
  if (policies.empty()) throw ValidationError("policies", "at least one policy is required");
  std::set<std::string> ids;
  for (const auto& p : policies) {
    if (p.id.empty()) throw ValidationError("policies", "policy id must not be empty");
    if (!ids.insert(p.id).second) throw ValidationError("policies", "duplicate policy id '" + p.id + "'");
    if (p.kind == PolicyKind::Hpa) p.hpa.validate();
    if (p.kind == PolicyKind::QLearning && !p.qtable) p.qlearn.validate();
    if (p.kind == PolicyKind::External && p.endpoint.empty()) {
      throw ValidationError("policies", "external policy '" + p.id + "' needs an endpoint");
    }
  }
  if (parallelism < 0) throw ValidationError("parallelism", "must be >= 0");
}

EpisodeMetrics run_episode(const EnvConfig& env_cfg, Policy& policy, const std::string& policy_id,
                           std::uint64_t seed) {
  Environment env(env_cfg);
  EpisodeAccumulator acc(env_cfg.calibration.cost_per_replica_step);
  Observation obs = env.reset(seed);
  policy.reset(seed);
  for (;;) {
    const StepOutcome out = env.step(policy.decide(obs));
    acc.add(out);
    if (out.terminated) break;
    obs = out.obs;
  }
  return acc.finish(policy_id, env_cfg.workload.kind, seed);
}

std::vector<EpisodeMetrics> run_grid(const EvalProtocol& protocol, const EnvConfig& env_cfg) {
  protocol.validate();
  EnvConfig base = env_cfg;
  base.episode_steps = protocol.episode_steps;
  base.validate();

  const std::size_t n_seeds = protocol.seeds.size();
  const std::size_t n_workloads = protocol.workloads.size();
  const std::size_t per_policy = n_seeds * n_workloads;

  // Learned tables first: one per (policy, seed) unless a table was supplied.
  std::vector<std::vector<std::shared_ptr<const QTable>>> tables(protocol.policies.size());
  {
    std::vector<std::function<void()>> jobs;
    for (std::size_t p = 0; p < protocol.policies.size(); ++p) {
      const PolicySpec& spec = protocol.policies[p];
      if (spec.kind != PolicyKind::QLearning) continue;
      tables[p].assign(n_seeds, spec.qtable);
      if (spec.qtable) continue;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        jobs.emplace_back([&, p, s] {
          tables[p][s] = std::make_shared<const QTable>(
              qlearn_train(base, protocol.policies[p].qlearn, protocol.seeds[s]));
        });
      }
    }
    run_parallel(jobs, protocol.parallelism);
  }

  std::vector<EpisodeMetrics> records(protocol.policies.size() * per_policy);
  std::vector<std::function<void()>> jobs;
  for (std::size_t p = 0; p < protocol.policies.size(); ++p) {
    const PolicySpec& spec = protocol.policies[p];
    if (spec.kind == PolicyKind::External) {
      // One connection per external policy; its episodes run in grid order.
      jobs.emplace_back([&, p] {
        const PolicySpec& ext = protocol.policies[p];
        std::vector<EpisodeRequest> episodes;
        for (WorkloadKind w : protocol.workloads) {
          for (std::uint64_t seed : protocol.seeds) episodes.push_back({w, seed});
        }
        DriveOptions options;
        options.policy_id = ext.id;
        options.timeout_s = ext.agent_timeout_s;
        auto out = drive(ext.endpoint, episodes, base, options);
        std::move(out.begin(), out.end(), records.begin() + static_cast<std::ptrdiff_t>(p * per_policy));
      });
      continue;
    }
    for (std::size_t w = 0; w < n_workloads; ++w) {
      for (std::size_t s = 0; s < n_seeds; ++s) {
        jobs.emplace_back([&, p, w, s] {
          const PolicySpec& ps = protocol.policies[p];
          std::unique_ptr<Policy> policy;
          switch (ps.kind) {
            case PolicyKind::Hpa: policy = std::make_unique<HpaPolicy>(ps.hpa); break;
            case PolicyKind::Random: policy = std::make_unique<RandomPolicy>(); break;
            case PolicyKind::QLearning: policy = std::make_unique<QLearningPolicy>(tables[p][s]); break;
            case PolicyKind::External: break;
          }
          const EnvConfig cfg = with_workload(base, protocol.workloads[w]);
          records[p * per_policy + w * n_seeds + s] = run_episode(cfg, *policy, ps.id, protocol.seeds[s]);
        });
      }
    }
  }
  run_parallel(jobs, protocol.parallelism);
  return records;
}

// ---------------------------------------------------------------------------

AggregateCell summarize(std::vector<double> values, std::uint64_t bootstrap_seed) {
  AggregateCell cell;
  if (values.empty()) return cell;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  cell.missing = false;
  cell.n = static_cast<int>(n);
  cell.mean = sorted_sum(values) / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - cell.mean) * (v - cell.mean);
    cell.std = std::sqrt(ss / static_cast<double>(n - 1));
  }
  if (values.front() == values.back()) {
    cell.mean = values.front();
    cell.std = 0.0;
    cell.ci_low = cell.ci_high = values.front();
    return cell;
  }

  Rng rng(bootstrap_seed, kBootstrapStream);
  std::vector<double> means(kBootstrapResamples);
  std::vector<double> sample(n);
  for (auto& m : means) {
    for (auto& x : sample) x = values[rng.uniform_below(n)];
    std::sort(sample.begin(), sample.end());
    m = sorted_sum(sample) / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  cell.ci_low = std::min(percentile(means, 0.025), cell.mean);
  cell.ci_high = std::max(percentile(means, 0.975), cell.mean);
  return cell;
}

const AggregateCell& CellStats::get(Metric metric) const {
  switch (metric) {
    case Metric::Cost: return cost;
    case Metric::Violations: return violations;
    case Metric::Replicas: return replicas;
  }
  return cost;
}

const CellStats& AggregateTable::at(const std::string& policy, WorkloadKind workload) const {
  static const CellStats kMissing{};
  const auto it = cells.find({policy, workload});
  return it == cells.end() ? kMissing : it->second;
}

AggregateTable aggregate(const std::vector<EpisodeMetrics>& records, const std::vector<std::string>& policy_order) {
  struct Samples {
    std::vector<double> cost, violations, replicas;
    int failed = 0;
  };
  std::map<std::pair<std::string, WorkloadKind>, Samples> groups;
  std::set<std::string> ids;
  std::set<WorkloadKind> seen_workloads;
  AggregateTable table;
  for (const auto& r : records) {
    ids.insert(r.policy);
    seen_workloads.insert(r.workload);
    Samples& g = groups[{r.policy, r.workload}];
    if (r.failed) {
      ++g.failed;
      ++table.failed_episodes;
      continue;
    }
    g.cost.push_back(r.total_cost_usd);
    g.violations.push_back(static_cast<double>(r.total_violations));
    g.replicas.push_back(r.mean_replicas);
  }

  for (const auto& id : policy_order) {
    if (std::find(table.policies.begin(), table.policies.end(), id) == table.policies.end()) {
      table.policies.push_back(id);
    }
  }
  for (const auto& id : ids) {
    if (std::find(table.policies.begin(), table.policies.end(), id) == table.policies.end()) {
      table.policies.push_back(id);
    }
  }
  for (WorkloadKind w : kAllWorkloads) {
    if (seen_workloads.count(w)) table.workloads.push_back(w);
  }

  for (auto& [key, g] : groups) {
    const std::string base = key.first + "|" + std::string(to_string(key.second)) + "|";
    CellStats stats;
    stats.cost = summarize(std::move(g.cost), fnv1a64(base + std::string(metric_name(Metric::Cost))));
    stats.violations =
        summarize(std::move(g.violations), fnv1a64(base + std::string(metric_name(Metric::Violations))));
    stats.replicas = summarize(std::move(g.replicas), fnv1a64(base + std::string(metric_name(Metric::Replicas))));
    stats.failed = g.failed;
    table.cells.emplace(key, stats);
  }
  return table;
}

// ---------------------------------------------------------------------------

CompositeMatrix composite_scores(const AggregateTable& table) {
  CompositeMatrix m;
  m.policies = table.policies;
  m.workloads = table.workloads;
  m.score.assign(m.policies.size(), std::vector<std::optional<double>>(m.workloads.size()));
  m.defined.assign(m.workloads.size(), false);

  auto normalize = [](std::vector<double>& xs) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double min = *lo;
    const double span = *hi - *lo;
    for (double& x : xs) x = span > 0.0 ? (x - min) / span : 0.0;
  };

  for (std::size_t w = 0; w < m.workloads.size(); ++w) {
    std::vector<std::size_t> rows;
    std::vector<double> cost, viol;
    for (std::size_t p = 0; p < m.policies.size(); ++p) {
      const CellStats& c = table.at(m.policies[p], m.workloads[w]);
      if (c.cost.missing || c.violations.missing) continue;
      rows.push_back(p);
      cost.push_back(c.cost.mean);
      viol.push_back(c.violations.mean);
    }
    if (rows.size() < 2) continue;
    m.defined[w] = true;
    normalize(cost);
    normalize(viol);
    std::vector<double> blend(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) blend[i] = 0.5 * (cost[i] + viol[i]);
    normalize(blend);
    for (std::size_t i = 0; i < rows.size(); ++i) m.score[rows[i]][w] = blend[i];
  }
  return m;
}

RankMatrix rank_matrix(const AggregateTable& table, double viable_threshold) {
  if (!(viable_threshold > 0.0)) throw ValidationError("viable_threshold", "must be > 0");
  RankMatrix m;
  m.workloads = table.workloads;
  for (const auto& id : table.policies) {
    bool viable = true;
    for (WorkloadKind w : table.workloads) {
      const CellStats& c = table.at(id, w);
      if (c.violations.missing || c.cost.missing || c.violations.mean >= viable_threshold) viable = false;
    }
    (viable ? m.viable : m.excluded).push_back(id);
  }

  m.rank.assign(m.viable.size(), std::vector<int>(m.workloads.size(), 0));
  for (std::size_t w = 0; w < m.workloads.size(); ++w) {
    auto key = [&](std::size_t i) {
      const CellStats& c = table.at(m.viable[i], m.workloads[w]);
      return std::make_pair(c.violations.mean, c.cost.mean);
    };
    for (std::size_t i = 0; i < m.viable.size(); ++i) {
      int better = 0;
      for (std::size_t j = 0; j < m.viable.size(); ++j) {
        if (key(j) < key(i)) ++better;
      }
      m.rank[i][w] = better + 1;
    }
  }
  for (const auto& row : m.rank) {
    if (row.empty()) {
      m.max_shift.push_back(0);
      continue;
    }
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    m.max_shift.push_back(*hi - *lo);
  }
  return m;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> unique;
  std::set<std::pair<std::string, WorkloadKind>> seen;
  for (const auto& p : points) {
    if (seen.insert({p.policy, p.workload}).second) unique.push_back(p);
  }

  std::vector<std::size_t> order(unique.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (unique[a].cost != unique[b].cost) return unique[a].cost < unique[b].cost;
    return unique[a].violations < unique[b].violations;
  });

  std::vector<bool> keep(unique.size(), false);
  double best_cheaper = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && unique[order[j]].cost == unique[order[i]].cost) ++j;
    // Within one cost level the first entry holds the lowest violations.
    const double group_min = unique[order[i]].violations;
    for (std::size_t k = i; k < j; ++k) {
      const double v = unique[order[k]].violations;
      keep[order[k]] = v <= group_min && v < best_cheaper;
    }
    best_cheaper = std::min(best_cheaper, group_min);
    i = j;
  }

  std::vector<ParetoPoint> front;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    if (keep[i]) front.push_back(unique[i]);
  }
  return front;
}

std::vector<ParetoPoint> pareto_points(const AggregateTable& table) {
  std::vector<ParetoPoint> points;
  for (const auto& id : table.policies) {
    for (WorkloadKind w : table.workloads) {
      const CellStats& c = table.at(id, w);
      if (c.cost.missing || c.violations.missing) continue;
      points.push_back({id, w, c.cost.mean, c.violations.mean});
    }
  }
  return points;
}

std::vector<TransferRow> transfer_report(const AggregateTable& table, WorkloadKind train_workload,
                                         const std::set<std::string>& training_free) {
  auto has_data = [&](const std::string& id, WorkloadKind w) {
    const CellStats& c = table.at(id, w);
    return !c.cost.missing && !c.violations.missing;
  };
  bool any_train = false;
  bool any_shifted = false;
  for (const auto& id : table.policies) {
    for (WorkloadKind w : table.workloads) {
      if (!has_data(id, w)) continue;
      (w == train_workload ? any_train : any_shifted) = true;
    }
  }
  if (!any_train) {
    throw ReportError("no successful records on the train workload '" + std::string(to_string(train_workload)) + "'");
  }
  if (!any_shifted) throw ReportError("no successful records outside the train workload");

  std::vector<TransferRow> rows;
  for (const auto& id : table.policies) {
    if (!has_data(id, train_workload)) continue;
    const CellStats& train = table.at(id, train_workload);
    for (WorkloadKind w : table.workloads) {
      if (w == train_workload || !has_data(id, w)) continue;
      const CellStats& shifted = table.at(id, w);
      TransferRow row;
      row.policy = id;
      row.shifted = w;
      row.training_free = training_free.count(id) > 0;
      row.train_violations = train.violations.mean;
      row.shifted_violations = shifted.violations.mean;
      row.delta_violations = row.shifted_violations - row.train_violations;
      row.train_cost = train.cost.mean;
      row.shifted_cost = shifted.cost.mean;
      row.delta_cost = row.shifted_cost - row.train_cost;

      std::optional<std::pair<double, double>> best;
      std::optional<double> cheapest_free;
      for (const auto& other : table.policies) {
        if (!has_data(other, w)) continue;
        const CellStats& c = table.at(other, w);
        const auto key = std::make_pair(c.violations.mean, c.cost.mean);
        if (!best || key < *best) {
          best = key;
          row.most_robust = other;
        }
        if (training_free.count(other) && (!cheapest_free || c.cost.mean < *cheapest_free)) {
          cheapest_free = c.cost.mean;
        }
      }
      row.robustness_premium = row.shifted_cost - best->second;
      if (!row.training_free && cheapest_free) row.transfer_tax = row.shifted_cost - *cheapest_free;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

EvalReport build_report(const std::vector<EpisodeMetrics>& records, const ReportOptions& options) {
  EvalReport report;
  report.aggregates = aggregate(records, options.policy_order);
  report.composite = composite_scores(report.aggregates);
  report.ranks = rank_matrix(report.aggregates, options.viable_threshold);
  report.pareto = pareto_front(pareto_points(report.aggregates));
  try {
    report.transfer = transfer_report(report.aggregates, options.train_workload, options.training_free);
  } catch (const ReportError& e) {
    report.transfer_error = e.what();
  }
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const AggregateTable& table = report.aggregates;

  auto header = [&](std::ostream& out, const char* first) {
    out << first;
    for (WorkloadKind w : table.workloads) out << ',' << to_string(w);
  };

  const std::pair<Metric, const char*> tables[] = {
      {Metric::Cost, "cost.csv"}, {Metric::Violations, "violations.csv"}, {Metric::Replicas, "replicas.csv"}};
  for (const auto& [metric, name] : tables) {
    std::ofstream out;
    open_csv(out, dir / name);
    header(out, "policy");
    out << '\n';
    for (const auto& id : table.policies) {
      out << csv_escape(id);
      for (WorkloadKind w : table.workloads) {
        const AggregateCell& c = table.at(id, w).get(metric);
        out << ',' << (c.missing ? std::string("missing") : fmt("%.4f", c.mean) + "\xC2\xB1" + fmt("%.4f", c.std));
      }
      out << '\n';
    }
  }

  {
    std::ofstream out;
    open_csv(out, dir / "aggregates.csv");
    out << "policy,workload,metric,mean,std,ci_low,ci_high,n,failed\n";
    for (const auto& id : table.policies) {
      for (WorkloadKind w : table.workloads) {
        const CellStats& cell = table.at(id, w);
        for (Metric metric : {Metric::Cost, Metric::Violations, Metric::Replicas}) {
          const AggregateCell& c = cell.get(metric);
          out << csv_escape(id) << ',' << to_string(w) << ',' << metric_name(metric) << ',';
          if (c.missing) {
            out << ",,,,0," << cell.failed << '\n';
            continue;
          }
          out << format_double(c.mean) << ',' << format_double(c.std) << ',' << format_double(c.ci_low) << ','
              << format_double(c.ci_high) << ',' << c.n << ',' << cell.failed << '\n';
        }
      }
    }
  }

  {
    std::ofstream out;
    open_csv(out, dir / "composite.csv");
    header(out, "policy");
    out << '\n';
    for (std::size_t p = 0; p < report.composite.policies.size(); ++p) {
      out << csv_escape(report.composite.policies[p]);
      for (std::size_t w = 0; w < report.composite.workloads.size(); ++w) {
        const auto& s = report.composite.score[p][w];
        out << ',' << (!report.composite.defined[w] ? std::string("undefined") : s ? fmt("%.4f", *s) : "missing");
      }
      out << '\n';
    }
  }

  {
    std::ofstream out;
    open_csv(out, dir / "ranks.csv");
    header(out, "policy,status");
    out << ",max_shift\n";
    for (std::size_t i = 0; i < report.ranks.viable.size(); ++i) {
      out << csv_escape(report.ranks.viable[i]) << ",viable";
      for (int r : report.ranks.rank[i]) out << ',' << r;
      out << ',' << report.ranks.max_shift[i] << '\n';
    }
    for (const auto& id : report.ranks.excluded) {
      out << csv_escape(id) << ",excluded";
      for (std::size_t w = 0; w < report.ranks.workloads.size(); ++w) out << ',';
      out << ",\n";
    }
  }

  {
    std::ofstream out;
    open_csv(out, dir / "pareto.csv");
    out << "policy,workload,cost,violations\n";
    for (const auto& p : report.pareto) {
      out << csv_escape(p.policy) << ',' << to_string(p.workload) << ',' << format_double(p.cost) << ','
          << format_double(p.violations) << '\n';
    }
  }

  {
    std::ofstream out;
    open_csv(out, dir / "transfer.csv");
    out << "policy,training_free,shifted_workload,train_violations,shifted_violations,delta_violations,"
           "train_cost,shifted_cost,delta_cost,most_robust,robustness_premium,transfer_tax\n";
    for (const auto& r : report.transfer) {
      out << csv_escape(r.policy) << ',' << (r.training_free ? "true" : "false") << ',' << to_string(r.shifted) << ','
          << format_double(r.train_violations) << ',' << format_double(r.shifted_violations) << ','
          << format_double(r.delta_violations) << ',' << format_double(r.train_cost) << ','
          << format_double(r.shifted_cost) << ',' << format_double(r.delta_cost) << ',' << csv_escape(r.most_robust)
          << ',' << format_double(r.robustness_premium) << ','
          << (r.transfer_tax ? format_double(*r.transfer_tax) : std::string()) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

std::string to_jsonl_line(const EpisodeMetrics& m) {
  nlohmann::ordered_json doc;
  doc["policy"] = m.policy;
  doc["workload"] = to_string(m.workload);
  doc["seed"] = m.seed;
  doc["total_cost_usd"] = m.total_cost_usd;
  doc["total_violations"] = m.total_violations;
  doc["mean_replicas"] = m.mean_replicas;
  doc["steps"] = m.steps;
  doc["failed"] = m.failed;
  return dump_wire(doc);
}

EpisodeMetrics from_jsonl_line(const std::string& line) {
  const nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ValidationError("results", "malformed results line");
  auto need = [&](const char* key) -> const nlohmann::json& {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ValidationError(key, "missing from results line");
    return *it;
  };
  EpisodeMetrics m;
  try {
    m.policy = need("policy").get<std::string>();
    const auto kind = parse_workload(need("workload").get<std::string>());
    if (!kind) throw ValidationError("workload", "unknown workload; expected one of " + workload_names());
    m.workload = *kind;
    m.seed = need("seed").get<std::uint64_t>();
    const auto& cost = need("total_cost_usd");
    m.total_cost_usd = cost.is_null() ? 0.0 : cost.get<double>();
    m.total_violations = need("total_violations").get<std::int64_t>();
    const auto& replicas = need("mean_replicas");
    m.mean_replicas = replicas.is_null() ? 0.0 : replicas.get<double>();
    m.steps = need("steps").get<int>();
    m.failed = need("failed").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("results", std::string("bad field type: ") + e.what());
  }
  return m;
}

void write_results(const std::vector<EpisodeMetrics>& records, std::ostream& out) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

std::vector<EpisodeMetrics> read_results(std::istream& in) {
  std::vector<EpisodeMetrics> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    records.push_back(from_jsonl_line(line));
  }
  return records;
}

}  // namespace scalebench
