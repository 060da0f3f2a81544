#include "scalebench/policies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "scalebench/config.hpp"
#include "scalebench/errors.hpp"
#include "scalebench/wire_format.hpp"

namespace scalebench {

namespace {

constexpr std::uint64_t kPolicyStream = 0x706f6c696379ULL;
constexpr std::uint64_t kTrainStream = 0x747261696eULL;
constexpr std::string_view kQTableMagic = "scalebench-qtable";

}  // namespace

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Hpa: return "hpa";
    case PolicyKind::Random: return "random";
    case PolicyKind::QLearning: return "qlearn";
    case PolicyKind::External: return "external";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

void HpaConfig::validate() const {
  if (!(target_cpu > 0.0 && target_cpu <= 100.0)) {
    throw ValidationError("target_cpu", "must lie in (0, 100]");
  }
  if (min_replicas < 1) throw ValidationError("min_replicas", "must be at least 1");
  if (max_replicas < min_replicas) throw ValidationError("max_replicas", "must not be below min_replicas");
  if (cooldown_steps < 0) throw ValidationError("cooldown_steps", "must be non-negative");
}

int hpa_decide(const Observation& obs, const HpaConfig& cfg) {
  if (obs.cpu <= 0.0) return cfg.min_replicas;
  // Ratio first: cpu == target gives exactly 1.0, so the fixed point is exact.
  const double ratio = obs.cpu / cfg.target_cpu;
  const double desired = std::ceil(obs.replicas * ratio);
  return static_cast<int>(std::clamp(desired, static_cast<double>(cfg.min_replicas),
                                     static_cast<double>(cfg.max_replicas)));
}

Action target_to_delta(int current, int target) {
  return Action{std::clamp(target - current, Action::kMin, Action::kMax)};
}

HpaPolicy::HpaPolicy(HpaConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  steps_since_change_ = cfg_.cooldown_steps;
}

void HpaPolicy::reset(std::uint64_t) { steps_since_change_ = cfg_.cooldown_steps; }

Action HpaPolicy::decide(const Observation& obs) {
  int target = hpa_decide(obs, cfg_);
  if (target < obs.replicas && steps_since_change_ < cfg_.cooldown_steps) target = obs.replicas;
  const Action action = target_to_delta(obs.replicas, target);
  if (action.delta != 0) {
    steps_since_change_ = 0;
  } else if (steps_since_change_ < cfg_.cooldown_steps) {
    ++steps_since_change_;
  }
  return action;
}

// ---------------------------------------------------------------------------

Action random_decide(Rng& rng) {
  return Action::from_index(static_cast<int>(rng.uniform_below(Action::kCount)));
}

void RandomPolicy::reset(std::uint64_t seed) { rng_ = Rng(seed, kPolicyStream); }

Action RandomPolicy::decide(const Observation&) { return random_decide(rng_); }

// ---------------------------------------------------------------------------

Action map_box_action(double x) {
  if (!std::isfinite(x)) throw DomainError("box action must be finite");
  x = std::clamp(x, -1.0, 1.0);
  if (x < -0.6) return Action{-2};
  if (x < -0.2) return Action{-1};
  if (x < 0.2) return Action{0};
  if (x < 0.6) return Action{1};
  return Action{2};
}

// ---------------------------------------------------------------------------

void QTableConfig::validate() const {
  if (cpu_buckets < 2) throw ValidationError("cpu_buckets", "must be at least 2");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ValidationError("learning_rate", "must lie in (0, 1]");
  }
  if (!(discount > 0.0 && discount <= 1.0)) throw ValidationError("discount", "must lie in (0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) {
    throw ValidationError("epsilon_start", "must lie in [0, 1]");
  }
  if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) throw ValidationError("epsilon_end", "must lie in [0, 1]");
  if (!(exploration_fraction > 0.0 && exploration_fraction <= 1.0)) {
    throw ValidationError("exploration_fraction", "must lie in (0, 1]");
  }
  if (training_steps < 0) throw ValidationError("training_steps", "must be non-negative");
}

QTable::QTable(int cpu_buckets, int min_replicas, int max_replicas)
    : cpu_buckets_(cpu_buckets),
      min_replicas_(min_replicas),
      replica_levels_(max_replicas - min_replicas + 1),
      values_(static_cast<std::size_t>(cpu_buckets) * (max_replicas - min_replicas + 1) * Action::kCount,
              0.0) {
  if (cpu_buckets < 2) throw ValidationError("cpu_buckets", "must be at least 2");
  if (replica_levels_ < 1) throw ValidationError("max_replicas", "must not be below min_replicas");
}

int QTable::state_index(const Observation& obs) const {
  const double width = 100.0 / cpu_buckets_;
  const int bucket = std::clamp(static_cast<int>(obs.cpu / width), 0, cpu_buckets_ - 1);
  const int level = std::clamp(obs.replicas - min_replicas_, 0, replica_levels_ - 1);
  return level * cpu_buckets_ + bucket;
}

double& QTable::at(int state, int action) {
  return values_[static_cast<std::size_t>(state) * Action::kCount + action];
}

double QTable::at(int state, int action) const {
  return values_[static_cast<std::size_t>(state) * Action::kCount + action];
}

Action QTable::greedy(int state) const {
  int best = 0;
  for (int a = 1; a < Action::kCount; ++a) {
    if (at(state, a) > at(state, best)) best = a;
  }
  return Action::from_index(best);
}

double QTable::max_value(int state) const {
  double best = at(state, 0);
  for (int a = 1; a < Action::kCount; ++a) best = std::max(best, at(state, a));
  return best;
}

bool QTable::operator==(const QTable& other) const {
  return cpu_buckets_ == other.cpu_buckets_ && min_replicas_ == other.min_replicas_ &&
         replica_levels_ == other.replica_levels_ && values_ == other.values_ &&
         config_hash == other.config_hash;
}

std::string qtable_config_hash(const EnvConfig& env_cfg, const QTableConfig& qcfg) {
  nlohmann::ordered_json doc = {{"env", to_json(env_cfg)},
                                {"cpu_buckets", qcfg.cpu_buckets},
                                {"learning_rate", qcfg.learning_rate},
                                {"epsilon_start", qcfg.epsilon_start},
                                {"epsilon_end", qcfg.epsilon_end},
                                {"exploration_fraction", qcfg.exploration_fraction},
                                {"discount", qcfg.discount},
                                {"training_steps", qcfg.training_steps},
                                {"train_workload", to_string(qcfg.train_workload)}};
  return fnv1a_hex(dump_wire(doc));
}

QTable qlearn_train(const EnvConfig& env_cfg, const QTableConfig& qcfg, std::uint64_t seed) {
  qcfg.validate();
  const EnvConfig cfg = with_workload(env_cfg, qcfg.train_workload);

  QTable table(qcfg.cpu_buckets, cfg.min_replicas, cfg.max_replicas);
  table.config_hash = qtable_config_hash(env_cfg, qcfg);

  Environment env(cfg);
  Rng rng(seed, kTrainStream);
  std::uint64_t episode = 0;
  Observation obs = env.reset(derive_seed(seed, episode));

  const double decay_steps = qcfg.exploration_fraction * qcfg.training_steps;
  for (int t = 0; t < qcfg.training_steps; ++t) {
    const double progress = decay_steps > 0.0 ? std::min(1.0, t / decay_steps) : 1.0;
    const double epsilon = qcfg.epsilon_start + (qcfg.epsilon_end - qcfg.epsilon_start) * progress;

    const int state = table.state_index(obs);
    const Action action = rng.uniform() < epsilon ? random_decide(rng) : table.greedy(state);
    const StepOutcome out = env.step(action);

    // Episode ends are time limits, not absorbing states: always bootstrap.
    const int next_state = table.state_index(out.obs);
    const double target = out.reward_norm + qcfg.discount * table.max_value(next_state);
    double& q = table.at(state, action.index());
    q += qcfg.learning_rate * (target - q);

    obs = out.obs;
    if (out.terminated) obs = env.reset(derive_seed(seed, ++episode));
  }
  return table;
}

void save_qtable(const QTable& table, std::ostream& out) {
  out << kQTableMagic << " 1\n"
      << "cpu_buckets " << table.cpu_buckets() << '\n'
      << "min_replicas " << table.min_replicas() << '\n'
      << "replica_levels " << table.replica_levels() << '\n'
      << "actions " << Action::kCount << '\n'
      << "config_hash " << (table.config_hash.empty() ? "-" : table.config_hash) << '\n';
  for (int s = 0; s < table.state_count(); ++s) {
    for (int a = 0; a < Action::kCount; ++a) {
      out << (a ? " " : "") << format_double(table.at(s, a));
    }
    out << '\n';
  }
}

QTable load_qtable(std::istream& in) {
  auto expect = [&](std::string_view key) {
    std::string word;
    if (!(in >> word) || word != key) throw ConfigError("q-table: expected '" + std::string(key) + "'");
  };
  auto read_int = [&](std::string_view key) {
    expect(key);
    int v = 0;
    if (!(in >> v)) throw ConfigError("q-table: bad value for " + std::string(key));
    return v;
  };
  expect(kQTableMagic);
  if (int version = 0; !(in >> version) || version != 1) throw ConfigError("q-table: unsupported version");
  const int buckets = read_int("cpu_buckets");
  const int min_replicas = read_int("min_replicas");
  const int levels = read_int("replica_levels");
  if (read_int("actions") != Action::kCount) throw ConfigError("q-table: action count mismatch");
  expect("config_hash");
  std::string hash;
  in >> hash;
  if (buckets < 2 || levels < 1) throw ConfigError("q-table: bad dimensions");

  QTable table(buckets, min_replicas, min_replicas + levels - 1);
  table.config_hash = hash == "-" ? "" : hash;
  for (int s = 0; s < table.state_count(); ++s) {
    for (int a = 0; a < Action::kCount; ++a) {
      std::string token;
      if (!(in >> token)) throw ConfigError("q-table: truncated value matrix");
      try {
        table.at(s, a) = std::stod(token);
      } catch (const std::exception&) {
        throw ConfigError("q-table: bad number '" + token + "'");
      }
    }
  }
  return table;
}

void save_qtable(const QTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  save_qtable(table, out);
}

QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return load_qtable(in);
}

QLearningPolicy::QLearningPolicy(std::shared_ptr<const QTable> table) : table_(std::move(table)) {}

Action QLearningPolicy::decide(const Observation& obs) { return table_->greedy(table_->state_index(obs)); }

}  // namespace scalebench
