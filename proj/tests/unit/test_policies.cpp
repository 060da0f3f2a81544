#include <doctest.h>

#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "scalebench/errors.hpp"
#include "scalebench/evalharness.hpp"
#include "scalebench/policies.hpp"

using namespace scalebench;

namespace {

Observation at(int replicas, double cpu) {
  Observation obs;
  obs.replicas = replicas;
  obs.cpu = cpu;
  return obs;
}

// Edge rule written out independently of the implementation.
int expected_bin(double x) {
  const std::array<double, 4> edges = {-0.6, -0.2, 0.2, 0.6};
  int bin = 0;
  for (double e : edges) bin += x >= e;
  return bin - 2;
}

}  // namespace

TEST_CASE("hpa_decide examples") {
  const HpaConfig cfg;
  CHECK(hpa_decide(at(2, 105), cfg) == 3);
  CHECK(hpa_decide(at(2, 70), cfg) == 2);
  CHECK(hpa_decide(at(8, 100), cfg) == 10);
  CHECK(hpa_decide(at(1, 5), cfg) == 1);
  CHECK(hpa_decide(at(6, 0), cfg) == 1);
  CHECK(hpa_decide(at(1, 75), cfg) == 2);
}

TEST_CASE("hpa fixed point at target for every count and target") {
  for (double target : {35.0, 50.0, 65.0, 70.0, 72.5, 90.0, 100.0}) {
    HpaConfig cfg;
    cfg.target_cpu = target;
    for (int n = 1; n <= 10; ++n) CHECK(hpa_decide(at(n, target), cfg) == n);
  }
}

TEST_CASE("hpa config validation") {
  HpaConfig cfg;
  cfg.target_cpu = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.target_cpu = 100.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.target_cpu = 100.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("target_to_delta") {
  CHECK(target_to_delta(2, 3) == Action{1});
  CHECK(target_to_delta(2, 10) == Action{2});
  CHECK(target_to_delta(5, 5) == Action{0});
  CHECK(target_to_delta(10, 1) == Action{-2});
  for (int cur = 1; cur <= 10; ++cur) {
    for (int target = 1; target <= 10; ++target) {
      const int next = apply_action(cur, target_to_delta(cur, target));
      CHECK(next >= 1);
      CHECK(next <= 10);
      CHECK(std::abs(target - next) == std::max(0, std::abs(target - cur) - 2));
    }
  }
}

TEST_CASE("hpa without cooldown depends only on the observation") {
  HpaPolicy a(HpaConfig{});
  HpaPolicy b(HpaConfig{});
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const Observation obs = at(static_cast<int>(rng.uniform_int(1, 10)), rng.uniform() * 100.0);
    // b sees an unrelated history first.
    b.decide(at(static_cast<int>(rng.uniform_int(1, 10)), rng.uniform() * 100.0));
    CHECK(a.decide(obs) == b.decide(obs));
    CHECK(a.decide(obs) == target_to_delta(obs.replicas, hpa_decide(obs, HpaConfig{})));
  }
}

TEST_CASE("hpa cooldown suppresses scale-down after a change") {
  HpaConfig cfg;
  cfg.cooldown_steps = 3;
  HpaPolicy p(cfg);
  p.reset(0);
  CHECK(p.decide(at(2, 100)) == Action{1});  // change
  CHECK(p.decide(at(3, 10)) == Action{0});   // would scale down
  CHECK(p.decide(at(3, 10)) == Action{0});
  CHECK(p.decide(at(3, 10)) == Action{0});
  CHECK(p.decide(at(3, 10)) == Action{-2});
  CHECK(p.decide(at(1, 100)) == Action{1});  // scale-up is never held back
}

TEST_CASE("random policy: support, determinism, frequency") {
  Rng rng(42);
  std::array<int, 5> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Action a = random_decide(rng);
    REQUIRE(a.delta >= -2);
    REQUIRE(a.delta <= 2);
    ++counts[static_cast<std::size_t>(a.index())];
  }
  for (int c : counts) {
    CHECK(c / static_cast<double>(n) >= 0.19);
    CHECK(c / static_cast<double>(n) <= 0.21);
  }

  RandomPolicy p;
  RandomPolicy q;
  p.reset(7);
  q.reset(7);
  for (int i = 0; i < 500; ++i) CHECK(p.decide({}) == q.decide({}));
}

TEST_CASE("map_box_action") {
  CHECK(map_box_action(0.0) == Action{0});
  CHECK(map_box_action(-1.0) == Action{-2});
  CHECK(map_box_action(0.6) == Action{2});
  CHECK(map_box_action(-0.21) == Action{-1});
  CHECK(map_box_action(-0.6) == Action{-1});
  CHECK(map_box_action(-0.2) == Action{0});
  CHECK(map_box_action(0.2) == Action{1});
  CHECK(map_box_action(1.0) == Action{2});
  CHECK(map_box_action(std::nextafter(0.6, 0.0)) == Action{1});
  CHECK(map_box_action(-7.0) == Action{-2});
  CHECK(map_box_action(7.0) == Action{2});
  CHECK_THROWS_AS(map_box_action(std::nan("")), DomainError);
  CHECK_THROWS_AS(map_box_action(INFINITY), DomainError);

  for (int i = 0; i <= 20000; ++i) {
    const double x = -1.0 + 2.0 * i / 20000.0;
    REQUIRE(map_box_action(x).delta == expected_bin(x));
  }
}

TEST_CASE("q-table basics") {
  QTable t(10, 1, 10);
  CHECK(t.state_count() == 100);
  CHECK(t.state_index(at(1, 0)) == 0);
  CHECK(t.state_index(at(1, 100)) == 9);
  CHECK(t.state_index(at(10, 55)) == 95);
  CHECK(t.greedy(3) == Action{-2});
  t.at(3, 2) = 1.0;
  t.at(3, 4) = 1.0;
  CHECK(t.greedy(3) == Action{0});
  CHECK(t.max_value(3) == 1.0);
}

TEST_CASE("zero training steps leave an all-zero table choosing the lowest index") {
  QTableConfig q;
  q.training_steps = 0;
  const QTable t = qlearn_train(EnvConfig{}, q, 42);
  for (double v : t.values()) CHECK(v == 0.0);
  for (int s = 0; s < t.state_count(); ++s) CHECK(t.greedy(s) == Action{-2});
}

TEST_CASE("training is deterministic in the seed") {
  QTableConfig q;
  q.training_steps = 5000;
  const QTable a = qlearn_train(EnvConfig{}, q, 42);
  const QTable b = qlearn_train(EnvConfig{}, q, 42);
  const QTable c = qlearn_train(EnvConfig{}, q, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.config_hash == qtable_config_hash(EnvConfig{}, q));
}

TEST_CASE("q-table save and load round-trip exactly") {
  QTableConfig q;
  q.training_steps = 3000;
  const QTable t = qlearn_train(EnvConfig{}, q, 9);
  std::stringstream buf;
  save_qtable(t, buf);
  CHECK(buf.str().rfind("scalebench-qtable 1\ncpu_buckets 10\n", 0) == 0);
  const QTable back = load_qtable(buf);
  CHECK(back == t);

  std::istringstream junk("scalebench-qtable 1\ncpu_buckets 10\nmin_replicas 1\n");
  CHECK_THROWS_AS(load_qtable(junk), ConfigError);
}

TEST_CASE("trained agent holds zero violations on constant traffic") {
  const auto table = std::make_shared<const QTable>(qlearn_train(EnvConfig{}, QTableConfig{}, 42));
  EnvConfig cfg = with_workload(EnvConfig{}, WorkloadKind::Constant);
  for (std::uint64_t seed : kDefaultSeeds) {
    QLearningPolicy p(table);
    const auto m = run_episode(cfg, p, "qlearn", seed);
    CHECK(m.total_violations == 0);
    CHECK(m.steps == 240);
  }
}
