// Copyright (c) 2026 The augsearch Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <bit>
#include <random>

#include "augsearch/ars_core.hpp"
#include "augsearch/checkpoint.hpp"
#include "test_support.hpp"

using namespace augsearch;
using augsearch::testing::oracle_update;

namespace {

SearchConfig small_config() {
  SearchConfig c;
  c.table_size = 4096;
  c.max_iterations = 5;
  return c;
}

// Table whose direction k (offset 30k) is the unit vector e_{units[k]}.
NoiseTable unit_table(std::initializer_list<std::size_t> units) {
  std::vector<double> entries(units.size() * kVectorDim, 0.0);
  std::size_t k = 0;
  for (std::size_t u : units) {
    entries[k * kVectorDim + u] = 1.0;
    ++k;
  }
  return NoiseTable::from_entries(std::move(entries));
}

}  // namespace

TEST_SUITE("init and sigmoid") {
  TEST_CASE("init_state starts at the origin") {
    const auto s = init_state(small_config());
    CHECK(s.params.size() == 30);
    for (double m : s.params) {
      CHECK(m == 0.0);
    }
    CHECK(s.iteration == 0);
    CHECK(s.history.empty());
    for (double x : sigmoid(s.params)) {
      CHECK(x == 0.5);
    }
    CHECK(init_state(small_config()) == s);
  }

  TEST_CASE("sigmoid values") {
    ParameterVector x{};
    x[0] = 4.0;
    x[1] = -4.0;
    x[2] = 0.0;
    x[3] = 30.0;
    x[4] = -30.0;
    const auto y = sigmoid(x);
    CHECK(y[0] == doctest::Approx(0.98201379003790845).epsilon(1e-15));
    CHECK(y[0] + y[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[2] == 0.5);
    CHECK(y[3] < 1.0);
    CHECK(y[4] > 0.0);
  }

  TEST_CASE("sigmoid rejects non-finite input") {
    ParameterVector x{};
    x[7] = std::nan("");
    CHECK_THROWS_AS(sigmoid(x), std::invalid_argument);
    x[7] = INFINITY;
    CHECK_THROWS_AS(sigmoid(x), std::invalid_argument);
  }
}

TEST_SUITE("perturbations") {
  TEST_CASE("N directions, 2N vectors") {
    auto c = small_config();
    c.num_directions = 3;
    c.top_directions = 1;
    auto s = init_state(c);
    const NoiseTable table(c.table_seed, c.table_size);
    const auto p = propose_perturbations(s, c, table);
    CHECK(p.size() == 3);
    CHECK(s.handles_issued == 3);
  }

  TEST_CASE("antithetic pairs sum to one at the origin") {
    auto c = small_config();
    auto s = init_state(c);
    const NoiseTable table(c.table_seed, c.table_size);
    for (const auto& p : propose_perturbations(s, c, table)) {
      const auto delta = slice_direction(table, p.handle);
      for (std::size_t i = 0; i < 30; ++i) {
        CHECK(p.plus[i] + p.minus[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(p.plus[i] > 0.0);
        CHECK(p.plus[i] < 1.0);
        CHECK(p.plus[i] == 1.0 / (1.0 + std::exp(-c.noise_std * delta[i])));
      }
    }
  }

  TEST_CASE("zero noise collapses both sides onto sigmoid(M)") {
    auto c = small_config();
    c.noise_std = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK_NOTHROW(c.validate(true));
    auto s = init_state(c);
    s.params[3] = 1.25;
    const NoiseTable table(c.table_seed, c.table_size);
    const auto base = sigmoid(s.params);
    for (const auto& p : propose_perturbations(s, c, table)) {
      CHECK(p.plus == base);
      CHECK(p.minus == base);
    }
  }
}

TEST_SUITE("rank_directions") {
  TEST_CASE("ordered by the better side") {
    const std::vector<DirectionRewards> r = {{0, {}, 1.0, 0.0}, {1, {}, 0.2, 0.9}};
    CHECK(rank_directions(r) == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("ties go to the lower index") {
    const std::vector<DirectionRewards> r = {{0, {}, 0.5, 0.5}, {1, {}, 0.5, 0.4}};
    CHECK(rank_directions(r) == std::vector<std::size_t>{0, 1});
    const std::vector<DirectionRewards> rev = {{1, {}, 0.5, 0.4}, {0, {}, 0.5, 0.5}};
    CHECK(rank_directions(rev) == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("all equal keeps index order") {
    std::vector<DirectionRewards> r;
    for (std::size_t k = 0; k < 6; ++k) {
      r.push_back({5 - k, {}, 0.3, 0.3});
    }
    CHECK(rank_directions(r) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  }

  TEST_CASE("missing reward is a protocol error") {
    const std::vector<DirectionRewards> r = {{0, {}, 1.0, std::nullopt}};
    CHECK_THROWS_AS(rank_directions(r), ProtocolError);
  }

  TEST_CASE("result is a permutation sorted by max reward") {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> coarse(0, 4);  // many ties
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + gen() % 8;
      std::vector<DirectionRewards> r;
      for (std::size_t k = 0; k < n; ++k) {
        r.push_back({k, {}, coarse(gen) / 4.0, coarse(gen) / 4.0});
      }
      const auto order = rank_directions(r);
      auto sorted = order;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::size_t> iota(n);
      std::iota(iota.begin(), iota.end(), 0);
      REQUIRE(sorted == iota);
      for (std::size_t i = 1; i < n; ++i) {
        const double a = std::max(*r[order[i - 1]].plus, *r[order[i - 1]].minus);
        const double b = std::max(*r[order[i]].plus, *r[order[i]].minus);
        CHECK((a > b || (a == b && order[i - 1] < order[i])));
      }
    }
  }
}

TEST_SUITE("update_step") {
  TEST_CASE("single direction example") {
    SearchConfig c = small_config();
    c.step_size = 0.01;
    c.num_directions = 1;
    c.top_directions = 1;
    const auto table = unit_table({0});
    const auto s = init_state(c);
    const std::vector<RankedDirection> top = {{{0, 30}, 1.0, 0.0}};
    const auto next = update_step(s, c, top, table);
    CHECK(next.params[0] == doctest::Approx(0.02).epsilon(1e-15));
    for (std::size_t i = 1; i < 30; ++i) {
      CHECK(next.params[i] == 0.0);
    }
    CHECK(next.iteration == 1);
    CHECK(s.iteration == 0);
  }

  TEST_CASE("two direction example") {
    SearchConfig c = small_config();
    c.step_size = 0.01;
    c.num_directions = 2;
    c.top_directions = 2;
    const auto table = unit_table({0, 1});
    const std::vector<RankedDirection> top = {{{0, 30}, 1.0, 0.0}, {{30, 30}, 0.5, 0.5}};
    const auto next = update_step(init_state(c), c, top, table);
    const double expected = 0.01 / (2.0 * std::sqrt(0.125));
    CHECK(next.params[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(next.params[0] == doctest::Approx(0.0141421).epsilon(1e-5));
    CHECK(next.params[1] == 0.0);
  }

  TEST_CASE("all rewards equal skips the step") {
    SearchConfig c = small_config();
    c.num_directions = 2;
    c.top_directions = 2;
    const NoiseTable table(0, 128);
    auto s = init_state(c);
    s.params[4] = 0.75;
    const std::vector<RankedDirection> top = {{{0, 30}, 0.3, 0.3}, {{40, 30}, 0.3, 0.3}};
    const auto next = update_step(s, c, top, table);
    CHECK(next.params == s.params);
    CHECK(next.iteration == 1);
    REQUIRE(next.events.size() == 1);
    CHECK(next.events[0].kind == EventKind::kSigmaZeroSkip);
  }

  TEST_CASE("argument errors") {
    SearchConfig c = small_config();
    c.num_directions = 2;
    c.top_directions = 2;
    const NoiseTable table(0, 128);
    const auto s = init_state(c);
    const std::vector<RankedDirection> one = {{{0, 30}, 1.0, 0.0}};
    CHECK_THROWS_AS(update_step(s, c, one, table), std::invalid_argument);
    const std::vector<RankedDirection> bad = {{{0, 30}, 1.0, NAN}, {{1, 30}, 0.0, 0.0}};
    CHECK_THROWS_AS(update_step(s, c, bad, table), EvaluatorError);
  }

  TEST_CASE("matches a direct transcription on random instances") {
    std::mt19937_64 gen(20260101);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + gen() % 8;
      const std::size_t b = 1 + gen() % n;
      std::vector<double> entries(n * 30);
      for (auto& e : entries) {
        e = normal(gen);
      }
      const auto table = NoiseTable::from_entries(entries);
      SearchConfig c = small_config();
      c.step_size = 0.001 + 0.1 * unit(gen);
      c.num_directions = n;
      c.top_directions = b;
      auto s = init_state(c);
      for (auto& m : s.params) {
        m = normal(gen);
      }
      std::vector<RankedDirection> top;
      std::vector<double> rp, rm;
      std::vector<std::vector<double>> deltas;
      for (std::size_t k = 0; k < b; ++k) {
        const double a = 10.0 * normal(gen);
        const double z = 10.0 * normal(gen);
        top.push_back({{k * 30, 30}, a, z});
        rp.push_back(a);
        rm.push_back(z);
        deltas.emplace_back(entries.begin() + static_cast<long>(k * 30),
                            entries.begin() + static_cast<long>(k * 30 + 30));
      }
      const auto next = update_step(s, c, top, table);
      const auto expected = oracle_update({s.params.begin(), s.params.end()}, c.step_size, rp,
                                          rm, deltas);
      for (std::size_t i = 0; i < 30; ++i) {
        CHECK(std::abs(next.params[i] - expected[i]) <= 1e-12);
      }
    }
  }

  TEST_CASE("step is invariant to positive affine reward maps") {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    const NoiseTable table(1, 4096);
    SearchConfig c = small_config();
    c.num_directions = 4;
    c.top_directions = 4;
    const auto s = init_state(c);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<RankedDirection> top;
      for (std::size_t k = 0; k < 4; ++k) {
        top.push_back({{k * 100, 30}, normal(gen), normal(gen)});
      }
      const double scale = 0.01 + std::abs(normal(gen)) * 50.0;
      const double shift = normal(gen) * 100.0;
      auto mapped = top;
      for (auto& d : mapped) {
        d.plus = scale * d.plus + shift;
        d.minus = scale * d.minus + shift;
      }
      const auto a = update_step(s, c, top, table);
      const auto b = update_step(s, c, mapped, table);
      for (std::size_t i = 0; i < 30; ++i) {
        CHECK(b.params[i] == doctest::Approx(a.params[i]).epsilon(1e-9));
      }
    }
  }
}

TEST_SUITE("run_search") {
  TEST_CASE("zero iterations returns the initial state") {
    auto c = small_config();
    c.max_iterations = 0;
    SphereEvaluator eval;
    const auto r = run_search(c, eval);
    CHECK(r.state == init_state(c));
    CHECK(r.ranked_history.empty());
    CHECK(r.stop_reason == StopReason::kMaxIterations);
  }

  TEST_CASE("history holds 2N records per iteration, best first") {
    auto c = small_config();
    c.max_iterations = 3;
    SphereEvaluator eval;
    const auto r = run_search(c, eval);
    CHECK(r.state.iteration == 3);
    CHECK(r.state.history.size() == 3 * 2 * c.num_directions);
    CHECK(std::is_sorted(r.ranked_history.begin(), r.ranked_history.end(),
                         [](const auto& a, const auto& b) { return a.reward > b.reward; }));
    CHECK(r.ranked_history.front().reward == r.state.best_reward);
    for (const auto& rec : r.state.history) {
      CHECK(rec.reward == sphere_reward(rec.normalized_vector));
      for (double x : rec.normalized_vector) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
      }
    }
  }

  TEST_CASE("identical configs give identical trajectories") {
    auto c = small_config();
    c.max_iterations = 40;
    c.run_seed = 417;
    TargetMatchingEvaluator e1(make_random_target(5));
    TargetMatchingEvaluator e2(make_random_target(5));
    std::vector<ParameterVector> t1, t2;
    RunOptions o1, o2;
    o1.on_iteration = [&](const SearchState& s) { t1.push_back(s.params); };
    o2.on_iteration = [&](const SearchState& s) { t2.push_back(s.params); };
    const auto a = run_search(c, e1, o1);
    const auto b = run_search(c, e2, o2);
    CHECK(t1 == t2);
    CHECK(a.state == b.state);
  }

  TEST_CASE("different run seeds explore different directions") {
    auto c = small_config();
    c.max_iterations = 2;
    SphereEvaluator eval;
    const auto a = run_search(c, eval);
    c.run_seed = 1;
    const auto b = run_search(c, eval);
    CHECK(a.state.params != b.state.params);
  }

  TEST_CASE("first-coordinate reward pushes M[0] up") {
    auto c = small_config();
    c.max_iterations = 50;
    augsearch::testing::FirstCoordinateEvaluator eval;
    const auto r = run_search(c, eval);
    CHECK(r.state.params[0] > 0.5);
    CHECK(r.state.best_trajectory.back() > 0.6);
  }

  TEST_CASE("a failure that clears on retry only logs a retry") {
    auto c = small_config();
    c.max_iterations = 2;
    SphereEvaluator inner;
    const auto bad = derive_eval_seed(c.run_seed, 0, 3, Sign::kMinus, 0);
    augsearch::testing::SelectiveFailureEvaluator eval(
        inner, [&](const EvalTask& t) { return t.seed == bad; });
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kMaxIterations);
    REQUIRE(r.state.events.size() == 1);
    CHECK(r.state.events[0].kind == EventKind::kRetry);
    CHECK(r.state.events[0].direction_index == 3);
    CHECK(r.state.history.size() == 2 * 2 * c.num_directions);
  }

  TEST_CASE("a failure that persists drops the pair") {
    auto c = small_config();
    c.max_iterations = 2;
    SphereEvaluator inner;
    const auto s0 = derive_eval_seed(c.run_seed, 1, 5, Sign::kPlus, 0);
    const auto s1 = derive_eval_seed(c.run_seed, 1, 5, Sign::kPlus, 1);
    CHECK(s0 != s1);
    augsearch::testing::SelectiveFailureEvaluator eval(
        inner, [&](const EvalTask& t) { return t.seed == s0 || t.seed == s1; });
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kMaxIterations);
    CHECK(r.state.iteration == 2);
    REQUIRE(r.state.events.size() == 2);
    CHECK(r.state.events[0].kind == EventKind::kRetry);
    CHECK(r.state.events[1].kind == EventKind::kDirectionDropped);
    CHECK(r.state.events[1].iteration == 1);
    CHECK(r.state.events[1].direction_index == 5);
    // The surviving minus side is still recorded.
    CHECK(r.state.history.size() == 4 * c.num_directions - 1);
  }

  TEST_CASE("fewer survivors than b shrinks b") {
    auto c = small_config();
    c.max_iterations = 1;
    c.num_directions = 4;
    c.top_directions = 4;
    SphereEvaluator inner;
    augsearch::testing::SelectiveFailureEvaluator eval(inner, [&](const EvalTask& t) {
      for (unsigned a = 0; a < 2; ++a) {
        if (t.seed == derive_eval_seed(0, 0, 0, Sign::kPlus, a) ||
            t.seed == derive_eval_seed(0, 0, 2, Sign::kMinus, a)) {
          return true;
        }
      }
      return false;
    });
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kMaxIterations);
    CHECK(r.state.iteration == 1);
    CHECK(r.state.params != ParameterVector{});
  }

  TEST_CASE("every pair failing aborts with partial results") {
    auto c = small_config();
    c.max_iterations = 10;
    SphereEvaluator inner;
    std::size_t calls = 0;
    augsearch::testing::SelectiveFailureEvaluator eval(inner, [&](const EvalTask&) {
      return ++calls > 2 * 2 * c.num_directions;  // first two iterations succeed
    });
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kAborted);
    CHECK(r.state.iteration == 2);
    CHECK(r.abort_reason.find("iteration 2") != std::string::npos);
    CHECK(r.ranked_history.size() == 2 * 2 * c.num_directions);
  }

  TEST_CASE("a throwing evaluator aborts") {
    auto c = small_config();
    augsearch::testing::ThrowingEvaluator eval;
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kAborted);
    CHECK(r.abort_reason.find("transport lost") != std::string::npos);
  }

  TEST_CASE("non-finite rewards count as failures") {
    auto c = small_config();
    c.max_iterations = 1;
    augsearch::testing::ConstantEvaluator eval(NAN);
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kAborted);
  }

  TEST_CASE("constant rewards skip every update") {
    auto c = small_config();
    c.max_iterations = 10;
    augsearch::testing::ConstantEvaluator eval(0.25);
    const auto r = run_search(c, eval);
    CHECK(r.state.iteration == 10);
    CHECK(r.state.params == ParameterVector{});
    CHECK(r.state.events.size() == 10);
  }

  TEST_CASE("reward threshold stops early") {
    auto c = small_config();
    c.max_iterations = 300;
    c.reward_threshold = -1.0;
    SphereEvaluator eval;
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kRewardThreshold);
    CHECK(r.state.best_reward >= -1.0);
  }

  TEST_CASE("plateau stops when the best reward stalls") {
    auto c = small_config();
    c.max_iterations = 300;
    c.plateau_window = 5;
    augsearch::testing::ConstantEvaluator eval(1.0);
    const auto r = run_search(c, eval);
    CHECK(r.stop_reason == StopReason::kPlateau);
    CHECK(r.state.iteration == 6);
  }

  TEST_CASE("checkpoints follow the stride and reload bit-exactly") {
    augsearch::testing::TempDir dir("ckpt");
    auto c = small_config();
    c.max_iterations = 7;
    TargetMatchingEvaluator eval(make_random_target(1));
    RunOptions o;
    o.checkpoint_dir = dir.path();
    o.checkpoint_stride = 3;
    const auto r = run_search(c, eval, o);
    REQUIRE(r.checkpoints.size() == 3);
    CHECK(r.checkpoints[0] == checkpoint_path(dir.path(), 3));
    CHECK(r.checkpoints[2] == checkpoint_path(dir.path(), 7));
    const auto ck = parse_checkpoint(read_file(r.checkpoints[2]));
    CHECK(ck.config == c);
    CHECK(ck.iteration == 7);
    CHECK(ck.params == r.state.params);
    CHECK(ck.best_reward == r.state.best_reward);
    CHECK(ck.handles_issued == r.state.handles_issued);
    REQUIRE(!ck.best.empty());
    CHECK(ck.best.front() == r.ranked_history.front());
  }

  TEST_CASE("eval seeds differ by every coordinate") {
    const auto base = derive_eval_seed(1, 2, 3, Sign::kPlus, 0);
    CHECK(base != derive_eval_seed(0, 2, 3, Sign::kPlus, 0));
    CHECK(base != derive_eval_seed(1, 1, 3, Sign::kPlus, 0));
    CHECK(base != derive_eval_seed(1, 2, 4, Sign::kPlus, 0));
    CHECK(base != derive_eval_seed(1, 2, 3, Sign::kMinus, 0));
    CHECK(base != derive_eval_seed(1, 2, 3, Sign::kPlus, 1));
  }

  TEST_CASE("config validation") {
    SearchConfig c;
    CHECK_NOTHROW(c.validate());
    c.run_seed = 1000;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.top_directions = 9;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.step_size = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("exact decimal text round-trips") {
    std::mt19937_64 gen(1);
    for (int i = 0; i < 1000; ++i) {
      const double x = std::bit_cast<double>(gen() & 0x7fefffffffffffffULL);
      CHECK(parse_exact(format_exact(x)) == x);
    }
    CHECK_THROWS_AS(parse_exact("1.5x"), ParseError);
  }
}
