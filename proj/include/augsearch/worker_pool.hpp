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

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "augsearch/evaluators.hpp"

namespace augsearch {

struct PoolOptions {
  std::chrono::milliseconds handshake_timeout{10000};
  /// Longest wait for any busy worker to answer; zero waits forever. A worker
  /// that times out is killed and handled like a crash.
  std::chrono::milliseconds request_timeout{0};
  /// Replacement processes a worker slot may start after crashes.
  std::size_t max_respawns_per_worker = 32;
  /// When set, worker i sees AUGSEARCH_WORKER_SEED = worker_seed(base, i).
  std::optional<std::uint64_t> worker_seed_base;
};

/// Distinct per-worker seed in [0, 1000).
std::uint64_t worker_seed(std::uint64_t base, std::size_t index);

struct PoolStats {
  std::uint64_t requests_sent = 0;
  std::uint64_t responses_received = 0;
  std::uint64_t crashes = 0;
  std::uint64_t requeues = 0;
  std::uint64_t respawns = 0;
  std::uint64_t protocol_errors = 0;
};

/// Reward evaluator backed by worker processes speaking newline-delimited
/// JSON over stdin/stdout.
///
///   worker -> pool   {"ready":true}                         once, at startup
///   pool -> worker   {"id":u64,"vector":[30 x f64],"policy":{...},"seed":u64}
///   worker -> pool   {"id":u64,"reward":f64}  or  {"id":u64,"error":"msg"}
///
/// Each worker has at most one request in flight. Commands run through
/// /bin/sh -c with AUGSEARCH_WORKER_INDEX set to the slot index (and
/// AUGSEARCH_WORKER_SEED when a seed base is configured). When a worker
/// dies mid-request the request is requeued once; a second crash on the same
/// request is reported as an error outcome. Crashed slots are restarted up to
/// PoolOptions::max_respawns_per_worker times. A malformed or mismatched
/// response is reported as an error naming the worker, and the worker is
/// restarted.
class WorkerPool : public RewardEvaluator {
 public:
  /// Starts `workers` processes and waits for every handshake. Throws
  /// ProtocolError if a worker fails to start or handshake.
  WorkerPool(std::string command, std::size_t workers, PoolOptions options = {});
  ~WorkerPool() override;

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  double evaluate(const Policy& policy, const ParameterVector& vector,
                  std::uint64_t eval_seed) override;
  std::vector<EvalOutcome> evaluate_batch(std::span<const EvalTask> tasks) override;
  std::string describe() const override { return "external:" + command_; }

  std::size_t live_workers() const;
  const PoolStats& stats() const { return stats_; }

 private:
  struct Worker;

  void start(Worker& worker);
  void stop(Worker& worker, bool kill);
  bool restart(Worker& worker);

  std::string command_;
  PoolOptions options_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::uint64_t next_id_ = 1;
  PoolStats stats_;
};

/// Convenience wrapper matching the CLI's `external:"<cmd>" --workers K`.
std::unique_ptr<WorkerPool> spawn_external(const std::string& command, std::size_t workers,
                                           PoolOptions options = {});

}  // namespace augsearch
