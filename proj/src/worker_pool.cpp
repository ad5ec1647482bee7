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

#include "augsearch/worker_pool.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <deque>
#include <optional>
#include <thread>

#include <json.hpp>

#include "augsearch/rng.hpp"

namespace augsearch {

struct WorkerPool::Worker {
  std::size_t index = 0;
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;
  bool alive = false;
  std::size_t respawns = 0;
  std::optional<std::size_t> task;  // index into the current batch
};

namespace {

using Clock = std::chrono::steady_clock;

bool write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// Appends whatever is readable to `buffer`. Returns false on EOF or error.
bool read_some(int fd, std::string& buffer) {
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::read(fd, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) {
      continue;
    }
    if (n <= 0) {
      return false;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
}

std::optional<std::string> take_line(std::string& buffer) {
  const auto pos = buffer.find('\n');
  if (pos == std::string::npos) {
    return std::nullopt;
  }
  std::string line = buffer.substr(0, pos);
  buffer.erase(0, pos + 1);
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

std::string clip(const std::string& s) {
  constexpr std::size_t kMax = 120;
  return s.size() <= kMax ? s : s.substr(0, kMax) + "...";
}

std::string encode_request(std::uint64_t id, const EvalTask& task) {
  nlohmann::ordered_json msg;
  msg["id"] = id;
  msg["vector"] = task.vector;
  msg["policy"] = policy_to_json(task.policy);
  msg["seed"] = task.seed;
  return msg.dump() + "\n";
}

}  // namespace

std::uint64_t worker_seed(std::uint64_t base, std::size_t index) {
  // Seeds are distinct across the first 1000 workers: a permutation of
  // [0, 1000) drawn from `base`.
  std::vector<std::uint64_t> perm(1000);
  for (std::uint64_t i = 0; i < perm.size(); ++i) {
    perm[i] = i;
  }
  Rng rng(mix_seed({base, 0x776f726b6572ULL}));
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  }
  return perm[index % perm.size()];
}

WorkerPool::WorkerPool(std::string command, std::size_t workers, PoolOptions options)
    : command_(std::move(command)), options_(options) {
  if (workers == 0) {
    throw std::invalid_argument("worker pool needs at least one worker");
  }
  // A worker that exits while we write must surface as EPIPE, not kill us.
  std::signal(SIGPIPE, SIG_IGN);
  workers_.reserve(workers);
  try {
    for (std::size_t i = 0; i < workers; ++i) {
      workers_.push_back(std::make_unique<Worker>());
      workers_.back()->index = i;
      start(*workers_.back());
    }
  } catch (...) {
    for (auto& w : workers_) {
      stop(*w, true);
    }
    throw;
  }
}

WorkerPool::~WorkerPool() {
  for (auto& w : workers_) {
    stop(*w, false);
  }
}

void WorkerPool::start(Worker& worker) {
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) {
    throw ProtocolError("pipe: " + std::string(std::strerror(errno)));
  }
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProtocolError("pipe: " + std::string(std::strerror(errno)));
  }
  const std::string index = std::to_string(worker.index);
  const std::string seed = options_.worker_seed_base
                               ? std::to_string(worker_seed(*options_.worker_seed_base, worker.index))
                               : std::string();
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
      ::close(fd);
    }
    throw ProtocolError("fork: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::setenv("AUGSEARCH_WORKER_INDEX", index.c_str(), 1);
    if (!seed.empty()) {
      ::setenv("AUGSEARCH_WORKER_SEED", seed.c_str(), 1);
    }
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  worker.pid = pid;
  worker.to_child = to_child[1];
  worker.from_child = from_child[0];
  worker.buffer.clear();
  worker.task.reset();
  worker.alive = true;

  const std::string who = "worker " + index;
  const auto deadline = Clock::now() + options_.handshake_timeout;
  for (;;) {
    if (auto line = take_line(worker.buffer)) {
      nlohmann::json msg = nlohmann::json::parse(*line, nullptr, false);
      if (!msg.is_discarded() && msg.is_object() && msg.value("ready", false) == true) {
        return;
      }
      stop(worker, true);
      throw ProtocolError(who + ": expected {\"ready\":true} handshake, got \"" + clip(*line) +
                          "\"");
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    pollfd pfd{worker.from_child, POLLIN, 0};
    const int rc = left > 0 ? ::poll(&pfd, 1, static_cast<int>(left)) : 0;
    if (rc < 0 && errno == EINTR) {
      continue;
    }
    if (rc == 0) {
      stop(worker, true);
      throw ProtocolError(who + ": no handshake within " +
                          std::to_string(options_.handshake_timeout.count()) + " ms");
    }
    if (!read_some(worker.from_child, worker.buffer)) {
      stop(worker, true);
      throw ProtocolError(who + ": exited before handshake (command: " + command_ + ")");
    }
  }
}

void WorkerPool::stop(Worker& worker, bool kill) {
  if (worker.to_child >= 0) {
    ::close(worker.to_child);
    worker.to_child = -1;
  }
  if (worker.pid > 0) {
    if (!kill) {
      // Closing stdin asks the worker to exit; give it a moment.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(worker.pid, nullptr, WNOHANG) == worker.pid) {
          worker.pid = -1;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    }
    if (worker.pid > 0) {
      ::kill(worker.pid, SIGKILL);
      ::waitpid(worker.pid, nullptr, 0);
      worker.pid = -1;
    }
  }
  if (worker.from_child >= 0) {
    ::close(worker.from_child);
    worker.from_child = -1;
  }
  worker.alive = false;
  worker.task.reset();
  worker.buffer.clear();
}

bool WorkerPool::restart(Worker& worker) {
  stop(worker, true);
  if (worker.respawns >= options_.max_respawns_per_worker) {
    return false;
  }
  ++worker.respawns;
  ++stats_.respawns;
  try {
    start(worker);
  } catch (const ProtocolError&) {
    return false;
  }
  return true;
}

std::size_t WorkerPool::live_workers() const {
  std::size_t n = 0;
  for (const auto& w : workers_) {
    n += w->alive ? 1 : 0;
  }
  return n;
}

double WorkerPool::evaluate(const Policy& policy, const ParameterVector& vector,
                            std::uint64_t eval_seed) {
  const EvalTask task{vector, policy, eval_seed};
  const auto outcome = evaluate_batch(std::span<const EvalTask>(&task, 1)).front();
  if (!outcome.ok()) {
    throw EvaluatorError(outcome.error);
  }
  return *outcome.reward;
}

std::vector<EvalOutcome> WorkerPool::evaluate_batch(std::span<const EvalTask> tasks) {
  const std::size_t n = tasks.size();
  std::vector<EvalOutcome> outcomes(n);
  std::vector<std::uint64_t> ids(n);
  std::vector<int> requeued(n, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = next_id_++;
    queue.push_back(i);
  }
  std::size_t remaining = n;

  auto finish = [&](std::size_t t, EvalOutcome outcome) {
    outcomes[t] = std::move(outcome);
    --remaining;
  };

  auto on_crash = [&](Worker& w, const std::string& why) {
    ++stats_.crashes;
    const std::size_t t = *w.task;
    w.task.reset();
    if (requeued[t] == 0) {
      requeued[t] = 1;
      ++stats_.requeues;
      queue.push_front(t);
    } else {
      finish(t, {std::nullopt, "worker " + std::to_string(w.index) + " " + why +
                                   " on a requeued request (id " + std::to_string(ids[t]) + ")"});
    }
    restart(w);
  };

  auto on_line = [&](Worker& w, const std::string& line) {
    const std::size_t t = *w.task;
    const std::string who = "worker " + std::to_string(w.index);
    nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
    std::optional<EvalOutcome> outcome;
    if (!msg.is_discarded() && msg.is_object() && msg.contains("id") &&
        msg["id"].is_number_unsigned() && msg["id"].get<std::uint64_t>() == ids[t]) {
      if (msg.contains("reward") && msg["reward"].is_number()) {
        const double r = msg["reward"].get<double>();
        if (std::isfinite(r)) {
          outcome = EvalOutcome{r, {}};
        }
      } else if (msg.contains("error") && msg["error"].is_string()) {
        outcome = EvalOutcome{std::nullopt, who + ": " + msg["error"].get<std::string>()};
      }
    }
    if (outcome) {
      ++stats_.responses_received;
      w.task.reset();
      finish(t, std::move(*outcome));
      return;
    }
    ++stats_.protocol_errors;
    w.task.reset();
    finish(t, {std::nullopt, who + ": protocol error: malformed response \"" + clip(line) +
                                 "\" to request " + std::to_string(ids[t])});
    restart(w);
  };

  while (remaining > 0) {
    for (auto& wp : workers_) {
      Worker& w = *wp;
      if (!w.alive || w.task || queue.empty()) {
        continue;
      }
      const std::size_t t = queue.front();
      queue.pop_front();
      w.task = t;
      ++stats_.requests_sent;
      if (!write_all(w.to_child, encode_request(ids[t], tasks[t]))) {
        on_crash(w, "exited");
      }
    }

    std::vector<pollfd> fds;
    std::vector<Worker*> polled;
    for (auto& wp : workers_) {
      if (wp->alive && wp->task) {
        fds.push_back({wp->from_child, POLLIN, 0});
        polled.push_back(wp.get());
      }
    }
    if (fds.empty()) {
      if (queue.empty()) {
        continue;
      }
      bool any = live_workers() > 0;
      for (auto& wp : workers_) {
        if (!any && !wp->alive) {
          any = restart(*wp);
        }
      }
      if (!any) {
        while (!queue.empty()) {
          finish(queue.front(), {std::nullopt, "no live workers left in pool"});
          queue.pop_front();
        }
      }
      continue;
    }

    const int timeout =
        options_.request_timeout.count() > 0 ? static_cast<int>(options_.request_timeout.count()) : -1;
    const int rc = ::poll(fds.data(), fds.size(), timeout);
    if (rc < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw EvaluatorError("poll: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) {
      for (Worker* w : polled) {
        on_crash(*w, "timed out");
      }
      continue;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].revents == 0) {
        continue;
      }
      Worker& w = *polled[i];
      if (!read_some(w.from_child, w.buffer)) {
        on_crash(w, "exited");
        continue;
      }
      while (w.alive && w.task) {
        auto line = take_line(w.buffer);
        if (!line) {
          break;
        }
        on_line(w, *line);
      }
    }
  }
  return outcomes;
}

std::unique_ptr<WorkerPool> spawn_external(const std::string& command, std::size_t workers,
                                           PoolOptions options) {
  return std::make_unique<WorkerPool>(command, workers, options);
}

}  // namespace augsearch
