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

// Test stand-in for an external reward worker. Speaks the stdio protocol and
// answers reward = vector[0]. Flags switch on the failure modes the pool has
// to survive:
//
//   --malformed            answer every request with a non-JSON line
//   --malformed-worker K   same, but only in the worker with index K
//   --error-below X        answer {"error": ...} when vector[0] < X
//   --bad-handshake        greet with something other than {"ready":true}
//   --exit-immediately     exit before the handshake
//   --poison-dir D         the first request seen by worker --crash-worker
//                          (default 0) is recorded in D; every worker then
//                          dies on any request carrying that vector
//   --constant R           answer reward R regardless of the request

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct Options {
  bool malformed = false;
  std::optional<long> malformed_worker;
  std::optional<double> error_below;
  bool bad_handshake = false;
  bool exit_immediately = false;
  std::string poison_dir;
  long crash_worker = 0;
  std::optional<double> constant;
};

std::string vector_key(const nlohmann::json& vec) { return vec.dump(); }

bool poisoned(const std::string& dir, const std::string& key) {
  std::ifstream in(dir + "/poison");
  std::string line;
  while (std::getline(in, line)) {
    if (line == key) {
      return true;
    }
  }
  return false;
}

// Only the first caller wins the O_EXCL race.
bool claim_poison(const std::string& dir, const std::string& key) {
  const std::string path = dir + "/poison";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    return false;
  }
  const std::string text = key + "\n";
  [[maybe_unused]] const auto n = ::write(fd, text.data(), text.size());
  ::close(fd);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "echo_worker: " << a << " needs a value\n";
        std::exit(64);
      }
      return argv[++i];
    };
    if (a == "--malformed") {
      opt.malformed = true;
    } else if (a == "--malformed-worker") {
      opt.malformed_worker = std::stol(next());
    } else if (a == "--error-below") {
      opt.error_below = std::stod(next());
    } else if (a == "--bad-handshake") {
      opt.bad_handshake = true;
    } else if (a == "--exit-immediately") {
      opt.exit_immediately = true;
    } else if (a == "--poison-dir") {
      opt.poison_dir = next();
    } else if (a == "--crash-worker") {
      opt.crash_worker = std::stol(next());
    } else if (a == "--constant") {
      opt.constant = std::stod(next());
    } else {
      std::cerr << "echo_worker: unknown flag " << a << "\n";
      return 64;
    }
  }
  const char* env_index = std::getenv("AUGSEARCH_WORKER_INDEX");
  const long index = env_index != nullptr ? std::atol(env_index) : 0;
  if (opt.exit_immediately) {
    return 3;
  }
  if (opt.bad_handshake) {
    std::cout << "{\"hello\":1}" << std::endl;
  } else {
    std::cout << "{\"ready\":true}" << std::endl;
  }
  const bool malformed =
      opt.malformed || (opt.malformed_worker && *opt.malformed_worker == index);

  std::string line;
  while (std::getline(std::cin, line)) {
    const auto req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.contains("id") || !req.contains("vector")) {
      std::cerr << "echo_worker: bad request\n";
      continue;
    }
    nlohmann::ordered_json resp;
    resp["id"] = req["id"];
    if (!opt.poison_dir.empty()) {
      const std::string key = vector_key(req["vector"]);
      if (index == opt.crash_worker && claim_poison(opt.poison_dir, key)) {
        std::_Exit(9);
      }
      if (poisoned(opt.poison_dir, key)) {
        std::_Exit(9);
      }
    }
    if (malformed) {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    const double v0 = req["vector"].at(0).get<double>();
    if (opt.error_below && v0 < *opt.error_below) {
      resp["error"] = "vector[0] below threshold";
    } else {
      resp["reward"] = opt.constant ? *opt.constant : v0;
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
