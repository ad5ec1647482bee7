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

#include "augsearch/orchestrator.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include "augsearch/augment_ops.hpp"
#include "augsearch/checkpoint.hpp"
#include "augsearch/image.hpp"
#include "augsearch/rng.hpp"
#include "augsearch/worker_pool.hpp"

extern char** environ;

namespace augsearch {
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ParseError("no such file: " + path.string());
  }
  const std::string text = read_file(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ParseError(path.string() + ": malformed JSON");
  }
  return j;
}

const MagnitudeRangeTable& ranges_for(const std::string& file, std::optional<MagnitudeRangeTable>& slot) {
  if (file.empty()) {
    return MagnitudeRangeTable::builtin();
  }
  slot = MagnitudeRangeTable::load(file);
  return *slot;
}

std::filesystem::path artifact_root() {
  const char* env = std::getenv(kArtifactRootEnv);
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("runs");
}

const std::set<std::string> kRunSpecKeys = {"evaluator", "workers", "target_seed",
                                            "checkpoint_stride", "ranges_file"};

nlohmann::ordered_json history_to_json(const std::vector<RewardRecord>& ranked,
                                       const MagnitudeRangeTable& ranges) {
  nlohmann::ordered_json doc;
  doc["format"] = kHistoryFormat;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : ranked) {
    auto rec = record_to_json(r);
    rec["policy"] = policy_to_json(decode_policy(r.normalized_vector, ranges));
    doc["records"].push_back(std::move(rec));
  }
  return doc;
}

std::string format_reward(double r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", r);
  return buf;
}

}  // namespace

std::string_view version_string() {
#ifdef AUGSEARCH_VERSION
  return AUGSEARCH_VERSION;
#else
  return "unknown";
#endif
}

void RunSpec::validate() const {
  search.validate();
  if (workers == 0) {
    throw std::invalid_argument("workers must be at least 1");
  }
  if (checkpoint_stride == 0) {
    throw std::invalid_argument("checkpoint_stride must be at least 1");
  }
}

nlohmann::ordered_json run_spec_to_json(const RunSpec& spec) {
  nlohmann::ordered_json j = config_to_json(spec.search);
  j["evaluator"] = to_string(spec.evaluator);
  j["workers"] = spec.workers;
  j["target_seed"] = spec.target_seed;
  j["checkpoint_stride"] = spec.checkpoint_stride;
  j["ranges_file"] = spec.ranges_file;
  return j;
}

RunSpec run_spec_from_json(const nlohmann::json& json, RunSpec spec) {
  if (!json.is_object()) {
    throw ParseError("config: expected a JSON object");
  }
  nlohmann::json search = nlohmann::json::object();
  for (const auto& [key, value] : json.items()) {
    if (!kRunSpecKeys.contains(key)) {
      search[key] = value;
    }
  }
  spec.search = config_from_json(search, spec.search);
  auto count = [&](const char* key, auto& out) {
    if (json.contains(key)) {
      if (!json[key].is_number_unsigned()) {
        throw ParseError(std::string("config.") + key + ": expected a non-negative integer");
      }
      out = json[key].get<std::remove_reference_t<decltype(out)>>();
    }
  };
  count("workers", spec.workers);
  count("target_seed", spec.target_seed);
  count("checkpoint_stride", spec.checkpoint_stride);
  if (json.contains("evaluator")) {
    if (!json["evaluator"].is_string()) {
      throw ParseError("config.evaluator: expected a string");
    }
    spec.evaluator = parse_evaluator_spec(json["evaluator"].get<std::string>());
  }
  if (json.contains("ranges_file")) {
    if (!json["ranges_file"].is_string()) {
      throw ParseError("config.ranges_file: expected a string");
    }
    spec.ranges_file = json["ranges_file"].get<std::string>();
  }
  return spec;
}

RunSpec run_spec_from_manifest(const nlohmann::json& manifest) {
  if (!manifest.is_object() || manifest.value("format", "") != kManifestFormat) {
    throw ParseError("manifest: missing or unsupported \"format\"");
  }
  for (const char* key : {"spec", "seeds", "version", "started_at", "status"}) {
    if (!manifest.contains(key)) {
      throw ParseError(std::string("manifest: missing field \"") + key + "\"");
    }
  }
  RunSpec spec = run_spec_from_json(manifest["spec"]);
  const auto& seeds = manifest["seeds"];
  if (!seeds.is_object() || seeds.value("run_seed", UINT64_MAX) != spec.search.run_seed ||
      seeds.value("table_seed", UINT64_MAX) != spec.search.table_seed ||
      seeds.value("target_seed", UINT64_MAX) != spec.target_seed) {
    throw ParseError("manifest: seeds disagree with spec");
  }
  return spec;
}

int cmd_search(const SearchCommand& cmd, std::ostream& out, std::ostream& err) {
  RunSpec spec;
  try {
    if (cmd.manifest_file) {
      spec = run_spec_from_manifest(read_json_file(*cmd.manifest_file));
    } else if (cmd.config_file) {
      spec = run_spec_from_json(read_json_file(*cmd.config_file));
    }
    spec = run_spec_from_json(cmd.overrides, spec);
    spec.validate();
  } catch (const std::exception& e) {
    err << "augsearch search: " << e.what() << "\n";
    return kExitConfigError;
  }

  const std::filesystem::path run_dir =
      cmd.out_dir ? *cmd.out_dir : artifact_root() / ("run_" + std::to_string(spec.search.run_seed));
  std::optional<MagnitudeRangeTable> custom_ranges;
  const MagnitudeRangeTable* ranges = nullptr;
  try {
    ranges = &ranges_for(spec.ranges_file, custom_ranges);
  } catch (const std::exception& e) {
    err << "augsearch search: " << e.what() << "\n";
    return kExitConfigError;
  }

  nlohmann::ordered_json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = version_string();
  manifest["spec"] = run_spec_to_json(spec);
  nlohmann::ordered_json seeds;
  seeds["run_seed"] = spec.search.run_seed;
  seeds["table_seed"] = spec.search.table_seed;
  seeds["table_size"] = spec.search.table_size;
  seeds["target_seed"] = spec.target_seed;
  seeds["worker_seeds"] = nlohmann::ordered_json::array();
  if (spec.evaluator.kind == EvaluatorSpec::Kind::kExternal) {
    for (std::size_t i = 0; i < spec.workers; ++i) {
      seeds["worker_seeds"].push_back(worker_seed(spec.search.run_seed, i));
    }
  }
  manifest["seeds"] = seeds;
  manifest["started_at"] = utc_now();
  manifest["finished_at"] = nullptr;
  manifest["status"] = "running";
  manifest["outcome"] = nullptr;
  const auto manifest_path = run_dir / "manifest.json";
  try {
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "augsearch search: " << e.what() << "\n";
    return kExitFailure;
  }

  std::unique_ptr<RewardEvaluator> evaluator;
  try {
    if (spec.evaluator.kind == EvaluatorSpec::Kind::kExternal) {
      PoolOptions options;
      options.worker_seed_base = spec.search.run_seed;
      evaluator = spawn_external(spec.evaluator.command, spec.workers, options);
    } else {
      evaluator = make_evaluator(spec.evaluator, spec.target_seed, spec.workers);
    }
  } catch (const std::exception& e) {
    err << "augsearch search: evaluator failed to start: " << e.what() << "\n";
    manifest["status"] = "aborted";
    manifest["finished_at"] = utc_now();
    manifest["outcome"] = {{"stop_reason", "aborted"}, {"abort_reason", e.what()}};
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    return kExitEvaluatorFailure;
  }

  RunOptions options;
  options.checkpoint_dir = run_dir / "checkpoints";
  options.checkpoint_stride = spec.checkpoint_stride;
  options.ranges = ranges;
  SearchResult result;
  try {
    result = run_search(spec.search, *evaluator, options);
  } catch (const std::exception& e) {
    err << "augsearch search: " << e.what() << "\n";
    return kExitFailure;
  }

  const auto& st = result.state;
  write_file_atomic(run_dir / "history.json",
                    history_to_json(result.ranked_history, *ranges).dump(1) + "\n");
  if (!result.ranked_history.empty()) {
    write_file_atomic(run_dir / "best_policy.json",
                      serialize_policy(decode_policy(result.ranked_history.front().normalized_vector,
                                                     *ranges)));
  }

  auto count_events = [&](EventKind kind) {
    return std::count_if(st.events.begin(), st.events.end(),
                         [kind](const RunEvent& e) { return e.kind == kind; });
  };
  nlohmann::ordered_json outcome;
  outcome["stop_reason"] = stop_reason_name(result.stop_reason);
  outcome["iterations"] = st.iteration;
  outcome["evaluations"] = st.history.size();
  outcome["best_reward"] =
      result.ranked_history.empty() ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(format_exact(st.best_reward));
  outcome["skip_events"] = count_events(EventKind::kSigmaZeroSkip);
  outcome["retries"] = count_events(EventKind::kRetry);
  outcome["dropped_directions"] = count_events(EventKind::kDirectionDropped);
  outcome["checkpoints"] = result.checkpoints.size();
  outcome["abort_reason"] = result.abort_reason;
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (const auto& e : st.events) {
    events.push_back({{"iteration", e.iteration},
                      {"kind", event_name(e.kind)},
                      {"direction", e.direction_index},
                      {"detail", e.detail}});
  }
  outcome["events"] = events;
  manifest["finished_at"] = utc_now();
  manifest["status"] = result.stop_reason == StopReason::kAborted ? "aborted" : "completed";
  manifest["outcome"] = outcome;
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");

  out << "run " << run_dir.string() << ": " << stop_reason_name(result.stop_reason) << " after "
      << st.iteration << " iterations, best reward "
      << (result.ranked_history.empty() ? std::string("n/a") : format_reward(st.best_reward))
      << "\n";
  if (result.stop_reason == StopReason::kAborted) {
    err << "augsearch search: run aborted: " << result.abort_reason << "\n";
    return kExitEvaluatorFailure;
  }
  return kExitOk;
}

std::vector<std::uint64_t> sweep_seeds(std::uint64_t master_seed, std::size_t runs) {
  if (runs > 1000) {
    throw std::invalid_argument("a sweep can draw at most 1000 distinct seeds");
  }
  Rng rng(master_seed);
  std::vector<std::uint64_t> seeds;
  std::set<std::uint64_t> used;
  while (seeds.size() < runs) {
    const auto s = rng.uniform_index(1000);
    if (used.insert(s).second) {
      seeds.push_back(s);
    }
  }
  return seeds;
}

int cmd_sweep(const SweepCommand& cmd, std::ostream& out, std::ostream& err) {
  if (cmd.runs == 0) {
    err << "augsearch sweep: runs must be at least 1\n";
    return kExitConfigError;
  }
  if (!std::filesystem::exists(cmd.config_file)) {
    err << "augsearch sweep: no such file: " << cmd.config_file.string() << "\n";
    return kExitConfigError;
  }
  std::vector<std::uint64_t> seeds;
  try {
    seeds = sweep_seeds(cmd.master_seed, cmd.runs);
  } catch (const std::exception& e) {
    err << "augsearch sweep: " << e.what() << "\n";
    return kExitConfigError;
  }
  const std::filesystem::path sweep_dir = cmd.out_dir ? *cmd.out_dir : artifact_root() / "sweep";
  std::filesystem::create_directories(sweep_dir);

  std::string csv = "run_seed,status,best_reward,iterations\n";
  for (const auto seed : seeds) {
    const auto run_dir = sweep_dir / ("run_" + std::to_string(seed));
    const std::string exe = cmd.executable.string();
    const std::string config = cmd.config_file.string();
    const std::string seed_text = std::to_string(seed);
    const std::string dir_text = run_dir.string();
    std::vector<std::string> args = {exe,          "search",  "--config", config,
                                     "--run-seed", seed_text, "--out",    dir_text};
    std::vector<char*> argv;
    for (auto& a : args) {
      argv.push_back(a.data());
    }
    argv.push_back(nullptr);

    pid_t pid = -1;
    int status = -1;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) == 0) {
      waitpid(pid, &status, 0);
    }
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

    std::string state = code == 0 ? "completed" : "failed(exit " + std::to_string(code) + ")";
    std::string best = "";
    std::string iterations = "";
    try {
      const auto manifest = read_json_file(run_dir / "manifest.json");
      const auto& outcome = manifest.at("outcome");
      if (outcome.is_object()) {
        if (outcome.contains("best_reward") && outcome["best_reward"].is_string()) {
          best = format_reward(parse_exact(outcome["best_reward"].get<std::string>()));
        }
        if (outcome.contains("iterations")) {
          iterations = std::to_string(outcome["iterations"].get<std::size_t>());
        }
      }
    } catch (const std::exception& e) {
      err << "augsearch sweep: run " << seed << ": " << e.what() << "\n";
    }
    csv += seed_text + "," + state + "," + best + "," + iterations + "\n";
    out << "seed " << seed << ": " << state << ", best " << (best.empty() ? "n/a" : best) << "\n";
  }
  write_file_atomic(sweep_dir / "sweep.csv", csv);
  out << csv;
  return kExitOk;
}

std::array<std::size_t, 10> probability_histogram(const Policy& policy) {
  std::array<std::size_t, 10> bins{};
  for (const auto& sp : policy.sub_policies) {
    for (const auto* op : {&sp.first, &sp.second}) {
      const auto bin = std::min<std::size_t>(static_cast<std::size_t>(op->probability * 10.0), 9);
      ++bins[bin];
    }
  }
  return bins;
}

std::string finalize_report(const Policy& policy, std::size_t distinct_used, std::size_t k,
                            const std::vector<double>& rewards) {
  std::ostringstream os;
  os << "final policy: " << policy.sub_policies.size() << " sub-policies from " << distinct_used
     << " of " << k << " requested policies\n";
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    os << "  policy " << i << ": reward " << format_reward(rewards[i]) << "\n";
  }
  os << "\nsub-policies:\n";
  for (std::size_t i = 0; i < policy.sub_policies.size(); ++i) {
    const auto& sp = policy.sub_policies[i];
    char line[160];
    std::snprintf(line, sizeof(line), "  %2zu  %-13s p=%.2f m=%7.2f | %-13s p=%.2f m=%7.2f\n", i,
                  std::string(kind_name(sp.first.kind)).c_str(), sp.first.probability,
                  sp.first.magnitude, std::string(kind_name(sp.second.kind)).c_str(),
                  sp.second.probability, sp.second.magnitude);
    os << line;
  }
  const auto bins = probability_histogram(policy);
  os << "\nprobability histogram:\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    char line[64];
    std::snprintf(line, sizeof(line), "  [%.1f, %.1f%c %3zu ", b / 10.0, (b + 1) / 10.0,
                  b == 9 ? ']' : ')', bins[b]);
    os << line << std::string(bins[b], '#') << "\n";
  }
  std::size_t near_zero = 0;
  for (const auto& sp : policy.sub_policies) {
    near_zero += (sp.first.probability < 0.1) + (sp.second.probability < 0.1);
  }
  os << "operations with p < 0.1: " << near_zero << "\n";
  return os.str();
}

int cmd_finalize(const FinalizeCommand& cmd, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::is_directory(cmd.history_dir)) {
    err << "augsearch finalize: not a directory: " << cmd.history_dir.string() << "\n";
    return kExitConfigError;
  }
  std::optional<MagnitudeRangeTable> custom;
  std::vector<ScoredPolicy> scored;
  try {
    const auto& ranges = ranges_for(cmd.ranges_file, custom);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(cmd.history_dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "history.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto doc = read_json_file(file);
      if (doc.value("format", "") != kHistoryFormat || !doc.contains("records") ||
          !doc["records"].is_array()) {
        throw ParseError(file.string() + ": not a history file");
      }
      for (const auto& rec : doc["records"]) {
        const auto r = record_from_json(rec);
        scored.push_back({r.reward, decode_policy(r.normalized_vector, ranges)});
      }
    }
  } catch (const std::exception& e) {
    err << "augsearch finalize: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (scored.empty()) {
    err << "augsearch finalize: no history.json with records under "
        << cmd.history_dir.string() << "\n";
    return kExitConfigError;
  }

  const auto result = concat_top_policies(scored, cmd.k);
  std::vector<double> rewards;
  {
    std::set<std::string> seen;
    std::vector<const ScoredPolicy*> order;
    for (const auto& s : scored) {
      order.push_back(&s);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const ScoredPolicy* a, const ScoredPolicy* b) { return a->reward > b->reward; });
    for (const auto* s : order) {
      if (rewards.size() == result.distinct_used) {
        break;
      }
      if (seen.insert(serialize_policy(s->policy)).second) {
        rewards.push_back(s->reward);
      }
    }
  }

  const auto policy_path = cmd.out_file ? *cmd.out_file : cmd.history_dir / "final_policy.json";
  const auto report_path =
      cmd.report_file ? *cmd.report_file : cmd.history_dir / "final_report.txt";
  const std::string report = finalize_report(result.policy, result.distinct_used, cmd.k, rewards);
  write_file_atomic(policy_path, serialize_policy(result.policy));
  write_file_atomic(report_path, report);
  out << report;
  out << "wrote " << policy_path.string() << "\n";
  if (result.partial) {
    err << "augsearch finalize: warning: only " << result.distinct_used
        << " distinct policies available, " << cmd.k << " requested\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_decode(const DecodeCommand& cmd, std::istream& in, std::ostream& out, std::ostream& err) {
  try {
    std::optional<MagnitudeRangeTable> custom;
    const auto& ranges = ranges_for(cmd.ranges_file, custom);
    nlohmann::json doc;
    if (cmd.vector_file == "-") {
      std::stringstream buffer;
      buffer << in.rdbuf();
      doc = nlohmann::json::parse(buffer.str(), nullptr, false);
      if (doc.is_discarded()) {
        throw ParseError("stdin: malformed JSON");
      }
    } else {
      doc = read_json_file(cmd.vector_file);
    }
    if (doc.is_object() && doc.contains("vector")) {
      doc = doc["vector"];
    }
    if (!doc.is_array() || doc.size() != kVectorDim) {
      throw ParseError("expected a JSON array of 30 numbers");
    }
    ParameterVector v{};
    for (std::size_t i = 0; i < kVectorDim; ++i) {
      if (!doc[i].is_number()) {
        throw ParseError("vector[" + std::to_string(i) + "]: expected a number");
      }
      v[i] = doc[i].get<double>();
    }
    if (cmd.pre_sigmoid) {
      v = sigmoid(v);
    }
    const std::string text = serialize_policy(decode_policy(v, ranges));
    if (cmd.out_file) {
      write_file_atomic(*cmd.out_file, text);
    } else {
      out << text;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "augsearch decode: " << e.what() << "\n";
    return kExitConfigError;
  }
}

int cmd_augment_apply(const AugmentApplyCommand& cmd, std::ostream& out, std::ostream& err) {
  try {
    const Policy policy = parse_policy(read_file(cmd.policy_file));
    const Image img = read_png(cmd.image_file);
    std::optional<Image> pair;
    AugmentContext ctx;
    if (cmd.pair_image) {
      pair = read_png(*cmd.pair_image);
      ctx.pair_image = &*pair;
    }
    const auto applied = apply_policy_minibatch_style(img, policy, ApplySeed{cmd.seed}, ctx);
    write_png(applied.image, cmd.out_file);
    out << "sub-policy " << applied.sub_policy_index << " -> " << cmd.out_file.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "augsearch augment apply: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_augment_sheet(const AugmentSheetCommand& cmd, std::ostream& out, std::ostream& err) {
  try {
    const Policy policy = parse_policy(read_file(cmd.policy_file));
    const Image img = read_png(cmd.image_file);
    std::optional<Image> pair;
    AugmentContext ctx;
    if (cmd.pair_image) {
      pair = read_png(*cmd.pair_image);
      ctx.pair_image = &*pair;
    }
    const Image sheet = render_contact_sheet(img, policy, cmd.rows, cmd.cols, cmd.seed, ctx);
    write_png(sheet, cmd.out_file);
    out << cmd.rows << "x" << cmd.cols << " sheet -> " << cmd.out_file.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "augsearch augment sheet: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace augsearch
