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

#include "augsearch/ars_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "augsearch/checkpoint.hpp"
#include "augsearch/rng.hpp"

namespace augsearch {
namespace {

// In-place form of update_step; run_search uses it to avoid copying history.
void apply_update(SearchState& state, const SearchConfig& config,
                  std::span<const RankedDirection> top, const NoiseTable& table) {
  const std::size_t b = config.top_directions;
  if (top.size() != b) {
    throw std::invalid_argument("update_step: expected " + std::to_string(b) +
                                " ranked directions, got " + std::to_string(top.size()));
  }
  for (const auto& d : top) {
    if (!std::isfinite(d.plus) || !std::isfinite(d.minus)) {
      throw EvaluatorError("update_step: non-finite reward");
    }
  }

  bool all_equal = true;
  double sum = 0.0;
  for (const auto& d : top) {
    sum += d.plus + d.minus;
    all_equal = all_equal && d.plus == top.front().plus && d.minus == top.front().plus;
  }
  const double count = 2.0 * static_cast<double>(b);
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto& d : top) {
    sq += (d.plus - mean) * (d.plus - mean) + (d.minus - mean) * (d.minus - mean);
  }
  const double sigma = std::sqrt(sq / count);

  if (all_equal || !(sigma > 0.0)) {
    state.events.push_back({state.iteration, EventKind::kSigmaZeroSkip, 0,
                            "all " + std::to_string(2 * b) + " rewards equal, update skipped"});
    ++state.iteration;
    return;
  }

  ParameterVector step{};
  for (const auto& d : top) {
    const auto delta = table.slice(d.handle);
    const double diff = d.plus - d.minus;
    for (std::size_t i = 0; i < kVectorDim; ++i) {
      step[i] += diff * delta[i];
    }
  }
  const double scale = config.step_size / (static_cast<double>(b) * sigma);
  for (std::size_t i = 0; i < kVectorDim; ++i) {
    state.params[i] += scale * step[i];
  }
  ++state.iteration;
}

std::uint64_t sampler_seed(std::uint64_t run_seed) { return mix_seed({run_seed, 0x68616e646c65ULL}); }

}  // namespace

void SearchConfig::validate(bool allow_zero_noise) const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("step_size must be positive");
  }
  if (!(noise_std > 0.0 || (allow_zero_noise && noise_std == 0.0)) || !std::isfinite(noise_std)) {
    throw std::invalid_argument("noise_std must be positive");
  }
  if (num_directions == 0) {
    throw std::invalid_argument("num_directions must be at least 1");
  }
  if (top_directions == 0 || top_directions > num_directions) {
    throw std::invalid_argument("top_directions must lie in [1, num_directions]");
  }
  if (run_seed >= 1000) {
    throw std::invalid_argument("run_seed must lie in [0, 1000)");
  }
  if (table_size < kVectorDim) {
    throw std::invalid_argument("table_size must be at least " + std::to_string(kVectorDim));
  }
}

std::string_view event_name(EventKind kind) {
  switch (kind) {
    case EventKind::kSigmaZeroSkip:
      return "sigma_zero_skip";
    case EventKind::kRetry:
      return "retry";
    case EventKind::kDirectionDropped:
      return "direction_dropped";
  }
  return "unknown";
}

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxIterations:
      return "max_iterations";
    case StopReason::kRewardThreshold:
      return "reward_threshold";
    case StopReason::kPlateau:
      return "plateau";
    case StopReason::kAborted:
      return "aborted";
  }
  return "unknown";
}

SearchState init_state(const SearchConfig& config) {
  SearchState state;
  state.params.fill(0.0);
  state.sampler = HandleSampler(sampler_seed(config.run_seed), config.table_size);
  return state;
}

ParameterVector sigmoid(const ParameterVector& x) {
  ParameterVector out{};
  for (std::size_t i = 0; i < kVectorDim; ++i) {
    if (!std::isfinite(x[i])) {
      throw std::invalid_argument("sigmoid: non-finite input at coordinate " + std::to_string(i));
    }
    out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  }
  return out;
}

std::vector<Perturbation> propose_perturbations(SearchState& state, const SearchConfig& config,
                                                const NoiseTable& table) {
  std::vector<Perturbation> out;
  out.reserve(config.num_directions);
  for (std::size_t k = 0; k < config.num_directions; ++k) {
    Perturbation p;
    p.handle = state.sampler.next();
    ++state.handles_issued;
    const auto delta = table.slice(p.handle);
    ParameterVector up{};
    ParameterVector down{};
    for (std::size_t i = 0; i < kVectorDim; ++i) {
      up[i] = state.params[i] + config.noise_std * delta[i];
      down[i] = state.params[i] - config.noise_std * delta[i];
    }
    p.plus = sigmoid(up);
    p.minus = sigmoid(down);
    out.push_back(p);
  }
  return out;
}

std::vector<std::size_t> rank_directions(std::span<const DirectionRewards> rewards) {
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(rewards.size());
  for (const auto& r : rewards) {
    if (!r.plus || !r.minus) {
      throw ProtocolError("direction " + std::to_string(r.direction_index) + " is missing its " +
                          (r.plus ? "minus" : "plus") + " reward");
    }
    keyed.emplace_back(std::max(*r.plus, *r.minus), r.direction_index);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return a.second < b.second;
  });
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& [score, index] : keyed) {
    order.push_back(index);
  }
  return order;
}

SearchState update_step(const SearchState& state, const SearchConfig& config,
                        std::span<const RankedDirection> top, const NoiseTable& table) {
  SearchState next = state;
  apply_update(next, config, top, table);
  return next;
}

std::uint64_t derive_eval_seed(std::uint64_t run_seed, std::size_t iteration,
                               std::size_t direction, Sign sign, unsigned attempt) {
  return mix_seed({run_seed, iteration, direction, sign == Sign::kPlus ? 0ULL : 1ULL, attempt});
}

SearchResult run_search(const SearchConfig& config, RewardEvaluator& evaluator,
                        const RunOptions& options) {
  config.validate(/*allow_zero_noise=*/true);
  std::optional<NoiseTable> owned;
  const NoiseTable* table = options.table;
  if (table == nullptr || table->seed() != config.table_seed ||
      table->size() != config.table_size) {
    owned.emplace(config.table_seed, config.table_size);
    table = &*owned;
  }

  const MagnitudeRangeTable& ranges =
      options.ranges != nullptr ? *options.ranges : MagnitudeRangeTable::builtin();

  SearchResult result;
  result.state = init_state(config);
  SearchState& st = result.state;
  if (options.checkpoint_dir) {
    std::filesystem::create_directories(*options.checkpoint_dir);
  }
  const std::size_t stride = std::max<std::size_t>(options.checkpoint_stride, 1);
  bool last_written = true;

  auto write_checkpoint = [&] {
    if (!options.checkpoint_dir) {
      return;
    }
    const auto path = checkpoint_path(*options.checkpoint_dir, st.iteration);
    write_file_atomic(path, checkpoint_to_json(config, st, ranges).dump(2) + "\n");
    result.checkpoints.push_back(path);
    last_written = true;
  };

  while (st.iteration < config.max_iterations) {
    const std::size_t j = st.iteration;
    const auto perturbations = propose_perturbations(st, config, *table);
    const std::size_t n = perturbations.size();

    auto make_task = [&](std::size_t slot, unsigned attempt) {
      const std::size_t k = slot / 2;
      const Sign sign = slot % 2 == 0 ? Sign::kPlus : Sign::kMinus;
      const auto& v = sign == Sign::kPlus ? perturbations[k].plus : perturbations[k].minus;
      return EvalTask{v, decode_policy(v, ranges), derive_eval_seed(config.run_seed, j, k, sign, attempt)};
    };

    std::vector<EvalTask> tasks;
    tasks.reserve(2 * n);
    for (std::size_t slot = 0; slot < 2 * n; ++slot) {
      tasks.push_back(make_task(slot, 0));
    }

    std::vector<EvalOutcome> outcomes;
    try {
      outcomes = evaluator.evaluate_batch(tasks);
      for (auto& o : outcomes) {
        if (o.ok() && !std::isfinite(*o.reward)) {
          o = {std::nullopt, "non-finite reward"};
        }
      }

      std::vector<std::size_t> failed;
      for (std::size_t slot = 0; slot < outcomes.size(); ++slot) {
        if (!outcomes[slot].ok()) {
          failed.push_back(slot);
          st.events.push_back({j, EventKind::kRetry, slot / 2, outcomes[slot].error});
        }
      }
      if (!failed.empty()) {
        std::vector<EvalTask> retries;
        for (std::size_t slot : failed) {
          retries.push_back(make_task(slot, 1));
        }
        auto second = evaluator.evaluate_batch(retries);
        for (std::size_t i = 0; i < failed.size(); ++i) {
          if (second[i].ok() && !std::isfinite(*second[i].reward)) {
            second[i] = {std::nullopt, "non-finite reward"};
          }
          outcomes[failed[i]] = second[i];
        }
      }
    } catch (const std::exception& e) {
      result.stop_reason = StopReason::kAborted;
      result.abort_reason = "iteration " + std::to_string(j) + ": " + e.what();
      break;
    }

    std::vector<DirectionRewards> survivors;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& up = outcomes[2 * k];
      const auto& down = outcomes[2 * k + 1];
      for (unsigned s = 0; s < 2; ++s) {
        const auto& o = outcomes[2 * k + s];
        if (!o.ok()) {
          continue;
        }
        const Sign sign = s == 0 ? Sign::kPlus : Sign::kMinus;
        RewardRecord rec{j,    k, perturbations[k].handle, sign,
                         sign == Sign::kPlus ? perturbations[k].plus : perturbations[k].minus,
                         *o.reward};
        st.history.push_back(rec);
        st.best_reward = std::max(st.best_reward, rec.reward);
      }
      if (up.ok() && down.ok()) {
        survivors.push_back({k, perturbations[k].handle, up.reward, down.reward});
      } else {
        st.events.push_back({j, EventKind::kDirectionDropped, k,
                             up.ok() ? down.error : up.error});
      }
    }
    if (survivors.empty()) {
      result.stop_reason = StopReason::kAborted;
      result.abort_reason = "iteration " + std::to_string(j) + ": every direction failed";
      break;
    }

    const auto order = rank_directions(survivors);
    const std::size_t b = std::min(config.top_directions, survivors.size());
    std::vector<RankedDirection> top;
    top.reserve(b);
    for (std::size_t r = 0; r < b; ++r) {
      const auto it = std::find_if(survivors.begin(), survivors.end(), [&](const auto& d) {
        return d.direction_index == order[r];
      });
      top.push_back({it->handle, *it->plus, *it->minus});
    }
    SearchConfig effective = config;
    effective.top_directions = b;
    apply_update(st, effective, top, *table);
    st.best_trajectory.push_back(st.best_reward);
    last_written = false;

    if (st.iteration % stride == 0) {
      write_checkpoint();
    }
    if (options.on_iteration) {
      options.on_iteration(st);
    }
    if (config.reward_threshold && st.best_reward >= *config.reward_threshold) {
      result.stop_reason = StopReason::kRewardThreshold;
      break;
    }
    const std::size_t w = config.plateau_window;
    if (w > 0 && st.best_trajectory.size() > w &&
        st.best_trajectory.back() <= st.best_trajectory[st.best_trajectory.size() - 1 - w]) {
      result.stop_reason = StopReason::kPlateau;
      break;
    }
  }
  if (!last_written) {
    write_checkpoint();
  }

  result.ranked_history = st.history;
  std::stable_sort(result.ranked_history.begin(), result.ranked_history.end(),
                   [](const RewardRecord& a, const RewardRecord& b) { return a.reward > b.reward; });
  return result;
}

std::string format_exact(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_exact(const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("not a decimal number: \"" + text + "\"");
  }
  return x;
}

}  // namespace augsearch
