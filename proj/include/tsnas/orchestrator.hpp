// Copyright 2026 The TSNAS Authors.
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

// Progressive search: the sparse stream first (costed stand-alone), then
// the dense stream together with the fusion ops (whole-model cost), then
// the attention bits. Each step's argmax is frozen for the steps after it.
// A one-step search frees every variable at once.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsnas/cost_model.hpp"
#include "tsnas/evaluators.hpp"
#include "tsnas/io.hpp"
#include "tsnas/sampler.hpp"
#include "tsnas/search_space.hpp"

namespace tsnas {

enum class FlopsScope { kSparseStreamOnly, kWholeModel };

inline const char* to_string(FlopsScope s) {
  return s == FlopsScope::kSparseStreamOnly ? "sparse_stream_only" : "whole_model";
}

struct StepPlan {
  StepId id = StepId::kOneStep;
  BigInt flops_target = 0;
  FlopsScope flops_scope = FlopsScope::kWholeModel;
  std::size_t rounds = 0;

  bool operator==(const StepPlan&) const = default;
};

/// Variables a step searches over.
inline std::vector<VariableRef> step_variables(const SearchSpaceSpec& space, StepId id) {
  std::vector<VariableRef> out;
  for (const auto& v : variables(space)) {
    bool take = false;
    switch (id) {
      case StepId::kSparse: take = is_backbone(v.kind) && v.stream == StreamId::kSparse; break;
      case StepId::kDenseFusion:
        take = (is_backbone(v.kind) && v.stream == StreamId::kDense) || v.kind == VarKind::kFusion;
        break;
      case StepId::kAttention: take = v.kind == VarKind::kAttention; break;
      case StepId::kOneStep: take = true; break;
    }
    if (take) out.push_back(v);
  }
  return out;
}

/// Sparse 1.4G (stand-alone) -> two-stream 2.0G -> with attention 2.5G, per
/// view, with rounds split 800:400:200 over `total_rounds`.
inline std::vector<StepPlan> default_plans(std::size_t total_rounds = 1400) {
  auto share = [&](std::size_t part) { return std::max<std::size_t>(1, total_rounds * part / 1400); };
  return {
      {StepId::kSparse, BigInt(1'400'000'000), FlopsScope::kSparseStreamOnly, share(800)},
      {StepId::kDenseFusion, BigInt(2'000'000'000), FlopsScope::kWholeModel, share(400)},
      {StepId::kAttention, BigInt(2'500'000'000), FlopsScope::kWholeModel, share(200)},
  };
}

inline StepPlan one_step_plan(std::size_t rounds, BigInt flops_target = BigInt(2'500'000'000)) {
  return {StepId::kOneStep, std::move(flops_target), FlopsScope::kWholeModel, rounds};
}

struct StepResult {
  StepPlan plan;
  ArchParams params;
  std::vector<RoundRecord> trajectory;
  ArchitectureSample argmax;
  std::size_t evaluations = 0;
  /// Entropy over this step's free variables before the first and after the
  /// last update.
  double initial_entropy = 0.0;
  double final_entropy = 0.0;
};

struct SearchRun {
  std::vector<StepPlan> plans;
  std::vector<StepResult> steps;
  ArchitectureSample final_arch;
  /// Choices fixed by completed steps.
  FrozenMask decided;

  std::size_t total_evaluations() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.evaluations;
    return n;
  }
};

/// Resumable position inside a run.
struct SearchCheckpoint {
  std::vector<StepPlan> plans;
  std::vector<StepResult> completed;
  std::size_t step_index = 0;
  SamplerState sampler;
  std::vector<RoundRecord> trajectory;
  ArchitectureSample base;
  std::uint64_t next_eval_id = 1;
};

struct OrchestratorOptions {
  /// Sampler settings shared by every step; rounds and targets come from
  /// the step plans.
  SearchConfig config;
  int input_spatial = 160;
  CostOptions cost;
  /// Called after each round.
  std::function<void(std::size_t step_index, const RoundRecord&)> on_round;
  /// Called every `checkpoint_every` rounds (0 disables).
  std::function<void(const SearchCheckpoint&)> on_checkpoint;
  std::size_t checkpoint_every = 0;
};

namespace detail {

inline BigInt scoped_flops(const SearchSpaceSpec& space, const ArchitectureSample& arch, FlopsScope scope,
                           const OrchestratorOptions& options) {
  return architecture_cost(space, arch, options.input_spatial, 1,
                           scope == FlopsScope::kSparseStreamOnly ? CostScope::kSparseOnly : CostScope::kWholeModel,
                           options.cost)
      .flops;
}

/// Mutable run state threaded through the steps.
struct RunState {
  std::vector<StepResult> completed;
  ArchitectureSample base;
  std::uint64_t next_eval_id = 1;
};

inline StepResult execute_step(const SearchSpaceSpec& space, const FrozenMask& frozen, const StepPlan& plan,
                               Evaluator& evaluator, const OrchestratorOptions& options, std::size_t step_index,
                               const std::vector<StepPlan>& plans, RunState& run,
                               const SearchCheckpoint* resume) {
  const SearchSpaceSpec restricted = restrict(space, frozen);
  SearchConfig config = options.config;
  config.rounds = plan.rounds;
  config.flops_target = plan.flops_target;

  StepResult result;
  result.plan = plan;
  auto make_sampler = [&]() {
    if (resume) return Sampler(restricted, config, resume->sampler);
    return Sampler(restricted, config, static_cast<std::uint64_t>(step_index));
  };
  Sampler sampler = make_sampler();
  if (resume) result.trajectory = resume->trajectory;
  result.initial_entropy = entropy(init_uniform(restricted));

  auto price = [&](const ArchitectureSample& a) { return scoped_flops(space, a, plan.flops_scope, options); };

  if (!sampler.params().vars.empty()) {
    while (sampler.round() < plan.rounds) {
      if (config.convergence_threshold > 0.0 && !sampler.in_warmup() &&
          sampler.converged(config.convergence_threshold)) {
        break;
      }
      const auto& batch = sampler.propose();
      std::vector<EvalRequest> requests;
      std::vector<std::uint64_t> ids;
      for (const auto& a : batch) {
        requests.push_back({run.next_eval_id, &a});
        ids.push_back(run.next_eval_id++);
      }
      std::vector<double> scores;
      try {
        scores = evaluator.evaluate(requests, {plan.id, sampler.round()});
      } catch (const EvaluatorError& e) {
        throw EvaluatorError(e.kind(), e.arch_id(),
                             std::string("step ") + to_string(plan.id) + " round " + std::to_string(sampler.round()) +
                                 ": " + e.detail());
      }
      if (scores.size() != batch.size()) {
        throw EvaluatorError(EvaluatorError::Kind::kProtocol, std::nullopt, "evaluator returned the wrong number of scores");
      }
      std::vector<BigInt> flops;
      for (const auto& a : batch) flops.push_back(price(a));
      RoundRecord rec = sampler.commit(scores, flops, ids, price);
      result.trajectory.push_back(rec);
      if (options.on_round) options.on_round(step_index, rec);
      if (options.on_checkpoint && options.checkpoint_every > 0 &&
          sampler.round() % options.checkpoint_every == 0 && sampler.round() < plan.rounds) {
        options.on_checkpoint(SearchCheckpoint{plans, run.completed, step_index, sampler.state(), result.trajectory,
                                               run.base, run.next_eval_id});
      }
    }
  }
  result.params = sampler.params();
  result.final_entropy = entropy(result.params);
  result.argmax = argmax_architecture(result.params, restricted);
  result.evaluations = result.trajectory.size() * config.samples_per_round;
  return result;
}

inline SearchRun execute(const SearchSpaceSpec& space, const std::vector<StepPlan>& plans, Evaluator& evaluator,
                         const OrchestratorOptions& options, const SearchCheckpoint* resume) {
  options.config.check();
  RunState run;
  run.base = first_choice_architecture(space);
  std::size_t first_step = 0;
  if (resume) {
    if (resume->plans != plans) throw UsageError("checkpoint was written for different step plans");
    if (resume->step_index >= plans.size()) throw UsageError("checkpoint step index out of range");
    if (!validate(space, resume->base).empty()) throw UsageError("checkpoint does not match the search space");
    run.completed = resume->completed;
    run.base = resume->base;
    run.next_eval_id = resume->next_eval_id;
    first_step = resume->step_index;
    if (!run.completed.empty()) evaluator.on_step_boundary(run.base, run.completed.back().plan.id);
  }

  SearchRun out;
  out.plans = plans;
  for (std::size_t k = 0; k < first_step; ++k) {
    for (const auto& v : step_variables(space, plans[k].id)) out.decided[v] = get_value(run.base, v);
  }
  for (std::size_t k = first_step; k < plans.size(); ++k) {
    const auto free = step_variables(space, plans[k].id);
    FrozenMask frozen;
    for (const auto& v : variables(space)) {
      if (std::find(free.begin(), free.end(), v) == free.end()) frozen[v] = get_value(run.base, v);
    }
    StepResult result = execute_step(space, frozen, plans[k], evaluator, options, k, plans, run,
                                      resume && k == first_step ? resume : nullptr);
    for (const auto& v : free) {
      const ChoiceValue value = get_value(result.argmax, v);
      set_value(run.base, v, value);
      out.decided[v] = value;
    }
    run.completed.push_back(std::move(result));
    evaluator.on_step_boundary(run.base, plans[k].id);
  }
  out.steps = std::move(run.completed);
  out.final_arch = run.base;
  return out;
}

}  // namespace detail

/// Runs a single step over restrict(space, frozen).
inline StepResult run_step(const SearchSpaceSpec& space, const FrozenMask& frozen, const StepPlan& plan,
                           Evaluator& evaluator, const OrchestratorOptions& options) {
  options.config.check();
  detail::RunState run;
  run.base = first_choice_architecture(space);
  return detail::execute_step(space, frozen, plan, evaluator, options, 0, {plan}, run, nullptr);
}

/// Runs `plans` in order, freezing each step's argmax for later steps, and
/// notifies the evaluator at every step boundary.
inline SearchRun run_progressive(const SearchSpaceSpec& space, const std::vector<StepPlan>& plans,
                                 Evaluator& evaluator, const OrchestratorOptions& options,
                                 const SearchCheckpoint* resume = nullptr) {
  static constexpr StepId kOrder[] = {StepId::kSparse, StepId::kDenseFusion, StepId::kAttention};
  std::size_t next = 0;
  for (const auto& p : plans) {
    while (next < 3 && kOrder[next] != p.id) ++next;
    if (next == 3) throw UsageError("progressive plans must be ordered sparse -> dense_fusion -> attention");
    ++next;
  }
  return detail::execute(space, plans, evaluator, options, resume);
}

/// Searches every variable at once.
inline SearchRun run_one_step(const SearchSpaceSpec& space, const StepPlan& plan, Evaluator& evaluator,
                              const OrchestratorOptions& options, const SearchCheckpoint* resume = nullptr) {
  if (plan.id != StepId::kOneStep) throw UsageError("one-step search needs a one_step plan");
  return detail::execute(space, {plan}, evaluator, options, resume);
}

// ---------------------------------------------------------------------------
// Serialization of plans, results and checkpoints

inline Json step_plan_to_json(const StepPlan& p) {
  return Json{{"step", to_string(p.id)},
              {"flops_target", to_string(p.flops_target)},
              {"flops_scope", to_string(p.flops_scope)},
              {"rounds", p.rounds}};
}

inline StepPlan step_plan_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  StepPlan p;
  const std::string step = as_string(field(j, "step", path), path + "/step");
  try {
    p.id = parse_step_id(step);
  } catch (const UsageError& e) {
    throw SchemaError(path + "/step", e.what());
  }
  p.flops_target = as_bigint(field(j, "flops_target", path), path + "/flops_target");
  const std::string scope = as_string(field(j, "flops_scope", path), path + "/flops_scope");
  if (scope == "sparse_stream_only") p.flops_scope = FlopsScope::kSparseStreamOnly;
  else if (scope == "whole_model") p.flops_scope = FlopsScope::kWholeModel;
  else throw SchemaError(path + "/flops_scope", "unknown scope");
  p.rounds = as_uint(field(j, "rounds", path), path + "/rounds");
  return p;
}

inline Json step_result_to_json(const SearchSpaceSpec& space, const StepResult& r) {
  Json traj = Json::array();
  for (const auto& rec : r.trajectory) traj.push_back(round_record_to_json(rec));
  return Json{{"plan", step_plan_to_json(r.plan)},
              {"params", params_to_json(r.params)},
              {"trajectory", traj},
              {"argmax", to_indices(space, r.argmax)},
              {"evaluations", r.evaluations},
              {"initial_entropy", r.initial_entropy},
              {"final_entropy", r.final_entropy}};
}

inline StepResult step_result_from_json(const SearchSpaceSpec& space, const Json& j, const std::string& path) {
  using namespace io_detail;
  StepResult r;
  r.plan = step_plan_from_json(field(j, "plan", path), path + "/plan");
  r.params = params_from_json(field(j, "params", path), path + "/params");
  const auto& traj = as_array(field(j, "trajectory", path), path + "/trajectory");
  for (std::size_t i = 0; i < traj.size(); ++i) r.trajectory.push_back(round_record_from_json(traj[i], idx_path(path + "/trajectory", i)));
  r.argmax = guarded(path + "/argmax", [&] {
    return from_indices(space, field(j, "argmax", path).get<std::vector<std::size_t>>());
  });
  r.evaluations = as_uint(field(j, "evaluations", path), path + "/evaluations");
  r.initial_entropy = as_double(field(j, "initial_entropy", path), path + "/initial_entropy");
  r.final_entropy = as_double(field(j, "final_entropy", path), path + "/final_entropy");
  return r;
}

inline Json checkpoint_to_json(const SearchSpaceSpec& space, const SearchCheckpoint& c) {
  Json plans = Json::array();
  for (const auto& p : c.plans) plans.push_back(step_plan_to_json(p));
  Json completed = Json::array();
  for (const auto& r : c.completed) completed.push_back(step_result_to_json(space, r));
  Json traj = Json::array();
  for (const auto& rec : c.trajectory) traj.push_back(round_record_to_json(rec));
  return Json{{"schema_version", kSchemaVersion},
              {"space_fingerprint", space_fingerprint(space)},
              {"plans", plans},
              {"completed", completed},
              {"step_index", c.step_index},
              {"sampler", sampler_state_to_json(c.sampler)},
              {"trajectory", traj},
              {"base", to_indices(space, c.base)},
              {"next_eval_id", c.next_eval_id}};
}

inline SearchCheckpoint checkpoint_from_json(const SearchSpaceSpec& space, const Json& j) {
  using namespace io_detail;
  if (as_int(field(j, "schema_version", ""), "/schema_version") != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported schema version");
  }
  if (as_string(field(j, "space_fingerprint", ""), "/space_fingerprint") != space_fingerprint(space)) {
    throw SchemaError("/space_fingerprint", "checkpoint was written for a different search space");
  }
  SearchCheckpoint c;
  const auto& plans = as_array(field(j, "plans", ""), "/plans");
  for (std::size_t i = 0; i < plans.size(); ++i) c.plans.push_back(step_plan_from_json(plans[i], idx_path("/plans", i)));
  const auto& completed = as_array(field(j, "completed", ""), "/completed");
  for (std::size_t i = 0; i < completed.size(); ++i) {
    c.completed.push_back(step_result_from_json(space, completed[i], idx_path("/completed", i)));
  }
  c.step_index = as_uint(field(j, "step_index", ""), "/step_index");
  c.sampler = sampler_state_from_json(field(j, "sampler", ""), "/sampler");
  const auto& traj = as_array(field(j, "trajectory", ""), "/trajectory");
  for (std::size_t i = 0; i < traj.size(); ++i) c.trajectory.push_back(round_record_from_json(traj[i], idx_path("/trajectory", i)));
  c.base = guarded("/base", [&] { return from_indices(space, field(j, "base", "").get<std::vector<std::size_t>>()); });
  c.next_eval_id = as_uint(field(j, "next_eval_id", ""), "/next_eval_id");
  return c;
}

}  // namespace tsnas
