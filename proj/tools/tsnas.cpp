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


// Command-line driver: space, cost, manual, search and export.
//
// Exit codes: 0 success, 2 usage error, 3 validation error, 4 evaluator or
// worker error, 1 anything else.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsnas/cost_model.hpp"
#include "tsnas/evaluators.hpp"
#include "tsnas/io.hpp"
#include "tsnas/orchestrator.hpp"
#include "tsnas/sampler.hpp"
#include "tsnas/search_space.hpp"

namespace fs = std::filesystem;
using namespace tsnas;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitEvaluator = 4;
constexpr const char* kWorkerEnv = "TSNAS_WORKER";

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  std::string space_file;
};

std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

SearchSpaceSpec load_space(const Globals& g) {
  if (g.space_file.empty()) return build_default_space();
  return space_from_json(parse_json(read_file(g.space_file), "space file '" + g.space_file + "'"));
}

std::string format_or(const Globals& g, const std::string& fallback) {
  return g.format.empty() ? fallback : g.format;
}

/// Prints `text`, and also writes it to <out-dir>/<name> when an output
/// directory is set.
void emit(const Globals& g, const std::string& name, const std::string& text) {
  std::cout << text;
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    write_file((fs::path(g.out_dir) / name).string(), text);
  }
}

/// "0.7" -> 7/10, "70" or "70%" -> 7/10 when percent_if_large.
Rational parse_decimal(std::string s, const std::string& what, bool percent_if_large) {
  bool percent = false;
  if (!s.empty() && s.back() == '%') {
    percent = true;
    s.pop_back();
  }
  const auto dot = s.find('.');
  const std::string whole = s.substr(0, dot);
  const std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  auto digits = [](const std::string& d) {
    return std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (s.empty() || (whole.empty() && frac.empty()) || !digits(whole) || !digits(frac) || frac.size() > 9 ||
      whole.size() > 9) {
    throw UsageError("invalid " + what + " '" + s + "'");
  }
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  const std::int64_t num = (whole.empty() ? 0 : std::stoll(whole)) * den + (frac.empty() ? 0 : std::stoll(frac));
  Rational r(num, den);
  if (percent || (percent_if_large && r >= 1)) r /= 100;
  return r;
}

BigInt gflops_to_flops(const std::string& s) {
  const Rational r = parse_decimal(s, "GFLOPs value", false);
  return BigInt(r.numerator()) * 1'000'000'000 / r.denominator();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

/// Freezes whole steps ("all", "none" or a comma list of step names) at the
/// values of `base`.
FrozenMask frozen_steps(const SearchSpaceSpec& space, const std::string& spec, const ArchitectureSample& base) {
  if (spec.empty() || spec == "none") return {};
  if (spec == "all") return freeze_from(base, variables(space));
  FrozenMask out;
  for (const auto& name : split(spec, ',')) {
    const StepId id = parse_step_id(name);
    for (const auto& [k, v] : freeze_from(base, step_variables(space, id))) out[k] = v;
  }
  return out;
}

FrozenMask step_complement(const SearchSpaceSpec& space, StepId step, const ArchitectureSample& base) {
  const auto free = step_variables(space, step);
  FrozenMask out;
  for (const auto& v : variables(space)) {
    if (std::find(free.begin(), free.end(), v) == free.end()) out[v] = get_value(base, v);
  }
  return out;
}

ArchitectureSample load_arch(const SearchSpaceSpec& space, const std::string& path) {
  return architecture_from_document(space, parse_json(read_file(path), "architecture file '" + path + "'"));
}

// ---------------------------------------------------------------------------
// space

struct SpaceArgs {
  std::string step;
  std::string frozen;
  std::string arch;
};

void cmd_space_count(const Globals& g, const SpaceArgs& a) {
  const auto space = load_space(g);
  const auto base = a.arch.empty() ? first_choice_architecture(space) : load_arch(space, a.arch);
  FrozenMask frozen = frozen_steps(space, a.frozen, base);
  if (!a.step.empty()) {
    for (const auto& [k, v] : step_complement(space, parse_step_id(a.step), base)) frozen[k] = v;
  }
  const BigInt n = cardinality(space, frozen);
  const std::string fmt = format_or(g, "text");
  if (fmt == "text") {
    emit(g, "count.txt", to_string(n) + "\n");
    return;
  }
  std::vector<std::pair<std::string, BigInt>> rows{{"selected", n}};
  for (StepId s : {StepId::kSparse, StepId::kDenseFusion, StepId::kAttention}) {
    rows.emplace_back(to_string(s), cardinality(space, step_complement(space, s, base)));
  }
  rows.emplace_back("total", cardinality(space));
  if (fmt == "csv") {
    std::string out = "scope,cardinality\n";
    for (const auto& [k, v] : rows) out += k + "," + to_string(v) + "\n";
    emit(g, "count.csv", out);
  } else {
    Json j = Json::object();
    for (const auto& [k, v] : rows) j[k] = to_string(v);
    j["space_fingerprint"] = space_fingerprint(space);
    emit(g, "count.json", pretty(j));
  }
}

void cmd_space_dump(const Globals& g, const SpaceArgs& a) {
  const auto space = load_space(g);
  if (format_or(g, "json") != "json") throw UsageError("space dump only supports --format json");
  const auto base = a.arch.empty() ? first_choice_architecture(space) : load_arch(space, a.arch);
  FrozenMask frozen = frozen_steps(space, a.frozen, base);
  if (!a.step.empty()) {
    for (const auto& [k, v] : step_complement(space, parse_step_id(a.step), base)) frozen[k] = v;
  }
  emit(g, "space.json", pretty(space_to_json(restrict(space, frozen))));
}

// ---------------------------------------------------------------------------
// cost

struct CostArgs {
  std::string arch;
  int views = 1;
  int spatial = 160;
  std::string csv;
  std::string scope = "whole";
};

void cmd_cost(const Globals& g, const CostArgs& a) {
  const auto space = load_space(g);
  const auto arch = load_arch(space, a.arch);
  if (a.scope != "whole" && a.scope != "sparse") throw UsageError("--scope must be whole or sparse");
  const CostReport r = architecture_cost(space, arch, a.spatial, a.views,
                                         a.scope == "sparse" ? CostScope::kSparseOnly : CostScope::kWholeModel);
  if (!a.csv.empty()) write_file(a.csv, cost_report_csv(r));
  if (format_or(g, "json") == "csv") emit(g, "cost.csv", cost_report_csv(r));
  else emit(g, "cost.json", pretty(cost_report_to_json(r, a.spatial)));
}

// ---------------------------------------------------------------------------
// manual

struct ManualArgs {
  std::string target = "2.0";
  std::string ratio;
  int spatial = 160;
};

void cmd_manual(const Globals& g, const ManualArgs& a) {
  const auto space = load_space(g);
  const Rational ratio = parse_decimal(a.ratio, "ratio", true);
  if (ratio <= 0 || ratio >= 1) throw UsageError("--ratio must lie strictly between 0 and 1 (or 0 and 100 percent)");
  const BigInt target = gflops_to_flops(a.target);
  if (target <= 0) throw UsageError("--target-gflops must be positive");
  const ManualDesign d = manual_tsnet(space, target, ratio, a.spatial);
  Json doc = architecture_document(space, d.arch, DocumentScope::kTwoStream, summarize(d.report, a.spatial));
  doc["manual"] = Json{{"target_flops", to_string(target)},
                       {"ratio", rational_to_json(ratio)},
                       {"within_tolerance", d.within_tolerance}};
  emit(g, "manual.json", pretty(doc));
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string mode = "progressive";
  std::string evaluator = "synthetic";
  std::vector<std::string> worker_cmds;
  std::string table;
  std::string objective = "separable";
  std::optional<std::uint64_t> objective_seed;
  double objective_scale = 1.0;
  double objective_margin = 0.0;
  double noise = 0.0;
  std::optional<std::size_t> rounds;
  std::string targets;
  int spatial = 160;
  std::string resume;
  std::size_t checkpoint_every = 0;
  long timeout_ms = 600000;
  std::size_t samples = 8;
  double lr = 0.025;
  double temperature = 0.05;
  double lambda = 0.5;
  long warmup = -1;
  double converge = 0.0;
};

std::unique_ptr<Evaluator> make_evaluator(const SearchSpaceSpec& space, const Globals& g, const SearchArgs& a) {
  if (a.evaluator == "synthetic") {
    SyntheticObjective obj;
    const std::uint64_t seed = a.objective_seed.value_or(g.seed);
    if (a.objective == "flat") obj = flat_objective(space);
    else if (a.objective == "separable") obj = separable_objective(space, seed, a.objective_scale, a.objective_margin);
    else throw UsageError("--objective must be flat or separable");
    obj.seed = seed;
    obj.noise_std = a.noise;
    return std::make_unique<SyntheticEvaluator>(space, std::move(obj));
  }
  if (a.evaluator == "table") {
    if (a.table.empty()) throw UsageError("--evaluator table needs --table FILE");
    return std::make_unique<TableEvaluator>(
        TableEvaluator::from_json(space, parse_json(read_file(a.table), "score table '" + a.table + "'")));
  }
  if (a.evaluator == "worker") {
    std::vector<std::string> cmds = a.worker_cmds;
    if (cmds.empty()) {
      if (const char* env = std::getenv(kWorkerEnv); env && *env) cmds.push_back(env);
    }
    if (cmds.empty()) throw UsageError("--evaluator worker needs --worker-cmd or " + std::string(kWorkerEnv));
    return std::make_unique<ProtocolEvaluator>(space, cmds, std::chrono::milliseconds(a.timeout_ms), a.spatial);
  }
  throw UsageError("--evaluator must be synthetic, table or worker");
}

std::vector<StepPlan> make_plans(const SearchArgs& a) {
  std::vector<BigInt> targets;
  for (const auto& t : split(a.targets, ',')) targets.push_back(gflops_to_flops(t));
  if (a.mode == "progressive") {
    auto plans = default_plans(a.rounds.value_or(1400));
    if (!targets.empty()) {
      if (targets.size() != plans.size()) throw UsageError("progressive search takes three --targets");
      for (std::size_t i = 0; i < plans.size(); ++i) plans[i].flops_target = targets[i];
    }
    return plans;
  }
  if (a.mode == "one-step") {
    if (targets.size() > 1) throw UsageError("one-step search takes a single --targets value");
    return {targets.empty() ? one_step_plan(a.rounds.value_or(1400)) : one_step_plan(a.rounds.value_or(1400), targets[0])};
  }
  throw UsageError("--mode must be progressive or one-step");
}

Json step_summary(const SearchSpaceSpec& space, const StepResult& s, int spatial) {
  return Json{{"plan", step_plan_to_json(s.plan)},
              {"rounds_run", s.trajectory.size()},
              {"evaluations", s.evaluations},
              {"initial_entropy", s.initial_entropy},
              {"final_entropy", s.final_entropy},
              {"argmax_hash", architecture_hash(space, s.argmax)},
              {"argmax_flops", to_string(architecture_cost(space, s.argmax, spatial).flops)}};
}

int cmd_search(const Globals& g, const SearchArgs& a) {
  const auto space = load_space(g);
  const auto plans = make_plans(a);
  auto evaluator = make_evaluator(space, g, a);
  const fs::path out = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  fs::create_directories(out);

  OrchestratorOptions opt;
  opt.config.seed = g.seed;
  opt.config.samples_per_round = a.samples;
  opt.config.arch_lr = a.lr;
  opt.config.temperature = a.temperature;
  opt.config.penalty_weight = a.lambda;
  opt.config.warmup_rounds = a.warmup;
  opt.config.convergence_threshold = a.converge;
  opt.input_spatial = a.spatial;
  opt.config.check();

  std::optional<SearchCheckpoint> resume;
  if (!a.resume.empty()) resume = checkpoint_from_json(space, parse_json(read_file(a.resume), "checkpoint"));

  // Partial state for abort reporting.
  std::vector<std::vector<RoundRecord>> partial(plans.size());
  if (resume) {
    for (std::size_t k = 0; k < resume->completed.size() && k < plans.size(); ++k) {
      partial[k] = resume->completed[k].trajectory;
    }
    if (resume->step_index < plans.size()) partial[resume->step_index] = resume->trajectory;
  }
  opt.on_round = [&](std::size_t k, const RoundRecord& r) { partial[k].push_back(r); };
  const fs::path checkpoint_path = out / "checkpoint.json";
  if (a.checkpoint_every > 0) {
    opt.checkpoint_every = a.checkpoint_every;
    opt.on_checkpoint = [&](const SearchCheckpoint& c) {
      write_file(checkpoint_path.string(), checkpoint_to_json(space, c).dump() + "\n");
    };
  }

  Json manifest{{"schema_version", kSchemaVersion},
                {"space_fingerprint", space_fingerprint(space)},
                {"seed", g.seed},
                {"mode", a.mode},
                {"evaluator", a.evaluator},
                {"input_spatial", a.spatial},
                {"config",
                 Json{{"samples_per_round", a.samples},
                      {"arch_lr", a.lr},
                      {"temperature", a.temperature},
                      {"penalty_weight", a.lambda},
                      {"warmup_rounds", a.warmup},
                      {"convergence_threshold", a.converge}}}};
  if (a.evaluator == "synthetic") {
    manifest["objective"] = Json{{"kind", a.objective},
                                 {"seed", a.objective_seed.value_or(g.seed)},
                                 {"scale", a.objective_scale},
                                 {"margin", a.objective_margin},
                                 {"noise_std", a.noise}};
  }
  Json plan_json = Json::array();
  for (const auto& p : plans) plan_json.push_back(step_plan_to_json(p));
  manifest["plans"] = plan_json;
  if (resume) manifest["resumed_from_step"] = resume->step_index;

  auto write_trajectories = [&](const std::vector<std::vector<RoundRecord>>& trajs) {
    Json files = Json::array();
    for (std::size_t k = 0; k < plans.size(); ++k) {
      const std::string name = "trajectory_" + std::to_string(k) + "_" + to_string(plans[k].id) + ".csv";
      write_file((out / name).string(), trajectory_csv(trajs[k]));
      files.push_back(name);
    }
    manifest["trajectories"] = files;
  };

  try {
    const SearchRun run = a.mode == "progressive"
                              ? run_progressive(space, plans, *evaluator, opt, resume ? &*resume : nullptr)
                              : run_one_step(space, plans.front(), *evaluator, opt, resume ? &*resume : nullptr);
    std::vector<std::vector<RoundRecord>> trajs;
    Json steps = Json::array();
    for (const auto& s : run.steps) {
      trajs.push_back(s.trajectory);
      steps.push_back(step_summary(space, s, a.spatial));
    }
    write_trajectories(trajs);
    const CostReport cost = architecture_cost(space, run.final_arch, a.spatial);
    const Json doc = architecture_document(space, run.final_arch, DocumentScope::kTwoStream, summarize(cost, a.spatial));
    write_file((out / "final_arch.json").string(), pretty(doc));
    manifest["status"] = "completed";
    manifest["steps"] = steps;
    manifest["total_evaluations"] = run.total_evaluations();
    manifest["final_arch"] = "final_arch.json";
    manifest["final_arch_hash"] = architecture_hash(space, run.final_arch);
    write_file((out / "manifest.json").string(), pretty(manifest));
    std::cout << pretty(Json{{"status", "completed"},
                             {"final_arch_hash", architecture_hash(space, run.final_arch)},
                             {"flops_per_view", to_string(cost.flops)},
                             {"out_dir", out.string()}});
    return 0;
  } catch (const EvaluatorError& e) {
    write_trajectories(partial);
    manifest["status"] = "aborted";
    manifest["error"] = e.what();
    write_file((out / "manifest.json").string(), pretty(manifest));
    throw;
  }
}

// ---------------------------------------------------------------------------
// export

struct ExportArgs {
  std::string input;
  std::string scope = "two_stream";
  int spatial = 160;
};

/// Re-emits an architecture document, or the current argmax of a checkpoint,
/// as a canonical document with a fresh cost summary.
void cmd_export(const Globals& g, const ExportArgs& a) {
  const auto space = load_space(g);
  const Json in = parse_json(read_file(a.input), "input file '" + a.input + "'");
  ArchitectureSample arch;
  if (in.is_object() && in.contains("sampler")) {
    const SearchCheckpoint c = checkpoint_from_json(space, in);
    arch = c.base;
    if (c.step_index < c.plans.size()) {
      const FrozenMask frozen = step_complement(space, c.plans[c.step_index].id, c.base);
      const auto sub = restrict(space, frozen);
      const ArchitectureSample am = argmax_architecture(c.sampler.params, sub);
      for (const auto& v : step_variables(space, c.plans[c.step_index].id)) set_value(arch, v, get_value(am, v));
    }
  } else {
    arch = architecture_from_document(space, in);
  }
  DocumentScope scope;
  if (a.scope == "two_stream") scope = DocumentScope::kTwoStream;
  else if (a.scope == "sparse_only") scope = DocumentScope::kSparseOnly;
  else throw UsageError("--scope must be two_stream or sparse_only");
  const CostReport cost = architecture_cost(space, arch, a.spatial, 1,
                                            scope == DocumentScope::kSparseOnly ? CostScope::kSparseOnly
                                                                                : CostScope::kWholeModel);
  emit(g, "export.json", pretty(architecture_document(space, arch, scope, summarize(cost, a.spatial))));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware two-stream video architecture search"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_option("--space", g.space_file, "Search space JSON (default space when omitted)");

  auto* space_cmd = app.add_subcommand("space", "Inspect the search space");
  space_cmd->require_subcommand(1);
  SpaceArgs space_args;
  for (auto* sub : {space_cmd->add_subcommand("count", "Exact cardinality"),
                    space_cmd->add_subcommand("dump", "Canonical (optionally restricted) space JSON")}) {
    sub->add_option("--step", space_args.step, "Only this step's variables are free");
    sub->add_option("--frozen", space_args.frozen, "all, none, or a comma list of steps to freeze");
    sub->add_option("--arch", space_args.arch, "Architecture document giving the frozen values");
  }

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "Analytic cost of an architecture document");
  cost_cmd->add_option("arch", cost_args.arch, "Architecture document")->required();
  cost_cmd->add_option("--views", cost_args.views, "Test-time views")->check(CLI::PositiveNumber);
  cost_cmd->add_option("--spatial", cost_args.spatial, "Input resolution")->check(CLI::PositiveNumber);
  cost_cmd->add_option("--csv", cost_args.csv, "Write the per-block breakdown as CSV");
  cost_cmd->add_option("--scope", cost_args.scope, "whole or sparse");

  ManualArgs manual_args;
  auto* manual_cmd = app.add_subcommand("manual", "Hand-scaled two-stream design");
  manual_cmd->add_option("--target-gflops", manual_args.target, "Per-view GFLOPs target");
  manual_cmd->add_option("--ratio", manual_args.ratio, "Sparse-stream FLOPs share, fraction or percent")->required();
  manual_cmd->add_option("--spatial", manual_args.spatial, "Input resolution")->check(CLI::PositiveNumber);

  SearchArgs sa;
  auto* search_cmd = app.add_subcommand("search", "Run an architecture search");
  search_cmd->add_option("--mode", sa.mode, "progressive or one-step");
  search_cmd->add_option("--evaluator", sa.evaluator, "synthetic, table or worker");
  search_cmd->add_option("--worker-cmd", sa.worker_cmds, "Worker command (repeat for several workers)");
  search_cmd->add_option("--table", sa.table, "Score table JSON for the table evaluator");
  search_cmd->add_option("--objective", sa.objective, "Synthetic objective: flat or separable");
  search_cmd->add_option("--objective-seed", sa.objective_seed, "Synthetic objective seed (default --seed)");
  search_cmd->add_option("--objective-scale", sa.objective_scale, "Synthetic utility scale");
  search_cmd->add_option("--objective-margin", sa.objective_margin, "Synthetic best-choice margin");
  search_cmd->add_option("--noise", sa.noise, "Synthetic noise standard deviation")->check(CLI::NonNegativeNumber);
  search_cmd->add_option("--rounds", sa.rounds, "Total round budget")->check(CLI::PositiveNumber);
  search_cmd->add_option("--targets", sa.targets, "Comma-separated per-step GFLOPs targets (0 disables)");
  search_cmd->add_option("--spatial", sa.spatial, "Input resolution for costing")->check(CLI::PositiveNumber);
  search_cmd->add_option("--resume", sa.resume, "Checkpoint to resume from");
  search_cmd->add_option("--checkpoint-every", sa.checkpoint_every, "Write checkpoint.json every N rounds");
  search_cmd->add_option("--timeout-ms", sa.timeout_ms, "Worker response timeout")->check(CLI::PositiveNumber);
  search_cmd->add_option("--samples", sa.samples, "Architectures per round");
  search_cmd->add_option("--lr", sa.lr, "Architecture learning rate");
  search_cmd->add_option("--temperature", sa.temperature, "Weight temperature");
  search_cmd->add_option("--lambda", sa.lambda, "FLOPs penalty weight");
  search_cmd->add_option("--warmup", sa.warmup, "Warm-up rounds per step (negative: 5%)");
  search_cmd->add_option("--converge", sa.converge, "Stop a step once every top probability reaches this");

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export", "Canonical architecture document from a document or checkpoint");
  export_cmd->add_option("input", ex.input, "Architecture document or checkpoint")->required();
  export_cmd->add_option("--scope", ex.scope, "two_stream or sparse_only");
  export_cmd->add_option("--spatial", ex.spatial, "Input resolution")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (space_cmd->parsed()) {
      if (space_cmd->got_subcommand("count")) cmd_space_count(g, space_args);
      else cmd_space_dump(g, space_args);
    } else if (cost_cmd->parsed()) {
      cmd_cost(g, cost_args);
    } else if (manual_cmd->parsed()) {
      cmd_manual(g, manual_args);
    } else if (search_cmd->parsed()) {
      return cmd_search(g, sa);
    } else if (export_cmd->parsed()) {
      cmd_export(g, ex);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EvaluatorError& e) {
    std::cerr << "evaluator error: " << e.what() << "\n";
    return kExitEvaluator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
