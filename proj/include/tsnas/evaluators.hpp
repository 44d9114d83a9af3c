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

// Architecture evaluators. Every evaluator returns scores in [0, 1] or
// throws; out-of-range scores are errors, never clamped.

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "tsnas/io.hpp"
#include "tsnas/rng.hpp"
#include "tsnas/search_space.hpp"

extern char** environ;

namespace tsnas {

enum class StepId { kSparse, kDenseFusion, kAttention, kOneStep };

inline const char* to_string(StepId s) {
  switch (s) {
    case StepId::kSparse: return "sparse";
    case StepId::kDenseFusion: return "dense_fusion";
    case StepId::kAttention: return "attention";
    case StepId::kOneStep: return "one_step";
  }
  return "?";
}

inline StepId parse_step_id(const std::string& s) {
  if (s == "sparse") return StepId::kSparse;
  if (s == "dense_fusion") return StepId::kDenseFusion;
  if (s == "attention") return StepId::kAttention;
  if (s == "one_step") return StepId::kOneStep;
  throw UsageError("unknown step '" + s + "'");
}

class EvaluatorError : public Error {
 public:
  enum class Kind { kTimeout, kMalformed, kOutOfRange, kWorkerExit, kProtocol, kWorkerReported, kMissing, kSpawn };

  EvaluatorError(Kind kind, std::optional<std::uint64_t> arch_id, const std::string& what)
      : Error(std::string(kind_name(kind)) + (arch_id ? " (architecture " + std::to_string(*arch_id) + ")" : "") +
              ": " + what),
        kind_(kind),
        arch_id_(arch_id),
        detail_(what) {}

  Kind kind() const { return kind_; }
  /// The message without the kind and architecture prefix.
  const std::string& detail() const { return detail_; }
  std::optional<std::uint64_t> arch_id() const { return arch_id_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::kTimeout: return "worker timeout";
      case Kind::kMalformed: return "malformed worker response";
      case Kind::kOutOfRange: return "score out of range";
      case Kind::kWorkerExit: return "worker exited";
      case Kind::kProtocol: return "protocol error";
      case Kind::kWorkerReported: return "worker reported error";
      case Kind::kMissing: return "architecture missing from table";
      case Kind::kSpawn: return "cannot start worker";
    }
    return "evaluator error";
  }

 private:
  Kind kind_;
  std::optional<std::uint64_t> arch_id_;
  std::string detail_;
};

/// Rejects scores outside [0, 1] (including NaN).
inline double check_score(double s, std::optional<std::uint64_t> id = std::nullopt) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw EvaluatorError(EvaluatorError::Kind::kOutOfRange, id, "score " + format_double(s) + " outside [0, 1]");
  }
  return s;
}

struct EvalRequest {
  std::uint64_t id = 0;
  const ArchitectureSample* arch = nullptr;
};

struct StepContext {
  StepId step = StepId::kOneStep;
  std::size_t round = 0;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;

  /// Scores in request order.
  virtual std::vector<double> evaluate(std::span<const EvalRequest> batch, const StepContext& ctx) = 0;

  /// Called after a step finishes with the architecture frozen so far.
  virtual void on_step_boundary(const ArchitectureSample& /*frozen*/, StepId /*finished*/) {}

  virtual bool deterministic() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic objectives

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Interaction {
  VariableRef a;
  std::size_t choice_a = 0;
  VariableRef b;
  std::size_t choice_b = 0;
  double bonus = 0.0;
};

/// logistic(bias + sum of per-variable utilities + applicable pairwise
/// bonuses + gaussian noise). Utilities are indexed by choice position in
/// the space the objective was built for.
struct SyntheticObjective {
  std::uint64_t seed = 0;
  double bias = 0.0;
  std::vector<VariableRef> vars;
  std::vector<std::vector<double>> utilities;
  std::vector<Interaction> interactions;
  double noise_std = 0.0;

  double raw(const SearchSpaceSpec& space, const ArchitectureSample& arch) const {
    double sum = bias;
    std::map<VariableRef, std::size_t> chosen;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto idx = domain_index(space, vars[i], get_value(arch, vars[i]));
      if (!idx) throw ValidationError("architecture outside the objective's space at " + vars[i].key());
      chosen[vars[i]] = *idx;
      sum += utilities[i][*idx];
    }
    for (const auto& it : interactions) {
      auto a = chosen.find(it.a);
      auto b = chosen.find(it.b);
      if (a != chosen.end() && b != chosen.end() && a->second == it.choice_a && b->second == it.choice_b) {
        sum += it.bonus;
      }
    }
    if (noise_std > 0.0) {
      std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
      for (const auto& [v, idx] : chosen) words.push_back(static_cast<std::uint32_t>(idx));
      std::seed_seq seq(words.begin(), words.end());
      Rng rng(seq);
      sum += noise_std * standard_normal(rng);
    }
    return sum;
  }

  double score(const SearchSpaceSpec& space, const ArchitectureSample& arch) const {
    return logistic(raw(space, arch));
  }
};

/// All-zero utilities: every architecture scores 0.5.
inline SyntheticObjective flat_objective(const SearchSpaceSpec& space) {
  SyntheticObjective obj;
  obj.vars = variables(space);
  for (const auto& v : obj.vars) obj.utilities.emplace_back(domain_size(space, v), 0.0);
  return obj;
}

/// Independent per-variable utilities, centered per variable, with the best
/// choice of every multi-choice variable ahead of the runner-up by at least
/// `margin`.
inline SyntheticObjective separable_objective(const SearchSpaceSpec& space, std::uint64_t seed, double scale = 1.0,
                                              double margin = 0.0) {
  SyntheticObjective obj = flat_objective(space);
  obj.seed = seed;
  Rng rng = make_rng(seed, {0x5e9a});
  for (auto& u : obj.utilities) {
    if (u.size() < 2) continue;
    for (double& x : u) x = scale * uniform01(rng);
    const auto best = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < u.size(); ++o) {
      if (o != best) second = std::max(second, u[o]);
    }
    if (u[best] - second < margin) u[best] = second + margin;
    double mean = 0.0;
    for (double x : u) mean += x / static_cast<double>(u.size());
    for (double& x : u) x -= mean;
  }
  return obj;
}

/// Per-variable argmax of the utilities; the global optimum whenever the
/// objective has no interactions.
inline ArchitectureSample separable_optimum(const SearchSpaceSpec& space, const SyntheticObjective& obj) {
  ArchitectureSample arch = first_choice_architecture(space);
  for (std::size_t i = 0; i < obj.vars.size(); ++i) {
    const auto& u = obj.utilities[i];
    const auto best = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    set_value(arch, obj.vars[i], domain_value(space, obj.vars[i], best));
  }
  return arch;
}

/// Adds `count` pairwise bonuses, each between two distinct multi-choice
/// variables of `block` at randomly drawn choices.
inline void add_block_interactions(SyntheticObjective& obj, const SearchSpaceSpec& space,
                                   const std::vector<VariableRef>& block, std::size_t count, double bonus,
                                   std::uint64_t stream) {
  std::vector<VariableRef> vars;
  for (const auto& v : block) {
    if (domain_size(space, v) > 1) vars.push_back(v);
  }
  if (vars.size() < 2) throw UsageError("interactions need at least two multi-choice variables");
  Rng rng = make_rng(obj.seed, {0x1a7e, stream});
  for (std::size_t i = 0; i < count; ++i) {
    const auto a = uniform_index(rng, vars.size());
    auto b = uniform_index(rng, vars.size() - 1);
    if (b >= a) ++b;
    obj.interactions.push_back({vars[a], uniform_index(rng, domain_size(space, vars[a])), vars[b],
                                uniform_index(rng, domain_size(space, vars[b])), bonus});
  }
}

class SyntheticEvaluator : public Evaluator {
 public:
  SyntheticEvaluator(SearchSpaceSpec space, SyntheticObjective objective)
      : space_(std::move(space)), objective_(std::move(objective)) {}

  std::vector<double> evaluate(std::span<const EvalRequest> batch, const StepContext&) override {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const auto& r : batch) out.push_back(check_score(objective_.score(space_, *r.arch), r.id));
    return out;
  }

  bool deterministic() const override { return true; }

  const SyntheticObjective& objective() const { return objective_; }

 private:
  SearchSpaceSpec space_;
  SyntheticObjective objective_;
};

// ---------------------------------------------------------------------------
// Tabular lookup

class TableEvaluator : public Evaluator {
 public:
  TableEvaluator(SearchSpaceSpec space, std::map<std::string, double> table)
      : space_(std::move(space)), table_(std::move(table)) {
    for (const auto& [hash, score] : table_) check_score(score);
  }

  /// Loads {"<architecture hash>": score, ...}.
  static TableEvaluator from_json(SearchSpaceSpec space, const Json& j) {
    if (!j.is_object()) throw SchemaError("", "score table must be an object of hash -> score");
    std::map<std::string, double> table;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number()) throw SchemaError("/" + it.key(), "expected a number");
      table[it.key()] = it.value().get<double>();
    }
    return TableEvaluator(std::move(space), std::move(table));
  }

  double lookup(const ArchitectureSample& arch, std::optional<std::uint64_t> id = std::nullopt) const {
    const std::string hash = architecture_hash(space_, arch);
    auto it = table_.find(hash);
    if (it == table_.end()) throw EvaluatorError(EvaluatorError::Kind::kMissing, id, "no score for hash " + hash);
    return it->second;
  }

  std::vector<double> evaluate(std::span<const EvalRequest> batch, const StepContext&) override {
    std::vector<double> out;
    for (const auto& r : batch) out.push_back(lookup(*r.arch, r.id));
    return out;
  }

  bool deterministic() const override { return true; }

 private:
  SearchSpaceSpec space_;
  std::map<std::string, double> table_;
};

// ---------------------------------------------------------------------------
// External worker protocol
//
// Line-delimited JSON over the worker's stdin/stdout:
//   {"id":N,"kind":"evaluate","arch":<document>,"step":"sparse"}  -> {"id":N,"score":x} | {"id":N,"error":"..."}
//   {"id":N,"kind":"freeze","arch":<document>}                    -> {"id":N,"ack":true}

/// A child process whose stdin/stdout are one end of a socket pair.
class WorkerProcess {
 public:
  explicit WorkerProcess(const std::string& command) : command_(command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw EvaluatorError(EvaluatorError::Kind::kSpawn, std::nullopt, "socketpair failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      throw EvaluatorError(EvaluatorError::Kind::kSpawn, std::nullopt, "posix_spawn failed for '" + command + "'");
    }
    fd_ = fds[0];
  }

  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  ~WorkerProcess() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_WR);
      ::close(fd_);
    }
    if (pid_ > 0) {
      // Give the worker a moment to exit on EOF before killing it.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
        ::usleep(2000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  int fd() const { return fd_; }
  const std::string& command() const { return command_; }

  /// Writes one line; false if the worker has gone away.
  bool write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  /// Returns a complete buffered line if one is available.
  std::optional<std::string> take_line() {
    const auto nl = buffer_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = buffer_.substr(0, nl);
    buffer_.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  /// Reads whatever is available; false on EOF.
  bool fill() {
    char buf[65536];
    for (;;) {
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n > 0) {
        buffer_.append(buf, static_cast<std::size_t>(n));
        return true;
      }
      if (n == 0) return false;
      if (errno == EINTR) continue;
      return false;
    }
  }

 private:
  std::string command_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

/// Scores architectures by sending them to one or more worker processes.
/// Requests are striped round-robin over the workers and matched back by id,
/// so workers may answer in any order.
class ProtocolEvaluator : public Evaluator {
 public:
  ProtocolEvaluator(SearchSpaceSpec space, std::vector<std::string> commands, std::chrono::milliseconds timeout,
                    int input_spatial = 160)
      : space_(std::move(space)), timeout_(timeout), input_spatial_(input_spatial) {
    if (commands.empty()) throw UsageError("at least one worker command is required");
    for (const auto& c : commands) workers_.push_back(std::make_unique<WorkerProcess>(c));
  }

  ProtocolEvaluator(SearchSpaceSpec space, const std::string& command, std::chrono::milliseconds timeout,
                    int input_spatial = 160)
      : ProtocolEvaluator(std::move(space), std::vector<std::string>{command}, timeout, input_spatial) {}

  bool deterministic() const override { return false; }

  /// The document sent for `arch`; sparse-step documents describe the
  /// sparse stream alone.
  Json document_for(const ArchitectureSample& arch, StepId step) const {
    const bool sparse = step == StepId::kSparse;
    const CostReport cost = architecture_cost(space_, arch, input_spatial_, 1,
                                              sparse ? CostScope::kSparseOnly : CostScope::kWholeModel);
    return architecture_document(space_, arch, sparse ? DocumentScope::kSparseOnly : DocumentScope::kTwoStream,
                                 summarize(cost, input_spatial_));
  }

  std::vector<double> evaluate(std::span<const EvalRequest> batch, const StepContext& ctx) override {
    std::map<std::uint64_t, std::size_t> position;
    std::vector<std::vector<std::uint64_t>> assigned(workers_.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& r = batch[i];
      if (!position.emplace(r.id, i).second) {
        throw EvaluatorError(EvaluatorError::Kind::kProtocol, r.id, "duplicate request id");
      }
      const std::size_t w = i % workers_.size();
      const Json req{{"id", r.id}, {"kind", "evaluate"}, {"arch", document_for(*r.arch, ctx.step)},
                     {"step", to_string(ctx.step)}};
      if (!workers_[w]->write_line(req.dump())) {
        throw EvaluatorError(EvaluatorError::Kind::kWorkerExit, r.id, "cannot write to '" + workers_[w]->command() + "'");
      }
      assigned[w].push_back(r.id);
    }
    std::vector<std::optional<double>> scores(batch.size());
    collect(assigned, [&](const Json& resp, std::uint64_t id) {
      auto it = position.find(id);
      if (it == position.end() || scores[it->second]) {
        throw EvaluatorError(EvaluatorError::Kind::kProtocol, id, "response id does not match a pending request");
      }
      if (resp.contains("error")) {
        throw EvaluatorError(EvaluatorError::Kind::kWorkerReported, id,
                             resp["error"].is_string() ? resp["error"].get<std::string>() : resp["error"].dump());
      }
      if (!resp.contains("score") || !resp["score"].is_number()) {
        throw EvaluatorError(EvaluatorError::Kind::kMalformed, id, "response has no numeric score");
      }
      scores[it->second] = check_score(resp["score"].get<double>(), id);
    });
    std::vector<double> out;
    for (const auto& s : scores) out.push_back(*s);
    return out;
  }

  void on_step_boundary(const ArchitectureSample& frozen, StepId) override {
    std::vector<std::vector<std::uint64_t>> assigned(workers_.size());
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      const std::uint64_t id = next_control_id_++;
      const Json req{{"id", id}, {"kind", "freeze"}, {"arch", document_for(frozen, StepId::kOneStep)}};
      if (!workers_[w]->write_line(req.dump())) {
        throw EvaluatorError(EvaluatorError::Kind::kWorkerExit, id, "cannot write to '" + workers_[w]->command() + "'");
      }
      assigned[w].push_back(id);
    }
    collect(assigned, [&](const Json& resp, std::uint64_t id) {
      if (!resp.contains("ack") || resp["ack"] != true) {
        throw EvaluatorError(EvaluatorError::Kind::kMalformed, id, "freeze was not acknowledged");
      }
    });
  }

 private:
  /// Reads responses until every worker has answered all its ids.
  template <typename OnResponse>
  void collect(std::vector<std::vector<std::uint64_t>>& pending, OnResponse&& on_response) {
    std::vector<std::size_t> remaining(workers_.size());
    std::size_t total = 0;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      remaining[w] = pending[w].size();
      total += remaining[w];
    }
    auto first_pending = [&](std::size_t w) -> std::optional<std::uint64_t> {
      if (pending[w].empty()) return std::nullopt;
      return pending[w].front();
    };
    auto handle_line = [&](std::size_t w, const std::string& line) {
      Json resp;
      try {
        resp = Json::parse(line);
      } catch (const Json::parse_error&) {
        throw EvaluatorError(EvaluatorError::Kind::kMalformed, first_pending(w), "unparseable line '" + line + "'");
      }
      if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_unsigned()) {
        throw EvaluatorError(EvaluatorError::Kind::kMalformed, first_pending(w), "response without an id: " + line);
      }
      const auto id = resp["id"].get<std::uint64_t>();
      auto& ids = pending[w];
      auto it = std::find(ids.begin(), ids.end(), id);
      if (it == ids.end()) {
        throw EvaluatorError(EvaluatorError::Kind::kProtocol, id, "response id does not match a pending request");
      }
      ids.erase(it);
      on_response(resp, id);
      --remaining[w];
      --total;
    };

    while (total > 0) {
      for (std::size_t w = 0; w < workers_.size(); ++w) {
        while (remaining[w] > 0) {
          auto line = workers_[w]->take_line();
          if (!line) break;
          handle_line(w, *line);
        }
      }
      if (total == 0) break;
      std::vector<pollfd> fds;
      std::vector<std::size_t> which;
      for (std::size_t w = 0; w < workers_.size(); ++w) {
        if (remaining[w] > 0) {
          fds.push_back({workers_[w]->fd(), POLLIN, 0});
          which.push_back(w);
        }
      }
      const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(timeout_.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc <= 0) {
        throw EvaluatorError(EvaluatorError::Kind::kTimeout, first_pending(which.front()),
                             "no response within " + std::to_string(timeout_.count()) + " ms");
      }
      for (std::size_t i = 0; i < fds.size(); ++i) {
        if (fds[i].revents == 0) continue;
        const std::size_t w = which[i];
        if (!workers_[w]->fill()) {
          // Drain complete lines before reporting the exit.
          while (remaining[w] > 0) {
            auto line = workers_[w]->take_line();
            if (!line) break;
            handle_line(w, *line);
          }
          if (remaining[w] > 0) {
            throw EvaluatorError(EvaluatorError::Kind::kWorkerExit, first_pending(w),
                                 "'" + workers_[w]->command() + "' closed its output");
          }
        }
      }
    }
  }

  SearchSpaceSpec space_;
  std::vector<std::unique_ptr<WorkerProcess>> workers_;
  std::chrono::milliseconds timeout_;
  int input_spatial_;
  std::uint64_t next_control_id_ = 1ull << 62;
};

}  // namespace tsnas
