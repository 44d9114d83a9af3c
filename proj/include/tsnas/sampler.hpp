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

// Probabilistic architecture search over independent categorical variables.
//
// Each round draws S architectures from the current distribution, turns the
// evaluator scores and hinge FLOPs penalties into softmax importance
// weights, and takes an Adam ascent step on the weighted log-likelihood
//   sum_i w_i log p(A_i | theta).
// The gradient for logit o of variable v is sum_i w_i (1[A_i,v = o] - pi_v,o).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsnas/rng.hpp"
#include "tsnas/search_space.hpp"

namespace tsnas {

/// Numerically stable softmax.
inline std::vector<double> softmax(const std::vector<double>& x) {
  if (x.empty()) return {};
  const double hi = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - hi);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Categorical logits for every free variable of a space, canonical order.
struct ArchParams {
  std::vector<VariableRef> vars;
  std::vector<std::vector<double>> logits;

  std::size_t size() const { return vars.size(); }
  std::vector<double> probabilities(std::size_t i) const { return softmax(logits[i]); }

  bool operator==(const ArchParams&) const = default;
};

/// Zero logits on every variable with more than one choice.
inline ArchParams init_uniform(const SearchSpaceSpec& space) {
  ArchParams p;
  for (const auto& v : free_variables(space)) {
    p.vars.push_back(v);
    p.logits.emplace_back(domain_size(space, v), 0.0);
  }
  return p;
}

namespace detail {

inline void check_params(const ArchParams& params, const SearchSpaceSpec& space) {
  const auto free = free_variables(space);
  if (free != params.vars) throw ValidationError("architecture parameters do not match the space");
  for (std::size_t i = 0; i < free.size(); ++i) {
    if (params.logits[i].size() != domain_size(space, free[i])) {
      throw ValidationError("logit vector size mismatch for " + free[i].key());
    }
  }
}

/// Position of each free variable within variables(space).
inline std::vector<std::size_t> free_positions(const SearchSpaceSpec& space, const ArchParams& params) {
  const auto all = variables(space);
  std::vector<std::size_t> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < all.size() && j < params.vars.size(); ++i) {
    if (all[i] == params.vars[j]) {
      out.push_back(i);
      ++j;
    }
  }
  if (out.size() != params.vars.size()) throw ValidationError("architecture parameters are not in canonical order");
  return out;
}

}  // namespace detail

/// Sum of per-variable entropies in nats.
inline double entropy(const ArchParams& params) {
  double h = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double p : params.probabilities(i)) {
      if (p > 0.0) h -= p * std::log(p);
    }
  }
  return h;
}

/// Draws S architectures independently from the distribution.
inline std::vector<ArchitectureSample> sample_batch(const ArchParams& params, const SearchSpaceSpec& space,
                                                    std::size_t count, Rng& rng) {
  detail::check_params(params, space);
  const auto positions = detail::free_positions(space, params);
  const std::size_t n = variables(space).size();
  std::vector<std::vector<double>> probs;
  for (std::size_t i = 0; i < params.size(); ++i) probs.push_back(params.probabilities(i));
  std::vector<ArchitectureSample> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t i = 0; i < positions.size(); ++i) idx[positions[i]] = sample_categorical(rng, probs[i]);
    out.push_back(from_indices(space, idx));
  }
  return out;
}

inline std::vector<ArchitectureSample> sample_batch(const ArchParams& params, const SearchSpaceSpec& space,
                                                    std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_batch(params, space, count, rng);
}

/// Per-variable argmax; ties go to the lowest choice index.
inline ArchitectureSample argmax_architecture(const ArchParams& params, const SearchSpaceSpec& space) {
  detail::check_params(params, space);
  const auto positions = detail::free_positions(space, params);
  std::vector<std::size_t> idx(variables(space).size(), 0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& l = params.logits[i];
    idx[positions[i]] = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
  }
  return from_indices(space, idx);
}

/// Weighted log-likelihood sum_i w_i log p(A_i | theta).
inline double log_likelihood(const ArchParams& params, const SearchSpaceSpec& space,
                             const std::vector<ArchitectureSample>& batch, const std::vector<double>& weights) {
  detail::check_params(params, space);
  double ll = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto idx = domain_index(space, params.vars[i], get_value(batch[b], params.vars[i]));
      if (!idx) throw ValidationError("batch architecture outside the space at " + params.vars[i].key());
      ll += weights[b] * std::log(params.probabilities(i)[*idx]);
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Configuration, penalty, weights

struct SearchConfig {
  std::size_t samples_per_round = 8;
  std::size_t rounds = 100;
  /// Uniform-sampling rounds before the distribution is used; negative
  /// means 5% of `rounds`.
  long warmup_rounds = -1;
  double arch_lr = 0.025;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double temperature = 0.05;
  double penalty_weight = 0.5;
  BigInt flops_target = 0;
  /// When set, only FLOPs above `high` are penalized.
  std::optional<std::pair<BigInt, BigInt>> flops_target_range;
  std::uint64_t seed = 0;
  /// Stop a step early once every free variable's top probability reaches
  /// this value; 0 disables early stopping.
  double convergence_threshold = 0.0;

  std::size_t effective_warmup() const {
    return warmup_rounds < 0 ? rounds / 20 : static_cast<std::size_t>(warmup_rounds);
  }

  void check() const {
    if (samples_per_round < 2) throw UsageError("at least two samples per round are required");
    if (!(temperature > 0.0)) throw UsageError("weight temperature must be positive");
    if (!(penalty_weight >= 0.0)) throw UsageError("penalty weight must be non-negative");
    if (!(arch_lr > 0.0)) throw UsageError("architecture learning rate must be positive");
    if (flops_target < 0) throw UsageError("FLOPs target must be non-negative");
    if (flops_target_range && (flops_target_range->first > flops_target_range->second ||
                               flops_target_range->second <= 0)) {
      throw UsageError("FLOPs target range must satisfy 0 < low <= high");
    }
  }
};

/// One-sided relative excess over the FLOPs budget: max(0, (f - T) / T),
/// with T the range's upper bound when a range is configured. A zero target
/// disables the penalty.
inline double hinge_penalty(const BigInt& flops, const SearchConfig& config) {
  const BigInt& cap = config.flops_target_range ? config.flops_target_range->second : config.flops_target;
  if (cap <= 0 || flops <= cap) return 0.0;
  // Exact rational excess, converted once.
  return boost::multiprecision::cpp_rational(flops - cap, cap).convert_to<double>();
}

/// softmax((s_i - lambda * p_i) / tau).
inline std::vector<double> compute_weights(const std::vector<double>& scores, const std::vector<double>& penalties,
                                           double temperature, double penalty_weight) {
  if (scores.size() != penalties.size()) throw ValidationError("scores and penalties differ in length");
  if (scores.empty()) throw ValidationError("no scores to weight");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be positive");
  if (!std::isfinite(penalty_weight)) throw ValidationError("penalty weight must be finite");
  std::vector<double> z(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || !std::isfinite(penalties[i])) {
      throw ValidationError("non-finite score or penalty at sample " + std::to_string(i));
    }
    z[i] = (scores[i] - penalty_weight * penalties[i]) / temperature;
  }
  return softmax(z);
}

// ---------------------------------------------------------------------------
// Update

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ArchParams& p) {
    AdamState s;
    for (const auto& l : p.logits) {
      s.m.emplace_back(l.size(), 0.0);
      s.v.emplace_back(l.size(), 0.0);
    }
    return s;
  }

  bool operator==(const AdamState&) const = default;
};

/// Weighted log-likelihood gradient with respect to the logits.
inline std::vector<std::vector<double>> likelihood_gradient(const ArchParams& params, const SearchSpaceSpec& space,
                                                            const std::vector<ArchitectureSample>& batch,
                                                            const std::vector<double>& weights) {
  if (batch.size() != weights.size()) throw ValidationError("batch and weights differ in length");
  std::vector<std::vector<double>> grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto pi = params.probabilities(i);
    std::vector<double> g(pi.size(), 0.0);
    double wsum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto idx = domain_index(space, params.vars[i], get_value(batch[b], params.vars[i]));
      if (!idx) throw ValidationError("batch architecture outside the space at " + params.vars[i].key());
      g[*idx] += weights[b];
      wsum += weights[b];
    }
    for (std::size_t o = 0; o < g.size(); ++o) g[o] -= wsum * pi[o];
    grad.push_back(std::move(g));
  }
  return grad;
}

/// One Adam ascent step on the weighted log-likelihood.
inline void update(ArchParams& params, const SearchSpaceSpec& space, const std::vector<ArchitectureSample>& batch,
                   const std::vector<double>& weights, AdamState& adam, const SearchConfig& config) {
  detail::check_params(params, space);
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9) throw ValidationError("weights must sum to 1");
  if (adam.m.size() != params.size()) adam = AdamState::zeros_like(params);
  const auto grad = likelihood_gradient(params, space, batch, weights);
  adam.step += 1;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params.logits[i];
    if (adam.m[i].size() != theta.size()) throw ValidationError("optimizer state dimension mismatch");
    for (std::size_t o = 0; o < theta.size(); ++o) {
      const double g = grad[i][o] - config.weight_decay * theta[o];
      adam.m[i][o] = config.adam_beta1 * adam.m[i][o] + (1.0 - config.adam_beta1) * g;
      adam.v[i][o] = config.adam_beta2 * adam.v[i][o] + (1.0 - config.adam_beta2) * g * g;
      const double mhat = adam.m[i][o] / bc1;
      const double vhat = adam.v[i][o] / bc2;
      theta[o] += config.arch_lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Round loop

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::uint64_t> arch_ids;
  std::vector<double> scores;
  std::vector<double> penalties;
  std::vector<double> weights;
  std::vector<BigInt> flops;
  /// Entropy of the distribution the batch was drawn from (before update).
  double entropy = 0.0;
  double best_score = 0.0;
  double mean_score = 0.0;
  double mean_penalized_score = 0.0;
  double max_penalized_score = 0.0;
  double mean_penalty = 0.0;
  double mean_flops = 0.0;
  /// FLOPs of the argmax architecture after the update.
  BigInt argmax_flops = 0;

  bool operator==(const RoundRecord&) const = default;
};

/// Everything needed to continue a sampler bit-exactly.
struct SamplerState {
  std::size_t round = 0;
  ArchParams params;
  AdamState adam;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  bool operator==(const SamplerState&) const = default;
};

/// Single-owner sampler: propose() a batch, then commit() its S results.
/// Round r draws from the stream (seed, stream, r), so a restored state
/// continues the same random sequence.
class Sampler {
 public:
  Sampler(SearchSpaceSpec space, SearchConfig config, std::uint64_t stream = 0)
      : space_(std::move(space)), config_(std::move(config)) {
    config_.check();
    state_.params = init_uniform(space_);
    state_.adam = AdamState::zeros_like(state_.params);
    state_.seed = config_.seed;
    state_.stream = stream;
    uniform_ = init_uniform(space_);
  }

  Sampler(SearchSpaceSpec space, SearchConfig config, SamplerState state)
      : space_(std::move(space)), config_(std::move(config)), state_(std::move(state)) {
    config_.check();
    detail::check_params(state_.params, space_);
    uniform_ = init_uniform(space_);
  }

  const SearchSpaceSpec& space() const { return space_; }
  const SearchConfig& config() const { return config_; }
  const ArchParams& params() const { return state_.params; }
  const SamplerState& state() const { return state_; }
  std::size_t round() const { return state_.round; }
  bool in_warmup() const { return state_.round < config_.effective_warmup(); }
  bool has_pending() const { return !pending_.empty(); }

  /// True once every free variable's top probability reaches `threshold`.
  bool converged(double threshold) const {
    for (std::size_t i = 0; i < state_.params.size(); ++i) {
      const auto p = state_.params.probabilities(i);
      if (*std::max_element(p.begin(), p.end()) < threshold) return false;
    }
    return true;
  }

  const std::vector<ArchitectureSample>& propose() {
    if (has_pending()) throw Error("previous batch has not been committed");
    Rng rng = make_rng(state_.seed, {state_.stream, static_cast<std::uint64_t>(state_.round)});
    pending_ = sample_batch(in_warmup() ? uniform_ : state_.params, space_, config_.samples_per_round, rng);
    return pending_;
  }

  /// Applies the round's update. `flops` are the costs the penalty is
  /// computed from; `argmax_cost` prices the post-update argmax.
  template <typename ArgmaxCost>
  RoundRecord commit(const std::vector<double>& scores, const std::vector<BigInt>& flops,
                     std::vector<std::uint64_t> ids, ArgmaxCost&& argmax_cost) {
    if (!has_pending()) throw Error("no batch is pending");
    if (scores.size() != pending_.size() || flops.size() != pending_.size()) {
      throw ValidationError("expected " + std::to_string(pending_.size()) + " results for round " +
                            std::to_string(state_.round));
    }
    RoundRecord rec;
    rec.round = state_.round;
    rec.arch_ids = std::move(ids);
    rec.scores = scores;
    rec.flops = flops;
    rec.entropy = entropy(in_warmup() ? uniform_ : state_.params);
    for (const auto& f : flops) rec.penalties.push_back(hinge_penalty(f, config_));
    rec.weights = compute_weights(scores, rec.penalties, config_.temperature, config_.penalty_weight);

    const double n = static_cast<double>(scores.size());
    rec.best_score = *std::max_element(scores.begin(), scores.end());
    rec.max_penalized_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double ps = scores[i] - config_.penalty_weight * rec.penalties[i];
      rec.mean_score += scores[i] / n;
      rec.mean_penalty += rec.penalties[i] / n;
      rec.mean_penalized_score += ps / n;
      rec.max_penalized_score = std::max(rec.max_penalized_score, ps);
      rec.mean_flops += to_double(flops[i]) / n;
    }

    update(state_.params, space_, pending_, rec.weights, state_.adam, config_);
    pending_.clear();
    state_.round += 1;
    rec.argmax_flops = argmax_cost(argmax_architecture(state_.params, space_));
    return rec;
  }

 private:
  SearchSpaceSpec space_;
  SearchConfig config_;
  SamplerState state_;
  ArchParams uniform_;
  std::vector<ArchitectureSample> pending_;
};

}  // namespace tsnas
