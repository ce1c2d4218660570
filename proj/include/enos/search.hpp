/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ENOS_SEARCH_HPP
#define ENOS_SEARCH_HPP

#include <functional>

#include "enos/train.hpp"

namespace enos {

struct SearchConfig {
  enum class Strategy { Single, Bilevel, Sequential, Variational };
  Strategy strategy = Strategy::Single;
  bool hybrid = false;         // 6-choice set and the CiM budget terms
  double lambda = 0.0;         // energy-accuracy trade-off weight
  double gamma = 0.0;          // Lagrangian CiM-budget weight (hybrid)
  double budget_bits = 0.0;    // CiM capacity B in weight-bits (hybrid)
  int epochs = 40;
  int relearn_epochs = 40;
  int samples = 16;            // variational population size
  int batch = 32;
  double lr_theta = 1e-3;
  double lr_alpha = 3e-3;
  double steepness = 10.0;
  std::uint64_t seed = 0;
  bool reinit_relearn = false; // default warm-start
  int patience = 5;
  double min_delta = 1e-4;
};

inline const char* strategy_name(SearchConfig::Strategy s) {
  switch (s) {
    case SearchConfig::Strategy::Single: return "single";
    case SearchConfig::Strategy::Bilevel: return "bilevel";
    case SearchConfig::Strategy::Sequential: return "sequential";
    case SearchConfig::Strategy::Variational: return "variational";
  }
  return "?";
}

inline SearchConfig::Strategy strategy_from_name(const std::string& s) {
  if (s == "single") return SearchConfig::Strategy::Single;
  if (s == "bilevel") return SearchConfig::Strategy::Bilevel;
  if (s == "sequential") return SearchConfig::Strategy::Sequential;
  if (s == "variational") return SearchConfig::Strategy::Variational;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

struct EpochMetrics {
  std::string phase;  // "search", "round<k>", "relearn", "cand<n>"
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double expected_energy_fj = 0.0;
  double expected_energy_norm = 0.0;
  double penalty = 0.0;  // gamma * (B - expected usage)^2
  std::vector<std::vector<double>> alpha_softmax;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

struct CandidateResult {
  std::vector<OperatorChoice> assignment;
  double val_acc = 0.0;
  double test_acc = 0.0;
  EnergyReport energy;
  bool feasible = true;
};

struct SearchOutcome {
  std::vector<OperatorChoice> assignment;
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  double quant_test_acc = 0.0;
  EnergyReport energy;
  bool feasible = true;
  std::vector<CandidateResult> population;  // variational only
};

// --- non-differentiable reporting helpers ------------------------------------

inline double expected_energy_value(const Network& net, const EnergyTable& table) {
  const auto& n_ops = net.plan().n_ops;
  double total = 0.0;
  for (std::size_t s = 0; s < net.num_searchable(); ++s) {
    auto p = Network::softmax_values(net.mixture(s).alpha->value);
    double e = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) e += p[j] * table.energy(net.choices()[j]);
    total += static_cast<double>(n_ops[s]) * e;
  }
  return total;
}

inline double expected_usage_value(const Network& net, const EnergyTable& table) {
  const auto& n_ws = net.plan().n_ws;
  double total = 0.0;
  for (std::size_t s = 0; s < net.num_searchable(); ++s) {
    auto p = Network::softmax_values(net.mixture(s).alpha->value);
    double a = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) a += p[j] * table.area(net.choices()[j]);
    total += static_cast<double>(n_ws[s]) * a;
  }
  return total;
}

namespace detail {

inline void check_finite_loss(double v, const char* where) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite loss in ") + where +
                             "; aborting the search run");
}

inline EpochMetrics snapshot(Network& net, const Dataset& data, const SearchConfig& cfg,
                             const EnergyTable& table, const std::string& phase, int epoch,
                             double train_loss) {
  EpochMetrics m;
  m.phase = phase;
  m.epoch = epoch;
  m.train_loss = train_loss;
  EvalResult ev = evaluate(net, data, Split::Val);
  m.val_acc = ev.accuracy;
  m.expected_energy_fj = expected_energy_value(net, table);
  m.expected_energy_norm = m.expected_energy_fj / baseline_energy(net.plan().n_ops, table);
  double usage = expected_usage_value(net, table);
  m.penalty = cfg.hybrid && cfg.gamma > 0.0
                  ? cfg.gamma * (cfg.budget_bits - usage) * (cfg.budget_bits - usage)
                  : 0.0;
  m.val_loss = ev.mean_loss + cfg.lambda * m.expected_energy_norm + m.penalty;
  for (std::size_t s = 0; s < net.num_searchable(); ++s)
    m.alpha_softmax.push_back(Network::softmax_values(net.mixture(s).alpha->value));
  return m;
}

// One joint (theta, alpha) epoch over shuffled train minibatches.
inline double mixture_epoch(Network& net, const Dataset& data, const SearchConfig& cfg,
                            const EnergyTable& table, Adam& theta_opt, Adam* alpha_opt,
                            std::uint64_t epoch_seed) {
  auto order = epoch_order(data.train_idx, epoch_seed);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  double gamma = cfg.hybrid ? cfg.gamma : 0.0;
  for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
    Batch batch = make_batch(data, order, b, cfg.batch);
    Tensor logits = net.forward_mixture(batch.x);
    Tensor ce = cross_entropy_loss(logits, batch.y);
    Tensor loss = total_loss(ce, net.alphas_all(), net.plan().n_ops, net.plan().n_ws, cfg.lambda,
                             gamma, cfg.budget_bits, net.choices(), table);
    check_finite_loss(loss->item(), "mixture training");
    theta_opt.zero_grad();
    if (alpha_opt) alpha_opt->zero_grad();
    backward(loss);
    theta_opt.step();
    if (alpha_opt && alpha_opt->size() > 0) alpha_opt->step();
    loss_sum += loss->item();
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

// Bi-level epoch: for each train batch, first an alpha step on a validation
// batch, then a theta step on the train batch. First-order alternation.
inline double bilevel_epoch(Network& net, const Dataset& data, const SearchConfig& cfg,
                            const EnergyTable& table, Adam& theta_opt, Adam& alpha_opt,
                            std::uint64_t epoch_seed) {
  auto train_order = epoch_order(data.train_idx, epoch_seed);
  auto val_order = epoch_order(data.val_idx, derive_seed(epoch_seed, 1));
  double loss_sum = 0.0;
  std::size_t batches = 0, voff = 0;
  double gamma = cfg.hybrid ? cfg.gamma : 0.0;
  auto step_on = [&](const std::vector<std::size_t>& idx, std::size_t off, Adam& opt) {
    Batch batch = make_batch(data, idx, off, cfg.batch);
    Tensor logits = net.forward_mixture(batch.x);
    Tensor ce = cross_entropy_loss(logits, batch.y);
    Tensor loss = total_loss(ce, net.alphas_all(), net.plan().n_ops, net.plan().n_ws, cfg.lambda,
                             gamma, cfg.budget_bits, net.choices(), table);
    check_finite_loss(loss->item(), "bi-level training");
    theta_opt.zero_grad();
    alpha_opt.zero_grad();
    backward(loss);
    if (opt.size() > 0) opt.step();
    return loss->item();
  };
  for (std::size_t b = 0; b < train_order.size(); b += cfg.batch) {
    step_on(val_order, voff, alpha_opt);
    voff += cfg.batch;
    if (voff >= val_order.size()) voff = 0;
    loss_sum += step_on(train_order, b, theta_opt);
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

inline void emit(const MetricsSink& sink, const EpochMetrics& m) {
  if (sink) sink(m);
}

// Train the mixture until the epoch budget or a validation-loss plateau.
inline void train_mixture(Network& net, const Dataset& data, const SearchConfig& cfg,
                          const EnergyTable& table, const MetricsSink& sink,
                          const std::string& phase, std::uint64_t seed_salt, bool bilevel) {
  Adam theta_opt(net.thetas(), {cfg.lr_theta});
  Adam alpha_opt(net.alphas_free(), {cfg.lr_alpha});
  EarlyStop stop(cfg.patience, cfg.min_delta);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::uint64_t es = derive_seed(cfg.seed, seed_salt * 100000 + e);
    double tl = bilevel ? bilevel_epoch(net, data, cfg, table, theta_opt, alpha_opt, es)
                        : mixture_epoch(net, data, cfg, table, theta_opt, &alpha_opt, es);
    EpochMetrics m = snapshot(net, data, cfg, table, phase, e, tl);
    emit(sink, m);
    if (stop.update(m.val_loss)) break;
  }
}

// Relearn theta with operators fixed; cross-entropy only.
inline void relearn_assigned(Network& net, const std::vector<OperatorChoice>& assignment,
                             const Dataset& data, const SearchConfig& cfg,
                             const EnergyTable& table, const MetricsSink& sink,
                             const std::string& phase, std::uint64_t seed_salt) {
  Adam theta_opt(net.thetas(), {cfg.lr_theta});
  EarlyStop stop(cfg.patience, cfg.min_delta);
  for (int e = 0; e < cfg.relearn_epochs; ++e) {
    auto order = epoch_order(data.train_idx, derive_seed(cfg.seed, seed_salt * 100000 + e));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      Batch batch = make_batch(data, order, b, cfg.batch);
      Tensor loss = cross_entropy_loss(net.forward_assigned(batch.x, assignment), batch.y);
      check_finite_loss(loss->item(), "relearning");
      theta_opt.zero_grad();
      backward(loss);
      theta_opt.step();
      loss_sum += loss->item();
      ++batches;
    }
    EvalResult ev = evaluate(net, data, Split::Val, &assignment);
    if (sink) {
      EpochMetrics m;
      m.phase = phase;
      m.epoch = e;
      m.train_loss = loss_sum / static_cast<double>(batches);
      m.val_loss = ev.mean_loss;
      m.val_acc = ev.accuracy;
      sink(m);
    }
    if (stop.update(ev.mean_loss)) break;
  }
}

}  // namespace detail

inline Network build_search_network(const NetworkSpec& spec, const SearchConfig& cfg) {
  return Network(spec, cfg.hybrid ? hybrid_choices() : digital_choices(), cfg.steepness,
                 cfg.seed);
}

// Fix the operators, relearn theta (warm-start by default), report float and
// quantized metrics plus the exact assignment energy.
inline SearchOutcome finalize(Network& net, const std::vector<OperatorChoice>& assignment,
                              const Dataset& data, const SearchConfig& cfg,
                              const EnergyTable& table, const MetricsSink& sink = {},
                              const std::string& phase = "relearn",
                              std::uint64_t seed_salt = 7) {
  if (assignment.size() != net.num_searchable())
    throw std::invalid_argument("finalize: incomplete assignment");
  if (cfg.reinit_relearn) net.reinit_weights(derive_seed(cfg.seed, 4242));
  detail::relearn_assigned(net, assignment, data, cfg, table, sink, phase, seed_salt);
  SearchOutcome out;
  out.assignment = assignment;
  out.train_acc = evaluate(net, data, Split::Train, &assignment).accuracy;
  out.val_acc = evaluate(net, data, Split::Val, &assignment).accuracy;
  out.test_acc = evaluate(net, data, Split::Test, &assignment).accuracy;
  out.quant_test_acc = evaluate(net, data, Split::Test, &assignment, true).accuracy;
  out.energy = assignment_energy(assignment, net.plan().n_ops, net.plan().n_ws, table,
                                 cfg.hybrid ? cfg.budget_bits : -1.0);
  out.feasible = out.energy.feasible;
  return out;
}

inline SearchOutcome search_single(Network& net, const Dataset& data, const SearchConfig& cfg,
                                   const EnergyTable& table, const MetricsSink& sink = {}) {
  detail::train_mixture(net, data, cfg, table, sink, "search", 1, false);
  return finalize(net, net.materialize(net.argmax_assignment()), data, cfg, table, sink);
}

inline SearchOutcome search_bilevel(Network& net, const Dataset& data, const SearchConfig& cfg,
                                    const EnergyTable& table, const MetricsSink& sink = {}) {
  if (data.val_idx.empty()) throw std::invalid_argument("bilevel search needs a validation split");
  detail::train_mixture(net, data, cfg, table, sink, "search", 1, true);
  return finalize(net, net.materialize(net.argmax_assignment()), data, cfg, table, sink);
}

// One layer frozen per round, chosen by the globally largest softmax(alpha)
// among the still-open layers. Ties: lowest layer index, then lowest choice.
inline SearchOutcome search_sequential(Network& net, const Dataset& data, const SearchConfig& cfg,
                                       const EnergyTable& table, const MetricsSink& sink = {}) {
  int round = 0;
  while (true) {
    std::vector<std::size_t> open;
    for (std::size_t s = 0; s < net.num_searchable(); ++s)
      if (!net.mixture(s).frozen) open.push_back(s);
    if (open.empty()) break;
    ++round;
    detail::train_mixture(net, data, cfg, table, sink, "round" + std::to_string(round),
                          static_cast<std::uint64_t>(round) + 10, false);
    std::size_t best_layer = open[0];
    int best_choice = 0;
    double best_p = -1.0;
    for (std::size_t s : open) {
      auto p = Network::softmax_values(net.mixture(s).alpha->value);
      for (std::size_t j = 0; j < p.size(); ++j)
        if (p[j] > best_p) {
          best_p = p[j];
          best_layer = s;
          best_choice = static_cast<int>(j);
        }
    }
    net.freeze(static_cast<int>(best_layer), best_choice);
  }
  return finalize(net, net.materialize(net.argmax_assignment()), data, cfg, table, sink);
}

// Step-1 single-level training, step-2 a sampled candidate population with
// per-candidate relearning, step-3 the best validation accuracy wins. In
// hybrid mode candidates over the CiM budget are kept but excluded from
// winner selection.
inline SearchOutcome search_variational(Network& net, const Dataset& data,
                                        const SearchConfig& cfg, const EnergyTable& table,
                                        const MetricsSink& sink = {}) {
  if (cfg.samples < 1) throw std::invalid_argument("variational search needs samples >= 1");
  detail::train_mixture(net, data, cfg, table, sink, "search", 1, false);

  SearchOutcome out;
  std::vector<Network> nets;
  int winner = -1, best_infeasible = -1;
  for (int n = 0; n < cfg.samples; ++n) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(n)));
    auto assignment = net.materialize(net.sample_assignment(rng));
    Network cand = net.clone();
    if (cfg.reinit_relearn) cand.reinit_weights(derive_seed(cfg.seed, 2000 + n));
    detail::relearn_assigned(cand, assignment, data, cfg, table, sink,
                             "cand" + std::to_string(n), 500 + static_cast<std::uint64_t>(n));
    CandidateResult c;
    c.assignment = assignment;
    c.val_acc = evaluate(cand, data, Split::Val, &assignment).accuracy;
    c.test_acc = evaluate(cand, data, Split::Test, &assignment).accuracy;
    c.energy = assignment_energy(assignment, net.plan().n_ops, net.plan().n_ws, table,
                                 cfg.hybrid ? cfg.budget_bits : -1.0);
    c.feasible = c.energy.feasible;
    if (c.feasible && (winner < 0 || c.val_acc > out.population[winner].val_acc)) winner = n;
    if (!c.feasible &&
        (best_infeasible < 0 || c.val_acc > out.population[best_infeasible].val_acc))
      best_infeasible = n;
    out.population.push_back(std::move(c));
    nets.push_back(std::move(cand));
  }
  out.feasible = winner >= 0;
  int pick = winner >= 0 ? winner : best_infeasible;
  const CandidateResult& w = out.population[pick];
  Network& wnet = nets[pick];
  out.assignment = w.assignment;
  out.val_acc = w.val_acc;
  out.test_acc = w.test_acc;
  out.train_acc = evaluate(wnet, data, Split::Train, &w.assignment).accuracy;
  out.quant_test_acc = evaluate(wnet, data, Split::Test, &w.assignment, true).accuracy;
  out.energy = w.energy;
  net.adopt_weights(wnet);
  return out;
}

inline SearchOutcome run_search(Network& net, const Dataset& data, const SearchConfig& cfg,
                                const EnergyTable& table, const MetricsSink& sink = {}) {
  switch (cfg.strategy) {
    case SearchConfig::Strategy::Single: return search_single(net, data, cfg, table, sink);
    case SearchConfig::Strategy::Bilevel: return search_bilevel(net, data, cfg, table, sink);
    case SearchConfig::Strategy::Sequential:
      return search_sequential(net, data, cfg, table, sink);
    case SearchConfig::Strategy::Variational:
      return search_variational(net, data, cfg, table, sink);
  }
  throw std::logic_error("run_search: unknown strategy");
}

}  // namespace enos

#endif  // ENOS_SEARCH_HPP
