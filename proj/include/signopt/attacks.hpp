#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/estimators.hpp"
#include "signopt/geometry.hpp"
#include "signopt/oracle.hpp"
#include "signopt/random.hpp"
#include "signopt/vec.hpp"

namespace signopt {

struct LineSearchParams {
  bool enabled = true;
  double beta = 0.5;  // shrink factor when the first trial fails
  int max_trials = 15;
};

struct AttackConfig {
  EstimatorKind estimator = EstimatorKind::signopt;
  std::size_t num_directions = 200;  // Q
  double epsilon = 1e-3;
  bool epsilon_relative = true;  // perturb by epsilon * ||theta|| * u
  double eta0 = 0.2;
  std::size_t max_iters = 100000;
  std::uint64_t query_budget = 20000;
  std::uint64_t seed = 0;
  AttackGoal goal;
  SearchConfig search;          // in-loop evaluations
  double final_rel_tol = 1e-5;  // reported distortion
  double fd_rel_tol = 1e-5;     // evaluations feeding finite differences
  DirectionDistribution directions = DirectionDistribution::gaussian;
  LineSearchParams line_search;
  std::size_t init_directions = 100;
  std::vector<Vector> target_points;  // targeted init: examples of the target class
  double stall_tol = 1e-4;
  std::size_t stall_window = 10;

  void validate() const {
    search.validate();
    if (num_directions == 0) throw PreconditionError("Q must be at least 1");
    if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
    if (!(eta0 > 0.0)) throw PreconditionError("eta0 must be positive");
    if (max_iters == 0) throw PreconditionError("max_iters must be positive");
    if (query_budget == 0) throw PreconditionError("query budget must be positive");
    if (!(final_rel_tol > 0.0 && final_rel_tol < 1.0))
      throw PreconditionError("final_rel_tol must lie in (0, 1)");
    if (!(fd_rel_tol > 0.0 && fd_rel_tol < 1.0)) throw PreconditionError("fd_rel_tol must lie in (0, 1)");
    if (!(line_search.beta > 0.0 && line_search.beta < 1.0))
      throw PreconditionError("line-search beta must lie in (0, 1)");
    if (line_search.max_trials < 1) throw PreconditionError("line-search max_trials must be positive");
    if (!goal.is_targeted() && init_directions == 0)
      throw PreconditionError("need at least one initial direction");
    if (goal.is_targeted() && target_points.empty())
      throw PreconditionError("targeted attack needs target-class examples");
  }

  bool uses_finite_differences() const {
    return estimator == EstimatorKind::rgf || estimator == EstimatorKind::zo_signsgd_bs;
  }
};

struct TracePoint {
  std::uint64_t queries = 0;
  double best_g = kNoCrossing;
};

/// Best-so-far distortion against cumulative queries.
struct AttackTrace {
  std::vector<TracePoint> records;

  void note(std::uint64_t queries, double g) {
    const double best = records.empty() ? g : std::min(g, records.back().best_g);
    if (!records.empty() && records.back().queries == queries) {
      records.back().best_g = best;
    } else {
      records.push_back({queries, best});
    }
  }

  bool monotone() const {
    for (std::size_t i = 1; i < records.size(); ++i)
      if (records[i].queries <= records[i - 1].queries || records[i].best_g > records[i - 1].best_g)
        return false;
    return true;
  }

  /// best_g at the last record with queries <= q, or kNoCrossing.
  double best_at(std::uint64_t q) const {
    double best = kNoCrossing;
    for (const auto& r : records) {
      if (r.queries > q) break;
      best = r.best_g;
    }
    return best;
  }

  /// First query count at which best_g <= level, if reached.
  std::optional<std::uint64_t> queries_to_reach(double level) const {
    for (const auto& r : records)
      if (r.best_g <= level) return r.queries;
    return std::nullopt;
  }
};

struct AttackResult {
  Vector x_adv;
  double distortion = kNoCrossing;
  std::uint64_t queries = 0;
  bool success = false;
  AttackTrace trace;
  Vector theta;
  std::size_t iterations = 0;
  std::size_t qp_fallbacks = 0;  // SVM-OPT iterations that used the sign-vote estimate
};

struct LineSearchResult {
  double eta = 0.0;
  double g_new = kNoCrossing;
  Vector theta;
  std::uint64_t queries = 0;
  bool exhausted = false;  // budget ran out during the search
};

/// Greedy step-size search along -g_hat. Starting from eta_prev, doubles eta
/// while g keeps decreasing; if the first trial does not decrease g, shrinks
/// eta by beta up to max_trials times. Only strict decreases are accepted;
/// otherwise eta = 0 and g_new = g_current. Trial directions are normalized.
template <DirectionEvaluator F>
LineSearchResult line_search_eta(F&& evaluate, std::span<const double> theta, std::span<const double> g_hat,
                                 double g_current, double eta_prev, const LineSearchParams& params) {
  LineSearchResult res;
  res.g_new = g_current;
  res.theta.assign(theta.begin(), theta.end());
  if (!(vec::norm(g_hat) > 0.0) || !std::isfinite(g_current) || !(eta_prev > 0.0)) return res;

  auto trial = [&](double eta) -> std::pair<double, Vector> {
    auto next = vec::axpy(theta, -eta, g_hat);
    const double n = vec::norm(next);
    if (!(n > 0.0)) return {kNoCrossing, {}};
    vec::scale_in_place(next, 1.0 / n);
    const auto eval = evaluate(std::span<const double>(next));
    res.queries += eval.queries_used;
    return {eval.found ? eval.g_value : kNoCrossing, std::move(next)};
  };
  auto accept = [&](double eta, double g, Vector t) {
    res.eta = eta;
    res.g_new = g;
    res.theta = std::move(t);
  };

  try {
    double eta = eta_prev;
    auto [g1, t1] = trial(eta);
    if (g1 < g_current) {
      accept(eta, g1, std::move(t1));
      for (int k = 1; k < params.max_trials; ++k) {
        eta *= 2.0;
        auto [g2, t2] = trial(eta);
        if (!(g2 < res.g_new)) break;
        accept(eta, g2, std::move(t2));
      }
    } else {
      for (int k = 0; k < params.max_trials; ++k) {
        eta *= params.beta;
        auto [g2, t2] = trial(eta);
        if (g2 < g_current) {
          accept(eta, g2, std::move(t2));
          break;
        }
      }
    }
  } catch (const BudgetExhausted&) {
    res.exhausted = true;
  }
  return res;
}

namespace detail {

// Temporarily moves the oracle's budget; restores it on scope exit.
class BudgetScope {
 public:
  explicit BudgetScope(QueryCounter& c) : counter_(c), saved_(c.budget()) {}
  ~BudgetScope() { counter_.set_budget(saved_); }
  BudgetScope(const BudgetScope&) = delete;
  BudgetScope& operator=(const BudgetScope&) = delete;

  void limit_to(std::uint64_t absolute) {
    counter_.set_budget(saved_ ? std::min(*saved_, absolute) : absolute);
  }

 private:
  QueryCounter& counter_;
  std::optional<std::uint64_t> saved_;
};

inline constexpr std::uint64_t kFinalReserve = 32;

}  // namespace detail

/// Runs one hard-label attack from `example` with the configured estimator:
/// initialization over candidate directions, then Q-direction gradient
/// estimates followed by a line-searched step on theta, until max_iters,
/// stalling, or budget exhaustion. The best (theta, g) seen is refined at
/// final_rel_tol and reconstructed as x_adv.
template <LabelOracle O>
AttackResult run_attack(O& oracle, const Example& example, const AttackConfig& cfg) {
  cfg.validate();
  if (example.x.size() != oracle.input_dim())
    throw DimensionMismatch("example dimension does not match model");
  const Origin origin(example.x, example.y, cfg.goal);
  const Label clean = oracle.predict_unmetered(origin.x0);
  if (cfg.goal.is_targeted() ? clean == cfg.goal.target : clean != example.y)
    throw PreconditionError(cfg.goal.is_targeted() ? "example is already classified as the target"
                                                   : "example is not correctly classified");

  const std::uint64_t start = oracle.queries();
  const std::uint64_t end = start + cfg.query_budget;
  const std::uint64_t reserve = cfg.query_budget >= 8 * detail::kFinalReserve ? detail::kFinalReserve : 0;
  detail::BudgetScope budget(oracle.counter());
  budget.limit_to(end - reserve);

  AttackResult result;
  auto used = [&] { return oracle.queries() - start; };

  Rng init_rng(derive_seed(cfg.seed, 0));
  Rng dir_rng(derive_seed(cfg.seed, 1));

  SearchConfig loop_search = cfg.search;
  if (cfg.uses_finite_differences()) loop_search.rel_tol = std::min(loop_search.rel_tol, cfg.fd_rel_tol);

  Vector theta;
  double g = kNoCrossing;
  bool exhausted = false;
  try {
    const auto candidates = cfg.goal.is_targeted()
                                ? target_candidates(origin, cfg.target_points)
                                : gaussian_candidates(origin.dim(), cfg.init_directions, init_rng);
    auto init = initial_direction(oracle, origin, candidates, loop_search);
    theta = std::move(init.theta);
    g = init.eval.g_value;
    exhausted = init.exhausted;
    result.trace.note(used(), g);
  } catch (const BudgetExhausted&) {
    exhausted = true;
  }
  if (theta.empty()) {
    result.queries = used();
    return result;
  }

  Vector best_theta = theta;
  double best_g = g;
  auto remember = [&](std::span<const double> t, double value) {
    result.trace.note(used(), value);
    if (value < best_g) {
      best_g = value;
      best_theta.assign(t.begin(), t.end());
    }
  };

  double eta = cfg.eta0;
  std::vector<double> history{g};
  for (std::size_t it = 0; !exhausted && it < cfg.max_iters; ++it) {
    try {
      const auto batch = sample_directions(origin.dim(), cfg.num_directions, cfg.directions, dir_rng);
      const double eps = cfg.epsilon_relative ? cfg.epsilon * vec::norm(theta) : cfg.epsilon;
      auto fd_eval = [&](std::span<const double> t) {
        return evaluate_g_near(oracle, origin, t, g, loop_search);
      };

      GradientEstimate est;
      switch (cfg.estimator) {
        case EstimatorKind::signopt:
          est = estimate_grad_signopt(collect_sign_observations(oracle, origin, theta, g, batch, eps));
          break;
        case EstimatorKind::svmopt: {
          const auto obs = collect_sign_observations(oracle, origin, theta, g, batch, eps);
          const auto qp = solve_svm_qp(obs);
          if (qp.feasible) {
            est.g_hat = qp.z;
            est.method = EstimatorKind::svmopt;
            est.queries_used = obs.size();
          } else {
            est = estimate_grad_signopt(obs);
            ++result.qp_fallbacks;
          }
          break;
        }
        case EstimatorKind::rgf:
          est = estimate_grad_rgf(fd_eval, theta, g, batch, eps);
          break;
        case EstimatorKind::zo_signsgd_sqo:
          est = estimate_grad_zo_signsgd(collect_sign_observations(oracle, origin, theta, g, batch, eps));
          break;
        case EstimatorKind::zo_signsgd_bs:
          est = estimate_grad_zo_signsgd(fd_eval, theta, g, batch, eps);
          break;
      }

      const double g_before = g;
      auto step_eval = [&](std::span<const double> t) {
        auto e = evaluate_g_near(oracle, origin, t, g_before, loop_search);
        if (e.found) remember(t, e.g_value);
        return e;
      };
      if (cfg.line_search.enabled) {
        auto ls = line_search_eta(step_eval, theta, est.g_hat, g, eta, cfg.line_search);
        exhausted = ls.exhausted;
        if (ls.eta > 0.0) {
          eta = ls.eta;
          theta = std::move(ls.theta);
          g = ls.g_new;
        }
      } else {
        auto next = vec::axpy(theta, -cfg.eta0, est.g_hat);
        if (vec::norm(next) > 0.0) {
          next = vec::normalized(next);
          const auto e = step_eval(next);
          if (e.found) {
            theta = std::move(next);
            g = e.g_value;
          }
        }
      }
    } catch (const BudgetExhausted&) {
      exhausted = true;
    }
    ++result.iterations;
    history.push_back(g);
    if (history.size() > cfg.stall_window) {
      const double old = history[history.size() - 1 - cfg.stall_window];
      if (old - g < cfg.stall_tol * old) break;
    }
  }

  // Refine the reported distance; keep the loop value if the budget runs out.
  budget.limit_to(end);
  try {
    SearchConfig final_search = cfg.search;
    final_search.rel_tol = cfg.final_rel_tol;
    const auto e = evaluate_g_near(oracle, origin, best_theta, best_g, final_search);
    if (e.found && e.g_value <= best_g) remember(best_theta, e.g_value);
  } catch (const BudgetExhausted&) {
  }

  result.theta = best_theta;
  result.x_adv = origin.point(best_theta, best_g);
  result.distortion = vec::distance(result.x_adv, origin.x0);
  result.success = origin.hit(oracle.predict_unmetered(result.x_adv));
  result.queries = used();
  return result;
}

template <Classifier Model>
AttackResult run_attack(const Model& model, const Example& example, const AttackConfig& cfg) {
  HardLabelOracle<Model> oracle(model);
  return run_attack(oracle, example, cfg);
}

struct OracleComparison {
  AttackResult with_sqo;
  AttackResult with_binary_search;
};

/// ZO-SignSGD with signs from the single-query oracle versus signs of full
/// binary-search finite differences, under identical seeds and budgets.
template <Classifier Model>
OracleComparison compare_single_query_oracle(const Model& model, const Example& example, AttackConfig base) {
  OracleComparison out;
  base.estimator = EstimatorKind::zo_signsgd_sqo;
  out.with_sqo = run_attack(model, example, base);
  base.estimator = EstimatorKind::zo_signsgd_bs;
  out.with_binary_search = run_attack(model, example, base);
  return out;
}

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::signopt:
      return "signopt";
    case EstimatorKind::svmopt:
      return "svmopt";
    case EstimatorKind::rgf:
      return "rgf";
    case EstimatorKind::zo_signsgd_sqo:
      return "zo-sqo";
    case EstimatorKind::zo_signsgd_bs:
      return "zo-bs";
  }
  return "unknown";
}

inline EstimatorKind parse_estimator(const std::string& s) {
  for (auto k : {EstimatorKind::signopt, EstimatorKind::svmopt, EstimatorKind::rgf,
                 EstimatorKind::zo_signsgd_sqo, EstimatorKind::zo_signsgd_bs})
    if (to_string(k) == s) return k;
  throw PreconditionError("unknown estimator '" + s + "'");
}

}  // namespace signopt
