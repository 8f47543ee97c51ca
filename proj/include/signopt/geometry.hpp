#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/oracle.hpp"
#include "signopt/random.hpp"
#include "signopt/vec.hpp"

namespace signopt {

/// Controls the bracketing + bisection used to evaluate g(theta).
struct SearchConfig {
  double rel_tol = 1e-3;    // stop when (hi - lo) <= rel_tol * lo, so hi overshoots g by at most rel_tol
  double lambda_max = 1e6;  // no crossing is reported beyond this radius
  int max_doublings = 30;
  double initial_lambda = 0.0;  // <= 0 selects 0.1 * sqrt(d)
  bool warm_start = true;       // bracket around a known nearby g instead of doubling from initial_lambda

  double start_lambda(std::size_t dim) const {
    return initial_lambda > 0.0 ? initial_lambda : 0.1 * std::sqrt(static_cast<double>(dim));
  }

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw PreconditionError("rel_tol must lie in (0, 1)");
    if (!(lambda_max > 0.0)) throw PreconditionError("lambda_max must be positive");
    if (max_doublings < 1) throw PreconditionError("max_doublings must be positive");
    if (initial_lambda > lambda_max) throw PreconditionError("initial_lambda exceeds lambda_max");
  }
};

struct DistanceEval {
  double g_value = kNoCrossing;
  std::uint64_t queries_used = 0;
  bool found = false;
};

struct AttackGoal {
  enum class Mode { untargeted, targeted };
  Mode mode = Mode::untargeted;
  Label target;

  static AttackGoal untargeted() { return {}; }
  static AttackGoal targeted(Label t) { return {Mode::targeted, t}; }
  bool is_targeted() const { return mode == Mode::targeted; }
};

/// The clean example under attack together with what counts as success.
struct Origin {
  Vector x0;
  Label y0;
  AttackGoal goal;

  Origin(Vector x, Label y, AttackGoal g = AttackGoal::untargeted()) : x0(std::move(x)), y0(y), goal(g) {
    if (goal.is_targeted() && goal.target == y0)
      throw PreconditionError("target label must differ from the true label");
  }

  bool hit(Label predicted) const { return goal.is_targeted() ? predicted == goal.target : predicted != y0; }
  std::size_t dim() const { return x0.size(); }

  Vector point(std::span<const double> unit_dir, double lambda) const {
    return vec::axpy(x0, lambda, unit_dir);
  }
};

/// Result of bracketing the boundary along a ray: lo is a non-adversarial
/// radius (or 0), hi an adversarial one.
struct Bracket {
  double lo = 0.0;
  double hi = kNoCrossing;
  std::uint64_t queries_used = 0;
  bool found = false;
};

namespace detail {

inline Vector unit_direction(std::span<const double> theta, std::size_t dim) {
  if (theta.size() != dim) throw DimensionMismatch("direction dimension does not match x0");
  const double n = vec::norm(theta);
  if (!(n > 0.0) || !std::isfinite(n)) throw PreconditionError("direction must be nonzero and finite");
  Vector u(theta.begin(), theta.end());
  vec::scale_in_place(u, 1.0 / n);
  return u;
}

template <LabelOracle O>
bool hit_at(O& oracle, const Origin& origin, std::span<const double> unit_dir, double lambda) {
  return origin.hit(oracle.predict(origin.point(unit_dir, lambda)));
}

template <LabelOracle O>
DistanceEval bisect(O& oracle, const Origin& origin, std::span<const double> unit_dir, double lo, double hi,
                    double rel_tol) {
  const auto start = oracle.queries();
  while (hi - lo > rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // floating-point resolution reached
    if (hit_at(oracle, origin, unit_dir, mid))
      hi = mid;
    else
      lo = mid;
  }
  return {hi, oracle.queries() - start, true};
}

}  // namespace detail

/// One query: does `point` satisfy the attack goal?
template <LabelOracle O>
bool is_adversarial(O& oracle, const Origin& origin, std::span<const double> point) {
  if (point.size() != origin.dim()) throw DimensionMismatch("point dimension does not match x0");
  return origin.hit(oracle.predict(point));
}

/// Doubles the radius from cfg.initial_lambda until the ray turns
/// adversarial. Returns found=false when the radius would exceed lambda_max
/// or max_doublings probes are spent.
template <LabelOracle O>
Bracket fine_grained_search(O& oracle, const Origin& origin, std::span<const double> theta,
                            const SearchConfig& cfg) {
  const auto dir = detail::unit_direction(theta, origin.dim());
  const auto start = oracle.queries();
  Bracket b;
  double lambda = cfg.start_lambda(origin.dim());
  for (int k = 0; k < cfg.max_doublings && lambda <= cfg.lambda_max; ++k) {
    if (detail::hit_at(oracle, origin, dir, lambda)) {
      b.hi = lambda;
      b.found = true;
      break;
    }
    b.lo = lambda;
    lambda *= 2.0;
  }
  if (!b.found) b.lo = 0.0;
  b.queries_used = oracle.queries() - start;
  return b;
}

/// Bisects a valid bracket down to the relative tolerance. The returned
/// g_value is the adversarial end of the final bracket.
template <LabelOracle O>
DistanceEval binary_search_g(O& oracle, const Origin& origin, std::span<const double> theta, double lo,
                             double hi, const SearchConfig& cfg) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw PreconditionError("invalid bracket for binary search");
  const auto dir = detail::unit_direction(theta, origin.dim());
  return detail::bisect(oracle, origin, dir, lo, hi, cfg.rel_tol);
}

template <LabelOracle O>
DistanceEval evaluate_g(O& oracle, const Origin& origin, std::span<const double> theta,
                        const SearchConfig& cfg) {
  const auto start = oracle.queries();
  const auto b = fine_grained_search(oracle, origin, theta, cfg);
  if (!b.found) return {kNoCrossing, oracle.queries() - start, false};
  auto eval = binary_search_g(oracle, origin, theta, b.lo, b.hi, cfg);
  eval.queries_used = oracle.queries() - start;
  return eval;
}

/// Evaluates g(theta) when a nearby value is already known, as in the
/// optimizer loop. The bracket grows geometrically around `hint`
/// (1%, 2%, 4%, ...) so a good hint costs one or two probes before bisection.
template <LabelOracle O>
DistanceEval evaluate_g_near(O& oracle, const Origin& origin, std::span<const double> theta, double hint,
                             const SearchConfig& cfg) {
  if (!cfg.warm_start || !(hint > 0.0) || !std::isfinite(hint)) return evaluate_g(oracle, origin, theta, cfg);
  const auto dir = detail::unit_direction(theta, origin.dim());
  const auto start = oracle.queries();
  double lo = 0.0;
  double hi = hint;
  double step = 0.01;
  if (detail::hit_at(oracle, origin, dir, hint)) {
    for (int k = 0; k < cfg.max_doublings; ++k) {
      const double probe = hi / (1.0 + step);
      if (!detail::hit_at(oracle, origin, dir, probe)) {
        lo = probe;
        break;
      }
      hi = probe;
      step *= 2.0;
    }
  } else {
    bool found = false;
    lo = hint;
    for (int k = 0; k < cfg.max_doublings; ++k) {
      const double probe = lo * (1.0 + step);
      if (probe > cfg.lambda_max) break;
      if (detail::hit_at(oracle, origin, dir, probe)) {
        hi = probe;
        found = true;
        break;
      }
      lo = probe;
      step *= 2.0;
    }
    if (!found) return {kNoCrossing, oracle.queries() - start, false};
  }
  auto eval = detail::bisect(oracle, origin, dir, lo, hi, cfg.rel_tol);
  eval.queries_used = oracle.queries() - start;
  return eval;
}

/// Single-query sign of g(theta + eps*u) - g(theta): probes the perturbed
/// direction at the current radius g_theta. Returns -1 when that point is
/// already adversarial (the perturbation shortens the distance), else +1.
template <LabelOracle O>
int sign_directional(O& oracle, const Origin& origin, std::span<const double> theta, double g_theta,
                     std::span<const double> u, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (u.size() != theta.size()) throw DimensionMismatch("u and theta dimensions differ");
  const auto perturbed = vec::axpy(theta, epsilon, u);
  const auto dir = detail::unit_direction(perturbed, origin.dim());
  return detail::hit_at(oracle, origin, dir, g_theta) ? -1 : +1;
}

struct InitCandidate {
  Vector direction;
  // Radius known to be adversarial along `direction`, e.g. the distance to a
  // target-class example.
  std::optional<double> radius;
};

struct InitResult {
  Vector theta;
  DistanceEval eval;               // evaluation of the chosen candidate
  std::uint64_t queries_used = 0;  // across all candidates
  bool exhausted = false;          // budget ran out after a crossing was found
};

/// Picks the candidate with the smallest g. Once a crossing is known at
/// radius r, each further candidate first costs one probe at r and is only
/// bisected if it is adversarial there. If the budget runs out after some
/// crossing is known, the best candidate so far is returned.
template <LabelOracle O>
InitResult initial_direction(O& oracle, const Origin& origin, const std::vector<InitCandidate>& candidates,
                             const SearchConfig& cfg) {
  const auto start = oracle.queries();
  InitResult best;
  try {
    for (const auto& cand : candidates) {
      if (cand.direction.size() != origin.dim())
        throw DimensionMismatch("candidate direction dimension mismatch");
      const double n = vec::norm(cand.direction);
      if (!(n > 0.0) || !std::isfinite(n)) continue;
      const auto dir = detail::unit_direction(cand.direction, origin.dim());

      const auto before = oracle.queries();
      double probe = best.eval.found ? best.eval.g_value : kNoCrossing;
      if (cand.radius && *cand.radius > 0.0) probe = std::min(probe, *cand.radius);

      DistanceEval eval;
      if (std::isfinite(probe)) {
        if (detail::hit_at(oracle, origin, dir, probe)) {
          eval = detail::bisect(oracle, origin, dir, 0.0, probe, cfg.rel_tol);
        } else if (!best.eval.found) {
          eval = evaluate_g(oracle, origin, dir, cfg);
        }
      } else {
        eval = evaluate_g(oracle, origin, dir, cfg);
      }
      eval.queries_used = oracle.queries() - before;
      if (eval.found && eval.g_value < best.eval.g_value) {
        best.theta = dir;
        best.eval = eval;
      }
    }
  } catch (const BudgetExhausted&) {
    if (!best.eval.found) throw;
    best.exhausted = true;
  }
  best.queries_used = oracle.queries() - start;
  if (!best.eval.found) throw InitializationError("no candidate direction reaches an adversarial region");
  return best;
}

inline std::vector<InitCandidate> gaussian_candidates(std::size_t dim, std::size_t count, Rng& rng) {
  std::vector<InitCandidate> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back({gaussian_vector(dim, rng), std::nullopt});
  return out;
}

/// Directions from x0 toward each target-class example, with their known radii.
inline std::vector<InitCandidate> target_candidates(const Origin& origin,
                                                    const std::vector<Vector>& target_points) {
  std::vector<InitCandidate> out;
  out.reserve(target_points.size());
  for (const auto& p : target_points) {
    if (p.size() != origin.dim()) throw DimensionMismatch("target example dimension mismatch");
    Vector dir(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) dir[i] = p[i] - origin.x0[i];
    const double r = vec::norm(dir);
    out.push_back({std::move(dir), r});
  }
  return out;
}

}  // namespace signopt
