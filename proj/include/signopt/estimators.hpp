#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/geometry.hpp"
#include "signopt/random.hpp"
#include "signopt/vec.hpp"

namespace signopt {

enum class DirectionDistribution { gaussian, orthonormal };

struct DirectionBatch {
  std::vector<Vector> u;
  DirectionDistribution distribution = DirectionDistribution::gaussian;

  std::size_t size() const { return u.size(); }
};

/// Q directions in R^d. Gaussian entries are i.i.d. N(0,1); orthonormal
/// batches are Gram-Schmidt orthonormalized Gaussian draws (needs Q <= d).
inline DirectionBatch sample_directions(std::size_t d, std::size_t q, DirectionDistribution dist, Rng& rng) {
  if (d == 0) throw PreconditionError("dimension must be positive");
  if (q == 0) throw PreconditionError("need at least one direction");
  DirectionBatch batch;
  batch.distribution = dist;
  batch.u.reserve(q);
  if (dist == DirectionDistribution::gaussian) {
    for (std::size_t i = 0; i < q; ++i) batch.u.push_back(gaussian_vector(d, rng));
    return batch;
  }
  if (q > d) throw PreconditionError("orthonormal batch needs Q <= d");
  while (batch.u.size() < q) {
    auto v = gaussian_vector(d, rng);
    const double n0 = vec::norm(v);
    // two passes of modified Gram-Schmidt keep the basis orthogonal to ~1e-15
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : batch.u) {
        const double c = vec::dot(v, b);
        for (std::size_t i = 0; i < d; ++i) v[i] -= c * b[i];
      }
    const double n = vec::norm(v);
    if (n < 1e-8 * n0) continue;
    vec::scale_in_place(v, 1.0 / n);
    batch.u.push_back(std::move(v));
  }
  return batch;
}

struct SignObservation {
  Vector u;
  int y = +1;  // +1 or -1
};

enum class EstimatorKind { signopt, svmopt, rgf, zo_signsgd_sqo, zo_signsgd_bs };

struct GradientEstimate {
  Vector g_hat;
  std::uint64_t queries_used = 0;
  EstimatorKind method = EstimatorKind::signopt;
  std::size_t skipped = 0;  // perturbed directions without a boundary crossing
};

/// One single-query sign per direction.
template <LabelOracle O>
std::vector<SignObservation> collect_sign_observations(O& oracle, const Origin& origin,
                                                       std::span<const double> theta, double g_theta,
                                                       const DirectionBatch& batch, double epsilon) {
  std::vector<SignObservation> obs;
  obs.reserve(batch.size());
  for (const auto& u : batch.u)
    obs.push_back({u, sign_directional(oracle, origin, theta, g_theta, u, epsilon)});
  return obs;
}

/// Sign-vote estimate (1/Q) * sum_q y_q u_q.
inline GradientEstimate estimate_grad_signopt(std::span<const SignObservation> obs) {
  if (obs.empty()) throw PreconditionError("no sign observations");
  GradientEstimate est;
  est.method = EstimatorKind::signopt;
  est.g_hat.assign(obs.front().u.size(), 0.0);
  for (const auto& o : obs)
    for (std::size_t i = 0; i < est.g_hat.size(); ++i) est.g_hat[i] += o.y * o.u[i];
  vec::scale_in_place(est.g_hat, 1.0 / static_cast<double>(obs.size()));
  est.queries_used = obs.size();
  return est;
}

/// Elementwise-sign estimate (1/Q) * sum_q sign(y_q * u_q), one query per term.
inline GradientEstimate estimate_grad_zo_signsgd(std::span<const SignObservation> obs) {
  if (obs.empty()) throw PreconditionError("no sign observations");
  GradientEstimate est;
  est.method = EstimatorKind::zo_signsgd_sqo;
  est.g_hat.assign(obs.front().u.size(), 0.0);
  for (const auto& o : obs)
    for (std::size_t i = 0; i < est.g_hat.size(); ++i) est.g_hat[i] += (o.y * o.u[i] >= 0.0) ? 1.0 : -1.0;
  vec::scale_in_place(est.g_hat, 1.0 / static_cast<double>(obs.size()));
  est.queries_used = obs.size();
  return est;
}

template <class F>
concept DirectionEvaluator = requires(F f, std::span<const double> theta) {
  { f(theta) } -> std::same_as<DistanceEval>;
};

namespace detail {

// Finite differences (g(theta + eps*u_q) - g(theta)) / eps for each direction;
// directions without a crossing are dropped.
template <DirectionEvaluator F>
std::vector<std::pair<const Vector*, double>> finite_differences(F&& evaluate, std::span<const double> theta,
                                                                 double g_theta, const DirectionBatch& batch,
                                                                 double epsilon, GradientEstimate& est) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  std::vector<std::pair<const Vector*, double>> diffs;
  for (const auto& u : batch.u) {
    const auto eval = evaluate(vec::axpy(theta, epsilon, u));
    est.queries_used += eval.queries_used;
    if (!eval.found) {
      ++est.skipped;
      continue;
    }
    diffs.emplace_back(&u, (eval.g_value - g_theta) / epsilon);
  }
  if (diffs.empty()) throw Error("no perturbed direction crossed the boundary");
  return diffs;
}

}  // namespace detail

/// Random gradient-free estimate (1/Q) * sum_q ((g(theta+eps u_q) - g(theta)) / eps) u_q.
/// `evaluate` computes g for a direction; its query cost is accumulated.
template <DirectionEvaluator F>
GradientEstimate estimate_grad_rgf(F&& evaluate, std::span<const double> theta, double g_theta,
                                   const DirectionBatch& batch, double epsilon) {
  GradientEstimate est;
  est.method = EstimatorKind::rgf;
  est.g_hat.assign(theta.size(), 0.0);
  const auto diffs = detail::finite_differences(evaluate, theta, g_theta, batch, epsilon, est);
  for (const auto& [u, fd] : diffs)
    for (std::size_t i = 0; i < est.g_hat.size(); ++i) est.g_hat[i] += fd * (*u)[i];
  vec::scale_in_place(est.g_hat, 1.0 / static_cast<double>(diffs.size()));
  return est;
}

template <DirectionEvaluator F>
GradientEstimate estimate_grad_rgf(F&& evaluate, std::span<const double> theta, const DirectionBatch& batch,
                                   double epsilon) {
  const auto base = evaluate(theta);
  if (!base.found) throw Error("base direction has no boundary crossing");
  auto est = estimate_grad_rgf(evaluate, theta, base.g_value, batch, epsilon);
  est.queries_used += base.queries_used;
  return est;
}

/// ZO-SignSGD on full finite differences: (1/Q) * sum_q sign(fd_q * u_q).
/// A zero difference counts as +1, matching the single-query oracle.
template <DirectionEvaluator F>
GradientEstimate estimate_grad_zo_signsgd(F&& evaluate, std::span<const double> theta, double g_theta,
                                          const DirectionBatch& batch, double epsilon) {
  GradientEstimate est;
  est.method = EstimatorKind::zo_signsgd_bs;
  est.g_hat.assign(theta.size(), 0.0);
  const auto diffs = detail::finite_differences(evaluate, theta, g_theta, batch, epsilon, est);
  for (const auto& [u, fd] : diffs) {
    const double s = fd < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < est.g_hat.size(); ++i) est.g_hat[i] += (s * (*u)[i] >= 0.0) ? 1.0 : -1.0;
  }
  vec::scale_in_place(est.g_hat, 1.0 / static_cast<double>(diffs.size()));
  return est;
}

struct QpSolution {
  Vector z;
  Vector alpha;
  double kkt_residual = 0.0;
  bool feasible = false;
  std::size_t sweeps = 0;
};

namespace detail {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Returns false when A is numerically singular.
inline bool solve_dense(std::vector<double> a, std::vector<double>& b, std::size_t n) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (std::abs(a[piv * n + c]) <= 1e-12 * scale) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c * n + k] * b[k];
    b[c] = s / a[c * n + c];
  }
  return true;
}

/// Exact solve of min 0.5|z|^2 s.t. y_q <u_q, z> >= 1 by the Goldfarb-Idnani
/// dual active-set method. Returns the multipliers, or nullopt if infeasible.
inline std::optional<Vector> dual_active_set(std::span<const SignObservation> obs) {
  const std::size_t q_count = obs.size();
  const std::size_t d = obs.front().u.size();
  std::vector<Vector> a(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    a[q] = obs[q].u;
    if (obs[q].y < 0) vec::scale_in_place(a[q], -1.0);
  }
  std::vector<double> gram(q_count * q_count);
  for (std::size_t q = 0; q < q_count; ++q)
    for (std::size_t r = q; r < q_count; ++r)
      gram[q * q_count + r] = gram[r * q_count + q] = vec::dot(a[q], a[r]);

  Vector z(d, 0.0);
  std::vector<std::size_t> active;
  Vector mult;
  const std::size_t max_steps = 50 * (q_count + d) + 100;
  std::size_t steps = 0;

  while (true) {
    std::size_t p = q_count;
    double most = -1e-12;
    for (std::size_t q = 0; q < q_count; ++q) {
      if (std::find(active.begin(), active.end(), q) != active.end()) continue;
      const double slack = (vec::dot(a[q], z) - 1.0) / std::sqrt(gram[q * q_count + q]);
      if (slack < most) {
        most = slack;
        p = q;
      }
    }
    if (p == q_count) break;

    double mult_p = 0.0;
    while (true) {
      if (++steps > max_steps) return std::nullopt;
      const std::size_t k = active.size();
      Vector r(k, 0.0);
      if (k > 0) {
        std::vector<double> kaa(k * k);
        for (std::size_t i = 0; i < k; ++i) {
          r[i] = gram[active[i] * q_count + p];
          for (std::size_t j = 0; j < k; ++j) kaa[i * k + j] = gram[active[i] * q_count + active[j]];
        }
        if (!solve_dense(std::move(kaa), r, k)) return std::nullopt;
      }
      Vector step = a[p];
      for (std::size_t i = 0; i < k; ++i) step = vec::axpy(step, -r[i], a[active[i]]);
      const double curvature = vec::dot(step, a[p]);

      double t_partial = std::numeric_limits<double>::infinity();
      std::size_t leave = k;
      for (std::size_t i = 0; i < k; ++i) {
        if (r[i] > 0.0 && mult[i] / r[i] < t_partial) {
          t_partial = mult[i] / r[i];
          leave = i;
        }
      }
      double t_full = std::numeric_limits<double>::infinity();
      if (curvature > 1e-12 * gram[p * q_count + p]) t_full = (1.0 - vec::dot(a[p], z)) / curvature;
      const double t = std::min(t_partial, t_full);
      if (!std::isfinite(t)) return std::nullopt;

      if (std::isfinite(t_full)) z = vec::axpy(z, t, step);
      for (std::size_t i = 0; i < k; ++i) mult[i] -= t * r[i];
      mult_p += t;
      if (t_full <= t_partial) {
        active.push_back(p);
        mult.push_back(mult_p);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(leave));
      mult.erase(mult.begin() + static_cast<std::ptrdiff_t>(leave));
    }
  }

  // re-solve on the final active set to shed accumulated rounding
  const std::size_t k = active.size();
  std::vector<double> kaa(k * k);
  Vector direct(k, 1.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) kaa[i * k + j] = gram[active[i] * q_count + active[j]];
  if (solve_dense(kaa, direct, k) &&
      std::all_of(direct.begin(), direct.end(), [](double v) { return v >= 0.0; })) {
    Vector zr(d, 0.0);
    for (std::size_t i = 0; i < k; ++i) zr = vec::axpy(zr, direct[i], a[active[i]]);
    Vector fix(k);
    for (std::size_t i = 0; i < k; ++i) fix[i] = 1.0 - vec::dot(a[active[i]], zr);
    if (solve_dense(std::move(kaa), fix, k))
      for (std::size_t i = 0; i < k; ++i) direct[i] = std::max(0.0, direct[i] + fix[i]);
    mult = std::move(direct);
  }
  Vector alpha(q_count, 0.0);
  for (std::size_t i = 0; i < k; ++i) alpha[active[i]] = std::max(0.0, mult[i]);
  return alpha;
}

struct QpState {
  std::span<const SignObservation> obs;

  Vector primal(const Vector& alpha) const {
    Vector z(obs.front().u.size(), 0.0);
    for (std::size_t q = 0; q < obs.size(); ++q)
      if (alpha[q] != 0.0)
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += alpha[q] * obs[q].y * obs[q].u[i];
    return z;
  }

  double margin(const Vector& z, std::size_t q) const { return obs[q].y * vec::dot(z, obs[q].u); }

  // max over q of the projected dual-gradient violation and of the
  // complementarity product alpha_q * |margin_q - 1|
  double kkt(const Vector& z, const Vector& alpha) const {
    double r = 0.0;
    for (std::size_t q = 0; q < obs.size(); ++q) {
      const double m = margin(z, q);
      const double viol = alpha[q] > 0.0 ? std::abs(1.0 - m) : std::max(0.0, 1.0 - m);
      r = std::max({r, viol, alpha[q] * std::abs(m - 1.0)});
    }
    return r;
  }
};

}  // namespace detail

/// Minimum-norm z with y_q * <z, u_q> >= 1 for every observation (hard-margin
/// SVM through the origin). Dual coordinate ascent with exact per-coordinate
/// updates. If the sweeps end short of kkt_tol an exact active-set solve
/// takes over. `feasible` is false when the constraints admit no solution.
inline QpSolution solve_svm_qp(std::span<const SignObservation> obs, double kkt_tol = 1e-8,
                               std::size_t max_sweeps = 0) {
  if (obs.empty()) throw PreconditionError("no sign observations");
  const std::size_t q_count = obs.size();
  const std::size_t d = obs.front().u.size();
  std::vector<double> sq(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    if (obs[q].u.size() != d) throw DimensionMismatch("observation dimensions differ");
    if (obs[q].y != 1 && obs[q].y != -1) throw PreconditionError("labels must be +1 or -1");
    sq[q] = vec::dot(obs[q].u, obs[q].u);
    if (!(sq[q] > 0.0)) throw PreconditionError("zero direction in QP");
  }
  if (max_sweeps == 0) max_sweeps = 10 * q_count;

  const detail::QpState state{obs};
  QpSolution sol;
  sol.alpha.assign(q_count, 0.0);
  sol.z.assign(d, 0.0);

  double residual = state.kkt(sol.z, sol.alpha);
  for (; sol.sweeps < max_sweeps && residual > kkt_tol; ++sol.sweeps) {
    for (std::size_t q = 0; q < q_count; ++q) {
      const double m = state.margin(sol.z, q);
      const double next = std::max(0.0, sol.alpha[q] + (1.0 - m) / sq[q]);
      const double delta = next - sol.alpha[q];
      if (delta == 0.0) continue;
      sol.alpha[q] = next;
      for (std::size_t i = 0; i < d; ++i) sol.z[i] += delta * obs[q].y * obs[q].u[i];
    }
    residual = state.kkt(sol.z, sol.alpha);
    if (!std::isfinite(residual)) break;
  }

  if (!(residual <= kkt_tol)) {
    if (auto exact = detail::dual_active_set(obs)) {
      auto z = state.primal(*exact);
      const double r = state.kkt(z, *exact);
      if (!(r >= residual)) {
        sol.alpha = std::move(*exact);
        sol.z = std::move(z);
        residual = r;
      }
    } else {
      residual = std::numeric_limits<double>::infinity();
    }
  }

  sol.kkt_residual = residual;
  sol.feasible = std::isfinite(residual) && residual <= kkt_tol;
  return sol;
}

}  // namespace signopt
