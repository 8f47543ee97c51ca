#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "signopt/estimators.hpp"
#include "signopt/fixtures.hpp"
#include "signopt/geometry.hpp"
#include "signopt/oracle.hpp"

// Built-in verification suites run by `signopt verify`.
namespace signopt::selfcheck {

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// evaluate_g against the exact linear-model distance on random instances.
inline SuiteReport closed_form_suite(std::size_t instances, double rel_tol, std::uint64_t seed) {
  Rng rng(seed);
  SearchConfig cfg;
  cfg.rel_tol = rel_tol;
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  while (checked < instances) {
    const std::size_t d = checked % 2 ? 100 : 10;
    const auto model = random_linear_model(d, 2 + checked % 4, rng);
    const auto x0 = gaussian_vector(d, rng);
    const Label y0 = model.classify(x0);
    const auto theta = gaussian_vector(d, rng);
    const double exact = closed_form_g(model, x0, y0, theta);
    if (!std::isfinite(exact) || exact > cfg.lambda_max) continue;
    HardLabelOracle oracle(model);
    const auto eval = evaluate_g(oracle, Origin(x0, y0), theta, cfg);
    const double err = eval.found ? std::abs(eval.g_value - exact) / exact : kNoCrossing;
    worst = std::max(worst, err);
    if (!(err <= rel_tol) || eval.queries_used != oracle.queries()) ++bad;
    ++checked;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu instances, %zu outside tolerance, worst relative error %.3g", checked,
                bad, worst);
  return {"closed-form", bad == 0, buf};
}

/// Hand-solved QP instances plus KKT checks on random feasible ones.
inline SuiteReport qp_suite(std::size_t instances, std::uint64_t seed) {
  std::vector<std::string> failures;
  auto near = [](const Vector& a, const Vector& b) {
    return a.size() == b.size() && vec::distance(a, b) <= 1e-9;
  };
  {
    const std::vector<SignObservation> obs{{{2.0, 0.0}, +1}};
    const auto s = solve_svm_qp(obs);
    if (!s.feasible || !near(s.z, {0.5, 0.0})) failures.push_back("single-constraint instance");
  }
  {
    const std::vector<SignObservation> obs{{{1.0, 0.0}, +1}, {{0.0, 1.0}, -1}};
    const auto s = solve_svm_qp(obs);
    if (!s.feasible || !near(s.z, {1.0, -1.0})) failures.push_back("two-constraint instance");
  }
  {
    const std::vector<SignObservation> obs{{{1.0, 0.0}, +1}, {{1.0, 0.0}, -1}};
    if (solve_svm_qp(obs).feasible) failures.push_back("contradictory instance reported feasible");
  }

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_q(1, 20), pick_d(1, 10);
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t d = pick_d(rng), q = pick_q(rng);
    const auto z_true = gaussian_vector(d, rng);
    std::vector<SignObservation> obs;
    for (std::size_t k = 0; k < q; ++k) {
      auto u = gaussian_vector(d, rng);
      const int y = vec::dot(u, z_true) >= 0.0 ? 1 : -1;
      obs.push_back({std::move(u), y});
    }
    const auto s = solve_svm_qp(obs);
    worst = std::max(worst, s.kkt_residual);
    if (!(s.kkt_residual <= 1e-6)) ++bad;
  }
  if (bad) failures.push_back(std::to_string(bad) + " random instances above KKT tolerance");
  char buf[160];
  std::snprintf(buf, sizeof buf, "3 hand instances + %zu random, worst KKT residual %.3g", instances, worst);
  std::string detail = buf;
  for (const auto& f : failures) detail += "; FAILED: " + f;
  return {"qp", failures.empty(), detail};
}

/// Single-query sign vs. the sign of two full evaluations on a random MLP.
inline SuiteReport sign_suite(std::size_t trials, double rel_tol, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 20;
  const auto model = random_mlp(d, 32, 4, rng);
  SearchConfig cfg;
  cfg.rel_tol = rel_tol;
  const double epsilon = 1e-2;
  std::size_t decisive = 0, agree = 0, bad_cost = 0, done = 0;
  while (done < trials) {
    const auto x0 = gaussian_vector(d, rng);
    const Origin origin(x0, model.classify(x0));
    const auto theta = gaussian_vector(d, rng);
    const auto u = gaussian_vector(d, rng);
    HardLabelOracle oracle(model);
    const auto base = evaluate_g(oracle, origin, theta, cfg);
    if (!base.found) continue;
    const double eps = epsilon * vec::norm(theta);
    const auto before = oracle.queries();
    const int s = sign_directional(oracle, origin, theta, base.g_value, u, eps);
    if (oracle.queries() - before != 1) ++bad_cost;
    const auto moved = evaluate_g(oracle, origin, vec::axpy(theta, eps, u), cfg);
    ++done;
    if (!moved.found) continue;
    const double diff = moved.g_value - base.g_value;
    if (std::abs(diff) <= 2.0 * rel_tol * base.g_value) continue;
    ++decisive;
    if ((diff < 0.0 ? -1 : 1) == s) ++agree;
  }
  const double rate = decisive ? static_cast<double>(agree) / static_cast<double>(decisive) : 0.0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu trials, %zu decisive, agreement %.4f, %zu calls not costing 1 query",
                trials, decisive, rate, bad_cost);
  return {"sign", decisive > 0 && rate >= 0.99 && bad_cost == 0, buf};
}

}  // namespace signopt::selfcheck
