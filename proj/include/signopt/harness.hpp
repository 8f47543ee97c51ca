#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "signopt/attacks.hpp"
#include "signopt/errors.hpp"
#include "signopt/io.hpp"
#include "signopt/oracle.hpp"
#include "signopt/random.hpp"

namespace signopt {

inline const std::vector<std::uint64_t> kDefaultCheckpoints{4000, 8000, 12000, 14000, 30000};

struct AttackEntry {
  std::string name;
  AttackConfig config;
};

struct BenchmarkSpec {
  std::string model_path;
  std::string data_path;
  std::size_t num_examples = 100;
  std::vector<AttackEntry> attacks;
  std::vector<std::uint64_t> checkpoints;  // empty: default grid truncated to the budget
  std::vector<double> thresholds;
  std::size_t jobs = 1;
  std::uint64_t master_seed = 0;
  bool targeted = false;
  std::size_t target_samples = 100;

  void validate() const {
    if (num_examples == 0) throw PreconditionError("benchmark needs at least one example");
    if (attacks.empty()) throw PreconditionError("benchmark needs at least one attack");
    if (jobs == 0) throw PreconditionError("jobs must be positive");
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
      if (checkpoints[i] <= checkpoints[i - 1])
        throw PreconditionError("checkpoints must be strictly increasing");
    for (double t : thresholds)
      if (!(t >= 0.0)) throw PreconditionError("thresholds must be non-negative");
    for (const auto& a : attacks) a.config.validate();
  }

  std::vector<std::uint64_t> resolved_checkpoints() const {
    if (!checkpoints.empty()) return checkpoints;
    std::uint64_t budget = 0;
    for (const auto& a : attacks) budget = std::max(budget, a.config.query_budget);
    std::vector<std::uint64_t> out;
    for (auto c : kDefaultCheckpoints)
      if (c <= budget) out.push_back(c);
    if (out.empty() || out.back() < budget) out.push_back(budget);
    return out;
  }
};

/// Per-example attack setup shared by every attack in a benchmark.
struct ExamplePlan {
  std::size_t index = 0;  // row in the dataset
  std::uint64_t seed = 0;
  std::optional<Label> target;
  std::vector<Vector> target_points;
};

struct ExampleOutcome {
  std::size_t example_index = 0;
  AttackResult result;
  std::string error;  // non-empty when the attack could not run
};

struct AttackRun {
  std::string name;
  std::vector<ExampleOutcome> outcomes;

  std::vector<AttackTrace> traces() const {
    std::vector<AttackTrace> out;
    out.reserve(outcomes.size());
    for (const auto& o : outcomes) out.push_back(o.result.trace);
    return out;
  }
};

struct BenchmarkResult {
  std::vector<ExamplePlan> plan;
  std::vector<AttackRun> runs;
  std::vector<std::string> warnings;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : workers) t.join();
}

}  // namespace detail

/// Selects eligible examples and fixes every per-example random choice.
/// Untargeted: the model must classify the example correctly. Targeted: a
/// target label != y is drawn per example and the model must not already
/// predict it; init candidates are dataset rows labeled with the target.
template <Classifier Model>
std::vector<ExamplePlan> plan_examples(const Model& model, const std::vector<Example>& data,
                                       const BenchmarkSpec& spec,
                                       std::vector<std::string>* warnings = nullptr) {
  std::vector<ExamplePlan> eligible;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    if (ex.x.size() != model.input_dim())
      throw DimensionMismatch("dataset row " + std::to_string(i) + " has wrong dimension");
    ExamplePlan p;
    p.index = i;
    p.seed = derive_seed(spec.master_seed, 2 * i);
    const Label predicted = model.classify(ex.x);
    if (!spec.targeted) {
      if (predicted != ex.y) continue;
    } else {
      Rng rng(derive_seed(spec.master_seed, 2 * i + 1));
      std::uniform_int_distribution<std::size_t> pick(0, model.num_classes() - 2);
      std::size_t t = pick(rng);
      if (t >= ex.y.value) ++t;
      p.target = Label{t};
      if (predicted == *p.target) continue;
      std::vector<std::size_t> pool;
      for (std::size_t j = 0; j < data.size(); ++j)
        if (j != i && data[j].y == *p.target) pool.push_back(j);
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(std::min(pool.size(), spec.target_samples));
      std::sort(pool.begin(), pool.end());
      for (auto j : pool) p.target_points.push_back(data[j].x);
      if (p.target_points.empty()) continue;
    }
    eligible.push_back(std::move(p));
  }

  if (eligible.size() > spec.num_examples) {
    Rng rng(derive_seed(spec.master_seed, 0xE1161B1Eull));
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(spec.num_examples);
    std::sort(eligible.begin(), eligible.end(),
              [](const auto& a, const auto& b) { return a.index < b.index; });
  } else if (eligible.size() < spec.num_examples && warnings) {
    warnings->push_back("only " + std::to_string(eligible.size()) + " eligible examples, requested " +
                        std::to_string(spec.num_examples));
  }
  return eligible;
}

template <Classifier Model>
BenchmarkResult run_benchmark(const Model& model, const std::vector<Example>& data,
                              const BenchmarkSpec& spec) {
  spec.validate();
  BenchmarkResult out;
  out.plan = plan_examples(model, data, spec, &out.warnings);

  const std::size_t n = out.plan.size();
  out.runs.resize(spec.attacks.size());
  for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
    out.runs[a].name = spec.attacks[a].name;
    out.runs[a].outcomes.resize(n);
  }

  detail::parallel_for(spec.attacks.size() * n, spec.jobs, [&](std::size_t task) {
    const std::size_t a = task / n;
    const std::size_t e = task % n;
    const auto& p = out.plan[e];
    auto& outcome = out.runs[a].outcomes[e];
    outcome.example_index = p.index;

    AttackConfig cfg = spec.attacks[a].config;
    cfg.seed = p.seed;
    if (p.target) {
      cfg.goal = AttackGoal::targeted(*p.target);
      cfg.target_points = p.target_points;
    } else {
      cfg.goal = AttackGoal::untargeted();
    }
    try {
      outcome.result = run_attack(model, data[p.index], cfg);
    } catch (const Error& err) {
      outcome.error = err.what();
    }
  });
  return out;
}

inline BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  const auto model = load_model(spec.model_path);
  const auto data = load_dataset(spec.data_path);
  return run_benchmark(model, data, spec);
}

namespace detail {

inline std::vector<double> values_at(std::span<const AttackTrace> traces, std::uint64_t q) {
  std::vector<double> v;
  v.reserve(traces.size());
  for (const auto& t : traces) v.push_back(t.best_at(q));
  return v;
}

}  // namespace detail

/// Median best-so-far distortion within q queries. Examples without an
/// adversarial point by then count as +inf; if at least half are +inf the
/// median is +inf.
inline double median_distortion_at(std::span<const AttackTrace> traces, std::uint64_t q) {
  if (traces.empty()) return kNoCrossing;
  auto v = detail::values_at(traces, q);
  std::sort(v.begin(), v.end());
  const auto missing =
      static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return std::isinf(x); }));
  if (2 * missing >= v.size()) return kNoCrossing;
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Mean best-so-far distortion within q queries (+inf if any example has none).
inline double mean_distortion_at(std::span<const AttackTrace> traces, std::uint64_t q) {
  if (traces.empty()) return kNoCrossing;
  const auto v = detail::values_at(traces, q);
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Fraction of examples with best_g < threshold within q queries.
inline double success_rate_at(std::span<const AttackTrace> traces, std::uint64_t q, double threshold) {
  if (traces.empty()) return 0.0;
  const auto v = detail::values_at(traces, q);
  const auto hits = std::count_if(v.begin(), v.end(), [&](double x) { return x < threshold; });
  return static_cast<double>(hits) / static_cast<double>(v.size());
}

inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_real(v);
}

inline std::string threshold_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return std::string("sr_eps_") + buf;
}

inline std::string curves_csv(const BenchmarkResult& res, const std::vector<std::uint64_t>& checkpoints,
                              const std::vector<double>& thresholds) {
  std::string s = "attack,queries,median_L2,mean_L2";
  for (double t : thresholds) s += "," + threshold_label(t);
  s += "\n";
  for (const auto& run : res.runs) {
    const auto traces = run.traces();
    for (auto q : checkpoints) {
      s += run.name + "," + std::to_string(q) + "," + format_metric(median_distortion_at(traces, q)) + "," +
           format_metric(mean_distortion_at(traces, q));
      for (double t : thresholds) s += "," + format_metric(success_rate_at(traces, q, t));
      s += "\n";
    }
  }
  return s;
}

inline std::string per_example_csv(const BenchmarkResult& res) {
  std::string s = "attack,example,final_L2,queries,success\n";
  for (const auto& run : res.runs)
    for (const auto& o : run.outcomes)
      s += run.name + "," + std::to_string(o.example_index) + "," + format_metric(o.result.distortion) + "," +
           std::to_string(o.result.queries) + "," + (o.result.success ? "1" : "0") + "\n";
  return s;
}

inline std::string run_meta(const BenchmarkResult& res, const BenchmarkSpec& spec) {
  std::string s;
  auto kv = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  kv("model", spec.model_path);
  kv("data", spec.data_path);
  kv("num_examples", std::to_string(spec.num_examples));
  kv("eligible_attacked", std::to_string(res.plan.size()));
  kv("master_seed", std::to_string(spec.master_seed));
  kv("targeted", spec.targeted ? "true" : "false");
  kv("jobs", std::to_string(spec.jobs));
  std::string cps;
  for (auto c : spec.resolved_checkpoints()) cps += (cps.empty() ? "" : ",") + std::to_string(c);
  kv("checkpoints", cps);
  std::string ths;
  for (double t : spec.thresholds) ths += (ths.empty() ? "" : ",") + format_real(t);
  kv("thresholds", ths);
  for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
    const auto& c = spec.attacks[a].config;
    const auto p = "attack." + std::to_string(a) + ".";
    kv(p + "name", spec.attacks[a].name);
    kv(p + "estimator", to_string(c.estimator));
    kv(p + "Q", std::to_string(c.num_directions));
    kv(p + "epsilon", format_real(c.epsilon));
    kv(p + "epsilon_relative", c.epsilon_relative ? "true" : "false");
    kv(p + "eta0", format_real(c.eta0));
    kv(p + "max_iters", std::to_string(c.max_iters));
    kv(p + "budget", std::to_string(c.query_budget));
    kv(p + "rel_tol", format_real(c.search.rel_tol));
    kv(p + "final_rel_tol", format_real(c.final_rel_tol));
    kv(p + "fd_rel_tol", format_real(c.fd_rel_tol));
    kv(p + "init_directions", std::to_string(c.init_directions));
    kv(p + "line_search", c.line_search.enabled ? "on" : "off");
  }
  for (const auto& p : res.plan) {
    kv("example." + std::to_string(p.index) + ".seed", std::to_string(p.seed));
    if (p.target) kv("example." + std::to_string(p.index) + ".target", std::to_string(p.target->value));
  }
  for (const auto& run : res.runs)
    for (const auto& o : run.outcomes)
      if (!o.error.empty()) kv("error." + run.name + "." + std::to_string(o.example_index), o.error);
  for (const auto& w : res.warnings) kv("warning", w);
  return s;
}

/// Writes curves.csv, per_example.csv and run.meta into out_dir.
inline void export_results(const BenchmarkResult& res, const BenchmarkSpec& spec,
                           const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& body) {
    const auto path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << body;
    if (!f) throw Error("failed writing " + path.string());
  };
  write("curves.csv", curves_csv(res, spec.resolved_checkpoints(), spec.thresholds));
  write("per_example.csv", per_example_csv(res));
  write("run.meta", run_meta(res, spec));
}

}  // namespace signopt
