// signopt command-line driver: attack, bench, gentest, verify.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "signopt/fixtures.hpp"
#include "signopt/selfcheck.hpp"
#include "signopt/signopt.hpp"

namespace {

using namespace signopt;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAttackFailed = 2;

const auto kOpenUnit = CLI::Validator(
    [](std::string& s) -> std::string {
      double v = 0.0;
      try {
        v = std::stod(s);
      } catch (...) {
        return "not a number: " + s;
      }
      return v > 0.0 && v < 1.0 ? std::string{} : "value must lie strictly between 0 and 1";
    },
    "(0,1)");

struct EngineFlags {
  std::string estimator = "signopt";
  std::uint64_t budget = 20000;
  std::size_t q = 200;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  double rel_tol = 1e-3;
  double eta0 = 0.2;
  std::size_t max_iters = 100000;
  std::size_t init_directions = 100;
  bool no_line_search = false;

  void add_to(CLI::App& app, bool estimator_list) {
    if (!estimator_list)
      app.add_option("--estimator", estimator, "signopt, svmopt, rgf, zo-sqo or zo-bs")
          ->check(CLI::IsMember({"signopt", "svmopt", "rgf", "zo-sqo", "zo-bs"}));
    app.add_option("--budget", budget, "query budget per attack")->check(CLI::PositiveNumber);
    app.add_option("--Q", q, "directions per gradient estimate")->check(CLI::PositiveNumber);
    app.add_option("--epsilon", epsilon, "direction smoothing, relative to ||theta||")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed");
    app.add_option("--rel-tol", rel_tol, "binary-search relative tolerance in the loop")->check(kOpenUnit);
    app.add_option("--eta0", eta0, "initial step size")->check(CLI::PositiveNumber);
    app.add_option("--max-iters", max_iters, "iteration cap")->check(CLI::PositiveNumber);
    app.add_option("--init-directions", init_directions, "random directions tried at initialization")
        ->check(CLI::PositiveNumber);
    app.add_flag("--no-line-search", no_line_search, "fixed step eta0 instead of line search");
  }

  AttackConfig config(EstimatorKind kind) const {
    AttackConfig cfg;
    cfg.estimator = kind;
    cfg.num_directions = q;
    cfg.epsilon = epsilon;
    cfg.eta0 = eta0;
    cfg.max_iters = max_iters;
    cfg.query_budget = budget;
    cfg.seed = seed;
    cfg.search.rel_tol = rel_tol;
    cfg.init_directions = init_directions;
    cfg.line_search.enabled = !no_line_search;
    return cfg;
  }
};

// Flat key=value file; '#' starts a comment line.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = std::string(detail::trim(line));
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(path + ":" + std::to_string(n) + ": expected key=value");
    out[std::string(detail::trim(std::string_view(t).substr(0, eq)))] =
        std::string(detail::trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

// Inserts config-file entries ahead of the command-line arguments, skipping
// keys the command line already sets, so flags override the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (!path || args.size() < 2) return args;
  auto given = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  for (const auto& [key, value] : read_config(*path)) {
    if (given(key)) continue;
    if (value == "true" || value == "on") {
      out.push_back("--" + key);
    } else if (value != "false" && value != "off") {
      out.push_back("--" + key + "=" + value);
    }
  }
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

void print_kv(const std::string& k, const std::string& v) { std::cout << k << "=" << v << "\n"; }

int cmd_attack(const EngineFlags& flags, const std::string& model_path, const std::string& input,
               const std::string& data_path, std::optional<std::size_t> index,
               std::optional<std::size_t> targeted, const std::string& trace_out) {
  const auto model = load_model(model_path);

  Example ex;
  std::vector<Example> data;
  if (!data_path.empty()) data = load_dataset(data_path);
  if (!input.empty()) {
    auto rows = parse_dataset(input, "--input");
    if (rows.size() != 1) throw ParseError("--input must hold exactly one row");
    ex = std::move(rows.front());
  } else if (index) {
    if (*index >= data.size()) throw Error("--index out of range");
    ex = data[*index];
  } else {
    throw PreconditionError("give --input ROW or --data PATH --index N");
  }

  AttackConfig cfg = flags.config(parse_estimator(flags.estimator));
  if (targeted) {
    if (*targeted >= model.num_classes()) throw PreconditionError("--targeted label out of range");
    cfg.goal = AttackGoal::targeted(Label{*targeted});
    for (const auto& row : data)
      if (row.y.value == *targeted && cfg.target_points.size() < flags.init_directions)
        cfg.target_points.push_back(row.x);
    if (cfg.target_points.empty())
      throw PreconditionError("targeted attack needs --data rows labeled with the target");
  }

  AttackResult res;
  try {
    res = run_attack(model, ex, cfg);
  } catch (const InitializationError& e) {
    print_kv("estimator", flags.estimator);
    print_kv("success", "false");
    print_kv("reason", e.what());
    return kExitAttackFailed;
  }

  print_kv("estimator", flags.estimator);
  print_kv("distortion", format_metric(res.distortion));
  print_kv("queries", std::to_string(res.queries));
  print_kv("iterations", std::to_string(res.iterations));
  print_kv("success", res.success ? "true" : "false");
  if (const auto linear = as_linear(model); linear && !targeted && linear->classify(ex.x) == ex.y)
    print_kv("closed_form_distortion",
             format_metric(closed_form_min_distortion(*linear, ex.x, ex.y).distance));

  if (!trace_out.empty()) {
    std::ofstream f(trace_out, std::ios::binary);
    if (!f) throw Error("cannot write " + trace_out);
    f << "queries,best_L2\n";
    for (const auto& r : res.trace.records) f << r.queries << "," << format_metric(r.best_g) << "\n";
  }
  return res.success ? kExitOk : kExitAttackFailed;
}

int cmd_bench(const EngineFlags& flags, const std::vector<std::string>& estimators, BenchmarkSpec spec,
              const std::string& out_dir) {
  spec.master_seed = flags.seed;
  for (const auto& name : estimators) spec.attacks.push_back({name, flags.config(parse_estimator(name))});
  const auto res = run_benchmark(spec);
  export_results(res, spec, out_dir);
  for (const auto& w : res.warnings) std::cout << "warning: " << w << "\n";
  print_kv("examples", std::to_string(res.plan.size()));
  print_kv("out", out_dir);
  return kExitOk;
}

int cmd_gentest(const std::string& kind, std::size_t d, std::size_t classes, std::uint64_t seed,
                std::size_t n, std::size_t hidden, const std::string& out_dir) {
  if (d == 0) throw PreconditionError("--d must be positive");
  if (classes < 2) throw PreconditionError("--classes must be at least 2");
  Rng rng(seed);
  const MlpModel model =
      kind == "linear" ? MlpModel(random_linear_model(d, classes, rng)) : random_mlp(d, hidden, classes, rng);
  const auto data = labeled_points(model, n, rng);
  std::filesystem::create_directories(out_dir);
  const auto model_path = (std::filesystem::path(out_dir) / "model.smlp").string();
  const auto data_path = (std::filesystem::path(out_dir) / "data.csv").string();
  save_model(model, model_path);
  save_dataset(data, data_path);
  print_kv("model", model_path);
  print_kv("data", data_path);
  return kExitOk;
}

int cmd_verify(const std::string& suite, double rel_tol, std::uint64_t seed, std::size_t trials) {
  std::vector<selfcheck::SuiteReport> reports;
  if (suite == "all" || suite == "closed-form")
    reports.push_back(selfcheck::closed_form_suite(trials, rel_tol, seed));
  if (suite == "all" || suite == "qp") reports.push_back(selfcheck::qp_suite(200, seed));
  if (suite == "all" || suite == "sign") reports.push_back(selfcheck::sign_suite(trials, rel_tol, seed));
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitAttackFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hard-label black-box attacks driven by single-query sign estimates"};
  app.require_subcommand(1);
  std::string config_path;

  EngineFlags attack_flags;
  std::string model_path, input, data_path, trace_out;
  std::optional<std::size_t> index, target;
  auto* attack = app.add_subcommand("attack", "run one attack");
  attack->add_option("--model", model_path, "SMLP-v1 model file")->required();
  attack->add_option("--input", input, "one example as 'label,f1,...,fd'");
  attack->add_option("--data", data_path, "dataset CSV");
  attack->add_option("--index", index, "row of --data to attack");
  attack->add_option("--targeted", target,
                     "target label; init directions come from --data rows of that class");
  attack->add_option("--trace-out", trace_out, "write queries,best_L2 trace CSV");
  attack->add_option("--config", config_path, "key=value defaults");
  attack_flags.add_to(*attack, false);

  EngineFlags bench_flags;
  BenchmarkSpec spec;
  std::vector<std::string> estimators{"signopt"};
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "run a benchmark and export curves");
  bench->add_option("--model", spec.model_path, "SMLP-v1 model file")->required();
  bench->add_option("--data", spec.data_path, "dataset CSV")->required();
  bench->add_option("--estimator", estimators, "comma-separated estimators")
      ->delimiter(',')
      ->check(CLI::IsMember({"signopt", "svmopt", "rgf", "zo-sqo", "zo-bs"}));
  bench->add_option("--n", spec.num_examples, "examples to attack")->check(CLI::PositiveNumber);
  bench->add_flag("--targeted", spec.targeted, "random target label per example");
  bench->add_option("--checkpoints", spec.checkpoints, "query checkpoints")->delimiter(',');
  bench->add_option("--thresholds", spec.thresholds, "success-rate thresholds")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--jobs", spec.jobs, "parallel attacks")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "output directory")->required();
  bench->add_option("--config", config_path, "key=value defaults");
  bench_flags.add_to(*bench, true);

  std::string kind;
  std::size_t gen_d = 0, classes = 2, n_examples = 100, hidden = 16;
  std::uint64_t gen_seed = 0;
  std::string gen_out = ".";
  auto* gentest = app.add_subcommand("gentest", "write a random model and a dataset it labels");
  gentest->add_option("--kind", kind, "linear or mlp")->required()->check(CLI::IsMember({"linear", "mlp"}));
  gentest->add_option("--d", gen_d, "input dimension")->required();
  gentest->add_option("--classes", classes, "number of classes");
  gentest->add_option("--hidden", hidden, "hidden width for mlp")->check(CLI::PositiveNumber);
  gentest->add_option("--seed", gen_seed, "random seed");
  gentest->add_option("--n-examples", n_examples, "dataset rows");
  gentest->add_option("--out", gen_out, "output directory");
  gentest->add_option("--config", config_path, "key=value defaults");

  std::string suite = "all";
  double verify_tol = 1e-3;
  std::uint64_t verify_seed = 1;
  std::size_t trials = 1000;
  auto* verify = app.add_subcommand("verify", "run the built-in verification suites");
  verify->add_option("--suite", suite, "all, closed-form, qp or sign")
      ->check(CLI::IsMember({"all", "closed-form", "qp", "sign"}));
  verify->add_option("--rel-tol", verify_tol, "binary-search relative tolerance")->check(kOpenUnit);
  verify->add_option("--seed", verify_seed, "random seed");
  verify->add_option("--trials", trials, "instances per suite")->check(CLI::PositiveNumber);
  verify->add_option("--config", config_path, "key=value defaults");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*attack) return cmd_attack(attack_flags, model_path, input, data_path, index, target, trace_out);
    if (*bench) return cmd_bench(bench_flags, estimators, spec, bench_out);
    if (*gentest) return cmd_gentest(kind, gen_d, classes, gen_seed, n_examples, hidden, gen_out);
    if (*verify) return cmd_verify(suite, verify_tol, verify_seed, trials);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
