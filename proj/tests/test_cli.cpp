#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "signopt/signopt.hpp"
#include "support.hpp"

using namespace signopt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string(SIGNOPT_CLI_PATH) + " " + args + " 2>" + err_path.string();
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err_path);
  std::stringstream ss;
  ss << e.rdbuf();
  r.err = ss.str();
  return r;
}

std::string value_of(const std::string& out, const std::string& key) {
  std::stringstream in(out);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = test::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    const auto r =
        cli("gentest --kind linear --d 10 --classes 3 --seed 4 --n-examples 50 --out " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  fs::path dir;
  std::string model() const { return (dir / "model.smlp").string(); }
  std::string data() const { return (dir / "data.csv").string(); }
};

}  // namespace

TEST_F(Cli, GentestLinearRowsAreCorrectlyLabeled) {
  const auto m = load_model(model());
  const auto rows = load_dataset(data());
  ASSERT_EQ(rows.size(), 50u);
  EXPECT_EQ(m.num_classes(), 3u);
  ASSERT_TRUE(as_linear(m).has_value());
  for (const auto& ex : rows) EXPECT_EQ(m.classify(ex.x), ex.y);
}

TEST_F(Cli, GentestMlpIsLoadableAndFinite) {
  const auto out = dir / "mlp";
  const auto r = cli(
      "gentest --kind mlp --d 6 --classes 4 --hidden 16 --seed 2 --n-examples 20 --out " + out.string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = load_model((out / "model.smlp").string());
  EXPECT_EQ(m.layers().size(), 3u);
  for (const auto& ex : load_dataset((out / "data.csv").string())) {
    EXPECT_TRUE(vec::all_finite(m.logits(ex.x)));
    EXPECT_EQ(m.classify(ex.x), ex.y);
  }
}

TEST_F(Cli, GentestZeroDimensionFails) {
  const auto r = cli("gentest --kind linear --d 0 --out " + (dir / "z").string(), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, AttackReachesClosedForm) {
  const auto r = cli("attack --model " + model() + " --data " + data() + " --index 0", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.err.empty());
  EXPECT_EQ(value_of(r.out, "success"), "true");
  const double dist = std::stod(value_of(r.out, "distortion"));
  const double exact = std::stod(value_of(r.out, "closed_form_distortion"));
  EXPECT_LE(dist, 1.02 * exact);
  EXPECT_GE(dist, exact * (1 - 1e-9));
  EXPECT_LE(std::stoull(value_of(r.out, "queries")), 20000u);
}

TEST_F(Cli, AttackFromInputRowWritesTrace) {
  const auto row = load_dataset(data())[3];
  std::string input = std::to_string(row.y.value);
  for (double v : row.x) input += "," + format_real(v);
  const auto trace = dir / "trace.csv";
  const auto r = cli("attack --model " + model() + " --input " + input +
                         " --budget 3000 --Q 30 --trace-out " + trace.string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(trace);
  EXPECT_EQ(text.rfind("queries,best_L2\n", 0), 0u);
  EXPECT_GT(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST_F(Cli, AttackBudgetTooSmallExitsTwo) {
  const auto r = cli("attack --model " + model() + " --data " + data() + " --index 0 --budget 10", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(value_of(r.out, "success"), "false");
}

TEST_F(Cli, AttackMissingModelExitsOne) {
  const auto r = cli("attack --data " + data() + " --index 0", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
}

TEST_F(Cli, AttackRejectsUnknownFlagAndBadValues) {
  EXPECT_EQ(cli("attack --model " + model() + " --data " + data() + " --index 0 --bogus 1", dir).code, 1);
  EXPECT_EQ(cli("attack --model " + model() + " --data " + data() + " --index 0 --Q 0", dir).code, 1);
  EXPECT_EQ(cli("attack --model " + model() + " --data " + data() + " --index 0 --rel-tol 1.5", dir).code, 1);
  EXPECT_EQ(cli("attack --model " + model() + " --data " + data() + " --index 0 --estimator hsja", dir).code,
            1);
  EXPECT_EQ(
      cli("attack --model " + (dir / "missing.smlp").string() + " --data " + data() + " --index 0", dir).code,
      1);
}

TEST_F(Cli, AttackTargeted) {
  const auto rows = load_dataset(data());
  const std::size_t target = (rows[0].y.value + 1) % 3;
  const auto r = cli("attack --model " + model() + " --data " + data() +
                         " --index 0 --budget 5000 --targeted " + std::to_string(target),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "closed_form_distortion"), "");
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  const auto cfg = dir / "run.cfg";
  test::write_text(cfg, "# defaults\nestimator=rgf\nbudget=400\nQ=10\n");
  const std::string base =
      "attack --model " + model() + " --data " + data() + " --index 1 --config " + cfg.string();

  const auto from_file = cli(base, dir);
  EXPECT_EQ(value_of(from_file.out, "estimator"), "rgf") << from_file.err;
  EXPECT_LE(std::stoull(value_of(from_file.out, "queries")), 400u);

  const auto est_flag = cli(base + " --estimator signopt", dir);
  EXPECT_EQ(value_of(est_flag.out, "estimator"), "signopt");
  EXPECT_LE(std::stoull(value_of(est_flag.out, "queries")), 400u);

  const auto budget_flag = cli(base + " --budget=2000", dir);
  EXPECT_EQ(value_of(budget_flag.out, "estimator"), "rgf");
  EXPECT_GT(std::stoull(value_of(budget_flag.out, "queries")), 400u);

  const auto builtin = cli("attack --model " + model() + " --data " + data() + " --index 1", dir);
  EXPECT_EQ(value_of(builtin.out, "estimator"), "signopt");
}

TEST_F(Cli, ConfigRejectsUnknownKeys) {
  const auto cfg = dir / "bad.cfg";
  test::write_text(cfg, "warp=9\n");
  EXPECT_EQ(
      cli("attack --model " + model() + " --data " + data() + " --index 1 --config " + cfg.string(), dir)
          .code,
      1);
}

TEST_F(Cli, BenchTwoEstimatorsIsReproducible) {
  const std::string args = "bench --model " + model() + " --data " + data() +
                           " --estimator signopt,rgf --n 10 --budget 2000 --Q 20 --checkpoints 500,1000,2000"
                           " --thresholds 0.5,1 --seed 3 --jobs 2 --out ";
  const auto a = cli(args + (dir / "a").string(), dir);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = cli(args + (dir / "b").string(), dir);
  ASSERT_EQ(b.code, 0) << b.err;
  const auto curves = slurp(dir / "a" / "curves.csv");
  EXPECT_NE(curves.find("\nsignopt,500,"), std::string::npos);
  EXPECT_NE(curves.find("\nrgf,2000,"), std::string::npos);
  EXPECT_EQ(std::count(curves.begin(), curves.end(), '\n'), 1 + 2 * 3);
  for (const char* f : {"curves.csv", "per_example.csv", "run.meta"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST_F(Cli, BenchWarnsWhenTooFewEligible) {
  const auto r = cli("bench --model " + model() + " --data " + data() + " --n 80 --budget 300 --Q 10 --out " +
                         (dir / "o").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("warning"), std::string::npos);
  EXPECT_EQ(value_of(r.out, "examples"), "50");
  EXPECT_TRUE(r.err.empty());
}

TEST_F(Cli, VerifySuites) {
  const auto qp = cli("verify --suite qp", dir);
  EXPECT_EQ(qp.code, 0) << qp.out;
  EXPECT_NE(qp.out.find("PASS  qp"), std::string::npos);
  EXPECT_EQ(qp.out.find("closed-form"), std::string::npos);
  EXPECT_TRUE(qp.err.empty());

  const auto all = cli("verify --trials 200", dir);
  EXPECT_EQ(all.code, 0) << all.out;
  EXPECT_NE(all.out.find("PASS  closed-form"), std::string::npos);
  EXPECT_NE(all.out.find("PASS  sign"), std::string::npos);
}

TEST_F(Cli, VerifyRejectsBadTolerance) {
  const auto r = cli("verify --rel-tol 2.0", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, HelpSucceeds) {
  const auto r = cli("--help", dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("attack"), std::string::npos);
}
