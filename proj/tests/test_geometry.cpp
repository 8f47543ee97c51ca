#include <gtest/gtest.h>

#include <cmath>

#include "signopt/signopt.hpp"
#include "support.hpp"

using namespace signopt;

namespace {

SearchConfig with_lambda(double initial) {
  SearchConfig c;
  c.initial_lambda = initial;
  return c;
}

struct LinearCase {
  LinearModel model;
  Origin origin;
};

LinearCase random_case(std::size_t d, std::size_t k, Rng& rng) {
  auto m = random_linear_model(d, k, rng);
  auto x = gaussian_vector(d, rng);
  const Label y = m.classify(x);
  return {std::move(m), Origin(std::move(x), y)};
}

}  // namespace

TEST(IsAdversarial, HandExamples) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto o = test::split_origin();
  EXPECT_TRUE(is_adversarial(oracle, o, Vector{0.5, 0.0}));
  EXPECT_FALSE(is_adversarial(oracle, o, o.x0));
  const Origin targeted({-2.0, 0.0}, Label{1}, AttackGoal::targeted(Label{0}));
  EXPECT_TRUE(is_adversarial(oracle, targeted, Vector{0.5, 0.0}));
  EXPECT_EQ(oracle.queries(), 3u);
}

TEST(IsAdversarial, TargetedSemanticsNeedTheTargetLabel) {
  const LinearModel m(3, 2, {0, 0, 1, 0, 0, 1}, {0, -1, -1.5});
  HardLabelOracle oracle(m);
  const Origin to2({0.0, 0.0}, Label{0}, AttackGoal::targeted(Label{2}));
  EXPECT_FALSE(is_adversarial(oracle, to2, Vector{3.0, 0.0}));  // class 1, not the target
  EXPECT_TRUE(is_adversarial(oracle, to2, Vector{0.0, 3.0}));
  EXPECT_THROW(Origin({0.0, 0.0}, Label{0}, AttackGoal::targeted(Label{0})), PreconditionError);
}

TEST(FineGrained, DoublesUntilTieIsAdversarial) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto b = fine_grained_search(oracle, test::split_origin(), Vector{1.0, 0.0}, with_lambda(0.5));
  EXPECT_TRUE(b.found);
  EXPECT_DOUBLE_EQ(b.lo, 1.0);
  EXPECT_DOUBLE_EQ(b.hi, 2.0);
  EXPECT_EQ(b.queries_used, 3u);
  EXPECT_EQ(oracle.queries(), 3u);
}

TEST(FineGrained, NoBoundaryBehind) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto cfg = with_lambda(0.5);
  const auto b = fine_grained_search(oracle, test::split_origin(), Vector{-1.0, 0.0}, cfg);
  EXPECT_FALSE(b.found);
  EXPECT_EQ(b.hi, kNoCrossing);
  EXPECT_LE(b.queries_used, static_cast<std::uint64_t>(cfg.max_doublings));
}

TEST(FineGrained, FirstProbeAlreadyAdversarial) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const Origin near({-0.4, 0.0}, Label{1});
  const auto b = fine_grained_search(oracle, near, Vector{1.0, 0.0}, with_lambda(0.5));
  EXPECT_TRUE(b.found);
  EXPECT_EQ(b.lo, 0.0);
  EXPECT_EQ(b.hi, 0.5);
  EXPECT_EQ(b.queries_used, 1u);
}

TEST(BinarySearch, RefinesHandBracket) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto e = binary_search_g(oracle, test::split_origin(), Vector{1.0, 0.0}, 1.0, 2.0, SearchConfig{});
  EXPECT_TRUE(e.found);
  EXPECT_GE(e.g_value, 2.0);
  EXPECT_LE(e.g_value, 2.002);
  EXPECT_EQ(e.queries_used, oracle.queries());
}

TEST(BinarySearch, DiagonalAfterBracketing) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto o = test::split_origin();
  const Vector theta{1.0, 1.0};
  const auto b = fine_grained_search(oracle, o, theta, SearchConfig{});
  ASSERT_TRUE(b.found);
  const auto e = binary_search_g(oracle, o, theta, b.lo, b.hi, SearchConfig{});
  const double truth = 2.0 * std::sqrt(2.0);
  EXPECT_NEAR(e.g_value, truth, 1e-3 * truth);
  EXPECT_GE(e.g_value, truth);
}

TEST(BinarySearch, DegenerateBracketCostsNothing) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto e = binary_search_g(oracle, test::split_origin(), Vector{1.0, 0.0}, 1.9995, 2.0, SearchConfig{});
  EXPECT_EQ(e.g_value, 2.0);
  EXPECT_EQ(e.queries_used, 0u);
  EXPECT_EQ(oracle.queries(), 0u);
}

TEST(BinarySearch, InvalidBracket) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto o = test::split_origin();
  EXPECT_THROW(binary_search_g(oracle, o, Vector{1.0, 0.0}, 2.0, 1.0, SearchConfig{}), PreconditionError);
  EXPECT_THROW(binary_search_g(oracle, o, Vector{1.0, 0.0}, -1.0, 1.0, SearchConfig{}), PreconditionError);
  EXPECT_THROW(binary_search_g(oracle, o, Vector{1.0, 0.0}, 0.0, kNoCrossing, SearchConfig{}),
               PreconditionError);
}

TEST(BinarySearch, BracketInvariantOnLinearModels) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    auto c = random_case(8, 3, rng);
    HardLabelOracle oracle(c.model);
    const auto theta = gaussian_vector(8, rng);
    const double truth = closed_form_g(c.model, c.origin.x0, c.origin.y0, theta);
    if (std::isinf(truth)) continue;
    const auto e = evaluate_g(oracle, c.origin, theta, SearchConfig{});
    ASSERT_TRUE(e.found);
    // hi end is adversarial and overshoots the true crossing by at most rel_tol
    EXPECT_GE(e.g_value, truth);
    EXPECT_LE(e.g_value, truth * (1.0 + 1e-3));
    const auto dir = vec::normalized(theta);
    EXPECT_TRUE(c.origin.hit(c.model.classify(c.origin.point(dir, e.g_value))));
  }
}

TEST(EvaluateG, HandExamples) {
  const auto m = test::split_model();
  const auto o = test::split_origin();
  HardLabelOracle oracle(m);
  const auto e = evaluate_g(oracle, o, Vector{1.0, 0.0}, SearchConfig{});
  EXPECT_TRUE(e.found);
  EXPECT_NEAR(e.g_value, 2.0, 0.002 * 2.0);
  EXPECT_LE(e.queries_used, 20u);
  EXPECT_EQ(e.queries_used, oracle.queries());

  const auto e2 = evaluate_g(oracle, o, Vector{2.0, 0.0}, SearchConfig{});
  EXPECT_NEAR(e2.g_value, e.g_value, 1e-3 * e.g_value);

  const auto before = oracle.queries();
  const auto back = evaluate_g(oracle, o, Vector{-1.0, 0.0}, SearchConfig{});
  EXPECT_FALSE(back.found);
  EXPECT_EQ(back.g_value, kNoCrossing);
  EXPECT_EQ(back.queries_used, oracle.queries() - before);
}

TEST(EvaluateG, ZeroDirectionRejected) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  EXPECT_THROW(evaluate_g(oracle, test::split_origin(), Vector{0.0, 0.0}, SearchConfig{}), PreconditionError);
}

TEST(EvaluateG, PositiveScaleInvariance) {
  Rng rng(41);
  const auto mlp = random_mlp(12, 24, 3, rng);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const auto x = gaussian_vector(12, rng);
    const Origin o(x, mlp.classify(x));
    const auto theta = gaussian_vector(12, rng);
    HardLabelOracle oracle(mlp);
    const auto base = evaluate_g(oracle, o, theta, SearchConfig{});
    if (!base.found) continue;
    ++checked;
    for (double c : {0.5, 3.0, 10.0}) {
      auto scaled = theta;
      vec::scale_in_place(scaled, c);
      const auto e = evaluate_g(oracle, o, scaled, SearchConfig{});
      ASSERT_TRUE(e.found);
      EXPECT_LE(std::abs(e.g_value - base.g_value), 2e-3 * base.g_value);
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(EvaluateG, MatchesClosedFormOnLinearModels) {
  Rng rng(51);
  int checked = 0;
  while (checked < 300) {
    const std::size_t d = checked % 2 ? 100 : 10;
    auto c = random_case(d, 2 + checked % 4, rng);
    const auto theta = gaussian_vector(d, rng);
    const double truth = closed_form_g(c.model, c.origin.x0, c.origin.y0, theta);
    if (std::isinf(truth)) continue;
    HardLabelOracle oracle(c.model);
    const auto e = evaluate_g(oracle, c.origin, theta, SearchConfig{});
    ASSERT_TRUE(e.found);
    EXPECT_LE(std::abs(e.g_value - truth), 1e-3 * truth);
    EXPECT_EQ(e.queries_used, oracle.queries());
    ++checked;
  }
}

TEST(EvaluateGNear, AgreesWithColdEvaluation) {
  Rng rng(61);
  for (int t = 0; t < 100; ++t) {
    auto c = random_case(20, 3, rng);
    const auto theta = gaussian_vector(20, rng);
    const double truth = closed_form_g(c.model, c.origin.x0, c.origin.y0, theta);
    if (std::isinf(truth)) continue;
    for (double factor : {0.2, 0.97, 1.0, 1.03, 5.0}) {
      HardLabelOracle oracle(c.model);
      const auto e = evaluate_g_near(oracle, c.origin, theta, truth * factor, SearchConfig{});
      ASSERT_TRUE(e.found);
      EXPECT_GE(e.g_value, truth * (1.0 - 1e-12));
      EXPECT_LE(e.g_value, truth * (1.0 + 1e-3));
      EXPECT_EQ(e.queries_used, oracle.queries());
    }
  }
}

TEST(EvaluateGNear, ColdFallbackWithoutHint) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto e = evaluate_g_near(oracle, test::split_origin(), Vector{1.0, 0.0}, kNoCrossing, SearchConfig{});
  EXPECT_NEAR(e.g_value, 2.0, 2e-3);
}

TEST(SignDirectional, HandExamples) {
  const auto m = test::split_model();
  const auto o = test::split_origin();
  HardLabelOracle oracle(m);
  EXPECT_EQ(sign_directional(oracle, o, Vector{1.0, 0.0}, 2.0, Vector{0.0, 1.0}, 0.1), +1);
  EXPECT_EQ(oracle.queries(), 1u);
  EXPECT_EQ(sign_directional(oracle, o, Vector{1.0, 1.0}, 2.0 * std::sqrt(2.0), Vector{0.0, -1.0}, 0.5), -1);
  EXPECT_EQ(oracle.queries(), 2u);
}

TEST(SignDirectional, Errors) {
  const auto m = test::split_model();
  const auto o = test::split_origin();
  HardLabelOracle oracle(m);
  EXPECT_THROW(sign_directional(oracle, o, Vector{1.0, 0.0}, 2.0, Vector{0.0, 1.0}, 0.0), PreconditionError);
  EXPECT_THROW(sign_directional(oracle, o, Vector{1.0, 0.0}, 2.0, Vector{-1.0, 0.0}, 1.0), PreconditionError);
  HardLabelOracle spent(m, 0);
  EXPECT_THROW(sign_directional(spent, o, Vector{1.0, 0.0}, 2.0, Vector{0.0, 1.0}, 0.1), BudgetExhausted);
}

TEST(SignDirectional, AgreesWithDoubleEvaluationAndDescends) {
  Rng rng(71);
  const auto mlp = random_mlp(20, 32, 4, rng);
  const SearchConfig cfg;
  int decisive = 0, agree = 0;
  for (int t = 0; t < 300; ++t) {
    const auto x = gaussian_vector(20, rng);
    const Origin o(x, mlp.classify(x));
    const auto theta = gaussian_vector(20, rng);
    const auto u = gaussian_vector(20, rng);
    const double eps = 1e-2 * vec::norm(theta);
    HardLabelOracle oracle(mlp);
    const auto g = evaluate_g(oracle, o, theta, cfg);
    if (!g.found) continue;
    const auto before = oracle.queries();
    const int s = sign_directional(oracle, o, theta, g.g_value, u, eps);
    EXPECT_EQ(oracle.queries() - before, 1u);
    const auto gp = evaluate_g(oracle, o, vec::axpy(theta, eps, u), cfg);
    if (s == -1) {
      ASSERT_TRUE(gp.found);
      EXPECT_LT(gp.g_value, g.g_value * (1.0 + 2e-3));
    }
    if (!gp.found) continue;
    const double diff = gp.g_value - g.g_value;
    if (std::abs(diff) <= 2e-3 * g.g_value) continue;
    ++decisive;
    agree += (diff < 0 ? -1 : 1) == s;
  }
  ASSERT_GT(decisive, 50);
  EXPECT_GE(agree, 0.99 * decisive);
}

TEST(InitialDirection, GaussianCandidatesNeverBeatOptimum) {
  const auto m = test::split_model();
  const auto o = test::split_origin();
  HardLabelOracle oracle(m);
  Rng rng(81);
  const auto r = initial_direction(oracle, o, gaussian_candidates(2, 100, rng), SearchConfig{});
  EXPECT_TRUE(r.eval.found);
  EXPECT_GE(r.eval.g_value, 2.0);
  EXPECT_NEAR(vec::norm(r.theta), 1.0, 1e-12);
  EXPECT_EQ(r.queries_used, oracle.queries());
}

TEST(InitialDirection, ExplicitCandidate) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  const auto r =
      initial_direction(oracle, test::split_origin(), {{{1.0, 0.0}, std::nullopt}}, SearchConfig{});
  EXPECT_EQ(r.theta, (Vector{1.0, 0.0}));
  EXPECT_NEAR(r.eval.g_value, 2.0, 2e-3);
}

TEST(InitialDirection, AllCandidatesFail) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m);
  EXPECT_THROW(initial_direction(oracle, test::split_origin(), {{{-1.0, 0.0}, std::nullopt}}, SearchConfig{}),
               InitializationError);
}

TEST(InitialDirection, PicksSmallestAmongCandidates) {
  Rng rng(91);
  for (int t = 0; t < 30; ++t) {
    auto c = random_case(10, 3, rng);
    auto cands = gaussian_candidates(10, 40, rng);
    double best = kNoCrossing;
    for (const auto& k : cands)
      best = std::min(best, closed_form_g(c.model, c.origin.x0, c.origin.y0, k.direction));
    if (std::isinf(best)) continue;
    HardLabelOracle oracle(c.model);
    const auto r = initial_direction(oracle, c.origin, cands, SearchConfig{});
    EXPECT_LE(r.eval.g_value, best * (1.0 + 1e-3));
    EXPECT_GE(r.eval.g_value, best);
  }
}

TEST(InitialDirection, TargetCandidatesUseKnownRadius) {
  const LinearModel m(3, 2, {0, 0, 1, 0, 0, 1}, {0, -1, -1.5});
  const Origin o({0.0, 0.0}, Label{0}, AttackGoal::targeted(Label{2}));
  HardLabelOracle oracle(m);
  const auto cands = target_candidates(o, {{0.0, 3.0}, {0.5, 4.0}});
  ASSERT_EQ(cands.size(), 2u);
  EXPECT_DOUBLE_EQ(*cands[0].radius, 3.0);
  const auto r = initial_direction(oracle, o, cands, SearchConfig{});
  EXPECT_NEAR(r.eval.g_value, 1.5, 1.5e-3);
  EXPECT_EQ(m.classify(o.point(r.theta, r.eval.g_value)), Label{2});
}

TEST(InitialDirection, BudgetAfterFirstCrossingReturnsBest) {
  const auto m = test::split_model();
  HardLabelOracle oracle(m, 25);
  Rng rng(5);
  auto cands = gaussian_candidates(2, 100, rng);
  cands.insert(cands.begin(), InitCandidate{{1.0, 0.2}, std::nullopt});
  const auto r = initial_direction(oracle, test::split_origin(), cands, SearchConfig{});
  EXPECT_TRUE(r.exhausted);
  EXPECT_TRUE(r.eval.found);
  EXPECT_EQ(oracle.queries(), 25u);
}
