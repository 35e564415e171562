#include <cmath>

#include <gtest/gtest.h>

#include "../support/instances.hpp"

using namespace hris;
using hris::testing::make_problem;

namespace {

InnerProblem closed_form_instance() {
  return make_problem(1, 1.0, 1.0, 2.0, {1.0}, {1.0}, {0.0}, 0.0, 0.0, 10.0);
}

InnerProblem capacity_infeasible() {
  return make_problem(1, 1.0, 10.0, 1.0, {1.0}, {1.0}, {0.0}, 0.0, 0.0, 10.0);
}

}  // namespace

TEST(RateTerm, Examples) {
  EXPECT_NEAR(rate_term(1.0, 1.0, 1.0), 1.0, 1e-15);
  EXPECT_EQ(rate_term(0.0, 0.7, 5.0), 0.0);
  EXPECT_EQ(rate_term(0.0, 0.0, 5.0), 0.0);
}

TEST(RateTerm, DomainErrors) {
  EXPECT_THROW(rate_term(-1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(rate_term(1.0, -1.0, 1.0), DomainError);
  EXPECT_THROW(rate_term(1.0, 0.0, 1.0), DomainError);
}

TEST(Solve, ClosedFormSingleUserIdle) {
  const InnerSolution s = solve(closed_form_instance());
  ASSERT_TRUE(s.feasible());
  EXPECT_NEAR(s.objective, 1.0, 1e-6);
  EXPECT_NEAR(s.duration[0][0] + s.duration[1][0], 1.0, 1e-6);
}

TEST(Solve, CapacityBoundInfeasible) {
  const InnerSolution s = solve(capacity_infeasible());
  EXPECT_EQ(s.status, InnerStatus::infeasible);
  EXPECT_FALSE(s.certificate.empty());
}

TEST(Solve, ReturnedPointsSatisfyConstraints) {
  Rng rng(77);
  int solved = 0;
  for (int i = 0; i < 100; ++i) {
    const InnerProblem p = hris::testing::random_problem(rng, 1 + static_cast<int>(rng.below(3)));
    const InnerSolution s = solve(p);
    if (!s.feasible()) continue;
    ++solved;
    EXPECT_LE(max_scaled_violation(p, s), 1e-6);
  }
  EXPECT_GT(solved, 10);
}

TEST(Solve, ZeroRequirement) {
  InnerProblem p = closed_form_instance();
  p.q_min = 0.0;
  EXPECT_TRUE(solve(p).feasible());
  EXPECT_EQ(solve(p).objective, 0.0);
  p.fixed_energy = 20.0;
  EXPECT_FALSE(solve(p).feasible());
}

TEST(Solve, InvalidProblemThrows) {
  InnerProblem p = closed_form_instance();
  p.a.push_back(1.0);
  EXPECT_THROW(solve(p), InputError);
  p = closed_form_instance();
  p.frame = 0.0;
  EXPECT_THROW(solve(p), InputError);
}

TEST(OracleGrid, ClosedFormWithinOnePercent) {
  OracleOptions opt;
  opt.resolution = 1000;
  const OracleResult r = oracle_grid(closed_form_instance(), opt);
  ASSERT_TRUE(r.solution.feasible());
  EXPECT_NEAR(r.solution.objective, 1.0, 0.01);
}

TEST(OracleGrid, PureGridWithinOnePercent) {
  OracleOptions opt;
  opt.resolution = 1000;
  opt.refine_iterations = 0;
  const OracleResult r = oracle_grid(closed_form_instance(), opt);
  ASSERT_TRUE(r.solution.feasible());
  EXPECT_NEAR(r.solution.objective, 1.0, 0.01);
}

TEST(OracleGrid, InfeasibleAtResolution) {
  const OracleResult r = oracle_grid(capacity_infeasible());
  EXPECT_FALSE(r.solution.feasible());
}

TEST(OracleGrid, NeverBelowSolver) {
  Rng rng(5);
  int compared = 0;
  while (compared < 50) {
    const InnerProblem p = hris::testing::random_problem(rng, 2);
    const InnerSolution s = solve(p);
    if (!s.feasible()) continue;
    const OracleResult o = oracle_grid(p);
    ASSERT_TRUE(o.solution.feasible());
    EXPECT_GE(o.solution.objective, s.objective - 1e-6 * s.objective);
    ++compared;
  }
}

TEST(OracleGrid, RejectsFourUsers) {
  Rng rng(1);
  EXPECT_THROW(oracle_grid(hris::testing::random_problem(rng, 4)), InputError);
}

TEST(FeasibilityProbe, ZeroRateWithSlackBudget) {
  InnerProblem p = closed_form_instance();
  p.q_min = 0.0;
  const FeasibilityReport r = feasibility_probe(p);
  EXPECT_TRUE(r.feasible);
  EXPECT_GT(r.max_slack, 0.0);
}

TEST(FeasibilityProbe, FixedEnergyAboveHarvest) {
  InnerProblem p = closed_form_instance();
  p.fixed_energy = 11.0;
  EXPECT_FALSE(feasibility_probe(p).feasible);
  EXPECT_FALSE(solve(p).feasible());
}

TEST(FeasibilityProbe, AgreesWithSolve) {
  Rng rng(123);
  int feasible = 0;
  for (int i = 0; i < 200; ++i) {
    const InnerProblem p = hris::testing::random_problem(rng, 1 + static_cast<int>(rng.below(2)));
    const bool probe = feasibility_probe(p).feasible;
    EXPECT_EQ(probe, solve(p).feasible()) << "instance " << i;
    feasible += probe;
  }
  EXPECT_GE(feasible, 10);
  EXPECT_GE(200 - feasible, 10);
}
