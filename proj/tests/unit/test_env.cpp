#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "hris/hris.hpp"

using namespace hris;

namespace {

EnvConfig small_env(int n = 4, Scheme s = Scheme::hybrid) {
  ExperimentConfig c = config_from_json(Json::object());
  c.env.ris_elements = n;
  c.env.ehs_elements = n;
  c.env.scheme = s;
  return make_env_config(c.env);
}

ChannelSet zero_channels(int users, int n, int m) {
  ChannelSet ch;
  ch.h_ub = CVector::Zero(users);
  ch.h_ur = CMatrix::Zero(users, n);
  ch.h_rb = CVector::Zero(n);
  ch.h_es = CVector::Zero(m);
  return ch;
}

}  // namespace

TEST(BuildState, DefaultDimension) {
  const EnvConfig ec = small_env(20);
  Rng rng(1);
  const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  EXPECT_EQ(build_state(ch).size(), 63);
  EXPECT_EQ(build_state(ch, StateLayout::norms).size(), state_dim(2, 20, StateLayout::norms));
}

TEST(BuildState, ZeroChannelsGiveZeroState) {
  EXPECT_EQ(build_state(zero_channels(2, 5, 3)).norm(), 0.0);
  EXPECT_EQ(build_state(zero_channels(2, 5, 3), StateLayout::norms).norm(), 0.0);
}

TEST(BuildState, EhsPermutationInvariance) {
  const EnvConfig ec = small_env(6);
  Rng rng(2);
  ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  const VectorXd before = build_state(ch);
  std::reverse(ch.h_es.data(), ch.h_es.data() + ch.h_es.size());
  const VectorXd after = build_state(ch);
  EXPECT_NEAR(after(after.size() - 1), before(before.size() - 1), 1e-15);
}

TEST(BuildState, PerElementLayoutOrder) {
  const EnvConfig ec = small_env(3);
  Rng rng(3);
  const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  const VectorXd s = build_state(ch);
  EXPECT_EQ(s(0), std::abs(ch.h_ur(0, 0)));
  EXPECT_EQ(s(3), std::abs(ch.h_ur(1, 0)));
  EXPECT_EQ(s(6), std::abs(ch.h_rb(0)));
  EXPECT_EQ(s(9), std::abs(ch.h_ub(0)));
  EXPECT_EQ(s(11), ch.h_es.norm());
}

TEST(DecodeAction, HybridActiveBucket) {
  const ModeAssignment m = decode_action({1, 1, 4}, Scheme::hybrid, 1);
  EXPECT_TRUE(m.is_active(0));
  EXPECT_EQ(m.rho[0], 50.0);
}

TEST(DecodeAction, PassiveSchemeForcesPassive) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    Action a(12);
    for (int n = 0; n < 4; ++n) {
      a[3 * n] = static_cast<int>(rng.below(2));
      a[3 * n + 1] = static_cast<int>(rng.below(2));
      a[3 * n + 2] = static_cast<int>(rng.below(10));
    }
    const ModeAssignment p = decode_action(a, Scheme::passive, 4);
    const ModeAssignment z = decode_action(a, Scheme::no_ris, 4);
    for (int n = 0; n < 4; ++n) {
      EXPECT_TRUE(p.is_passive(n));
      EXPECT_TRUE(z.is_idle(n));
    }
  }
}

TEST(DecodeAction, TotalAndInjectiveOnFreeHeads) {
  std::set<std::tuple<int, int, double>> seen;
  for (int b = 0; b < 2; ++b) {
    for (int a = 0; a < 2; ++a) {
      for (int r = 0; r < 10; ++r) {
        const ModeAssignment m = decode_action({b, a, r}, Scheme::hybrid, 1);
        seen.insert({m.reflect[0], m.active[0], m.rho[0]});
      }
    }
  }
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_THROW(decode_action({0, 0, 10}, Scheme::hybrid, 1), InputError);
  EXPECT_THROW(decode_action({0, 0, 0}, Scheme::hybrid, 2), InputError);
}

TEST(Reward, ScalingRule) {
  EnvConfig ec = small_env();
  InnerSolution s;
  s.status = InnerStatus::optimal;
  s.objective = 2e-3;
  EXPECT_DOUBLE_EQ(reward_of(s, ec), -2.0);
}

TEST(Reward, InfeasibleIsMinusKappa) {
  EnvConfig ec = small_env();
  ec.kappa = 10.0;
  InnerSolution s;
  s.status = InnerStatus::infeasible;
  EXPECT_EQ(reward_of(s, ec), -10.0);
  ec.kappa = 100.0;
  EXPECT_EQ(reward_of(s, ec), -100.0);
}

TEST(EnvConfigValidation, KappaMustDominateFeasibleRewards) {
  EnvConfig ec = small_env();
  ec.kappa = 10.0;  // p_max T / e_ref = 100
  EXPECT_THROW(validate_env_config(ec), InputError);
  ec.sys.p_max = 0.01;
  EXPECT_NO_THROW(validate_env_config(ec));
}

TEST(Env, StepsAreDeterministic) {
  const EnvConfig ec = small_env();
  Env e1(ec, 42), e2(ec, 42);
  const Action a = {1, 1, 3, 1, 0, 0, 0, 0, 0, 1, 1, 9};
  for (int t = 0; t < 5; ++t) {
    const StepRecord r1 = e1.step(a), r2 = e2.step(a);
    EXPECT_EQ(r1.state, r2.state);
    EXPECT_EQ(r1.reward, r2.reward);
    EXPECT_EQ(r1.feasible, r2.feasible);
  }
}

TEST(Env, StepMovesToFreshDraw) {
  Env env(small_env(), 7);
  const VectorXd s0 = env.state();
  const StepRecord r = env.step(Action(12, 0));
  EXPECT_EQ(r.state, s0);
  EXPECT_NE(env.state(), s0);
}

TEST(Env, RewardsWithinBounds) {
  const EnvConfig ec = small_env();
  Env env(ec, 9);
  Rng rng(10);
  for (int t = 0; t < 60; ++t) {
    Action a(12);
    for (int n = 0; n < 4; ++n) {
      a[3 * n] = static_cast<int>(rng.below(2));
      a[3 * n + 1] = static_cast<int>(rng.below(2));
      a[3 * n + 2] = static_cast<int>(rng.below(10));
    }
    const StepRecord r = env.step(a);
    EXPECT_GE(r.reward, -ec.kappa);
    EXPECT_LE(r.reward, 0.0);
  }
}

TEST(Env, NoHardwareVariantDropsFixedEnergy) {
  EnvConfig ec = small_env();
  Rng rng(11);
  const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  const ModeAssignment idle = ModeAssignment::uniform(4, 0, 0, 10.0);
  EXPECT_GT(env_inner_problem(ch, idle, ec).fixed_energy, 0.0);
  ec.no_ris_without_ehs = true;
  EXPECT_EQ(env_inner_problem(ch, idle, ec).fixed_energy, 0.0);
  EXPECT_GT(env_inner_problem(ch, ModeAssignment::uniform(4, 1, 0, 10.0), ec).fixed_energy, 0.0);
}

TEST(Oracle, UniformRhoCandidateCount) {
  const EnvConfig ec = small_env(4);
  Rng rng(12);
  const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  const OracleChoice best = enumerate_oracle(ch, ec, true);
  EXPECT_EQ(best.candidates, 4LL * 4 * 4 * 4 * 10);
  EXPECT_LE(best.solves, best.candidates);
}

TEST(Oracle, NeverWorseThanAllIdle) {
  ExperimentConfig c = config_from_json(Json::object());
  c.env.ris_elements = 1;
  c.env.ehs_elements = 20;
  c.env.p_es_dbm = 50.0;
  const EnvConfig ec = make_env_config(c.env);
  Rng rng(13);
  for (int t = 0; t < 10; ++t) {
    const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
    const OracleChoice best = enumerate_oracle(ch, ec, false);
    const InnerSolution idle = solve_modes(ch, ModeAssignment::uniform(1, 0, 0, 10.0), ec);
    if (idle.feasible()) {
      ASSERT_TRUE(best.feasible());
      EXPECT_LE(best.objective(), idle.objective);
    }
  }
}

TEST(Oracle, DominatesHandPickedAssignments) {
  const EnvConfig ec = small_env(3);
  Rng rng(14);
  for (int t = 0; t < 3; ++t) {
    const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
    const OracleChoice best = enumerate_oracle(ch, ec, false);
    for (int k = 0; k < 20; ++k) {
      ModeAssignment m = ModeAssignment::uniform(3, 0, 0, 10.0);
      for (int n = 0; n < 3; ++n) {
        m.reflect[n] = static_cast<int>(rng.below(2));
        m.active[n] = static_cast<int>(rng.below(2));
        m.rho[n] = rho_from_bucket(static_cast<int>(rng.below(10)));
      }
      const InnerSolution s = solve_modes(ch, m, ec);
      if (s.feasible()) {
        ASSERT_TRUE(best.feasible());
        EXPECT_LE(best.objective(), s.objective * (1.0 + 1e-12));
      }
    }
  }
}

TEST(Oracle, ElementCap) {
  const EnvConfig ec = small_env(7);
  Rng rng(15);
  const ChannelSet ch = sample_channel_set(ec.geometry, ec.links, rng);
  EXPECT_THROW(enumerate_oracle(ch, ec, true), InputError);
}

TEST(Oracle, SchemeCandidateCounts) {
  const EnvConfig base = small_env(2);
  Rng rng(16);
  const ChannelSet ch = sample_channel_set(base.geometry, base.links, rng);
  auto count = [&](Scheme s, bool uniform) {
    EnvConfig ec = base;
    ec.scheme = s;
    return enumerate_oracle(ch, ec, uniform).candidates;
  };
  EXPECT_EQ(count(Scheme::hybrid, false), 40 * 40);
  EXPECT_EQ(count(Scheme::active_passive, true), 2 * 2 * 10);
  EXPECT_EQ(count(Scheme::active, false), 10 * 10);
  EXPECT_EQ(count(Scheme::passive, true), 1);
  EXPECT_EQ(count(Scheme::no_ris, true), 1);
}

TEST(StubBandit, OptimalActionHasZeroReward) {
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    VectorXd s(4);
    for (int i = 0; i < 4; ++i) s(i) = rng.uniform(-1.0, 1.0);
    EXPECT_EQ(StubBandit::reward(s, StubBandit::optimal_action(s)), 0.0);
    Action worse = StubBandit::optimal_action(s);
    worse[2] = (worse[2] + 1) % 10;
    EXPECT_LT(StubBandit::reward(s, worse), 0.0);
  }
}
