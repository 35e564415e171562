#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "../support/gradcheck.hpp"

using namespace hris;

namespace {

PolicyDistribution uniform_distribution(int elements, Scheme s = Scheme::hybrid) {
  const HeadLayout L(elements, s);
  return distribution_from_logits(VectorXd::Zero(L.logits()), L);
}

}  // namespace

TEST(Layout, DimensionsAtDefaults) {
  EXPECT_EQ(state_dim(2, 20, StateLayout::per_element), 63);
  EXPECT_EQ(HeadLayout(20, Scheme::hybrid).logits(), 280);
  EXPECT_EQ(HeadLayout(20, Scheme::hybrid).actions(), 60);
}

TEST(PolicyForward, ZeroWeightsGiveUniformHeads) {
  const HeadLayout L(3, Scheme::hybrid);
  Mlp actor(5, 7, L.logits());
  const PolicyDistribution d = policy_forward(actor, VectorXd::Ones(5), L);
  for (int n = 0; n < 3; ++n) {
    for (int h = 0; h < 3; ++h) {
      for (int k = 0; k < kHeadSizes[h]; ++k) EXPECT_NEAR(d.p(n, h, k), 1.0 / kHeadSizes[h], 1e-15);
    }
  }
}

TEST(PolicyForward, ValidDistributions) {
  Rng rng(2);
  const HeadLayout L(4, Scheme::hybrid);
  Mlp actor(6, 16, L.logits());
  actor.init_orthogonal(rng, std::sqrt(2.0), 5.0);
  for (int t = 0; t < 20; ++t) {
    VectorXd s(6);
    for (int i = 0; i < 6; ++i) s(i) = 3.0 * rng.normal();
    const PolicyDistribution d = policy_forward(actor, s, L);
    for (int n = 0; n < 4; ++n) {
      for (int h = 0; h < 3; ++h) {
        double sum = 0.0;
        for (int k = 0; k < kHeadSizes[h]; ++k) {
          EXPECT_GT(d.p(n, h, k), 0.0);
          EXPECT_LT(d.p(n, h, k), 1.0);
          sum += d.p(n, h, k);
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(PolicyForward, WrongStateDimensionThrows) {
  const HeadLayout L(2, Scheme::hybrid);
  Mlp actor(4, 8, L.logits());
  EXPECT_THROW(policy_forward(actor, VectorXd::Zero(5), L), InputError);
}

TEST(LogProb, HeadsAreIndependent) {
  // Active head (0.9, 0.1), other heads uniform.
  const HeadLayout L(1, Scheme::active_passive);
  VectorXd z = VectorXd::Zero(L.logits());
  z(L.offset(0, 1) + 1) = std::log(0.1 / 0.9);
  PolicyDistribution d = distribution_from_logits(z, L);
  const Action a = {1, 1, 3};
  EXPECT_NEAR(log_prob(d, a), std::log(0.1) + std::log(0.1), 1e-12);

  const HeadLayout H(1, Scheme::hybrid);
  VectorXd zh = VectorXd::Zero(H.logits());
  zh(H.offset(0, 1) + 1) = std::log(0.1 / 0.9);
  d = distribution_from_logits(zh, H);
  EXPECT_NEAR(log_prob(d, {0, 1, 0}), std::log(0.5 * 0.1 * 0.1), 1e-12);
}

TEST(LogProb, OutOfRangeActionThrows) {
  const PolicyDistribution d = uniform_distribution(1);
  EXPECT_THROW(log_prob(d, {0, 2, 0}), InputError);
  EXPECT_THROW(log_prob(d, {0, 0, 10}), InputError);
  EXPECT_THROW(log_prob(d, {0, 0}), InputError);
}

TEST(Sample, LogProbEqualsSumOfHeads) {
  Rng rng(8);
  const HeadLayout L(3, Scheme::hybrid);
  VectorXd z(L.logits());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const PolicyDistribution d = distribution_from_logits(z, L);
  for (int t = 0; t < 100; ++t) {
    const auto [a, lp] = sample_and_logprob(d, rng);
    double sum = 0.0;
    for (int n = 0; n < 3; ++n) {
      for (int h = 0; h < 3; ++h) sum += std::log(d.p(n, h, a[3 * n + h]));
    }
    EXPECT_EQ(lp, sum);
  }
}

TEST(Sample, DeterministicGivenSeed) {
  const PolicyDistribution d = uniform_distribution(4);
  Rng r1(3), r2(3);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(sample_and_logprob(d, r1), sample_and_logprob(d, r2));
}

TEST(Sample, ForcedHeadsTakePinnedValues) {
  Rng rng(1);
  const auto [a, lp] = sample_and_logprob(uniform_distribution(3, Scheme::passive), rng);
  for (int n = 0; n < 3; ++n) {
    EXPECT_EQ(a[3 * n], 1);
    EXPECT_EQ(a[3 * n + 1], 0);
  }
  EXPECT_EQ(lp, 0.0);
}

TEST(Sample, EmpiricalFrequencies) {
  Rng rng(4);
  const HeadLayout L(1, Scheme::hybrid);
  VectorXd z = VectorXd::Zero(L.logits());
  z(L.offset(0, 0) + 1) = std::log(3.0);  // reflect head (0.25, 0.75)
  const PolicyDistribution d = distribution_from_logits(z, L);
  int ones = 0;
  const int n = 40000;
  for (int t = 0; t < n; ++t) ones += sample_and_logprob(d, rng).first[0];
  EXPECT_NEAR(ones / double(n), 0.75, 0.01);
}

TEST(RhoBuckets, TopBucketIsRhoMax) {
  EXPECT_EQ(rho_from_bucket(9), 100.0);
  EXPECT_EQ(rho_from_bucket(0), 10.0);
}

TEST(Gae, GammaZeroCollapse) {
  VectorXd r(1), v(2);
  r << 2.0;
  v << 0.5, 123.0;
  EXPECT_DOUBLE_EQ(gae_advantages(r, v, 0.0, 0.95)(0), 1.5);
}

TEST(Gae, GammaZeroIgnoresFuture) {
  Rng rng(9);
  VectorXd r(5), v(6);
  for (int i = 0; i < 5; ++i) r(i) = rng.normal();
  for (int i = 0; i < 6; ++i) v(i) = rng.normal();
  const VectorXd a = gae_advantages(r, v, 0.0, 0.95);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a(i), r(i) - v(i));
}

TEST(Gae, TwoStepHandComputed) {
  VectorXd r(2), v(3);
  r << 1.0, 2.0;
  v << 0.5, 0.25, 0.75;
  const double d0 = 1.0 + 0.9 * 0.25 - 0.5;
  const double d1 = 2.0 + 0.9 * 0.75 - 0.25;
  const VectorXd a = gae_advantages(r, v, 0.9, 1.0);
  EXPECT_NEAR(a(0), d0 + 0.9 * d1, 1e-14);
  EXPECT_NEAR(a(1), d1, 1e-14);
}

TEST(Gae, LengthMismatchThrows) {
  EXPECT_THROW(gae_advantages(VectorXd::Zero(3), VectorXd::Zero(3), 0.0, 0.9), InputError);
}

TEST(Clip, Branches) {
  EXPECT_DOUBLE_EQ(clip(1.5, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clip(0.7, 0.2), 0.8);
  EXPECT_DOUBLE_EQ(clip(1.0, 0.2), 1.0);
}

TEST(Entropy, UniformTwoElements) {
  EXPECT_NEAR(entropy(uniform_distribution(2)),
              2 * std::log(2.0) + 2 * std::log(2.0) + 2 * std::log(10.0), 1e-12);
}

TEST(Entropy, ForcedHeadsExcluded) {
  EXPECT_NEAR(entropy(uniform_distribution(2, Scheme::active)), 2 * std::log(10.0), 1e-12);
  EXPECT_EQ(entropy(uniform_distribution(2, Scheme::no_ris)), 0.0);
}

TEST(Normalizer, MeanCentered) {
  Normalizer n(1);
  for (double x : {1.0, 2.0, 3.0}) n.update(VectorXd::Constant(1, x));
  EXPECT_NEAR(n.apply(VectorXd::Constant(1, 2.0))(0), 0.0, 1e-15);
  EXPECT_NEAR(n.apply(VectorXd::Constant(1, 3.0))(0), 1.0 / std::sqrt(2.0 / 3.0 + 1e-8), 1e-12);
}

TEST(Normalizer, FreshReturnsInput) {
  Normalizer n(3);
  const VectorXd x = VectorXd::LinSpaced(3, -1.0, 4.0);
  EXPECT_EQ(n.apply(x), x);
}

TEST(Normalizer, ConstantStreamMapsToZero) {
  Normalizer n(2);
  VectorXd out;
  for (int i = 0; i < 50; ++i) out = n.normalize(VectorXd::Constant(2, 7.5), true);
  EXPECT_TRUE(out.allFinite());
  EXPECT_NEAR(out.norm(), 0.0, 1e-12);
}

TEST(Normalizer, DimensionMismatchThrows) {
  Normalizer n(2);
  EXPECT_THROW(n.update(VectorXd::Zero(3)), InputError);
}

TEST(ActorLoss, RatioOneGivesPolicyGradient) {
  Rng rng(10);
  auto g = hris::testing::random_grad_problem(rng);
  for (int b = 0; b < g.states.cols(); ++b) {
    const PolicyDistribution d = policy_forward(g.actor, g.states.col(b), g.layout);
    Action a(g.layout.actions());
    for (int k = 0; k < g.layout.actions(); ++k) a[k] = g.actions(k, b);
    g.old_logp(b) = log_prob(d, a);
  }
  const ActorLoss al = actor_loss(g.actor, g.layout, g.states, g.actions, g.old_logp, g.adv, 0.2, 0.0);
  EXPECT_NEAR(al.mean_ratio, 1.0, 1e-12);
  EXPECT_EQ(al.clip_fraction, 0.0);
  // At ratio 1 the surrogate gradient is -mean(A * grad log pi).
  VectorXd& params = g.actor.params;
  auto mean_adv_logp = [&] {
    double s = 0.0;
    for (int b = 0; b < g.states.cols(); ++b) {
      const PolicyDistribution d = policy_forward(g.actor, g.states.col(b), g.layout);
      Action a(g.layout.actions());
      for (int k = 0; k < g.layout.actions(); ++k) a[k] = g.actions(k, b);
      s += g.adv(b) * log_prob(d, a);
    }
    return -s / g.states.cols();
  };
  EXPECT_LT(hris::testing::fd_relative_error(params, mean_adv_logp, al.grad), 1e-4);
}

TEST(ActorLoss, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = hris::testing::random_grad_problem(rng);
    const ActorLoss al = actor_loss(g.actor, g.layout, g.states, g.actions, g.old_logp, g.adv, 0.2, 0.05);
    auto f = [&] {
      return actor_loss(g.actor, g.layout, g.states, g.actions, g.old_logp, g.adv, 0.2, 0.05, false).loss;
    };
    EXPECT_LT(hris::testing::fd_relative_error(g.actor.params, f, al.grad), 1e-4);
  }
}

TEST(ActorLoss, EntropyTermGradient) {
  Rng rng(12);
  auto g = hris::testing::random_grad_problem(rng);
  g.adv.setZero();
  const ActorLoss al = actor_loss(g.actor, g.layout, g.states, g.actions, g.old_logp, g.adv, 0.2, 1.0);
  auto f = [&] {
    return actor_loss(g.actor, g.layout, g.states, g.actions, g.old_logp, g.adv, 0.2, 1.0, false).loss;
  };
  EXPECT_LT(hris::testing::fd_relative_error(g.actor.params, f, al.grad), 1e-4);
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  auto g = hris::testing::random_grad_problem(rng);
  const CriticLoss cl = critic_loss(g.critic, g.states, g.returns);
  auto f = [&] { return critic_loss(g.critic, g.states, g.returns, false).loss; };
  EXPECT_LT(hris::testing::fd_relative_error(g.critic.params, f, cl.grad), 1e-4);
}

TEST(Mlp, OrthogonalInitRows) {
  Rng rng(14);
  Mlp m(6, 10, 4);
  m.init_orthogonal(rng, 2.0, 0.5);
  const MatrixXd w1 = m.w1();
  // 10 x 6: orthogonal columns scaled by the gain.
  EXPECT_LT((w1.transpose() * w1 - 4.0 * MatrixXd::Identity(6, 6)).norm(), 1e-12);
  const MatrixXd w2 = m.w2();
  EXPECT_LT((w2 * w2.transpose() - 0.25 * MatrixXd::Identity(4, 4)).norm(), 1e-12);
  EXPECT_EQ(m.b1().norm(), 0.0);
}

TEST(Optimizer, SgdStep) {
  Optimizer o;
  o.lr = 0.5;
  VectorXd p = VectorXd::Ones(3);
  o.step(p, VectorXd::Constant(3, 2.0));
  EXPECT_EQ(p, VectorXd::Zero(3));
}

TEST(Optimizer, AdamFirstStepIsLr) {
  Optimizer o;
  o.kind = OptimizerKind::adam;
  o.lr = 0.01;
  VectorXd p = VectorXd::Zero(2);
  VectorXd g(2);
  g << 3.0, -0.5;
  o.step(p, g);
  EXPECT_NEAR(p(0), -0.01, 1e-9);
  EXPECT_NEAR(p(1), 0.01, 1e-9);
}

TEST(PpoAgent, UpdateKeepsDistributionsValid) {
  Rng rng(15);
  PpoConfig cfg;
  cfg.hidden = 16;
  cfg.buffer = 32;
  cfg.minibatch = 8;
  cfg.lr_actor = cfg.lr_critic = 0.05;
  const HeadLayout L(2, Scheme::hybrid);
  PpoAgent agent(4, L, cfg, rng);
  Rollout ro;
  ro.states = MatrixXd::Random(4, 32);
  ro.actions.resize(6, 32);
  ro.logp.resize(32);
  ro.rewards.resize(32);
  ro.values = VectorXd::Zero(33);
  for (int t = 0; t < 32; ++t) {
    const auto [a, lp] = sample_and_logprob(agent.distribution(ro.states.col(t)), rng);
    for (int k = 0; k < 6; ++k) ro.actions(k, t) = a[k];
    ro.logp(t) = lp;
    ro.rewards(t) = rng.normal();
  }
  for (int rep = 0; rep < 5; ++rep) agent.update(ro, rng);
  for (int t = 0; t < 32; ++t) {
    const PolicyDistribution d = agent.distribution(ro.states.col(t));
    EXPECT_TRUE(d.probs.allFinite());
    for (int n = 0; n < 2; ++n) {
      for (int h = 0; h < 3; ++h) {
        double s = 0.0;
        for (int k = 0; k < kHeadSizes[h]; ++k) s += d.p(n, h, k);
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(PpoAgent, GreedyDoesNotTouchNormalizer) {
  Rng rng(16);
  PpoConfig cfg;
  cfg.hidden = 8;
  PpoAgent agent(4, HeadLayout(2, Scheme::hybrid), cfg, rng);
  agent.normalizer.update(VectorXd::Ones(4));
  const Normalizer before = agent.normalizer;
  const VectorXd actor_before = agent.actor.params;
  agent.greedy(VectorXd::Constant(4, 3.0));
  EXPECT_EQ(agent.normalizer.count, before.count);
  EXPECT_EQ(agent.normalizer.mean, before.mean);
  EXPECT_EQ(agent.actor.params, actor_before);
}
