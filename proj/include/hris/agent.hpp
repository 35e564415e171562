#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hris/error.hpp"
#include "hris/nn.hpp"
#include "hris/rng.hpp"
#include "hris/scheme.hpp"

namespace hris {

using Action = std::vector<int>;  ///< 3N head indices, element-major: (reflect, active, bucket)

// ---------------------------------------------------------------------------------------------
// Categorical heads

/// Softmax of every head of one logit vector; forced heads are filled too but never used.
struct PolicyDistribution {
  HeadLayout layout;
  VectorXd probs;  ///< same layout as the logits

  double p(int n, int h, int k) const { return probs(layout.offset(n, h) + k); }
};

inline void softmax_segment(const double* z, int k, double* out) {
  double mx = z[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, z[i]);
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    out[i] = std::exp(z[i] - mx);
    s += out[i];
  }
  for (int i = 0; i < k; ++i) out[i] /= s;
}

inline PolicyDistribution distribution_from_logits(const VectorXd& logits, const HeadLayout& layout) {
  if (logits.size() != layout.logits()) throw InputError("logit vector does not match head layout");
  PolicyDistribution d{layout, VectorXd(logits.size())};
  for (int n = 0; n < layout.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      const int o = layout.offset(n, h);
      softmax_segment(logits.data() + o, kHeadSizes[h], d.probs.data() + o);
    }
  }
  return d;
}

inline PolicyDistribution policy_forward(const Mlp& actor, const VectorXd& state,
                                         const HeadLayout& layout) {
  return distribution_from_logits(actor.forward_one(state), layout);
}

inline void check_action(const Action& a, const HeadLayout& layout) {
  if (static_cast<int>(a.size()) != layout.actions()) throw InputError("action length mismatch");
  for (int n = 0; n < layout.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      const int v = a[3 * n + h];
      if (v < 0 || v >= kHeadSizes[h]) throw InputError("action index out of range");
    }
  }
}

/// Sum of log-probabilities over the free heads.
inline double log_prob(const PolicyDistribution& d, const Action& a) {
  check_action(a, d.layout);
  double s = 0.0;
  for (int n = 0; n < d.layout.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      if (d.layout.is_free(h)) s += std::log(d.p(n, h, a[3 * n + h]));
    }
  }
  return s;
}

inline double entropy(const PolicyDistribution& d) {
  double s = 0.0;
  for (int n = 0; n < d.layout.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      if (!d.layout.is_free(h)) continue;
      for (int k = 0; k < kHeadSizes[h]; ++k) {
        const double p = d.p(n, h, k);
        if (p > 0.0) s -= p * std::log(p);
      }
    }
  }
  return s;
}

/// Draws every free head by inverse CDF (one uniform each, element-major); forced heads take
/// their pinned value.
inline std::pair<Action, double> sample_and_logprob(const PolicyDistribution& d, Rng& rng) {
  const HeadLayout& L = d.layout;
  Action a(static_cast<std::size_t>(L.actions()));
  for (int n = 0; n < L.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      if (!L.is_free(h)) {
        a[3 * n + h] = L.forced[h];
        continue;
      }
      const double u = rng.uniform();
      double c = 0.0;
      int k = 0;
      for (; k < kHeadSizes[h] - 1; ++k) {
        c += d.p(n, h, k);
        if (u < c) break;
      }
      a[3 * n + h] = k;
    }
  }
  return {a, log_prob(d, a)};
}

/// Argmax per free head (lowest index on ties).
inline Action greedy_action(const PolicyDistribution& d) {
  const HeadLayout& L = d.layout;
  Action a(static_cast<std::size_t>(L.actions()));
  for (int n = 0; n < L.elements; ++n) {
    for (int h = 0; h < 3; ++h) {
      if (!L.is_free(h)) {
        a[3 * n + h] = L.forced[h];
        continue;
      }
      int best = 0;
      for (int k = 1; k < kHeadSizes[h]; ++k) {
        if (d.p(n, h, k) > d.p(n, h, best)) best = k;
      }
      a[3 * n + h] = best;
    }
  }
  return a;
}

// ---------------------------------------------------------------------------------------------
// Advantage estimation and clipping

/// GAE over one trajectory. values holds v(s_0..s_{T-1}) followed by the bootstrap v(s_T).
inline VectorXd gae_advantages(const VectorXd& rewards, const VectorXd& values, double gamma,
                               double lambda) {
  const Eigen::Index t_len = rewards.size();
  if (values.size() != t_len + 1) throw InputError("gae_advantages: need T+1 values");
  VectorXd adv(t_len);
  double next = 0.0;
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    const double delta = rewards(t) + gamma * values(t + 1) - values(t);
    next = gamma == 0.0 ? delta : delta + gamma * lambda * next;
    adv(t) = next;
  }
  return adv;
}

inline double clip(double ratio, double eps) { return std::clamp(ratio, 1.0 - eps, 1.0 + eps); }

// ---------------------------------------------------------------------------------------------
// Running state normalization

struct Normalizer {
  VectorXd mean;
  VectorXd m2;  ///< sum of squared deviations
  long long count = 0;

  Normalizer() = default;
  explicit Normalizer(int dim) : mean(VectorXd::Zero(dim)), m2(VectorXd::Zero(dim)) {}

  int dim() const { return static_cast<int>(mean.size()); }
  VectorXd variance() const { return count > 0 ? VectorXd(m2 / count) : VectorXd::Zero(dim()); }

  void update(const VectorXd& x) {
    if (x.size() != mean.size()) throw InputError("normalizer: dimension mismatch");
    ++count;
    const VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
  }

  VectorXd apply(const VectorXd& x) const {
    if (x.size() != mean.size()) throw InputError("normalizer: dimension mismatch");
    if (count == 0) return x;
    return ((x - mean).array() / (variance().array() + 1e-8).sqrt()).matrix();
  }

  VectorXd normalize(const VectorXd& x, bool update_stats) {
    if (update_stats) update(x);
    return apply(x);
  }
};

// ---------------------------------------------------------------------------------------------
// Losses with analytic gradients

struct ActorLoss {
  double loss = 0.0;       ///< -(mean clipped surrogate) - c2 * mean entropy
  double surrogate = 0.0;  ///< mean clipped surrogate
  double entropy = 0.0;    ///< mean joint entropy over free heads
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  VectorXd grad;
};

/// states: dim x B (normalized), actions: 3N x B.
inline ActorLoss actor_loss(const Mlp& actor, const HeadLayout& L, const MatrixXd& states,
                            const Eigen::MatrixXi& actions, const VectorXd& old_logp,
                            const VectorXd& adv, double eps, double c2, bool with_grad = true) {
  const Eigen::Index batch = states.cols();
  if (actions.rows() != L.actions() || actions.cols() != batch || old_logp.size() != batch ||
      adv.size() != batch) {
    throw InputError("actor_loss: batch shape mismatch");
  }
  Mlp::Cache cache;
  const MatrixXd z = actor.forward(states, with_grad ? &cache : nullptr);
  if (z.rows() != L.logits()) throw InputError("actor_loss: network output does not match heads");
  MatrixXd dz = MatrixXd::Zero(z.rows(), batch);
  ActorLoss out;
  const double inv_b = 1.0 / static_cast<double>(batch);
  std::vector<double> p(kRhoBuckets);
  for (Eigen::Index i = 0; i < batch; ++i) {
    double logp = 0.0;
    for (int n = 0; n < L.elements; ++n) {
      for (int h = 0; h < 3; ++h) {
        if (!L.is_free(h)) continue;
        const int o = L.offset(n, h);
        softmax_segment(z.col(i).data() + o, kHeadSizes[h], p.data());
        const int a = actions(3 * n + h, i);
        logp += std::log(p[a]);
        double hh = 0.0;
        for (int k = 0; k < kHeadSizes[h]; ++k) hh -= p[k] * std::log(p[k]);
        out.entropy += hh * inv_b;
        if (with_grad) {
          // d(-c2 H / B)/dz_k = c2 p_k (log p_k + H) / B
          for (int k = 0; k < kHeadSizes[h]; ++k) {
            dz(o + k, i) += c2 * inv_b * p[k] * (std::log(p[k]) + hh);
          }
        }
      }
    }
    const double ratio = std::exp(logp - old_logp(i));
    const double a_i = adv(i);
    const bool clipped = (a_i > 0.0 && ratio > 1.0 + eps) || (a_i < 0.0 && ratio < 1.0 - eps);
    out.surrogate += std::min(ratio * a_i, clip(ratio, eps) * a_i) * inv_b;
    out.mean_ratio += ratio * inv_b;
    if (std::abs(ratio - 1.0) > eps) out.clip_fraction += inv_b;
    if (with_grad && !clipped) {
      const double g = -ratio * a_i * inv_b;  // d(-surrogate)/d logp_i
      for (int n = 0; n < L.elements; ++n) {
        for (int h = 0; h < 3; ++h) {
          if (!L.is_free(h)) continue;
          const int o = L.offset(n, h);
          softmax_segment(z.col(i).data() + o, kHeadSizes[h], p.data());
          const int a = actions(3 * n + h, i);
          for (int k = 0; k < kHeadSizes[h]; ++k) dz(o + k, i) += g * ((k == a ? 1.0 : 0.0) - p[k]);
        }
      }
    }
  }
  out.loss = -out.surrogate - c2 * out.entropy;
  if (with_grad) out.grad = actor.backward(cache, dz);
  return out;
}

struct CriticLoss {
  double loss = 0.0;  ///< (1 / 2B) sum (R - v)^2
  VectorXd grad;
};

inline CriticLoss critic_loss(const Mlp& critic, const MatrixXd& states, const VectorXd& returns,
                              bool with_grad = true) {
  if (returns.size() != states.cols()) throw InputError("critic_loss: batch shape mismatch");
  Mlp::Cache cache;
  const MatrixXd v = critic.forward(states, with_grad ? &cache : nullptr);
  const double inv_b = 1.0 / static_cast<double>(states.cols());
  const VectorXd diff = v.row(0).transpose() - returns;
  CriticLoss out;
  out.loss = 0.5 * inv_b * diff.squaredNorm();
  if (with_grad) out.grad = critic.backward(cache, diff.transpose() * inv_b);
  return out;
}

// ---------------------------------------------------------------------------------------------
// PPO agent

struct PpoConfig {
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  double clip_eps = 0.2;
  double gamma = 0.0;
  double gae_lambda = 0.95;
  double entropy_coef = 1e-4;
  int buffer = 512;
  int minibatch = 128;
  int epochs = 4;
  int hidden = 1024;
  int iterations = 200;
  bool normalize_advantages = true;
  OptimizerKind optimizer = OptimizerKind::sgd;
};

/// One collected buffer: normalized states as columns, values with a trailing bootstrap entry.
struct Rollout {
  MatrixXd states;
  Eigen::MatrixXi actions;
  VectorXd logp;
  VectorXd rewards;
  VectorXd values;
};

struct UpdateStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  int minibatches = 0;
};

class PpoAgent {
 public:
  PpoAgent() = default;
  PpoAgent(int state_dim, const HeadLayout& layout, const PpoConfig& cfg, Rng& init_rng)
      : layout(layout), config(cfg), actor(state_dim, cfg.hidden, layout.logits()),
        critic(state_dim, cfg.hidden, 1), normalizer(state_dim) {
    actor.init_orthogonal(init_rng, std::sqrt(2.0), 0.01);
    critic.init_orthogonal(init_rng, std::sqrt(2.0), 1.0);
    actor_opt.kind = critic_opt.kind = cfg.optimizer;
    actor_opt.lr = cfg.lr_actor;
    critic_opt.lr = cfg.lr_critic;
  }

  int state_dim() const { return actor.inputs(); }

  PolicyDistribution distribution(const VectorXd& normalized_state) const {
    return policy_forward(actor, normalized_state, layout);
  }

  double value(const VectorXd& normalized_state) const {
    return critic.forward_one(normalized_state)(0);
  }

  /// Greedy action for a raw state; never touches the normalizer.
  Action greedy(const VectorXd& raw_state) const {
    return greedy_action(distribution(normalizer.apply(raw_state)));
  }

  UpdateStats update(const Rollout& ro, Rng& rng) {
    const Eigen::Index t_len = ro.rewards.size();
    const VectorXd adv_all = gae_advantages(ro.rewards, ro.values, config.gamma, config.gae_lambda);
    const VectorXd ret_all = adv_all + ro.values.head(t_len);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(t_len));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    UpdateStats st;
    const Eigen::Index mb = std::max(1, config.minibatch);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      for (Eigen::Index i = t_len - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(static_cast<std::size_t>(i + 1))]);
      }
      for (Eigen::Index start = 0; start < t_len; start += mb) {
        const Eigen::Index b = std::min(mb, t_len - start);
        MatrixXd s(ro.states.rows(), b);
        Eigen::MatrixXi a(ro.actions.rows(), b);
        VectorXd old(b), adv(b), ret(b);
        for (Eigen::Index k = 0; k < b; ++k) {
          const Eigen::Index idx = order[start + k];
          s.col(k) = ro.states.col(idx);
          a.col(k) = ro.actions.col(idx);
          old(k) = ro.logp(idx);
          adv(k) = adv_all(idx);
          ret(k) = ret_all(idx);
        }
        if (config.normalize_advantages && b > 1) {
          const double m = adv.mean();
          const double sd = std::sqrt((adv.array() - m).square().sum() / static_cast<double>(b));
          adv = ((adv.array() - m) / (sd + 1e-8)).matrix();
        }
        const ActorLoss al =
            actor_loss(actor, layout, s, a, old, adv, config.clip_eps, config.entropy_coef);
        const CriticLoss cl = critic_loss(critic, s, ret);
        if (!al.grad.allFinite() || !std::isfinite(al.loss)) {
          throw NumericalError("ppo update: non-finite actor gradient (epoch " +
                               std::to_string(epoch) + ", loss " + std::to_string(al.loss) + ")");
        }
        if (!cl.grad.allFinite() || !std::isfinite(cl.loss)) {
          throw NumericalError("ppo update: non-finite critic gradient (epoch " +
                               std::to_string(epoch) + ", loss " + std::to_string(cl.loss) + ")");
        }
        if (layout.any_free()) actor_opt.step(actor.params, al.grad);
        critic_opt.step(critic.params, cl.grad);
        st.mean_ratio += al.mean_ratio;
        st.clip_fraction += al.clip_fraction;
        st.entropy += al.entropy;
        st.actor_loss += al.loss;
        st.critic_loss += cl.loss;
        ++st.minibatches;
      }
    }
    if (st.minibatches > 0) {
      const double k = st.minibatches;
      st.mean_ratio /= k;
      st.clip_fraction /= k;
      st.entropy /= k;
      st.actor_loss /= k;
      st.critic_loss /= k;
    }
    return st;
  }

  HeadLayout layout;
  PpoConfig config;
  Mlp actor;
  Mlp critic;
  Normalizer normalizer;
  Optimizer actor_opt;
  Optimizer critic_opt;
};

}  // namespace hris
