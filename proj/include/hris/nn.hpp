#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "hris/error.hpp"
#include "hris/rng.hpp"

namespace hris {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Orthogonal rows-by-cols matrix scaled by gain (QR of a Gaussian matrix, sign-fixed).
inline MatrixXd orthogonal_matrix(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const int r = tall ? rows : cols;
  const int c = tall ? cols : rows;
  MatrixXd g(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(r, c);
  const MatrixXd rr = qr.matrixQR().topLeftCorner(c, c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return gain * (tall ? q : MatrixXd(q.transpose()));
}

/// One-hidden-layer tanh network. Parameters live in one flat vector: W1 (hidden x in), b1,
/// W2 (out x hidden), b2, all column-major. Batches are column-stacked samples.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int inputs, int hidden, int outputs)
      : inputs_(inputs), hidden_(hidden), outputs_(outputs),
        params(VectorXd::Zero(static_cast<Eigen::Index>(hidden) * inputs + hidden +
                              static_cast<Eigen::Index>(outputs) * hidden + outputs)) {
    if (inputs < 1 || hidden < 1 || outputs < 1) throw InputError("Mlp: sizes must be >= 1");
  }

  int inputs() const { return inputs_; }
  int hidden() const { return hidden_; }
  int outputs() const { return outputs_; }
  Eigen::Index size() const { return params.size(); }

  Eigen::Map<const MatrixXd> w1() const { return {params.data(), hidden_, inputs_}; }
  Eigen::Map<const VectorXd> b1() const { return {params.data() + off_b1(), hidden_}; }
  Eigen::Map<const MatrixXd> w2() const { return {params.data() + off_w2(), outputs_, hidden_}; }
  Eigen::Map<const VectorXd> b2() const { return {params.data() + off_b2(), outputs_}; }

  /// Orthogonal weights, zero biases.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
    Eigen::Map<MatrixXd>(params.data(), hidden_, inputs_) =
        orthogonal_matrix(hidden_, inputs_, hidden_gain, rng);
    Eigen::Map<MatrixXd>(params.data() + off_w2(), outputs_, hidden_) =
        orthogonal_matrix(outputs_, hidden_, output_gain, rng);
    params.segment(off_b1(), hidden_).setZero();
    params.segment(off_b2(), outputs_).setZero();
  }

  struct Cache {
    MatrixXd x;
    MatrixXd h;
  };

  MatrixXd forward(const MatrixXd& x, Cache* cache = nullptr) const {
    if (x.rows() != inputs_) {
      throw InputError("Mlp: input dimension " + std::to_string(x.rows()) + ", expected " +
                       std::to_string(inputs_));
    }
    MatrixXd h = ((w1() * x).colwise() + b1()).array().tanh().matrix();
    MatrixXd y = (w2() * h).colwise() + b2();
    if (cache) {
      cache->x = x;
      cache->h = std::move(h);
    }
    return y;
  }

  VectorXd forward_one(const VectorXd& x) const { return forward(x); }

  /// Parameter gradient of sum_i <dy_i, y_i> given the forward cache.
  VectorXd backward(const Cache& c, const MatrixXd& dy) const {
    VectorXd g(params.size());
    Eigen::Map<MatrixXd>(g.data() + off_w2(), outputs_, hidden_) = dy * c.h.transpose();
    g.segment(off_b2(), outputs_) = dy.rowwise().sum();
    const MatrixXd da = ((w2().transpose() * dy).array() * (1.0 - c.h.array().square())).matrix();
    Eigen::Map<MatrixXd>(g.data(), hidden_, inputs_) = da * c.x.transpose();
    g.segment(off_b1(), hidden_) = da.rowwise().sum();
    return g;
  }

 private:
  Eigen::Index off_b1() const { return static_cast<Eigen::Index>(hidden_) * inputs_; }
  Eigen::Index off_w2() const { return off_b1() + hidden_; }
  Eigen::Index off_b2() const { return off_w2() + static_cast<Eigen::Index>(outputs_) * hidden_; }

  int inputs_ = 0, hidden_ = 0, outputs_ = 0;

 public:
  VectorXd params;
};

enum class OptimizerKind { sgd, adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw InputError("unknown optimizer '" + s + "'");
}

/// Descends a flat parameter vector: plain SGD or Adam.
struct Optimizer {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long steps = 0;
  VectorXd m, v;

  void step(VectorXd& params, const VectorXd& grad) {
    ++steps;
    if (kind == OptimizerKind::sgd) {
      params.noalias() -= lr * grad;
      return;
    }
    if (m.size() != params.size()) {
      m = VectorXd::Zero(params.size());
      v = VectorXd::Zero(params.size());
    }
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace hris
