// Copyright 2026 The Dodgeskin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "dodge/errors.hpp"
#include "dodge/rng.hpp"
#include "dodge/vec_env.hpp"

namespace dodge {

inline constexpr int kHiddenUnits = 32;
inline constexpr double kMinStd = 1e-4;
inline constexpr double kMaxStd = 2.0;

// input -> 32 -> 32 -> output with tanh hidden activations and a linear
// head. Samples are columns.
template <typename Scalar>
struct Mlp {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::array<Matrix, 3> weights;
  std::array<Vector, 3> biases;

  struct Cache {
    Matrix input;
    Matrix h1;
    Matrix h2;
  };

  Mlp() = default;
  Mlp(int input_dim, int output_dim) { resize(input_dim, output_dim); }

  void resize(int input_dim, int output_dim) {
    weights[0].setZero(kHiddenUnits, input_dim);
    weights[1].setZero(kHiddenUnits, kHiddenUnits);
    weights[2].setZero(output_dim, kHiddenUnits);
    biases[0].setZero(kHiddenUnits);
    biases[1].setZero(kHiddenUnits);
    biases[2].setZero(output_dim);
  }

  int input_dim() const { return static_cast<int>(weights[0].cols()); }
  int output_dim() const { return static_cast<int>(weights[2].rows()); }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (int l = 0; l < 3; ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void set_zero() {
    for (int l = 0; l < 3; ++l) {
      weights[l].setZero();
      biases[l].setZero();
    }
  }

  template <typename Derived>
  Matrix forward(const Eigen::MatrixBase<Derived>& x, Cache* cache) const {
    if (x.rows() != input_dim()) {
      throw ConfigError("mlp: input dimension mismatch");
    }
    Matrix h1 = ((weights[0] * x).colwise() + biases[0]).array().tanh();
    Matrix h2 = ((weights[1] * h1).colwise() + biases[1]).array().tanh();
    Matrix y = (weights[2] * h2).colwise() + biases[2];
    if (cache) {
      cache->input = x;
      cache->h1 = std::move(h1);
      cache->h2 = std::move(h2);
    }
    return y;
  }

  // Accumulates dL/dparams into `grad` given dL/dy for the cached batch.
  void backward(const Cache& cache, const Matrix& grad_out, Mlp& grad) const {
    grad.weights[2].noalias() += grad_out * cache.h2.transpose();
    grad.biases[2] += grad_out.rowwise().sum();
    Matrix d2 = (weights[2].transpose() * grad_out).array() *
                (Scalar(1) - cache.h2.array().square());
    grad.weights[1].noalias() += d2 * cache.h1.transpose();
    grad.biases[1] += d2.rowwise().sum();
    Matrix d1 = (weights[1].transpose() * d2).array() *
                (Scalar(1) - cache.h1.array().square());
    grad.weights[0].noalias() += d1 * cache.input.transpose();
    grad.biases[0] += d1.rowwise().sum();
  }

  // Visits every parameter block in a fixed order.
  template <typename Fn>
  void for_each_block(Fn&& fn) {
    for (int l = 0; l < 3; ++l) {
      fn(weights[l].data(), weights[l].size());
      fn(biases[l].data(), biases[l].size());
    }
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    for (int l = 0; l < 3; ++l) {
      fn(weights[l].data(), weights[l].size());
      fn(biases[l].data(), biases[l].size());
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    for (int l = 0; l < 3; ++l) {
      out.weights[l] = weights[l].template cast<Other>();
      out.biases[l] = biases[l].template cast<Other>();
    }
    return out;
  }
};

// Orthogonal initialization: rows (or columns) of each weight matrix are
// orthonormal and scaled by `gain`; biases start at zero.
template <typename Scalar>
void orthogonal_init(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& w,
                     double gain, Rng& rng) {
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the factorization is unique.
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (d[j] < 0) q.col(j) *= -1.0;
  }
  const Eigen::MatrixXd out = rows >= cols ? q : Eigen::MatrixXd(q.transpose());
  w = (gain * out).template cast<Scalar>();
}

// Gaussian actor with state-independent log standard deviation plus an
// asymmetric critic that sees extra privileged inputs.
template <typename Scalar>
struct ActorCritic {
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;

  Mlp<Scalar> actor;
  Vector log_std;
  Mlp<Scalar> critic;

  ActorCritic() = default;
  ActorCritic(int actor_dim, int critic_dim, int action_dim)
      : actor(actor_dim, action_dim),
        log_std(Vector::Zero(action_dim)),
        critic(critic_dim, 1) {}

  int actor_dim() const { return actor.input_dim(); }
  int critic_dim() const { return critic.input_dim(); }
  int action_dim() const { return actor.output_dim(); }

  std::size_t num_params() const {
    return actor.num_params() + log_std.size() + critic.num_params();
  }

  void set_zero() {
    actor.set_zero();
    log_std.setZero();
    critic.set_zero();
  }

  template <typename Fn>
  void for_each_block(Fn&& fn) {
    actor.for_each_block(fn);
    fn(log_std.data(), log_std.size());
    critic.for_each_block(fn);
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    actor.for_each_block(fn);
    fn(log_std.data(), log_std.size());
    critic.for_each_block(fn);
  }

  template <typename Other>
  ActorCritic<Other> cast() const {
    ActorCritic<Other> out;
    out.actor = actor.template cast<Other>();
    out.log_std = log_std.template cast<Other>();
    out.critic = critic.template cast<Other>();
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_block([&](const Scalar* p, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) ok = ok && std::isfinite(p[i]);
    });
    return ok;
  }
};

template <typename Scalar>
ActorCritic<Scalar> make_actor_critic(int actor_dim, int critic_dim,
                                      int action_dim, std::uint64_t seed) {
  ActorCritic<Scalar> ac(actor_dim, critic_dim, action_dim);
  Rng rng(seed);
  orthogonal_init(ac.actor.weights[0], 1.0, rng);
  orthogonal_init(ac.actor.weights[1], 1.0, rng);
  orthogonal_init(ac.actor.weights[2], 0.01, rng);
  orthogonal_init(ac.critic.weights[0], 1.0, rng);
  orthogonal_init(ac.critic.weights[1], 1.0, rng);
  orthogonal_init(ac.critic.weights[2], 1.0, rng);
  ac.log_std.setConstant(static_cast<Scalar>(std::log(0.5)));
  return ac;
}

// exp(log_std) clamped to [kMinStd, kMaxStd]; `active` marks entries whose
// clamp is not binding (gradient passes through).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> policy_std(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& log_std,
    Eigen::Array<bool, Eigen::Dynamic, 1>* active = nullptr) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> std_dev(log_std.size());
  if (active) active->resize(log_std.size());
  for (Eigen::Index j = 0; j < log_std.size(); ++j) {
    const Scalar raw = std::exp(log_std[j]);
    std_dev[j] = std::clamp(raw, Scalar(kMinStd), Scalar(kMaxStd));
    if (active) (*active)[j] = raw > Scalar(kMinStd) && raw < Scalar(kMaxStd);
  }
  return std_dev;
}

template <typename Scalar>
struct ActorOutput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> std_dev;
};

template <typename Scalar, typename Derived>
ActorOutput<Scalar> actor_forward(const ActorCritic<Scalar>& ac,
                                  const Eigen::MatrixBase<Derived>& obs,
                                  typename Mlp<Scalar>::Cache* cache = nullptr) {
  return {ac.actor.forward(obs, cache), policy_std(ac.log_std)};
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> critic_forward(
    const ActorCritic<Scalar>& ac, const Eigen::MatrixBase<Derived>& obs,
    typename Mlp<Scalar>::Cache* cache = nullptr) {
  return ac.critic.forward(obs, cache);
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Diagonal Gaussian log density; one value per column.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> log_prob(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& mean,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& std_dev,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& action) {
  const auto inv_var = std_dev.array().square().inverse().matrix();
  const Scalar log_norm =
      std_dev.array().log().sum() +
      static_cast<Scalar>(kHalfLog2Pi) * static_cast<Scalar>(std_dev.size());
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> out(mean.cols());
  for (Eigen::Index c = 0; c < mean.cols(); ++c) {
    const auto diff = (action.col(c) - mean.col(c)).array();
    out[c] = -Scalar(0.5) * (diff.square() * inv_var.array()).sum() - log_norm;
  }
  return out;
}

template <typename Scalar>
Scalar gaussian_entropy(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& std_dev) {
  return (Scalar(0.5 + kHalfLog2Pi) + std_dev.array().log()).sum();
}

template <typename Scalar>
struct ActionSample {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> action;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> log_prob;
};

template <typename Scalar>
ActionSample<Scalar> sample_and_logprob(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& mean,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& std_dev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSample<Scalar> s;
  s.action.resize(mean.rows(), mean.cols());
  for (Eigen::Index c = 0; c < mean.cols(); ++c) {
    for (Eigen::Index r = 0; r < mean.rows(); ++r) {
      s.action(r, c) =
          mean(r, c) + std_dev[r] * static_cast<Scalar>(normal(rng));
    }
  }
  s.log_prob = log_prob<Scalar>(mean, std_dev, s.action);
  return s;
}

using PolicyParams = ActorCritic<Real>;

// Binary checkpoint: 8-byte magic "DODGECK1", uint32 version, uint32
// actor_dim, critic_dim, action_dim, hidden; then float32 little-endian
// parameters in for_each_block order (actor W1 b1 W2 b2 W3 b3, log_std,
// critic W1 b1 W2 b2 W3 b3), each matrix column-major.
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace dodge
