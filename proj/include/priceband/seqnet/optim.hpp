#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>

#include "priceband/error.hpp"
#include "priceband/seqnet/network.hpp"

namespace priceband::seqnet {

/// Plain SGD with optional parameter clamping. There is no per-parameter
/// accumulator; the struct is the whole optimizer state.
template <typename Scalar>
struct SgdOptimizer {
  Scalar learning_rate = Scalar(0.02);
  Scalar clip_limit = Scalar(0.5);

  void validate() const {
    if (!(learning_rate > Scalar(0)) || !(clip_limit > Scalar(0))) {
      throw Error(ErrorCode::InvalidArgument, "learning rate and clip limit must be positive");
    }
  }
};

/// params <- params - lr * grad, then (when clip is set) clamp every entry to
/// [-clip_limit, clip_limit].
template <typename Scalar, typename DerivedP, typename DerivedG>
void sgd_step(Eigen::MatrixBase<DerivedP>& params, const Eigen::MatrixBase<DerivedG>& grad,
              const SgdOptimizer<Scalar>& opt, bool clip) {
  opt.validate();
  if (params.size() != grad.size()) throw Error(ErrorCode::ShapeMismatch, "gradient length mismatch");
  if (!grad.allFinite()) throw Error(ErrorCode::NonFiniteValue, "gradient is not finite");
  params -= opt.learning_rate * grad;
  if (clip) params = params.cwiseMax(-opt.clip_limit).cwiseMin(opt.clip_limit);
}

template <typename Scalar>
void sgd_step(Network<Scalar>& net, const typename Network<Scalar>::Vector& grad, const SgdOptimizer<Scalar>& opt,
              bool clip) {
  auto& p = net.flat();
  sgd_step(p, grad, opt, clip);
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad;
};

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
/// with central differences of step eps. `fn` maps a parameter vector to its
/// loss and analytic gradient.
template <typename Scalar>
Scalar gradient_check(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
                      const std::function<LossAndGradient<Scalar>(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& fn,
                      Scalar eps) {
  if (!(eps > Scalar(0))) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const auto base = fn(params);
  if (!std::isfinite(base.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite at the check point");
  if (base.grad.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "gradient length mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probe = params;
  Scalar worst = Scalar(0);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + eps;
    const Scalar up = fn(probe).loss;
    probe(i) = params(i) - eps;
    const Scalar down = fn(probe).loss;
    probe(i) = params(i);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss is not finite near parameter " + std::to_string(i));
    }
    const Scalar numeric = (up - down) / (Scalar(2) * eps);
    const Scalar analytic = base.grad(i);
    // Entries below the floor are compared absolutely; central differences carry ~1e-11 roundoff.
    const Scalar denom = std::max({std::abs(analytic), std::abs(numeric), Scalar(1e-6)});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace priceband::seqnet
