#include "iloc/fusion.hpp"

#include <cmath>
#include <iostream>

namespace iloc::fusion {

Eigen::VectorXd ml_weights(const Eigen::VectorXd& lmls) {
  if (lmls.size() == 0) throw Error("no marginal likelihoods given");
  for (Eigen::Index i = 0; i < lmls.size(); ++i) {
    if (!std::isfinite(lmls(i))) {
      throw Error("non-finite log marginal likelihood at kernel " +
                  std::to_string(i + 1));
    }
  }
  const double shift = lmls.maxCoeff();
  Eigen::VectorXd w = (lmls.array() - shift).exp();
  return w / w.sum();
}

Eigen::VectorXd unc_weights(const Eigen::VectorXd& variances) {
  if (variances.size() == 0) throw Error("no variances given");
  Eigen::VectorXd inv(variances.size());
  bool all_floored = true;
  for (Eigen::Index i = 0; i < variances.size(); ++i) {
    if (!std::isfinite(variances(i)) || variances(i) < 0.0) {
      throw Error("invalid predictive variance at kernel " +
                  std::to_string(i + 1));
    }
    const double v = std::max(variances(i), kVarianceFloor);
    if (variances(i) > kVarianceFloor) all_floored = false;
    inv(i) = 1.0 / v;
  }
  if (all_floored) {
    std::cerr << "warning: all predictive variances at the floor; "
                 "uncertainty weights fall back to uniform\n";
    return Eigen::VectorXd::Constant(variances.size(),
                                     1.0 / double(variances.size()));
  }
  return inv / inv.sum();
}

Eigen::VectorXd combine_weights(const Eigen::VectorXd& w_ml,
                                const Eigen::VectorXd& w_unc) {
  if (w_ml.size() != w_unc.size() || w_ml.size() == 0) {
    throw Error("weight vectors must be non-empty and the same length");
  }
  auto check = [](const Eigen::VectorXd& w, const char* name) {
    if (w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > 1e-9) {
      throw Error(std::string(name) + " is not a probability vector");
    }
  };
  check(w_ml, "marginal-likelihood weight");
  check(w_unc, "uncertainty weight");
  Eigen::VectorXd prod = w_ml.cwiseProduct(w_unc);
  const double total = prod.sum();
  if (!(total > 0.0)) {
    std::cerr << "warning: all combined weight products are zero; "
                 "falling back to uniform\n";
    return Eigen::VectorXd::Constant(w_ml.size(), 1.0 / double(w_ml.size()));
  }
  return prod / total;
}

FusionWeights compute_weights(
    const Eigen::VectorXd& lmls,
    const std::vector<gpr::Prediction>& predictions) {
  if (static_cast<Eigen::Index>(predictions.size()) != lmls.size() ||
      predictions.empty()) {
    throw Error("kernel count mismatch between LMLs and predictions");
  }
  const Eigen::Index k = lmls.size();
  const Eigen::Index t = predictions.front().mean.size();
  for (const auto& p : predictions) {
    if (p.mean.size() != t || p.variance.size() != t) {
      throw Error("predictions disagree on the task count");
    }
  }

  FusionWeights w;
  w.ml = ml_weights(lmls);
  w.unc.resize(k, t);
  w.combined.resize(k, t);
  for (Eigen::Index task = 0; task < t; ++task) {
    Eigen::VectorXd vars(k);
    for (Eigen::Index i = 0; i < k; ++i) vars(i) = predictions[i].variance(task);
    w.unc.col(task) = unc_weights(vars);
    w.combined.col(task) = combine_weights(w.ml, w.unc.col(task));
  }
  return w;
}

FusedPrediction fuse(const std::vector<std::string>& kernels,
                     const std::vector<gpr::Prediction>& predictions,
                     const FusionWeights& weights, bool full_bma_variance) {
  if (kernels.size() != predictions.size() || kernels.empty()) {
    throw Error("kernel name list does not match the prediction list");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(kernels.size());
  const Eigen::Index t = predictions.front().mean.size();
  if (weights.combined.rows() != k || weights.combined.cols() != t) {
    throw Error("weight matrix shape does not match predictions");
  }

  FusedPrediction out;
  out.kernels = kernels;
  out.per_kernel = predictions;
  out.weights = weights;
  out.mean = Eigen::VectorXd::Zero(t);
  out.variance = Eigen::VectorXd::Zero(t);
  for (Eigen::Index task = 0; task < t; ++task) {
    double mu = 0.0, var = 0.0, second_moment = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double w = weights.combined(i, task);
      mu += w * predictions[i].mean(task);
      var += w * predictions[i].variance(task);
      second_moment += w * predictions[i].mean(task) * predictions[i].mean(task);
    }
    out.mean(task) = mu;
    out.variance(task) =
        full_bma_variance ? var + second_moment - mu * mu : var;
  }
  return out;
}

FusedPrediction fuse_models(const std::vector<std::string>& kernels,
                            const Eigen::VectorXd& lmls,
                            const std::vector<gpr::Prediction>& predictions,
                            bool full_bma_variance) {
  return fuse(kernels, predictions, compute_weights(lmls, predictions),
              full_bma_variance);
}

}  // namespace iloc::fusion
