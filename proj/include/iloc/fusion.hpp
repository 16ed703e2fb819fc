// Bayesian model averaging across the per-kernel GP models: marginal
// likelihood weights, inverse-variance weights, their renormalised product,
// and the weighted fusion of predictions.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iloc/core.hpp"
#include "iloc/gpr.hpp"

namespace iloc::fusion {

// Floor applied to predictive variances before inverse-variance weighting,
// so variances clamped to ~0 upstream cannot blow the ratio up.
inline constexpr double kVarianceFloor = 1e-12;

// Softmax over log marginal likelihoods (log-sum-exp shifted; the raw
// likelihood ratio overflows for realistic magnitudes).
Eigen::VectorXd ml_weights(const Eigen::VectorXd& lmls);

// Inverse-variance weights for one task. All-floored input degrades to
// uniform with a warning.
Eigen::VectorXd unc_weights(const Eigen::VectorXd& variances);

// Renormalised elementwise product; an all-zero product degrades to uniform
// with a warning.
Eigen::VectorXd combine_weights(const Eigen::VectorXd& w_ml,
                                const Eigen::VectorXd& w_unc);

// One multitask model gives a single LML but per-task variances, so the ML
// weight is shared across tasks while the uncertainty and combined weights
// are per task (columns).
struct FusionWeights {
  Eigen::VectorXd ml;        // kernels
  Eigen::MatrixXd unc;       // kernels x tasks
  Eigen::MatrixXd combined;  // kernels x tasks
};

FusionWeights compute_weights(const Eigen::VectorXd& lmls,
                              const std::vector<gpr::Prediction>& predictions);

struct FusedPrediction {
  std::vector<std::string> kernels;
  std::vector<gpr::Prediction> per_kernel;
  FusionWeights weights;
  Eigen::VectorXd mean;      // per task, mm
  Eigen::VectorXd variance;  // per task, mm^2
};

// Weighted sums per task using the combined weights. The default variance is
// the plain weighted mean of the per-kernel variances; full_bma_variance adds
// the between-model dispersion term sum w (mu^2) - mu_fused^2.
FusedPrediction fuse(const std::vector<std::string>& kernels,
                     const std::vector<gpr::Prediction>& predictions,
                     const FusionWeights& weights,
                     bool full_bma_variance = false);

// Convenience: weights from the models' LMLs and variances, then fuse.
FusedPrediction fuse_models(const std::vector<std::string>& kernels,
                            const Eigen::VectorXd& lmls,
                            const std::vector<gpr::Prediction>& predictions,
                            bool full_bma_variance = false);

}  // namespace iloc::fusion
