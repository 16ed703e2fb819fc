// Multitask Gaussian process regression over TDOA inputs: RBF, cosine and
// composite input kernels, a low-rank task covariance, exact inference via
// Cholesky factorisation, marginal-likelihood training with Adam, and
// posterior prediction mapped back to plate coordinates.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iloc/core.hpp"
#include "iloc/preprocess.hpp"

namespace iloc::gpr {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

enum class KernelKind { Rbf, Cos, Comp };

KernelKind kernel_from_string(const std::string& s);  // "rbf" | "cos" | "comp"
std::string to_string(KernelKind k);

// Hyperparameters live in log-space so the positive quantities stay positive
// under unconstrained gradient steps.
struct KernelSpec {
  KernelKind kind = KernelKind::Comp;
  double log_lengthscale_rbf = 0.0;  // used by RBF and COMP
  double log_scale_cos = 0.0;        // used by COS and COMP
  double log_noise_variance = std::log(1e-2);

  double lengthscale_rbf() const { return std::exp(log_lengthscale_rbf); }
  double scale_cos() const { return std::exp(log_scale_cos); }
  double noise_variance() const { return std::exp(log_noise_variance); }
};

//   rbf(x,x')  = exp(-|x - x'|^2 / (2 l^2))
//   cos(x,x')  = l_cos^2 * x.x' / (|x||x'|)   (0 if either norm is zero)
//   comp(x,x') = rbf(x,x') * cos(x,x')
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Input kernel matrix between row sets (N x N').
Eigen::MatrixXd input_kernel(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& X2);

// Inter-task covariance K_tasks = B B^T + diag(exp(log_diag)); low-rank plus
// positive diagonal keeps it symmetric positive definite by construction.
struct TaskCovariance {
  Eigen::MatrixXd factor;    // T x r
  Eigen::VectorXd log_diag;  // length T

  int tasks() const { return static_cast<int>(factor.rows()); }
  int rank() const { return static_cast<int>(factor.cols()); }
  Eigen::MatrixXd matrix() const;

  static TaskCovariance identity(int tasks, double diag = 1e-2);
};

// Joint covariance over (sample, task) pairs in task-major order:
//   K[(t*N + n), (t'*N' + n')] = k_tasks(t, t') * k_inputs(x_n, x_n')
Eigen::MatrixXd build_joint_kernel(const KernelSpec& spec,
                                   const TaskCovariance& tasks,
                                   const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& X2);

// ---------------------------------------------------------------------------
// Marginal likelihood
// ---------------------------------------------------------------------------

// Trainable parameter order used by the packed gradient:
//   [log_l_rbf?] [log_l_cos?] [log_noise] [B row-major] [log_diag]
// where the first two entries appear only if the kernel kind uses them.
struct LmlResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double jitter = 0.0;  // diagonal jitter the Cholesky needed
};

// Exact log marginal likelihood of the standardized training set (Y stacked
// task-major into one vector) and its gradient w.r.t. the packed parameters.
LmlResult log_marginal_likelihood(const KernelSpec& spec,
                                  const TaskCovariance& tasks,
                                  const Eigen::MatrixXd& X_std,
                                  const Eigen::MatrixXd& Y_std,
                                  bool want_gradient = true);

int packed_size(KernelKind kind, const TaskCovariance& tasks);
Eigen::VectorXd pack_parameters(const KernelSpec& spec,
                                const TaskCovariance& tasks);
void unpack_parameters(const Eigen::VectorXd& theta, KernelSpec& spec,
                       TaskCovariance& tasks);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Prediction {
  Eigen::VectorXd mean;      // per task, mm
  Eigen::VectorXd variance;  // per task, mm^2
};

struct FitOptions {
  double learning_rate = 0.1;
  int max_iters = 5000;
  std::uint64_t seed = 0;  // recorded for provenance; the optimiser itself
                           // is deterministic
  preprocess::Mode input_mode = preprocess::Mode::SampleStd;
  preprocess::Mode output_mode = preprocess::Mode::FeatureStd;
  // Pin the noise variance instead of training it (e.g. at the jitter floor
  // for noise-free interpolation studies).
  std::optional<double> fixed_noise_variance;
  // The cosine scale l_cos can be frozen at exp(0)=1 instead of trained.
  bool train_cos_scale = true;
};

class GprModel {
 public:
  // Trains hyperparameters by Adam ascent on the log marginal likelihood.
  static GprModel fit(const Eigen::MatrixXd& X_raw,
                      const Eigen::MatrixXd& Y_raw, KernelKind kind,
                      const FitOptions& opts = {});

  // Builds a model at the given hyperparameters without optimisation.
  static GprModel make(const Eigen::MatrixXd& X_raw,
                       const Eigen::MatrixXd& Y_raw, const KernelSpec& spec,
                       const TaskCovariance& tasks,
                       preprocess::Mode input_mode,
                       preprocess::Mode output_mode);

  Prediction predict(const Eigen::VectorXd& x_raw) const;

  double log_marginal_likelihood() const { return lml_; }
  const KernelSpec& kernel() const { return spec_; }
  const TaskCovariance& task_covariance() const { return tasks_; }
  double jitter() const { return jitter_; }
  int num_train() const { return static_cast<int>(x_std_.rows()); }
  int input_dim() const { return static_cast<int>(x_std_.cols()); }
  int num_tasks() const { return tasks_.tasks(); }
  const preprocess::Standardizer& input_standardizer() const { return in_std_; }
  const preprocess::Standardizer& output_standardizer() const { return out_std_; }
  const Eigen::MatrixXd& training_inputs_std() const { return x_std_; }
  const Eigen::MatrixXd& training_outputs_std() const { return y_std_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_l_; }

  // JSON + companion `<name>.data.csv` holding the standardized training
  // matrices at full precision for exact reload.
  void save(const std::string& json_path) const;
  static GprModel load(const std::string& json_path);

 private:
  GprModel() = default;
  void finalize();  // factorise, cache alpha, check invariants

  KernelSpec spec_;
  TaskCovariance tasks_;
  preprocess::Standardizer in_std_;
  preprocess::Standardizer out_std_;
  Eigen::MatrixXd x_std_;   // N x M
  Eigen::MatrixXd y_std_;   // N x T
  Eigen::MatrixXd chol_l_;  // lower Cholesky of K_joint + noise + jitter
  Eigen::VectorXd alpha_;   // (K + sigma_n^2 I)^-1 vec(Y)
  double lml_ = 0.0;
  double jitter_ = 0.0;
};

}  // namespace iloc::gpr
