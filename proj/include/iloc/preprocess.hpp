// Input/output standardisation: sample standardisation (each row scaled to a
// unit vector) and feature standardisation (each column to zero mean, unit
// variance), with the inverse maps needed to bring predictions back to mm.
#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>

#include "iloc/core.hpp"

namespace iloc::preprocess {

enum class Mode { SampleStd, FeatureStd, None };

Mode mode_from_string(const std::string& s);  // "ss" | "fs" | "none"
std::string to_string(Mode m);

class Standardizer {
 public:
  explicit Standardizer(Mode mode = Mode::None) : mode_(mode) {}

  Mode mode() const { return mode_; }
  bool fitted() const { return fitted_; }
  const Eigen::VectorXd& means() const { return means_; }
  const Eigen::VectorXd& stds() const { return stds_; }

  // FS learns per-column mean and population standard deviation; SS and NONE
  // keep no state. A constant column under FS is an error (zero variance).
  void fit(const Eigen::MatrixXd& X);

  // SS: rows divided by their Euclidean norm; an all-zero row (the
  // singularity-point TDOA) stays zero and only emits a warning, since the
  // kernels are specified to cope with it. FS: (x - mean) / std per column.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;

  // Maps standardized predictions back: means via y*std + mean, variances
  // via v*std^2. Only meaningful for FS (or NONE, the identity).
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> inverse_transform_outputs(
      const Eigen::MatrixXd& y_std, const Eigen::MatrixXd& v_std) const;

  // Restores a fitted FS standardizer from stored state.
  static Standardizer restore(Mode mode, Eigen::VectorXd means,
                              Eigen::VectorXd stds);

 private:
  Mode mode_;
  bool fitted_ = false;
  Eigen::VectorXd means_;
  Eigen::VectorXd stds_;
};

}  // namespace iloc::preprocess
