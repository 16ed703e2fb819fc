#include "iloc/preprocess.hpp"

#include <cmath>
#include <iostream>

namespace iloc::preprocess {

Mode mode_from_string(const std::string& s) {
  if (s == "ss") return Mode::SampleStd;
  if (s == "fs") return Mode::FeatureStd;
  if (s == "none") return Mode::None;
  throw Error("unknown standardisation mode '" + s + "' (want ss|fs|none)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::SampleStd: return "ss";
    case Mode::FeatureStd: return "fs";
    case Mode::None: return "none";
  }
  throw Error("unreachable standardisation mode");
}

void Standardizer::fit(const Eigen::MatrixXd& X) {
  if (mode_ != Mode::FeatureStd) {
    fitted_ = true;
    return;
  }
  if (X.rows() < 2) {
    throw Error("feature standardisation needs at least 2 samples");
  }
  means_ = X.colwise().mean();
  stds_.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    // population standard deviation (divide by N)
    const double var =
        (X.col(j).array() - means_(j)).square().sum() / double(X.rows());
    stds_(j) = std::sqrt(var);
    if (!(stds_(j) > 0.0)) {
      throw Error("feature standardisation: column " + std::to_string(j + 1) +
                  " has zero variance");
    }
  }
  fitted_ = true;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
  switch (mode_) {
    case Mode::None:
      return X;
    case Mode::SampleStd: {
      Eigen::MatrixXd out = X;
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        if (norm > 0.0) {
          out.row(i) /= norm;
        } else {
          std::cerr << "warning: sample standardisation met a zero-norm row "
                       "(singularity-point TDOA); leaving it as zeros\n";
        }
      }
      return out;
    }
    case Mode::FeatureStd: {
      if (!fitted_) throw Error("feature standardizer used before fit");
      if (X.cols() != means_.size()) {
        throw Error("feature standardizer fitted on " +
                    std::to_string(means_.size()) + " columns, got " +
                    std::to_string(X.cols()));
      }
      Eigen::MatrixXd out = X;
      out.rowwise() -= means_.transpose();
      out.array().rowwise() /= stds_.transpose().array();
      return out;
    }
  }
  throw Error("unreachable standardisation mode");
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd>
Standardizer::inverse_transform_outputs(const Eigen::MatrixXd& y_std,
                                        const Eigen::MatrixXd& v_std) const {
  if (y_std.rows() != v_std.rows() || y_std.cols() != v_std.cols()) {
    throw Error("mean and variance shapes differ");
  }
  switch (mode_) {
    case Mode::None:
      return {y_std, v_std};
    case Mode::SampleStd:
      throw Error("sample standardisation is not an output mode");
    case Mode::FeatureStd: {
      if (!fitted_) throw Error("feature standardizer used before fit");
      Eigen::MatrixXd y = y_std;
      y.array().rowwise() *= stds_.transpose().array();
      y.rowwise() += means_.transpose();
      Eigen::MatrixXd v = v_std;
      v.array().rowwise() *= stds_.transpose().array().square();
      return {y, v};
    }
  }
  throw Error("unreachable standardisation mode");
}

Standardizer Standardizer::restore(Mode mode, Eigen::VectorXd means,
                                   Eigen::VectorXd stds) {
  Standardizer s(mode);
  if (mode == Mode::FeatureStd) {
    if (means.size() != stds.size() || means.size() == 0) {
      throw Error("restored standardizer state is inconsistent");
    }
    for (Eigen::Index j = 0; j < stds.size(); ++j) {
      if (!(stds(j) > 0.0)) {
        throw Error("restored standardizer has a non-positive std");
      }
    }
    s.means_ = std::move(means);
    s.stds_ = std::move(stds);
  }
  s.fitted_ = true;
  return s;
}

}  // namespace iloc::preprocess
