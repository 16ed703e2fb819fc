#include "iloc/gpr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iloc::gpr {

using nlohmann::json;

KernelKind kernel_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::Rbf;
  if (s == "cos") return KernelKind::Cos;
  if (s == "comp") return KernelKind::Comp;
  throw Error("unknown kernel '" + s + "' (want rbf|cos|comp)");
}

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Cos: return "cos";
    case KernelKind::Comp: return "comp";
  }
  throw Error("unreachable kernel kind");
}

namespace {

bool uses_rbf(KernelKind k) { return k != KernelKind::Cos; }
bool uses_cos(KernelKind k) { return k != KernelKind::Rbf; }

constexpr double kJitterFloor = 1e-8;
constexpr double kJitterCeiling = 1e-4;

// Rows normalised to unit length; exact-zero rows stay zero, which makes the
// cosine similarity of a zero vector 0 against everything (including itself).
Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out = X;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

struct InputParts {
  Eigen::MatrixXd sqdist;  // squared Euclidean distances
  Eigen::MatrixXd cossim;  // cosine similarities, 0 where a row is zero
};

InputParts compute_parts(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X2) {
  InputParts p;
  p.sqdist.resize(X.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X2.rows(); ++j) {
      p.sqdist(i, j) = (X.row(i) - X2.row(j)).squaredNorm();
    }
  }
  p.cossim = normalized_rows(X) * normalized_rows(X2).transpose();
  return p;
}

Eigen::MatrixXd kernel_from_parts(const KernelSpec& spec,
                                  const InputParts& parts) {
  Eigen::MatrixXd k;
  if (uses_rbf(spec.kind)) {
    const double l2 = spec.lengthscale_rbf() * spec.lengthscale_rbf();
    k = (-parts.sqdist.array() / (2.0 * l2)).exp().matrix();
  }
  if (uses_cos(spec.kind)) {
    const Eigen::MatrixXd kc =
        spec.scale_cos() * spec.scale_cos() * parts.cossim;
    k = uses_rbf(spec.kind) ? Eigen::MatrixXd(k.cwiseProduct(kc)) : kc;
  }
  return k;
}

// Task-major Kronecker product: block (t, t') is Kt(t, t') * Kin.
Eigen::MatrixXd kron_tasks(const Eigen::MatrixXd& kt,
                           const Eigen::MatrixXd& kin) {
  const Eigen::Index t_n = kt.rows(), t_m = kt.cols();
  const Eigen::Index n = kin.rows(), m = kin.cols();
  Eigen::MatrixXd out(t_n * n, t_m * m);
  for (Eigen::Index a = 0; a < t_n; ++a) {
    for (Eigen::Index b = 0; b < t_m; ++b) {
      out.block(a * n, b * m, n, m) = kt(a, b) * kin;
    }
  }
  return out;
}

Eigen::VectorXd stack_tasks(const Eigen::MatrixXd& y) {
  Eigen::VectorXd v(y.size());
  for (Eigen::Index t = 0; t < y.cols(); ++t) {
    v.segment(t * y.rows(), y.rows()) = y.col(t);
  }
  return v;
}

struct Factorisation {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky with the jitter ladder: the floor is always applied, escalation
// by 10x stops at the ceiling.
Factorisation factorize(Eigen::MatrixXd k_joint, double noise_variance) {
  Factorisation f;
  Eigen::MatrixXd base = std::move(k_joint);
  base.diagonal().array() += noise_variance;
  for (double jit = kJitterFloor; jit <= kJitterCeiling * 1.0001; jit *= 10.0) {
    Eigen::MatrixXd ky = base;
    ky.diagonal().array() += jit;
    f.llt.compute(ky);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jit;
      return f;
    }
  }
  throw Error("kernel matrix not positive definite even at maximum jitter");
}

// Per-block Frobenius inner products <G_block(t,t'), M> used to assemble all
// Kronecker-structured gradient traces cheaply.
Eigen::MatrixXd block_inner(const Eigen::MatrixXd& g, const Eigen::MatrixXd& m,
                            int tasks) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd w(tasks, tasks);
  for (int a = 0; a < tasks; ++a) {
    for (int b = 0; b < tasks; ++b) {
      w(a, b) = g.block(a * n, b * n, n, n).cwiseProduct(m).sum();
    }
  }
  return w;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw Error("kernel arguments have different dimensions");
  }
  double k = 1.0;
  if (uses_rbf(spec.kind)) {
    const double l = spec.lengthscale_rbf();
    k *= std::exp(-(x - y).squaredNorm() / (2.0 * l * l));
  }
  if (uses_cos(spec.kind)) {
    const double nx = x.norm(), ny = y.norm();
    const double c =
        (nx > 0.0 && ny > 0.0) ? (x / nx).dot(y / ny) : 0.0;
    k *= spec.scale_cos() * spec.scale_cos() * c;
  }
  return k;
}

Eigen::MatrixXd input_kernel(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& X2) {
  if (X.cols() != X2.cols()) {
    throw Error("input matrices have different feature counts");
  }
  return kernel_from_parts(spec, compute_parts(X, X2));
}

Eigen::MatrixXd TaskCovariance::matrix() const {
  Eigen::MatrixXd k = factor * factor.transpose();
  k.diagonal() += log_diag.array().exp().matrix();
  return k;
}

TaskCovariance TaskCovariance::identity(int tasks, double diag) {
  TaskCovariance t;
  t.factor = Eigen::MatrixXd::Identity(tasks, tasks);
  t.log_diag = Eigen::VectorXd::Constant(tasks, std::log(diag));
  return t;
}

Eigen::MatrixXd build_joint_kernel(const KernelSpec& spec,
                                   const TaskCovariance& tasks,
                                   const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& X2) {
  return kron_tasks(tasks.matrix(), input_kernel(spec, X, X2));
}

// ---------------------------------------------------------------------------
// Packed parameters
// ---------------------------------------------------------------------------

int packed_size(KernelKind kind, const TaskCovariance& tasks) {
  int n = 1;  // log noise
  if (uses_rbf(kind)) ++n;
  if (uses_cos(kind)) ++n;
  n += tasks.tasks() * tasks.rank() + tasks.tasks();
  return n;
}

Eigen::VectorXd pack_parameters(const KernelSpec& spec,
                                const TaskCovariance& tasks) {
  Eigen::VectorXd theta(packed_size(spec.kind, tasks));
  int i = 0;
  if (uses_rbf(spec.kind)) theta(i++) = spec.log_lengthscale_rbf;
  if (uses_cos(spec.kind)) theta(i++) = spec.log_scale_cos;
  theta(i++) = spec.log_noise_variance;
  for (int a = 0; a < tasks.tasks(); ++a) {
    for (int b = 0; b < tasks.rank(); ++b) theta(i++) = tasks.factor(a, b);
  }
  for (int a = 0; a < tasks.tasks(); ++a) theta(i++) = tasks.log_diag(a);
  return theta;
}

void unpack_parameters(const Eigen::VectorXd& theta, KernelSpec& spec,
                       TaskCovariance& tasks) {
  if (theta.size() != packed_size(spec.kind, tasks)) {
    throw Error("packed parameter vector has the wrong size");
  }
  int i = 0;
  if (uses_rbf(spec.kind)) spec.log_lengthscale_rbf = theta(i++);
  if (uses_cos(spec.kind)) spec.log_scale_cos = theta(i++);
  spec.log_noise_variance = theta(i++);
  for (int a = 0; a < tasks.tasks(); ++a) {
    for (int b = 0; b < tasks.rank(); ++b) tasks.factor(a, b) = theta(i++);
  }
  for (int a = 0; a < tasks.tasks(); ++a) tasks.log_diag(a) = theta(i++);
}

// ---------------------------------------------------------------------------
// Log marginal likelihood
// ---------------------------------------------------------------------------

LmlResult log_marginal_likelihood(const KernelSpec& spec,
                                  const TaskCovariance& tasks,
                                  const Eigen::MatrixXd& X_std,
                                  const Eigen::MatrixXd& Y_std,
                                  bool want_gradient) {
  const Eigen::Index n = X_std.rows();
  const int t_count = tasks.tasks();
  if (n < 1) throw Error("no training samples");
  if (Y_std.rows() != n) throw Error("X and Y row counts differ");
  if (Y_std.cols() != t_count) throw Error("Y column count != task count");

  const InputParts parts = compute_parts(X_std, X_std);
  const Eigen::MatrixXd k_in = kernel_from_parts(spec, parts);
  const Eigen::MatrixXd k_t = tasks.matrix();
  const Eigen::MatrixXd k_joint = kron_tasks(k_t, k_in);
  const Eigen::VectorXd y = stack_tasks(Y_std);

  Factorisation f = factorize(k_joint, spec.noise_variance());
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const Eigen::MatrixXd l = f.llt.matrixL();

  LmlResult res;
  res.jitter = f.jitter;
  res.value = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum() -
              0.5 * double(y.size()) * std::log(2.0 * M_PI);
  if (!want_gradient) return res;

  // d/dtheta of the LML is 0.5 * tr((alpha alpha^T - K^-1) dK/dtheta).
  Eigen::MatrixXd g = -f.llt.solve(
      Eigen::MatrixXd::Identity(y.size(), y.size()));
  g.noalias() += alpha * alpha.transpose();

  const Eigen::MatrixXd w_kin = block_inner(g, k_in, t_count);

  res.gradient.resize(packed_size(spec.kind, tasks));
  int i = 0;
  if (uses_rbf(spec.kind)) {
    const double l2 = spec.lengthscale_rbf() * spec.lengthscale_rbf();
    const Eigen::MatrixXd d_in = k_in.cwiseProduct(parts.sqdist) / l2;
    res.gradient(i++) = 0.5 * (k_t.cwiseProduct(block_inner(g, d_in, t_count))).sum();
  }
  if (uses_cos(spec.kind)) {
    // dK_in/dlog l_cos = 2 K_in for both the plain and the composite kernel
    res.gradient(i++) = (k_t.cwiseProduct(w_kin)).sum();
  }
  {
    double trace_g = 0.0;
    for (Eigen::Index d = 0; d < g.rows(); ++d) trace_g += g(d, d);
    res.gradient(i++) = 0.5 * spec.noise_variance() * trace_g;
  }
  for (int a = 0; a < t_count; ++a) {
    for (int b = 0; b < tasks.rank(); ++b) {
      // dK_t(p,q)/dB(a,b) = delta_pa B(q,b) + delta_qa B(p,b)
      double grad = 0.0;
      for (int q = 0; q < t_count; ++q) {
        grad += tasks.factor(q, b) * (w_kin(a, q) + w_kin(q, a));
      }
      res.gradient(i++) = 0.5 * grad;
    }
  }
  for (int a = 0; a < t_count; ++a) {
    res.gradient(i++) = 0.5 * std::exp(tasks.log_diag(a)) * w_kin(a, a);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace {

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      d.push_back((x.row(i) - x.row(j)).norm());
    }
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  const double med = d[d.size() / 2];
  return med > 0.0 ? med : 1.0;
}

}  // namespace

GprModel GprModel::make(const Eigen::MatrixXd& X_raw,
                        const Eigen::MatrixXd& Y_raw, const KernelSpec& spec,
                        const TaskCovariance& tasks,
                        preprocess::Mode input_mode,
                        preprocess::Mode output_mode) {
  if (X_raw.rows() != Y_raw.rows()) throw Error("X and Y row counts differ");
  if (Y_raw.cols() != tasks.tasks()) {
    throw Error("task covariance size does not match output columns");
  }
  GprModel m;
  m.spec_ = spec;
  m.tasks_ = tasks;
  m.in_std_ = preprocess::Standardizer(input_mode);
  m.in_std_.fit(X_raw);
  m.out_std_ = preprocess::Standardizer(output_mode);
  if (output_mode == preprocess::Mode::SampleStd) {
    throw Error("sample standardisation is not an output mode");
  }
  m.out_std_.fit(Y_raw);
  m.x_std_ = m.in_std_.transform(X_raw);
  m.y_std_ = m.out_std_.transform(Y_raw);
  m.finalize();
  return m;
}

GprModel GprModel::fit(const Eigen::MatrixXd& X_raw,
                       const Eigen::MatrixXd& Y_raw, KernelKind kind,
                       const FitOptions& opts) {
  if (X_raw.rows() < 2) throw Error("fitting needs at least 2 samples");
  if (opts.max_iters < 0) throw Error("negative iteration count");
  if (!(opts.learning_rate > 0.0)) throw Error("learning rate must be positive");

  preprocess::Standardizer in_std(opts.input_mode);
  in_std.fit(X_raw);
  preprocess::Standardizer out_std(opts.output_mode);
  if (opts.output_mode == preprocess::Mode::SampleStd) {
    throw Error("sample standardisation is not an output mode");
  }
  out_std.fit(Y_raw);
  const Eigen::MatrixXd x_std = in_std.transform(X_raw);
  const Eigen::MatrixXd y_std = out_std.transform(Y_raw);
  const int t_count = static_cast<int>(Y_raw.cols());

  KernelSpec spec;
  spec.kind = kind;
  spec.log_lengthscale_rbf = std::log(median_pairwise_distance(x_std));
  spec.log_scale_cos = 0.0;
  if (opts.fixed_noise_variance) {
    if (!(*opts.fixed_noise_variance > 0.0)) {
      throw Error("fixed noise variance must be positive");
    }
    spec.log_noise_variance = std::log(*opts.fixed_noise_variance);
  } else {
    const double pooled_var =
        (y_std.array() - y_std.array().mean()).square().mean();
    spec.log_noise_variance = std::log(std::max(1e-2 * pooled_var, 1e-10));
  }
  TaskCovariance tasks = TaskCovariance::identity(t_count);

  // Which packed entries the optimiser may move.
  const int dim = packed_size(kind, tasks);
  std::vector<bool> trainable(dim, true);
  {
    int i = 0;
    if (uses_rbf(kind)) ++i;
    if (uses_cos(kind)) {
      if (!opts.train_cos_scale) trainable[i] = false;
      ++i;
    }
    if (opts.fixed_noise_variance) trainable[i] = false;
  }

  Eigen::VectorXd theta = pack_parameters(spec, tasks);
  Eigen::VectorXd best_theta = theta;
  double best_lml = -std::numeric_limits<double>::infinity();

  // Adam ascent, beta1=0.9, beta2=0.999, eps=1e-8; the best iterate over the
  // whole run is kept.
  Eigen::VectorXd m_adam = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd v_adam = Eigen::VectorXd::Zero(dim);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    unpack_parameters(theta, spec, tasks);
    LmlResult res;
    try {
      res = iloc::gpr::log_marginal_likelihood(spec, tasks, x_std, y_std, true);
    } catch (const Error& e) {
      throw Error("optimisation failed at iteration " + std::to_string(iter) +
                  ": " + e.what());
    }
    if (!std::isfinite(res.value)) {
      throw Error("log marginal likelihood became non-finite at iteration " +
                  std::to_string(iter));
    }
    if (res.value > best_lml) {
      best_lml = res.value;
      best_theta = theta;
    }
    if (iter == opts.max_iters) break;

    const double t = iter + 1;
    for (int d = 0; d < dim; ++d) {
      if (!trainable[d]) continue;
      const double grad = res.gradient(d);
      m_adam(d) = b1 * m_adam(d) + (1.0 - b1) * grad;
      v_adam(d) = b2 * v_adam(d) + (1.0 - b2) * grad * grad;
      const double m_hat = m_adam(d) / (1.0 - std::pow(b1, t));
      const double v_hat = v_adam(d) / (1.0 - std::pow(b2, t));
      theta(d) += opts.learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    }
  }

  GprModel model;
  model.spec_.kind = kind;
  model.tasks_ = TaskCovariance::identity(t_count);
  unpack_parameters(best_theta, model.spec_, model.tasks_);
  model.in_std_ = in_std;
  model.out_std_ = out_std;
  model.x_std_ = x_std;
  model.y_std_ = y_std;
  model.finalize();
  return model;
}

void GprModel::finalize() {
  const Eigen::MatrixXd k_in = input_kernel(spec_, x_std_, x_std_);
  const Eigen::MatrixXd k_joint = kron_tasks(tasks_.matrix(), k_in);
  const Eigen::VectorXd y = stack_tasks(y_std_);
  Factorisation f = factorize(k_joint, spec_.noise_variance());
  jitter_ = f.jitter;
  chol_l_ = f.llt.matrixL();
  alpha_ = f.llt.solve(y);
  lml_ = -0.5 * y.dot(alpha_) - chol_l_.diagonal().array().log().sum() -
         0.5 * double(y.size()) * std::log(2.0 * M_PI);
}

Prediction GprModel::predict(const Eigen::VectorXd& x_raw) const {
  if (x_raw.size() != x_std_.cols()) {
    throw Error("test input has " + std::to_string(x_raw.size()) +
                " features, model expects " + std::to_string(x_std_.cols()));
  }
  Eigen::MatrixXd z_row = in_std_.transform(x_raw.transpose());
  const Eigen::VectorXd z = z_row.row(0).transpose();

  const Eigen::Index n = x_std_.rows();
  const int t_count = tasks_.tasks();
  Eigen::VectorXd kappa(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kappa(i) = kernel_eval(spec_, x_std_.row(i).transpose(), z);
  }
  const double kzz = kernel_eval(spec_, z, z);
  const Eigen::MatrixXd k_t = tasks_.matrix();

  Eigen::MatrixXd k_star(n * t_count, t_count);
  for (int a = 0; a < t_count; ++a) {
    for (int b = 0; b < t_count; ++b) {
      k_star.block(a * n, b, n, 1) = k_t(a, b) * kappa;
    }
  }

  const Eigen::VectorXd mu_std = k_star.transpose() * alpha_;
  const Eigen::MatrixXd w =
      chol_l_.triangularView<Eigen::Lower>().solve(k_star);
  Eigen::VectorXd var_std(t_count);
  for (int a = 0; a < t_count; ++a) {
    double v = kzz * k_t(a, a) - w.col(a).squaredNorm();
    if (v < -1e-8) {
      throw Error("negative predictive variance (" + std::to_string(v) +
                  "): numerical breakdown");
    }
    var_std(a) = std::max(v, 0.0);
  }

  auto [mean_mm, var_mm] = out_std_.inverse_transform_outputs(
      mu_std.transpose(), var_std.transpose());
  Prediction p;
  p.mean = mean_mm.row(0).transpose();
  p.variance = var_mm.row(0).transpose();
  return p;
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

namespace {

json standardizer_to_json(const preprocess::Standardizer& s) {
  json j;
  j["mode"] = preprocess::to_string(s.mode());
  if (s.mode() == preprocess::Mode::FeatureStd) {
    j["means"] = std::vector<double>(s.means().data(),
                                     s.means().data() + s.means().size());
    j["stds"] = std::vector<double>(s.stds().data(),
                                    s.stds().data() + s.stds().size());
  }
  return j;
}

preprocess::Standardizer standardizer_from_json(const json& j) {
  const auto mode = preprocess::mode_from_string(j.at("mode").get<std::string>());
  Eigen::VectorXd means, stds;
  if (mode == preprocess::Mode::FeatureStd) {
    const auto mv = j.at("means").get<std::vector<double>>();
    const auto sv = j.at("stds").get<std::vector<double>>();
    means = Eigen::Map<const Eigen::VectorXd>(mv.data(), Eigen::Index(mv.size()));
    stds = Eigen::Map<const Eigen::VectorXd>(sv.data(), Eigen::Index(sv.size()));
  }
  return preprocess::Standardizer::restore(mode, means, stds);
}

std::string data_csv_path(const std::string& json_path) {
  std::filesystem::path p(json_path);
  p.replace_extension(".data.csv");
  return p.string();
}

}  // namespace

void GprModel::save(const std::string& json_path) const {
  std::ostringstream csv;
  for (Eigen::Index j = 0; j < x_std_.cols(); ++j) {
    csv << (j ? "," : "") << "x_" << (j + 1);
  }
  for (Eigen::Index j = 0; j < y_std_.cols(); ++j) csv << ",y_" << (j + 1);
  csv << "\n";
  for (Eigen::Index i = 0; i < x_std_.rows(); ++i) {
    for (Eigen::Index j = 0; j < x_std_.cols(); ++j) {
      csv << (j ? "," : "") << format_double(x_std_(i, j));
    }
    for (Eigen::Index j = 0; j < y_std_.cols(); ++j) {
      csv << ',' << format_double(y_std_(i, j));
    }
    csv << "\n";
  }
  const std::string csv_str = csv.str();
  const std::string csv_path = data_csv_path(json_path);
  write_text_file(csv_path, csv_str);

  json j;
  j["kind"] = to_string(spec_.kind);
  j["log_lengthscale_rbf"] = spec_.log_lengthscale_rbf;
  j["log_scale_cos"] = spec_.log_scale_cos;
  j["log_noise_variance"] = spec_.log_noise_variance;
  json factor = json::array();
  for (int a = 0; a < tasks_.tasks(); ++a) {
    json row = json::array();
    for (int b = 0; b < tasks_.rank(); ++b) row.push_back(tasks_.factor(a, b));
    factor.push_back(row);
  }
  j["task_factor"] = factor;
  j["task_log_diag"] = std::vector<double>(
      tasks_.log_diag.data(), tasks_.log_diag.data() + tasks_.log_diag.size());
  j["input_standardizer"] = standardizer_to_json(in_std_);
  j["output_standardizer"] = standardizer_to_json(out_std_);
  j["log_marginal_likelihood"] = lml_;
  j["jitter"] = jitter_;
  j["num_train"] = num_train();
  j["input_dim"] = input_dim();
  j["num_tasks"] = num_tasks();
  j["data_csv"] = std::filesystem::path(csv_path).filename().string();
  j["data_digest"] = "fnv1a:" + fnv1a64_hex(csv_str);
  write_text_file(json_path, j.dump(2) + "\n");
}

GprModel GprModel::load(const std::string& json_path) {
  json j;
  try {
    j = json::parse(read_text_file(json_path));
  } catch (const json::exception& e) {
    throw Error("malformed model file '" + json_path + "': " + e.what());
  }

  GprModel m;
  try {
    m.spec_.kind = kernel_from_string(j.at("kind").get<std::string>());
    m.spec_.log_lengthscale_rbf = j.at("log_lengthscale_rbf").get<double>();
    m.spec_.log_scale_cos = j.at("log_scale_cos").get<double>();
    m.spec_.log_noise_variance = j.at("log_noise_variance").get<double>();
    const auto factor = j.at("task_factor");
    const int t_count = static_cast<int>(factor.size());
    const int rank = static_cast<int>(factor.at(0).size());
    m.tasks_.factor.resize(t_count, rank);
    for (int a = 0; a < t_count; ++a) {
      for (int b = 0; b < rank; ++b) {
        m.tasks_.factor(a, b) = factor.at(a).at(b).get<double>();
      }
    }
    const auto diag = j.at("task_log_diag").get<std::vector<double>>();
    m.tasks_.log_diag =
        Eigen::Map<const Eigen::VectorXd>(diag.data(), Eigen::Index(diag.size()));
    m.in_std_ = standardizer_from_json(j.at("input_standardizer"));
    m.out_std_ = standardizer_from_json(j.at("output_standardizer"));
  } catch (const json::exception& e) {
    throw Error("model file '" + json_path + "' missing fields: " + e.what());
  }

  const std::string csv_path =
      (std::filesystem::path(json_path).parent_path() /
       j.at("data_csv").get<std::string>())
          .string();
  const std::string csv_str = read_text_file(csv_path);
  const std::string want_digest = j.at("data_digest").get<std::string>();
  if ("fnv1a:" + fnv1a64_hex(csv_str) != want_digest) {
    throw Error("training data payload '" + csv_path +
                "' does not match the model digest");
  }

  const int n = j.at("num_train").get<int>();
  const int dim = j.at("input_dim").get<int>();
  const int t_count = j.at("num_tasks").get<int>();
  m.x_std_.resize(n, dim);
  m.y_std_.resize(n, t_count);
  std::istringstream in(csv_str);
  std::string line;
  std::getline(in, line);  // header
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw Error("training data payload shorter than declared");
    }
    std::stringstream row(line);
    std::string field;
    for (int c = 0; c < dim + t_count; ++c) {
      if (!std::getline(row, field, ',')) {
        throw Error("training data payload row " + std::to_string(i + 1) +
                    " too short");
      }
      double v = 0.0;
      auto r = std::from_chars(field.data(), field.data() + field.size(), v);
      if (r.ec != std::errc()) {
        throw Error("training data payload row " + std::to_string(i + 1) +
                    ": malformed number");
      }
      if (c < dim) {
        m.x_std_(i, c) = v;
      } else {
        m.y_std_(i, c - dim) = v;
      }
    }
  }

  m.finalize();
  const double stored_lml = j.at("log_marginal_likelihood").get<double>();
  if (std::abs(stored_lml - m.lml_) >
      1e-6 * std::max(1.0, std::abs(stored_lml))) {
    throw Error("model file inconsistent: stored LML " +
                std::to_string(stored_lml) + " vs recomputed " +
                std::to_string(m.lml_));
  }
  return m;
}

}  // namespace iloc::gpr
