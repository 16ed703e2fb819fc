// Experiment harness: localisation-error metrics, empirical error CDFs,
// reference-subset construction on the impact grid, sensor ablation and
// interpolation/extrapolation tagging.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iloc/core.hpp"
#include "iloc/fusion.hpp"
#include "iloc/gpr.hpp"

namespace iloc::eval {

// ---------------------------------------------------------------------------
// Reference subsets on the impact grid
// ---------------------------------------------------------------------------

enum class SubsetKind { Ri35, Ri15, Ri9, Ext9, Custom };

SubsetKind subset_from_string(const std::string& s);
std::string to_string(SubsetKind k);

// Lattice lines recovered from the record coordinates (snap tolerance in mm).
// Rows and columns are numbered 1-based from the minimum-y / minimum-x line.
struct GridLayout {
  std::vector<double> xs;
  std::vector<double> ys;
  double tol_mm = 1.0;

  int col_of(double x) const;  // 1-based, 0 if off-lattice
  int row_of(double y) const;
};

GridLayout infer_grid(const Dataset& d, double tol_mm = 1.0);

// RI35 passes the data through; RI15 keeps columns {1,4,7} of the 7x5 grid;
// RI9 further drops rows {2,4}; EXT9 keeps the innermost rows 2-4 x columns
// 3-5 block. The named subsets require a 7x5 lattice.
Dataset subset_reference(const Dataset& d, SubsetKind kind);
Dataset subset_custom(const Dataset& d, const std::vector<int>& record_indices);

// Keeps only the chosen sensors (0-based) and re-anchors every TDOA vector
// to the earliest arrival among the remaining sensors.
Dataset restrict_sensors(const Dataset& d, const std::vector<int>& sensor_indices);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Summary {
  double mean_mm = 0.0;
  double max_mm = 0.0;
  double sd_mm = 0.0;  // population standard deviation
  int count = 0;
};

Summary summarize(const std::vector<double>& errors_mm);

// Right-continuous empirical CDF samples (error, fraction <= error).
std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors_mm);

// Convex hull (counter-clockwise) and membership with tolerance; degenerate
// hulls fall back to distance-to-segment.
std::vector<Point2> convex_hull(std::vector<Point2> pts);
bool point_in_hull(const std::vector<Point2>& hull, const Point2& p,
                   double tol = 1e-9);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  SubsetKind subset = SubsetKind::Ri35;
  std::vector<int> custom_indices;  // used when subset == Custom
  std::vector<int> sensor_subset;   // 0-based; empty keeps all sensors
  std::vector<gpr::KernelKind> kernels = {
      gpr::KernelKind::Rbf, gpr::KernelKind::Cos, gpr::KernelKind::Comp};
  bool fuse = true;
  bool full_bma_variance = false;
  gpr::FitOptions fit;
};

struct LocalisationResult {
  int impact_id = 0;
  std::string kernel;
  ImpactLocation truth;
  ImpactLocation predicted;
  double error_mm = 0.0;
  Eigen::VectorXd sd_mm;  // predictive std per task
  bool inside_hull = true;
};

struct KernelReport {
  std::string kernel;
  double lml = 0.0;  // NaN for the fused row
  Summary summary;
  std::vector<std::pair<double, double>> cdf;
};

struct ExperimentReport {
  std::vector<KernelReport> kernels;
  std::vector<LocalisationResult> results;
  std::vector<std::string> notes;
  int reference_count = 0;
  int target_count = 0;
  int sensor_count = 0;
};

// Trains the configured kernels on the reference set, predicts every target,
// fuses if enabled and assembles summaries, CDFs and hull tags.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const Dataset& reference,
                                const Dataset& targets);

// report.json + results.csv + cdf_<kernel>.csv + cdf.svg under out_dir.
void write_report(const ExperimentReport& r, const std::string& out_dir);

// Step-plot of the per-kernel CDFs as a standalone SVG document.
std::string cdf_svg(const std::vector<KernelReport>& kernels);

// TDOA matrix (N x sensors) and location matrix (N x 2) of a dataset.
void to_matrices(const Dataset& d, Eigen::MatrixXd& X, Eigen::MatrixXd& Y);

}  // namespace iloc::eval
