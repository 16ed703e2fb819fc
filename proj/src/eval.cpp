#include "iloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

namespace iloc::eval {

using nlohmann::json;

SubsetKind subset_from_string(const std::string& s) {
  if (s == "ri35") return SubsetKind::Ri35;
  if (s == "ri15") return SubsetKind::Ri15;
  if (s == "ri9") return SubsetKind::Ri9;
  if (s == "ext9") return SubsetKind::Ext9;
  if (s == "custom") return SubsetKind::Custom;
  throw Error("unknown subset '" + s + "' (want ri35|ri15|ri9|ext9|custom)");
}

std::string to_string(SubsetKind k) {
  switch (k) {
    case SubsetKind::Ri35: return "ri35";
    case SubsetKind::Ri15: return "ri15";
    case SubsetKind::Ri9: return "ri9";
    case SubsetKind::Ext9: return "ext9";
    case SubsetKind::Custom: return "custom";
  }
  throw Error("unreachable subset kind");
}

// ---------------------------------------------------------------------------
// Grid inference and subsets
// ---------------------------------------------------------------------------

namespace {

std::vector<double> cluster_1d(std::vector<double> values, double tol) {
  std::sort(values.begin(), values.end());
  std::vector<double> centers;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= values.size(); ++i) {
    if (i == values.size() || values[i] - values[i - 1] > tol) {
      double sum = 0.0;
      for (std::size_t k = start; k < i; ++k) sum += values[k];
      centers.push_back(sum / double(i - start));
      start = i;
    }
  }
  return centers;
}

int lattice_index(const std::vector<double>& centers, double v, double tol) {
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (std::abs(centers[i] - v) <= tol) return static_cast<int>(i) + 1;
  }
  return 0;
}

}  // namespace

int GridLayout::col_of(double x) const { return lattice_index(xs, x, tol_mm); }
int GridLayout::row_of(double y) const { return lattice_index(ys, y, tol_mm); }

GridLayout infer_grid(const Dataset& d, double tol_mm) {
  GridLayout g;
  g.tol_mm = tol_mm;
  std::vector<double> xs, ys;
  for (const auto& r : d.records) {
    xs.push_back(r.location.x);
    ys.push_back(r.location.y);
  }
  g.xs = cluster_1d(std::move(xs), tol_mm);
  g.ys = cluster_1d(std::move(ys), tol_mm);
  return g;
}

namespace {

Dataset keep_records(const Dataset& d, const std::vector<bool>& keep) {
  Dataset out;
  out.geometry = d.geometry;
  out.array = d.array;
  out.provenance = d.provenance;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    if (keep[i]) out.records.push_back(d.records[i]);
  }
  if (out.records.empty()) throw Error("subset selects no records");
  return out;
}

}  // namespace

Dataset subset_reference(const Dataset& d, SubsetKind kind) {
  d.validate();
  if (kind == SubsetKind::Ri35) return d;
  if (kind == SubsetKind::Custom) {
    throw Error("custom subset needs explicit record indices");
  }

  const GridLayout g = infer_grid(d);
  if (g.xs.size() != 7 || g.ys.size() != 5) {
    throw Error("named subsets need a 7x5 impact grid; found " +
                std::to_string(g.xs.size()) + " columns and " +
                std::to_string(g.ys.size()) + " rows");
  }

  auto selected = [&](int col, int row) {
    switch (kind) {
      case SubsetKind::Ri15:
        return col == 1 || col == 4 || col == 7;
      case SubsetKind::Ri9:
        return (col == 1 || col == 4 || col == 7) &&
               (row == 1 || row == 3 || row == 5);
      case SubsetKind::Ext9:
        return col >= 3 && col <= 5 && row >= 2 && row <= 4;
      default:
        return true;
    }
  };

  std::vector<bool> keep(d.records.size(), false);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const int col = g.col_of(d.records[i].location.x);
    const int row = g.row_of(d.records[i].location.y);
    if (col == 0 || row == 0) {
      throw Error("record " + std::to_string(i + 1) +
                  " lies off the inferred grid");
    }
    keep[i] = selected(col, row);
  }
  return keep_records(d, keep);
}

Dataset subset_custom(const Dataset& d, const std::vector<int>& record_indices) {
  d.validate();
  if (record_indices.empty()) throw Error("custom subset is empty");
  std::vector<bool> keep(d.records.size(), false);
  for (int idx : record_indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= d.records.size()) {
      throw Error("record index " + std::to_string(idx) + " out of range");
    }
    keep[idx] = true;
  }
  return keep_records(d, keep);
}

Dataset restrict_sensors(const Dataset& d,
                         const std::vector<int>& sensor_indices) {
  d.validate();
  if (sensor_indices.empty()) return d;
  std::set<int> seen;
  for (int idx : sensor_indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= d.array.size()) {
      throw Error("sensor index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) {
      throw Error("sensor index " + std::to_string(idx) + " repeated");
    }
  }

  Dataset out;
  out.geometry = d.geometry;
  out.provenance = d.provenance;
  for (int idx : sensor_indices) {
    out.array.sensors.push_back(d.array.sensors[idx]);
    if (!d.array.ids.empty()) out.array.ids.push_back(d.array.ids[idx]);
  }
  for (const auto& r : d.records) {
    ImpactRecord nr = r;
    std::vector<double> vals;
    vals.reserve(sensor_indices.size());
    for (int idx : sensor_indices) vals.push_back(r.tdoa.values[idx]);
    // remaining values are arrivals up to a shared shift, so re-anchoring
    // them is exact
    nr.tdoa = tdoa_from_arrivals(std::move(vals), r.tdoa.frequency_khz);
    out.records.push_back(std::move(nr));
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Summary summarize(const std::vector<double>& errors_mm) {
  if (errors_mm.empty()) throw Error("no errors to summarise");
  Summary s;
  s.count = static_cast<int>(errors_mm.size());
  double sum = 0.0;
  for (double e : errors_mm) {
    sum += e;
    s.max_mm = std::max(s.max_mm, e);
  }
  s.mean_mm = sum / double(errors_mm.size());
  double ss = 0.0;
  for (double e : errors_mm) ss += (e - s.mean_mm) * (e - s.mean_mm);
  s.sd_mm = std::sqrt(ss / double(errors_mm.size()));
  return s;
}

std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors_mm) {
  if (errors_mm.empty()) throw Error("no errors for a CDF");
  std::sort(errors_mm.begin(), errors_mm.end());
  std::vector<std::pair<double, double>> cdf;
  cdf.reserve(errors_mm.size());
  const double n = double(errors_mm.size());
  for (std::size_t i = 0; i < errors_mm.size(); ++i) {
    cdf.emplace_back(errors_mm[i], double(i + 1) / n);
  }
  return cdf;
}

// ---------------------------------------------------------------------------
// Convex hull
// ---------------------------------------------------------------------------

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double point_segment_distance(const Point2& a, const Point2& b,
                              const Point2& p) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return dist(a, p);
  double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist({a.x + t * vx, a.y + t * vy}, p);
}

}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& a, const Point2& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {  // upper
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_hull(const std::vector<Point2>& hull, const Point2& p,
                   double tol) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return dist(hull[0], p) <= tol;
  if (hull.size() == 2) return point_segment_distance(hull[0], hull[1], p) <= tol;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void to_matrices(const Dataset& d, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  const Eigen::Index n = static_cast<Eigen::Index>(d.records.size());
  const Eigen::Index m = static_cast<Eigen::Index>(d.array.size());
  X.resize(n, m);
  Y.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = d.records[i];
    for (Eigen::Index j = 0; j < m; ++j) X(i, j) = r.tdoa.values[j];
    Y(i, 0) = r.location.x;
    Y(i, 1) = r.location.y;
  }
}

namespace {

void check_arrays_match(const SensorArray& a, const SensorArray& b) {
  if (a.size() != b.size()) {
    throw Error("reference and target sensor counts differ (" +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (dist(a.sensors[i], b.sensors[i]) > 1e-9) {
      throw Error("reference and target sensor " + std::to_string(i + 1) +
                  " positions differ");
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const Dataset& reference,
                                const Dataset& targets) {
  if (cfg.kernels.empty()) throw Error("no kernels configured");

  Dataset ref = (cfg.subset == SubsetKind::Custom)
                    ? subset_custom(reference, cfg.custom_indices)
                    : subset_reference(reference, cfg.subset);
  Dataset tgt = targets;
  tgt.validate();
  if (!cfg.sensor_subset.empty()) {
    ref = restrict_sensors(ref, cfg.sensor_subset);
    tgt = restrict_sensors(tgt, cfg.sensor_subset);
  }
  check_arrays_match(ref.array, tgt.array);

  Eigen::MatrixXd x_ref, y_ref;
  to_matrices(ref, x_ref, y_ref);

  std::vector<std::string> names;
  std::vector<gpr::GprModel> models;
  Eigen::VectorXd lmls(static_cast<Eigen::Index>(cfg.kernels.size()));
  for (std::size_t k = 0; k < cfg.kernels.size(); ++k) {
    try {
      models.push_back(gpr::GprModel::fit(x_ref, y_ref, cfg.kernels[k], cfg.fit));
    } catch (const Error& e) {
      throw Error("training " + gpr::to_string(cfg.kernels[k]) +
                  " failed: " + e.what());
    }
    names.push_back(gpr::to_string(cfg.kernels[k]));
    lmls(static_cast<Eigen::Index>(k)) = models.back().log_marginal_likelihood();
  }

  std::vector<Point2> ref_locations;
  for (const auto& r : ref.records) ref_locations.push_back(r.location);
  const auto hull = convex_hull(ref_locations);

  ExperimentReport report;
  report.reference_count = static_cast<int>(ref.records.size());
  report.target_count = static_cast<int>(tgt.records.size());
  report.sensor_count = static_cast<int>(ref.array.size());

  std::vector<std::vector<double>> errors(names.size() + (cfg.fuse ? 1 : 0));
  for (const auto& rec : tgt.records) {
    Eigen::VectorXd x(rec.tdoa.size());
    for (std::size_t j = 0; j < rec.tdoa.size(); ++j) x(j) = rec.tdoa.values[j];
    const bool inside = point_in_hull(hull, rec.location, 1e-9);

    std::vector<gpr::Prediction> preds;
    for (std::size_t k = 0; k < models.size(); ++k) {
      preds.push_back(models[k].predict(x));
      const auto& p = preds.back();
      LocalisationResult res;
      res.impact_id = rec.id;
      res.kernel = names[k];
      res.truth = rec.location;
      res.predicted = {p.mean(0), p.mean(1)};
      res.error_mm = dist(res.truth, res.predicted);
      res.sd_mm = p.variance.array().sqrt();
      res.inside_hull = inside;
      errors[k].push_back(res.error_mm);
      report.results.push_back(std::move(res));
    }
    if (cfg.fuse) {
      const auto fused =
          fusion::fuse_models(names, lmls, preds, cfg.full_bma_variance);
      LocalisationResult res;
      res.impact_id = rec.id;
      res.kernel = "bma";
      res.truth = rec.location;
      res.predicted = {fused.mean(0), fused.mean(1)};
      res.error_mm = dist(res.truth, res.predicted);
      res.sd_mm = fused.variance.array().sqrt();
      res.inside_hull = inside;
      errors.back().push_back(res.error_mm);
      report.results.push_back(std::move(res));
    }
  }

  for (std::size_t k = 0; k < names.size(); ++k) {
    KernelReport kr;
    kr.kernel = names[k];
    kr.lml = lmls(static_cast<Eigen::Index>(k));
    kr.summary = summarize(errors[k]);
    kr.cdf = error_cdf(errors[k]);
    report.kernels.push_back(std::move(kr));
  }
  if (cfg.fuse) {
    KernelReport kr;
    kr.kernel = "bma";
    kr.lml = std::numeric_limits<double>::quiet_NaN();
    kr.summary = summarize(errors.back());
    kr.cdf = error_cdf(errors.back());
    report.kernels.push_back(std::move(kr));
  }

  report.notes = {
      "grid rows and columns are numbered 1-based from the minimum-y and "
      "minimum-x lattice lines",
      "ext9 keeps the innermost rows 2-4 x columns 3-5 block of the 7x5 grid",
      "marginal-likelihood weights are shared across tasks; uncertainty and "
      "combined weights are per task",
      "inside_hull is membership in the convex hull of the reference impact "
      "locations"};
  return report;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

std::string cdf_svg(const std::vector<KernelReport>& kernels) {
  const int width = 640, height = 480;
  const int ml = 60, mr = 20, mt = 20, mb = 45;
  double max_err = 0.0;
  for (const auto& k : kernels) max_err = std::max(max_err, k.summary.max_mm);
  if (max_err <= 0.0) max_err = 1.0;

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "' viewBox='0 0 " << width << " " << height
      << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  auto sx = [&](double e) { return ml + e / max_err * (width - ml - mr); };
  auto sy = [&](double f) { return height - mb - f * (height - mt - mb); };
  svg << "<line x1='" << ml << "' y1='" << sy(0) << "' x2='" << width - mr
      << "' y2='" << sy(0) << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << sy(0) << "' x2='" << ml << "' y2='"
      << sy(1) << "' stroke='black'/>\n";
  svg << "<text x='" << (width / 2) << "' y='" << (height - 8)
      << "' text-anchor='middle' font-size='14'>localisation error (mm)"
      << "</text>\n";
  svg << "<text x='14' y='" << (height / 2)
      << "' text-anchor='middle' font-size='14' transform='rotate(-90 14 "
      << (height / 2) << ")'>empirical CDF</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double f = tick / 4.0;
    svg << "<text x='" << ml - 6 << "' y='" << sy(f) + 4
        << "' text-anchor='end' font-size='11'>" << f << "</text>\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", f * max_err);
    svg << "<text x='" << sx(f * max_err) << "' y='" << height - mb + 16
        << "' text-anchor='middle' font-size='11'>" << buf << "</text>\n";
  }
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const auto& cdf = kernels[k].cdf;
    std::ostringstream pts;
    double prev_f = 0.0;
    pts << sx(0) << ',' << sy(0) << ' ';
    for (const auto& [e, f] : cdf) {
      pts << sx(e) << ',' << sy(prev_f) << ' ' << sx(e) << ',' << sy(f) << ' ';
      prev_f = f;
    }
    pts << sx(max_err) << ',' << sy(prev_f);
    svg << "<polyline fill='none' stroke='" << palette[k % 6]
        << "' stroke-width='1.5' points='" << pts.str() << "'/>\n";
    svg << "<text x='" << width - mr - 8 << "' y='" << mt + 16 + 16 * int(k)
        << "' text-anchor='end' font-size='12' fill='" << palette[k % 6]
        << "'>" << kernels[k].kernel << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_report(const ExperimentReport& r, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);

  json summary;
  for (const auto& k : r.kernels) {
    json jk;
    if (std::isfinite(k.lml)) jk["log_marginal_likelihood"] = k.lml;
    jk["mean_error_mm"] = k.summary.mean_mm;
    jk["max_error_mm"] = k.summary.max_mm;
    jk["sd_error_mm"] = k.summary.sd_mm;
    jk["count"] = k.summary.count;
    summary[k.kernel] = jk;
  }
  json j;
  j["summary"] = summary;
  j["notes"] = r.notes;
  j["reference_count"] = r.reference_count;
  j["target_count"] = r.target_count;
  j["sensor_count"] = r.sensor_count;
  write_text_file((dir / "report.json").string(), j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "impact_id,kernel,true_x_mm,true_y_mm,pred_x_mm,pred_y_mm,error_mm,"
         "sd_x_mm,sd_y_mm,inside_hull\n";
  for (const auto& res : r.results) {
    csv << res.impact_id << ',' << res.kernel << ','
        << format_double(res.truth.x) << ',' << format_double(res.truth.y)
        << ',' << format_double(res.predicted.x) << ','
        << format_double(res.predicted.y) << ',' << format_double(res.error_mm)
        << ',' << format_double(res.sd_mm(0)) << ','
        << format_double(res.sd_mm(1)) << ',' << (res.inside_hull ? 1 : 0)
        << "\n";
  }
  write_text_file((dir / "results.csv").string(), csv.str());

  for (const auto& k : r.kernels) {
    std::ostringstream cdf;
    cdf << "error_mm,cdf\n";
    for (const auto& [e, f] : k.cdf) {
      cdf << format_double(e) << ',' << format_double(f) << "\n";
    }
    write_text_file((dir / ("cdf_" + k.kernel + ".csv")).string(), cdf.str());
  }
  write_text_file((dir / "cdf.svg").string(), cdf_svg(r.kernels));
}

}  // namespace iloc::eval
