#include "iloc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "iloc/core.hpp"
#include "iloc/eval.hpp"
#include "iloc/extract.hpp"
#include "iloc/fusion.hpp"
#include "iloc/gpr.hpp"
#include "iloc/preprocess.hpp"
#include "iloc/wavesim.hpp"

namespace iloc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_digest(const std::string& path) {
  return "fnv1a:" + fnv1a64_hex(read_text_file(path));
}

void write_manifest(const std::string& out_dir,
                    const std::vector<std::string>& argv,
                    std::uint64_t seed,
                    const std::map<std::string, std::string>& input_digests) {
  json m;
  std::string cmd;
  for (const auto& a : argv) {
    if (!cmd.empty()) cmd += ' ';
    cmd += a;
  }
  m["command"] = cmd;
  m["tool_version"] = kToolVersion;
  m["seed"] = seed;
  m["inputs"] = input_digests;
  m["timestamp_utc"] = utc_timestamp();
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "manifest.json").string(),
                  m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Flat dotted-key config
// ---------------------------------------------------------------------------

class FlatConfig {
 public:
  FlatConfig(json j, std::set<std::string> allowed)
      : j_(std::move(j)), allowed_(std::move(allowed)) {
    if (!j_.is_object()) throw Error("config must be a JSON object");
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!allowed_.count(key)) throw Error("unknown config key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double num(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number()) throw Error("config key '" + key + "' must be a number");
    return j_.at(key).get<double>();
  }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_number_integer()) {
      throw Error("config key '" + key + "' must be an integer");
    }
    return j_.at(key).get<int>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw Error("config key '" + key + "' must be a boolean");
    return j_.at(key).get<bool>();
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw Error("config key '" + key + "' must be a string");
    return j_.at(key).get<std::string>();
  }

  const json& raw(const std::string& key) const { return j_.at(key); }

 private:
  json j_;
  std::set<std::string> allowed_;
};

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
};

wavesim::GvpModel gvp_from_config(const FlatConfig& cfg) {
  wavesim::GvpModel g;
  const std::string kind = cfg.str("gvp.kind", "isotropic");
  if (kind == "isotropic") {
    g.kind = wavesim::GvpKind::Isotropic;
  } else if (kind == "elliptical") {
    g.kind = wavesim::GvpKind::Elliptical;
  } else if (kind == "tabulated") {
    g.kind = wavesim::GvpKind::Tabulated;
  } else {
    throw Error("gvp.kind must be isotropic|elliptical|tabulated");
  }
  g.base_speed = cfg.num("gvp.c0_mm_per_ms", 500.0);
  g.omega_ref_khz = cfg.num("gvp.omega_ref_khz", 1.0);
  g.anisotropy = cfg.num("gvp.epsilon", 0.0);
  if (cfg.has("gvp.table")) {
    for (const auto& row : cfg.raw("gvp.table")) {
      g.table.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
    }
  }
  g.validate();
  return g;
}

int cmd_simulate(const SimulateArgs& args,
                 const std::vector<std::string>& argv) {
  const std::string config_text = read_text_file(args.config_path);
  json parsed;
  try {
    parsed = json::parse(config_text);
  } catch (const json::exception& e) {
    throw Error("malformed config: " + std::string(e.what()));
  }
  const FlatConfig cfg(parsed, {
      "plate.lx", "plate.ly", "plate.h", "sensors", "sensor_ids",
      "grid.cols", "grid.rows", "grid.spacing_mm", "grid.center_x_mm",
      "grid.center_y_mm", "impacts", "gvp.kind", "gvp.c0_mm_per_ms",
      "gvp.omega_ref_khz", "gvp.epsilon", "gvp.table", "tdoa.frequency_khz",
      "noise.sigma_ms", "scale.temperature_alpha",
      "scale.retarget_frequency_khz", "condition", "repetitions",
      "signals.enabled", "signals.sample_rate_khz", "signals.snr_db",
      "out.dataset"});

  Dataset d;
  d.geometry = {cfg.num("plate.lx", 290.0), cfg.num("plate.ly", 200.0),
                cfg.num("plate.h", 4.0)};
  if (cfg.has("sensors")) {
    for (const auto& s : cfg.raw("sensors")) {
      d.array.sensors.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
    if (cfg.has("sensor_ids")) {
      d.array.ids = cfg.raw("sensor_ids").get<std::vector<std::string>>();
    } else {
      for (std::size_t i = 0; i < d.array.sensors.size(); ++i) {
        d.array.ids.push_back("S" + std::to_string(i + 1));
      }
    }
  } else {
    d.array = wavesim::default_six_sensor_array();
  }
  d.array.validate(d.geometry);

  std::vector<ImpactLocation> impacts;
  if (cfg.has("impacts")) {
    for (const auto& p : cfg.raw("impacts")) {
      impacts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
  } else {
    impacts = wavesim::grid_locations(
        cfg.integer("grid.cols", 7), cfg.integer("grid.rows", 5),
        cfg.num("grid.spacing_mm", 20.0),
        cfg.num("grid.center_x_mm", 0.5 * d.geometry.length_x),
        cfg.num("grid.center_y_mm", 0.5 * d.geometry.length_y));
  }
  for (const auto& p : impacts) {
    if (!d.geometry.contains(p)) {
      throw Error("impact (" + format_double(p.x) + ", " + format_double(p.y) +
                  ") lies off the plate");
    }
  }

  const wavesim::GvpModel gvp = gvp_from_config(cfg);
  const double omega = cfg.num("tdoa.frequency_khz", 1.0);
  const double sigma = cfg.num("noise.sigma_ms", 0.0);
  const double alpha = cfg.num("scale.temperature_alpha", 1.0);
  const double retarget = cfg.num("scale.retarget_frequency_khz", 0.0);
  const std::string condition = cfg.str("condition", "REF");
  const int repetitions = cfg.integer("repetitions", 1);
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  const bool signals_on = cfg.flag("signals.enabled", false);
  const double sample_rate = cfg.num("signals.sample_rate_khz", 20.0 * omega);
  const double snr_db = cfg.num("signals.snr_db", 300.0);
  d.provenance = "synthetic (" + std::string(kToolVersion) + ")";

  // Temperature slows the waves, so signals see the scaled profile while the
  // tabulated TDOA applies the equivalent multiplicative factor.
  wavesim::GvpModel gvp_effective = gvp;
  gvp_effective.base_speed /= alpha;
  for (auto& [theta, speed] : gvp_effective.table) {
    (void)theta;
    speed /= alpha;
  }

  fs::create_directories(args.out_dir);
  int id = 0;
  for (const auto& p : impacts) {
    for (int rep = 1; rep <= repetitions; ++rep) {
      ++id;
      TdoaVector t = wavesim::analytic_tdoa(gvp, d.array, p, omega, {});
      if (alpha != 1.0) t = wavesim::apply_temperature_scaling(t, alpha);
      if (retarget > 0.0) t = wavesim::scale_tdoa(t, retarget);
      if (sigma > 0.0) {
        t = wavesim::add_extraction_noise(
            t, {sigma, Rng::substream(args.seed, std::uint64_t(id))});
      }
      ImpactRecord r{id, p, std::move(t), condition, rep};
      d.records.push_back(std::move(r));

      if (signals_on) {
        const auto sigs = wavesim::synthesize_signals(
            gvp_effective, d.array, p, omega, sample_rate, snr_db,
            Rng::substream(args.seed, 0x5349470000ULL + std::uint64_t(id)));
        const fs::path impact_dir =
            fs::path(args.out_dir) / "signals" / ("impact_" + std::to_string(id));
        fs::create_directories(impact_dir);
        for (std::size_t k = 0; k < sigs.size(); ++k) {
          wavesim::save_signal_csv(
              sigs[k],
              (impact_dir / ("sensor_" + std::to_string(k + 1) + ".csv")).string());
        }
        json info;
        info["id"] = id;
        info["x_mm"] = p.x;
        info["y_mm"] = p.y;
        info["condition"] = condition;
        info["repetition"] = rep;
        info["frequency_khz"] = omega;
        write_text_file((impact_dir / "impact.json").string(), info.dump(2) + "\n");
      }
    }
  }

  const std::string dataset_name = cfg.str("out.dataset", "dataset.csv");
  const std::string dataset_path = (fs::path(args.out_dir) / dataset_name).string();
  save_dataset(d, dataset_path);
  write_manifest(args.out_dir, argv, args.seed,
                 {{args.config_path, "fnv1a:" + fnv1a64_hex(config_text)}});
  std::cout << "wrote " << d.records.size() << " records to " << dataset_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string signals_dir;
  std::string meta_path;
  std::string out_dir = ".";
  std::string out_name = "extracted.csv";
  double center_khz = 1.0;
  double bandwidth_khz = 0.0;  // 0 selects cf/2
  double threshold = 0.025;
  double smoothing_ms = 0.0;
  std::uint64_t seed = 1;
};

int cmd_extract(const ExtractArgs& args, const std::vector<std::string>& argv) {
  extract::ExtractionConfig cfg;
  cfg.center_frequency_khz = args.center_khz;
  cfg.bandwidth_khz =
      args.bandwidth_khz > 0.0 ? args.bandwidth_khz : 0.5 * args.center_khz;
  cfg.threshold_fraction = args.threshold;
  cfg.smoothing_window_ms = args.smoothing_ms;
  cfg.validate();

  json meta;
  try {
    meta = json::parse(read_text_file(args.meta_path));
  } catch (const json::exception& e) {
    throw Error("malformed meta file: " + std::string(e.what()));
  }
  Dataset d;
  d.geometry = {meta.at("plate").at("lx").get<double>(),
                meta.at("plate").at("ly").get<double>(),
                meta.at("plate").at("h").get<double>()};
  for (const auto& s : meta.at("sensors")) {
    d.array.sensors.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  if (meta.contains("ids")) {
    d.array.ids = meta["ids"].get<std::vector<std::string>>();
  } else {
    for (std::size_t i = 0; i < d.array.sensors.size(); ++i) {
      d.array.ids.push_back("S" + std::to_string(i + 1));
    }
  }
  d.array.validate(d.geometry);
  d.provenance = "extracted (" + std::string(kToolVersion) + ")";

  std::vector<fs::path> impact_dirs;
  for (const auto& entry : fs::directory_iterator(args.signals_dir)) {
    if (entry.is_directory() &&
        entry.path().filename().string().rfind("impact_", 0) == 0) {
      impact_dirs.push_back(entry.path());
    }
  }
  if (impact_dirs.empty()) {
    throw Error("no impact_* directories under '" + args.signals_dir + "'");
  }
  std::sort(impact_dirs.begin(), impact_dirs.end());

  std::vector<std::string> failures;
  for (const auto& dir : impact_dirs) {
    try {
      json info;
      try {
        info = json::parse(read_text_file((dir / "impact.json").string()));
      } catch (const Error&) {
        throw Error("missing impact.json");
      }
      std::vector<wavesim::SyntheticSignal> sigs;
      for (std::size_t k = 0; k < d.array.size(); ++k) {
        const fs::path f = dir / ("sensor_" + std::to_string(k + 1) + ".csv");
        if (!fs::exists(f)) {
          throw Error("missing sensor file " + f.filename().string());
        }
        sigs.push_back(wavesim::load_signal_csv(f.string()));
      }
      ImpactRecord r;
      r.id = info.at("id").get<int>();
      r.location = {info.at("x_mm").get<double>(), info.at("y_mm").get<double>()};
      r.condition = info.value("condition", "REF");
      r.repetition = info.value("repetition", 1);
      r.tdoa = extract::extract_tdoa(sigs, cfg);
      d.records.push_back(std::move(r));
    } catch (const Error& e) {
      failures.push_back(dir.filename().string() + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "extraction failed for " +
                      std::to_string(failures.size()) + " impact(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(msg);
  }
  std::sort(d.records.begin(), d.records.end(),
            [](const ImpactRecord& a, const ImpactRecord& b) { return a.id < b.id; });

  fs::create_directories(args.out_dir);
  const std::string out_path = (fs::path(args.out_dir) / args.out_name).string();
  save_dataset(d, out_path);
  write_manifest(args.out_dir, argv, args.seed,
                 {{args.meta_path, file_digest(args.meta_path)}});
  std::cout << "extracted " << d.records.size() << " records to " << out_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string ref_path;
  std::string out_dir = ".";
  std::string kernels = "rbf,cos,comp";
  std::string input_std = "ss";
  std::string output_std = "fs";
  double learning_rate = 0.1;
  int iters = 5000;
  std::uint64_t seed = 1;
  bool fix_cos_scale = false;
};

std::vector<gpr::KernelKind> parse_kernels(const std::string& csv) {
  std::vector<gpr::KernelKind> kinds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) kinds.push_back(gpr::kernel_from_string(item));
  }
  if (kinds.empty()) throw Error("no kernels requested");
  return kinds;
}

int cmd_train(const TrainArgs& args, const std::vector<std::string>& argv) {
  const Dataset d = load_dataset(args.ref_path);
  Eigen::MatrixXd x, y;
  eval::to_matrices(d, x, y);

  gpr::FitOptions opts;
  opts.learning_rate = args.learning_rate;
  opts.max_iters = args.iters;
  opts.seed = args.seed;
  opts.input_mode = preprocess::mode_from_string(args.input_std);
  opts.output_mode = preprocess::mode_from_string(args.output_std);
  opts.train_cos_scale = !args.fix_cos_scale;

  fs::create_directories(args.out_dir);
  for (const auto kind : parse_kernels(args.kernels)) {
    try {
      const gpr::GprModel model = gpr::GprModel::fit(x, y, kind, opts);
      const std::string path =
          (fs::path(args.out_dir) / ("model_" + gpr::to_string(kind) + ".json"))
              .string();
      model.save(path);
      std::cout << gpr::to_string(kind) << " log_marginal_likelihood="
                << format_double(model.log_marginal_likelihood()) << "\n";
    } catch (const Error& e) {
      throw Error("training " + gpr::to_string(kind) + " failed: " + e.what());
    }
  }
  write_manifest(args.out_dir, argv, args.seed,
                 {{args.ref_path, file_digest(args.ref_path)}});
  return 0;
}

// ---------------------------------------------------------------------------
// localise
// ---------------------------------------------------------------------------

struct LocaliseArgs {
  std::string models;  // comma-separated model json paths
  std::string targets_path;
  std::string out_dir = ".";
  std::string out_name = "predictions.csv";
  bool fuse = false;
  bool full_bma_variance = false;
  std::uint64_t seed = 1;
};

int cmd_localise(const LocaliseArgs& args, const std::vector<std::string>& argv) {
  std::vector<std::string> model_paths;
  {
    std::stringstream ss(args.models);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) model_paths.push_back(item);
    }
  }
  if (model_paths.empty()) throw Error("no model files given");

  const Dataset targets = load_dataset(args.targets_path);

  std::vector<gpr::GprModel> models;
  std::vector<std::string> names;
  Eigen::VectorXd lmls(static_cast<Eigen::Index>(model_paths.size()));
  for (std::size_t i = 0; i < model_paths.size(); ++i) {
    models.push_back(gpr::GprModel::load(model_paths[i]));
    names.push_back(gpr::to_string(models.back().kernel().kind));
    lmls(static_cast<Eigen::Index>(i)) = models.back().log_marginal_likelihood();
    if (models.back().input_dim() != static_cast<int>(targets.array.size())) {
      throw Error("model " + model_paths[i] + " expects " +
                  std::to_string(models.back().input_dim()) +
                  " sensors, targets have " +
                  std::to_string(targets.array.size()));
    }
  }

  std::ostringstream csv;
  csv << "impact_id,kernel,pred_x_mm,pred_y_mm,var_x_mm2,var_y_mm2\n";
  json fusion_report;
  fusion_report["kernels"] = names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    fusion_report["log_marginal_likelihood"][names[i]] =
        lmls(static_cast<Eigen::Index>(i));
  }
  json target_rows = json::array();

  for (const auto& rec : targets.records) {
    Eigen::VectorXd x(rec.tdoa.size());
    for (std::size_t j = 0; j < rec.tdoa.size(); ++j) x(j) = rec.tdoa.values[j];
    std::vector<gpr::Prediction> preds;
    for (std::size_t k = 0; k < models.size(); ++k) {
      preds.push_back(models[k].predict(x));
      const auto& p = preds.back();
      csv << rec.id << ',' << names[k] << ',' << format_double(p.mean(0)) << ','
          << format_double(p.mean(1)) << ',' << format_double(p.variance(0))
          << ',' << format_double(p.variance(1)) << "\n";
    }
    if (args.fuse) {
      const auto fused =
          fusion::fuse_models(names, lmls, preds, args.full_bma_variance);
      csv << rec.id << ",bma," << format_double(fused.mean(0)) << ','
          << format_double(fused.mean(1)) << ','
          << format_double(fused.variance(0)) << ','
          << format_double(fused.variance(1)) << "\n";

      json row;
      row["impact_id"] = rec.id;
      row["w_ml"] = std::vector<double>(
          fused.weights.ml.data(), fused.weights.ml.data() + fused.weights.ml.size());
      json unc = json::array(), comb = json::array(), per = json::object();
      for (std::size_t k = 0; k < names.size(); ++k) {
        const Eigen::Index ki = static_cast<Eigen::Index>(k);
        unc.push_back({fused.weights.unc(ki, 0), fused.weights.unc(ki, 1)});
        comb.push_back({fused.weights.combined(ki, 0), fused.weights.combined(ki, 1)});
        per[names[k]] = {{"mean", {preds[k].mean(0), preds[k].mean(1)}},
                         {"variance", {preds[k].variance(0), preds[k].variance(1)}}};
      }
      row["w_unc"] = unc;
      row["w_combined"] = comb;
      row["per_kernel"] = per;
      row["fused"] = {{"mean", {fused.mean(0), fused.mean(1)}},
                      {"variance", {fused.variance(0), fused.variance(1)}}};
      target_rows.push_back(std::move(row));
    }
  }

  fs::create_directories(args.out_dir);
  const std::string out_path = (fs::path(args.out_dir) / args.out_name).string();
  write_text_file(out_path, csv.str());
  if (args.fuse) {
    fusion_report["targets"] = target_rows;
    write_text_file((fs::path(args.out_dir) / "fusion.json").string(),
                    fusion_report.dump(2) + "\n");
  }

  std::map<std::string, std::string> inputs{
      {args.targets_path, file_digest(args.targets_path)}};
  for (const auto& p : model_paths) inputs[p] = file_digest(p);
  write_manifest(args.out_dir, argv, args.seed, inputs);
  std::cout << "wrote predictions for " << targets.records.size()
            << " targets to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions_path;
  std::string truth_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
};

int cmd_evaluate(const EvaluateArgs& args, const std::vector<std::string>& argv) {
  const Dataset truth = load_dataset(args.truth_path);
  std::map<int, ImpactLocation> truth_by_id;
  for (const auto& r : truth.records) truth_by_id[r.id] = r.location;

  std::ifstream in(args.predictions_path);
  if (!in) throw Error("cannot open '" + args.predictions_path + "'");
  std::string line;
  int line_no = 0;
  std::map<std::string, std::vector<double>> errors_by_kernel;
  std::vector<std::string> kernel_order;
  std::vector<int> unmatched;
  std::ostringstream errors_csv;
  errors_csv << "impact_id,kernel,error_mm\n";
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;
    std::stringstream ss(line);
    std::string id_s, kernel, xs, ys;
    if (!std::getline(ss, id_s, ',') || !std::getline(ss, kernel, ',') ||
        !std::getline(ss, xs, ',') || !std::getline(ss, ys, ',')) {
      throw Error("predictions line " + std::to_string(line_no) + " malformed");
    }
    const int id = std::stoi(id_s);
    const auto it = truth_by_id.find(id);
    if (it == truth_by_id.end()) {
      unmatched.push_back(id);
      continue;
    }
    const ImpactLocation pred{std::stod(xs), std::stod(ys)};
    const double err = dist(pred, it->second);
    if (!errors_by_kernel.count(kernel)) kernel_order.push_back(kernel);
    errors_by_kernel[kernel].push_back(err);
    errors_csv << id << ',' << kernel << ',' << format_double(err) << "\n";
  }
  if (!unmatched.empty()) {
    std::string msg = "prediction ids with no matching truth record:";
    for (int id : unmatched) msg += " " + std::to_string(id);
    throw Error(msg);
  }
  if (errors_by_kernel.empty()) throw Error("no prediction rows to evaluate");

  std::vector<eval::KernelReport> reports;
  json summary;
  for (const auto& name : kernel_order) {
    eval::KernelReport kr;
    kr.kernel = name;
    kr.lml = std::numeric_limits<double>::quiet_NaN();
    kr.summary = eval::summarize(errors_by_kernel[name]);
    kr.cdf = eval::error_cdf(errors_by_kernel[name]);
    summary[name] = {{"mean_error_mm", kr.summary.mean_mm},
                     {"max_error_mm", kr.summary.max_mm},
                     {"sd_error_mm", kr.summary.sd_mm},
                     {"count", kr.summary.count}};
    reports.push_back(std::move(kr));
  }

  fs::create_directories(args.out_dir);
  const auto dir = fs::path(args.out_dir);
  json j;
  j["summary"] = summary;
  write_text_file((dir / "summary.json").string(), j.dump(2) + "\n");
  write_text_file((dir / "errors.csv").string(), errors_csv.str());
  for (const auto& kr : reports) {
    std::ostringstream cdf;
    cdf << "error_mm,cdf\n";
    for (const auto& [e, f] : kr.cdf) {
      cdf << format_double(e) << ',' << format_double(f) << "\n";
    }
    write_text_file((dir / ("cdf_" + kr.kernel + ".csv")).string(), cdf.str());
  }
  write_text_file((dir / "cdf.svg").string(), eval::cdf_svg(reports));
  write_manifest(args.out_dir, argv, args.seed,
                 {{args.predictions_path, file_digest(args.predictions_path)},
                  {args.truth_path, file_digest(args.truth_path)}});
  std::cout << "evaluated " << reports.size() << " kernel(s); summary in "
            << (dir / "summary.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string ref_path;
  std::string targets_path;
  std::string out_dir = ".";
  std::string subset = "ri35";
  std::string sensors;  // 1-based comma list, empty keeps all
  std::string kernels = "rbf,cos,comp";
  std::string input_std = "ss";
  std::string output_std = "fs";
  double learning_rate = 0.1;
  int iters = 5000;
  std::uint64_t seed = 1;
  bool fuse = false;
  bool full_bma_variance = false;
};

int cmd_report(const ReportArgs& args, const std::vector<std::string>& argv) {
  const Dataset ref = load_dataset(args.ref_path);
  const Dataset targets = load_dataset(args.targets_path);

  eval::ExperimentConfig cfg;
  cfg.subset = eval::subset_from_string(args.subset);
  if (!args.sensors.empty()) {
    std::stringstream ss(args.sensors);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const int one_based = std::stoi(item);
      if (one_based < 1) throw Error("sensor numbers are 1-based");
      cfg.sensor_subset.push_back(one_based - 1);
    }
  }
  cfg.kernels = parse_kernels(args.kernels);
  cfg.fuse = args.fuse;
  cfg.full_bma_variance = args.full_bma_variance;
  cfg.fit.learning_rate = args.learning_rate;
  cfg.fit.max_iters = args.iters;
  cfg.fit.seed = args.seed;
  cfg.fit.input_mode = preprocess::mode_from_string(args.input_std);
  cfg.fit.output_mode = preprocess::mode_from_string(args.output_std);

  const auto report = eval::run_experiment(cfg, ref, targets);
  eval::write_report(report, args.out_dir);
  write_manifest(args.out_dir, argv, args.seed,
                 {{args.ref_path, file_digest(args.ref_path)},
                  {args.targets_path, file_digest(args.targets_path)}});
  for (const auto& k : report.kernels) {
    std::cout << k.kernel << " mean_error_mm="
              << format_double(k.summary.mean_mm)
              << " max_error_mm=" << format_double(k.summary.max_mm) << "\n";
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv) {
  std::vector<std::string> argv_vec(argv, argv + argc);

  CLI::App app{"impact localisation toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate",
                                     "generate a synthetic impact dataset");
  sim_cmd->add_option("--config", sim.config_path, "flat JSON config")
      ->required();
  sim_cmd->add_option("--out-dir", sim.out_dir, "output directory");
  sim_cmd->add_option("--seed", sim.seed, "manifest seed");

  ExtractArgs ext;
  auto* ext_cmd = app.add_subcommand("extract",
                                     "pick TDOA vectors from signal CSVs");
  ext_cmd->add_option("--signals-dir", ext.signals_dir, "directory of impact_* folders")
      ->required();
  ext_cmd->add_option("--meta", ext.meta_path, "dataset sidecar with plate and sensors")
      ->required();
  ext_cmd->add_option("--out", ext.out_name, "output dataset file name");
  ext_cmd->add_option("--out-dir", ext.out_dir, "output directory");
  ext_cmd->add_option("--center-khz", ext.center_khz, "extraction centre frequency")
      ->required();
  ext_cmd->add_option("--bandwidth-khz", ext.bandwidth_khz, "band width (default cf/2)");
  ext_cmd->add_option("--threshold", ext.threshold, "envelope threshold fraction");
  ext_cmd->add_option("--smoothing-ms", ext.smoothing_ms,
                      "envelope smoothing window (default 2 periods)");
  ext_cmd->add_option("--seed", ext.seed, "manifest seed");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train one GP model per kernel");
  tr_cmd->add_option("--ref", tr.ref_path, "reference dataset CSV")->required();
  tr_cmd->add_option("--out-dir", tr.out_dir, "output directory");
  tr_cmd->add_option("--kernels", tr.kernels, "comma list of rbf|cos|comp");
  tr_cmd->add_option("--input-std", tr.input_std, "ss|fs|none");
  tr_cmd->add_option("--output-std", tr.output_std, "fs|none");
  tr_cmd->add_option("--lr", tr.learning_rate, "Adam learning rate");
  tr_cmd->add_option("--iters", tr.iters, "Adam iterations");
  tr_cmd->add_option("--seed", tr.seed, "manifest seed");
  tr_cmd->add_flag("--fix-cos-scale", tr.fix_cos_scale,
                   "freeze the cosine kernel scale at 1");

  LocaliseArgs loc;
  auto* loc_cmd = app.add_subcommand("localise", "predict impact locations");
  loc_cmd->add_option("--models", loc.models, "comma list of model JSON files")
      ->required();
  loc_cmd->add_option("--targets", loc.targets_path, "target dataset CSV")
      ->required();
  loc_cmd->add_option("--out", loc.out_name, "predictions file name");
  loc_cmd->add_option("--out-dir", loc.out_dir, "output directory");
  loc_cmd->add_flag("--fuse", loc.fuse, "add fused rows and fusion.json");
  loc_cmd->add_flag("--full-bma-variance", loc.full_bma_variance,
                    "include the between-model dispersion term");
  loc_cmd->add_option("--seed", loc.seed, "manifest seed");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate",
                                    "score predictions against truth");
  ev_cmd->add_option("--predictions", ev.predictions_path, "predictions CSV")
      ->required();
  ev_cmd->add_option("--truth", ev.truth_path, "truth dataset CSV")->required();
  ev_cmd->add_option("--out-dir", ev.out_dir, "output directory");
  ev_cmd->add_option("--seed", ev.seed, "manifest seed");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report",
                                     "train, localise and score in one run");
  rep_cmd->add_option("--ref", rep.ref_path, "reference dataset CSV")->required();
  rep_cmd->add_option("--targets", rep.targets_path, "target dataset CSV")
      ->required();
  rep_cmd->add_option("--out-dir", rep.out_dir, "output directory");
  rep_cmd->add_option("--subset", rep.subset, "ri35|ri15|ri9|ext9");
  rep_cmd->add_option("--sensors", rep.sensors, "1-based sensor list, e.g. 1,2,3,4");
  rep_cmd->add_option("--kernels", rep.kernels, "comma list of rbf|cos|comp");
  rep_cmd->add_option("--input-std", rep.input_std, "ss|fs|none");
  rep_cmd->add_option("--output-std", rep.output_std, "fs|none");
  rep_cmd->add_option("--lr", rep.learning_rate, "Adam learning rate");
  rep_cmd->add_option("--iters", rep.iters, "Adam iterations");
  rep_cmd->add_option("--seed", rep.seed, "manifest seed");
  rep_cmd->add_flag("--fuse", rep.fuse, "fuse kernels with BMA");
  rep_cmd->add_flag("--full-bma-variance", rep.full_bma_variance,
                    "include the between-model dispersion term");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim, argv_vec);
    if (ext_cmd->parsed()) return cmd_extract(ext, argv_vec);
    if (tr_cmd->parsed()) return cmd_train(tr, argv_vec);
    if (loc_cmd->parsed()) return cmd_localise(loc, argv_vec);
    if (ev_cmd->parsed()) return cmd_evaluate(ev, argv_vec);
    if (rep_cmd->parsed()) return cmd_report(rep, argv_vec);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace iloc::cli
