#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "certpose/bench.hpp"
#include "certpose/certifier.hpp"
#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/pipeline.hpp"
#include "certpose/synth.hpp"

// File formats: correspondence CSV / JSON, result JSON, trial CSV and
// summary JSON of benchmark runs.

namespace certpose {

using Json = nlohmann::ordered_json;

/// Shortest text that round-trips a double exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

// Accepts bearings within the load tolerance. Vectors that are not unit to
// machine precision are renormalized; the rest are kept bit for bit.
inline UnitVector3 load_unit(const Eigen::Vector3d& v, const std::string& where) {
  constexpr double kLoadTolerance = 1e-6;
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kLoadTolerance) {
    throw IoError(where + ": bearing vector is not unit norm (|v| = " + format_double(v.norm()) + ")");
  }
  if (std::abs(v.norm() - 1.0) <= UnitVector3::kTolerance) return UnitVector3(v);
  return UnitVector3::normalized(v);
}

template <int R, int C>
Json matrix_row_major(const Eigen::Matrix<double, R, C>& m) {
  Json a = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  }
  return a;
}

inline Eigen::Matrix3d matrix3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 9) throw IoError(where + ": expected 9 numbers (row-major 3x3)");
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = j.at(static_cast<std::size_t>(i)).get<double>();
  return m;
}

inline Eigen::Vector3d vector3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw IoError(where + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------- correspondences

inline constexpr const char* kCorrespondenceHeader = "fx,fy,fz,fpx,fpy,fpz";

inline std::vector<BearingPair> read_correspondences_csv(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kCorrespondenceHeader) {
    throw IoError(path.string() + ": expected header '" + kCorrespondenceHeader + "'");
  }
  std::vector<BearingPair> pairs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto cells = detail::split(line, ',');
    if (cells.size() != 6) throw IoError(where + ": expected 6 columns");
    double v[6];
    try {
      for (int k = 0; k < 6; ++k) v[k] = parse_double(cells[static_cast<std::size_t>(k)]);
    } catch (const std::exception&) {
      throw IoError(where + ": malformed number");
    }
    pairs.push_back({detail::load_unit({v[0], v[1], v[2]}, where), detail::load_unit({v[3], v[4], v[5]}, where)});
  }
  return pairs;
}

inline void write_correspondences_csv(const std::filesystem::path& path, std::span<const BearingPair> pairs) {
  std::ofstream out = detail::open_out(path);
  out << kCorrespondenceHeader << '\n';
  for (const auto& p : pairs) {
    const auto& f = p.f.vector();
    const auto& g = p.f_prime.vector();
    out << format_double(f.x()) << ',' << format_double(f.y()) << ',' << format_double(f.z()) << ','
        << format_double(g.x()) << ',' << format_double(g.y()) << ',' << format_double(g.z()) << '\n';
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

/// Correspondences plus whatever ground truth a synthetic file carries.
struct ProblemFile {
  std::vector<BearingPair> pairs;
  std::optional<Rotation3> gt_rotation;
  std::optional<UnitVector3> gt_translation;
  std::optional<std::vector<bool>> inlier_mask;
  Json config;
};

inline Json scene_config_json(const SceneConfig& c) {
  return Json{{"n_points", c.n_points},
              {"noise_px", c.noise_px},
              {"focal_px", c.focal_px},
              {"fov_deg", c.fov_deg},
              {"parallax_min", c.parallax_min},
              {"parallax_max", c.parallax_max},
              {"depth_min", c.depth_min},
              {"depth_max", c.depth_max},
              {"seed", c.seed},
              {"noise_model", c.noise_model == NoiseModel::kUniform ? "uniform" : "gaussian"}};
}

inline ProblemFile problem_file(const SyntheticProblem& p) {
  ProblemFile f;
  f.pairs = p.pairs;
  f.gt_rotation = p.gt_rotation;
  f.gt_translation = p.gt_translation;
  f.config = scene_config_json(p.config);
  return f;
}

inline Json problem_to_json(const ProblemFile& f) {
  Json j;
  Json pairs = Json::array();
  for (const auto& p : f.pairs) {
    pairs.push_back({p.f[0], p.f[1], p.f[2], p.f_prime[0], p.f_prime[1], p.f_prime[2]});
  }
  j["pairs"] = std::move(pairs);
  if (f.gt_rotation && f.gt_translation) {
    j["ground_truth"] = {
        {"rotation", detail::matrix_row_major(f.gt_rotation->matrix())},
        {"translation", {(*f.gt_translation)[0], (*f.gt_translation)[1], (*f.gt_translation)[2]}},
        {"essential", detail::matrix_row_major(essential_from_pose(*f.gt_rotation, *f.gt_translation).matrix())}};
  }
  if (f.inlier_mask) j["inlier_mask"] = *f.inlier_mask;
  if (!f.config.is_null()) j["config"] = f.config;
  return j;
}

inline void write_problem_json(const std::filesystem::path& path, const ProblemFile& f) {
  std::ofstream out = detail::open_out(path);
  out << problem_to_json(f).dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

inline ProblemFile read_problem_json(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  ProblemFile f;
  try {
    const Json j = Json::parse(in);
    int row = 0;
    for (const auto& p : j.at("pairs")) {
      const std::string where = path.string() + ": pair " + std::to_string(row++);
      if (!p.is_array() || p.size() != 6) throw IoError(where + ": expected 6 numbers");
      f.pairs.push_back({detail::load_unit({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()}, where),
                         detail::load_unit({p[3].get<double>(), p[4].get<double>(), p[5].get<double>()}, where)});
    }
    if (j.contains("ground_truth")) {
      const auto& gt = j["ground_truth"];
      f.gt_rotation = Rotation3(detail::matrix3_from_json(gt.at("rotation"), path.string() + ": rotation"));
      f.gt_translation = detail::load_unit(detail::vector3_from_json(gt.at("translation"), path.string()),
                                           path.string() + ": translation");
    }
    if (j.contains("inlier_mask")) f.inlier_mask = j["inlier_mask"].get<std::vector<bool>>();
    if (j.contains("config")) f.config = j["config"];
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (f.inlier_mask && f.inlier_mask->size() != f.pairs.size()) {
    throw IoError(path.string() + ": inlier_mask length does not match the number of pairs");
  }
  return f;
}

/// Dispatches on the extension: .json for the JSON variant, CSV otherwise.
inline ProblemFile read_problem(const std::filesystem::path& path) {
  if (path.extension() == ".json") return read_problem_json(path);
  ProblemFile f;
  f.pairs = read_correspondences_csv(path);
  return f;
}

// ---------------------------------------------------------------- results

inline Json certificate_to_json(const CertificateReport& c) {
  Json lambda = Json::array();
  for (int i = 0; i < 6; ++i) lambda.push_back(detail::number_or_null(c.lambda_hat[i]));
  return Json{{"cost", c.primal_cost},
              {"lambda_hat", lambda},
              {"dual_value", detail::number_or_null(c.dual_value)},
              {"gap", detail::number_or_null(c.gap)},
              {"gap_measure", detail::number_or_null(c.gap_measure)},
              {"min_eigenvalue", detail::number_or_null(c.min_eigenvalue)},
              {"residual", detail::number_or_null(c.residual)},
              {"rank_deficient", c.rank_deficient},
              {"verdict", to_string(c.verdict)}};
}

inline Json essential_to_json(const EssentialElement& e) {
  const auto& t = e.translation();
  return Json{{"essential", detail::matrix_row_major(e.matrix())},
              {"rotation", detail::matrix_row_major(e.rotation().matrix())},
              {"translation", {t[0], t[1], t[2]}}};
}

/// Result JSON of one pipeline run: pose, certificate, iteration count, seed
/// and an echo of the configuration used.
inline Json result_to_json(const PipelineResult& r, std::uint64_t seed, const Json& config) {
  Json j = essential_to_json(r.pose);
  const Json cert = certificate_to_json(r.certificate);
  for (auto it = cert.begin(); it != cert.end(); ++it) j[it.key()] = it.value();
  j["iterations"] = r.solve.outer_iterations;
  j["inner_iterations"] = r.solve.inner_iterations;
  j["gradient_norm"] = r.solve.gradient_norm;
  j["converged"] = r.solve.converged;
  j["pose_recovered"] = r.pose_recovered;
  j["cost_trace"] = r.solve.cost_trace;
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

// ---------------------------------------------------------------- benchmark files

inline const std::vector<std::string>& trial_csv_columns() {
  static const std::vector<std::string> cols = {
      "cell",          "scene",          "trial",         "kind",           "noise_px",     "n_points",
      "init",          "fov_deg",        "parallax_max",  "focal_px",       "scene_seed",   "error",
      "cost",          "outer_iterations", "inner_iterations", "gradient_norm", "converged", "verdict",
      "dual_value",    "gap",            "min_eigenvalue", "rank_deficient", "rotation_error_deg",
      "translation_error_deg", "oracle_best_cost", "oracle_optimal", "label", "flagged", "cost_trace"};
  return cols;
}

namespace detail {

inline std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace detail

inline void write_trials_csv(std::ostream& out, std::span<const TrialRecord> records) {
  const auto& cols = trial_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    std::string trace;
    for (std::size_t k = 0; k < r.cost_trace.size(); ++k) {
      if (k) trace += ';';
      trace += format_double(r.cost_trace[k]);
    }
    out << r.cell.index << ',' << r.cell.scene_index << ',' << r.trial << ',' << r.kind << ','
        << format_double(r.cell.noise_px) << ',' << r.cell.n_points << ',' << to_string(r.cell.init) << ','
        << format_double(r.cell.fov_deg) << ',' << format_double(r.cell.parallax_max) << ','
        << format_double(r.cell.focal_px) << ',' << r.scene_seed << ',' << detail::csv_safe(r.error) << ','
        << format_double(r.cost) << ',' << r.outer_iterations << ',' << r.inner_iterations << ','
        << format_double(r.gradient_norm) << ',' << int(r.converged) << ',' << to_string(r.verdict) << ','
        << format_double(r.dual_value) << ',' << format_double(r.gap) << ',' << format_double(r.min_eigenvalue)
        << ',' << int(r.rank_deficient) << ',' << format_double(r.rotation_error_deg) << ','
        << format_double(r.translation_error_deg) << ',' << format_double(r.oracle_best_cost) << ','
        << int(r.oracle_optimal) << ',' << to_string(r.label) << ',' << int(r.flagged) << ',' << trace << '\n';
  }
}

inline void write_trials_csv(const std::filesystem::path& path, std::span<const TrialRecord> records) {
  std::ofstream out = detail::open_out(path);
  write_trials_csv(out, records);
  if (!out) throw IoError(path.string() + ": write failed");
}

inline std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  const auto& cols = trial_csv_columns();
  if (!std::getline(in, line) || detail::split(line, ',') != cols) {
    throw IoError(path.string() + ": unexpected trial CSV header");
  }
  std::vector<TrialRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto c = detail::split(line, ',');
    if (c.size() != cols.size()) throw IoError(where + ": expected " + std::to_string(cols.size()) + " columns");
    TrialRecord r;
    try {
      r.cell.index = std::stoi(c[0]);
      r.cell.scene_index = std::stoi(c[1]);
      r.trial = std::stoi(c[2]);
      r.kind = c[3];
      r.cell.noise_px = parse_double(c[4]);
      r.cell.n_points = std::stoi(c[5]);
      r.cell.init = init_method_from_string(c[6]);
      r.cell.fov_deg = parse_double(c[7]);
      r.cell.parallax_max = parse_double(c[8]);
      r.cell.focal_px = parse_double(c[9]);
      r.scene_seed = std::stoull(c[10]);
      r.error = c[11];
      r.cost = parse_double(c[12]);
      r.outer_iterations = std::stoi(c[13]);
      r.inner_iterations = std::stoi(c[14]);
      r.gradient_norm = parse_double(c[15]);
      r.converged = c[16] == "1";
      r.verdict = c[17] == "optimal" ? Verdict::kOptimal : Verdict::kUnknown;
      r.dual_value = parse_double(c[18]);
      r.gap = parse_double(c[19]);
      r.min_eigenvalue = parse_double(c[20]);
      r.rank_deficient = c[21] == "1";
      r.rotation_error_deg = parse_double(c[22]);
      r.translation_error_deg = parse_double(c[23]);
      r.oracle_best_cost = parse_double(c[24]);
      r.oracle_optimal = c[25] == "1";
      r.label = label_from_string(c[26]);
      r.flagged = c[27] == "1";
      for (const auto& v : detail::split(c[28], ';')) {
        if (!v.empty()) r.cost_trace.push_back(parse_double(v));
      }
    } catch (const std::exception& e) {
      throw IoError(where + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

/// Groups records by cell index and summarizes each group.
inline std::vector<CellSummary> summarize(std::span<const TrialRecord> records) {
  std::vector<CellSummary> out;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].cell.index == records[i].cell.index) ++j;
    out.push_back(summarize_cell(records[i].cell, records.subspan(i, j - i)));
    i = j;
  }
  return out;
}

inline Json grid_to_json(const ExperimentGrid& g) {
  std::vector<std::string> inits;
  for (const auto m : g.inits) inits.emplace_back(to_string(m));
  return Json{{"noise_levels", g.noise_levels},
              {"point_counts", g.point_counts},
              {"trials", g.trials},
              {"inits", inits},
              {"fov_degs", g.fov_degs},
              {"parallax_maxes", g.parallax_maxes},
              {"focal_pxs", g.focal_pxs},
              {"parallax_min", g.parallax_min},
              {"seed", g.master_seed},
              {"certify_initial", g.certify_initial},
              {"tau_mu", g.certifier.tau_mu},
              {"tau_gap", g.certifier.tau_gap},
              {"gap_mode", g.certifier.gap_mode == GapMode::kAbsolute ? "absolute" : "relative"},
              {"oracle_restarts", g.oracle.restarts}};
}

inline Json summary_to_json(const CellSummary& s) {
  using detail::number_or_null;
  const auto& pr = s.classification;
  return Json{{"cell", s.cell.index},
              {"noise_px", s.cell.noise_px},
              {"n_points", s.cell.n_points},
              {"init", to_string(s.cell.init)},
              {"fov_deg", s.cell.fov_deg},
              {"parallax_max", s.cell.parallax_max},
              {"focal_px", s.cell.focal_px},
              {"trials", s.trials},
              {"failures", s.failures},
              {"certified_fraction", s.certified_fraction},
              {"precision", pr.precision ? Json(*pr.precision) : Json(nullptr)},
              {"recall", pr.recall ? Json(*pr.recall) : Json(nullptr)},
              {"tp", pr.tp},
              {"fp", pr.fp},
              {"fnp", pr.fnp},
              {"tn", pr.tn},
              {"median_outer_iterations", number_or_null(s.median_outer_iterations)},
              {"mean_outer_iterations", number_or_null(s.mean_outer_iterations)},
              {"rotation_error_q25", number_or_null(s.rotation_error_q25)},
              {"rotation_error_median", number_or_null(s.rotation_error_median)},
              {"rotation_error_q75", number_or_null(s.rotation_error_q75)},
              {"rotation_error_median_certified", number_or_null(s.rotation_error_median_certified)},
              {"translation_error_median", number_or_null(s.translation_error_median)},
              {"flagged", s.flagged}};
}

inline Json grid_result_to_json(const GridResult& r) {
  Json cells = Json::array();
  for (const auto& s : r.summaries) cells.push_back(summary_to_json(s));
  return Json{{"grid", grid_to_json(r.grid)}, {"cells", cells}};
}

}  // namespace certpose
