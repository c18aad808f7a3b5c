#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "certpose/certifier.hpp"
#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/initializer.hpp"
#include "certpose/manifold.hpp"
#include "certpose/pipeline.hpp"
#include "certpose/problem.hpp"
#include "certpose/random.hpp"
#include "certpose/synth.hpp"

// Experiment runner: per-trial pipeline runs on synthetic scenes, labeled
// against an optimality oracle and aggregated per grid cell.

namespace certpose {

// ---------------------------------------------------------------- metrics

/// Geodesic rotation error in degrees, within [0, 180].
inline double rotation_error(const Rotation3& r_hat, const Rotation3& r_gt) {
  return rotation_angle_deg(r_hat.matrix(), r_gt.matrix());
}

/// Angle between two translation directions in degrees, within [0, 180].
inline double translation_error(const UnitVector3& t_hat, const UnitVector3& t_gt) {
  const Eigen::Vector3d& a = t_hat.vector();
  const Eigen::Vector3d& b = t_gt.vector();
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

enum class Label { kTruePositive, kFalsePositive, kFalseNonPositive, kTrueNegative };

inline const char* to_string(Label l) {
  switch (l) {
    case Label::kTruePositive: return "TP";
    case Label::kFalsePositive: return "FP";
    case Label::kFalseNonPositive: return "FNP";
    case Label::kTrueNegative: return "TN";
  }
  return "TN";
}

inline Label label_from_string(const std::string& s) {
  if (s == "TP") return Label::kTruePositive;
  if (s == "FP") return Label::kFalsePositive;
  if (s == "FNP") return Label::kFalseNonPositive;
  if (s == "TN") return Label::kTrueNegative;
  throw InvalidArgument("unknown label '" + s + "'");
}

/// Truth table of (oracle says optimal, certifier says optimal).
inline Label classify(bool oracle_optimal, Verdict verdict) {
  const bool certified = verdict == Verdict::kOptimal;
  if (oracle_optimal) return certified ? Label::kTruePositive : Label::kFalseNonPositive;
  return certified ? Label::kFalsePositive : Label::kTrueNegative;
}

inline const char* to_string(InitMethod m) {
  switch (m) {
    case InitMethod::kEightPoint: return "8pt";
    case InitMethod::kIdentity: return "identity";
    case InitMethod::kRandom: return "random";
  }
  return "8pt";
}

inline InitMethod init_method_from_string(const std::string& s) {
  if (s == "8pt") return InitMethod::kEightPoint;
  if (s == "identity") return InitMethod::kIdentity;
  if (s == "random") return InitMethod::kRandom;
  throw InvalidArgument("unknown initializer '" + s + "' (expected 8pt, identity or random)");
}

// ---------------------------------------------------------------- oracle

struct OracleConfig {
  /// Exact oracle for noiseless scenes.
  double noiseless_cost_tolerance = 1e-12;
  /// Random restarts used as a stand-in for the global optimum on noisy data.
  int restarts = 16;
  /// Slack when comparing a cost against the best restart.
  double relative_tolerance = 1e-6;
  double absolute_tolerance = 1e-14;
};

struct OracleResult {
  /// Lowest cost seen over the restarts (and the candidate itself).
  double best_cost = std::numeric_limits<double>::infinity();
  bool exact = false;
};

/// Best known cost for a scene. Exact (zero) at noise 0; otherwise the
/// minimum over random-restart RTR solves.
inline OracleResult optimality_oracle(const ProblemData& data, double noise_px, std::uint64_t seed,
                                      const OracleConfig& cfg = {}, const RtrConfig& rtr = {}) {
  OracleResult out;
  if (noise_px == 0.0) {
    out.best_cost = 0.0;
    out.exact = true;
    return out;
  }
  Rng rng = make_rng({seed, 0x0EAC1Eull});
  for (int k = 0; k < cfg.restarts; ++k) {
    const SolveReport s = solve_rtr(data, random_essential(rng()), rtr);
    out.best_cost = std::min(out.best_cost, s.final_cost);
  }
  return out;
}

inline bool oracle_says_optimal(const OracleResult& oracle, double candidate_cost, const OracleConfig& cfg = {}) {
  if (oracle.exact) return candidate_cost <= cfg.noiseless_cost_tolerance;
  const double best = std::min(oracle.best_cost, candidate_cost);
  return candidate_cost <= best + std::max(cfg.absolute_tolerance, cfg.relative_tolerance * best);
}

// ---------------------------------------------------------------- grid

struct ExperimentGrid {
  std::vector<double> noise_levels{0.1, 0.5, 1.0, 2.5};
  std::vector<int> point_counts{8, 9, 10, 11, 12, 13, 14, 15, 20, 40, 100, 200};
  int trials = 100;
  std::vector<InitMethod> inits{InitMethod::kEightPoint};
  std::vector<double> fov_degs{100.0};
  std::vector<double> parallax_maxes{2.0};
  std::vector<double> focal_pxs{800.0};
  double parallax_min = 0.5;
  std::uint64_t master_seed = 0;
  /// Also certify the initial guess of every trial (a second record with
  /// kind "initial"), which supplies non-optimal points to the precision count.
  bool certify_initial = false;
  RtrConfig rtr;
  CertifierConfig certifier;
  OracleConfig oracle;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 1;

  void validate() const {
    if (noise_levels.empty() || point_counts.empty() || inits.empty() || fov_degs.empty() ||
        parallax_maxes.empty() || focal_pxs.empty()) {
      throw InvalidArgument("ExperimentGrid: every axis needs at least one value");
    }
    if (trials < 1) throw InvalidArgument("ExperimentGrid: trials must be >= 1");
    if (threads < 0) throw InvalidArgument("ExperimentGrid: threads must be >= 0");
    for (const int n : point_counts) {
      if (n < 8) throw InvalidArgument("ExperimentGrid: point counts must be >= 8");
    }
    rtr.validate();
    certifier.validate();
  }
};

struct GridCell {
  int index = 0;
  /// Index of the scene configuration, shared by cells that differ only in
  /// the initializer so those cells see the same scenes.
  int scene_index = 0;
  double noise_px = 0.0;
  int n_points = 0;
  InitMethod init = InitMethod::kEightPoint;
  double fov_deg = 100.0;
  double parallax_max = 2.0;
  double focal_px = 800.0;
};

inline std::vector<GridCell> enumerate_cells(const ExperimentGrid& grid) {
  std::vector<GridCell> cells;
  int scene = 0;
  for (const double noise : grid.noise_levels) {
    for (const int n : grid.point_counts) {
      for (const double fov : grid.fov_degs) {
        for (const double par : grid.parallax_maxes) {
          for (const double focal : grid.focal_pxs) {
            for (const InitMethod init : grid.inits) {
              GridCell c;
              c.index = static_cast<int>(cells.size());
              c.scene_index = scene;
              c.noise_px = noise;
              c.n_points = n;
              c.init = init;
              c.fov_deg = fov;
              c.parallax_max = par;
              c.focal_px = focal;
              cells.push_back(c);
            }
            ++scene;
          }
        }
      }
    }
  }
  return cells;
}

struct TrialRecord {
  GridCell cell;
  int trial = 0;
  std::uint64_t scene_seed = 0;
  /// "refined" for the pipeline output, "initial" for the certified initial guess.
  std::string kind = "refined";
  /// Empty on success; otherwise the error that aborted the trial.
  std::string error;

  double cost = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> cost_trace;

  Verdict verdict = Verdict::kUnknown;
  double dual_value = 0.0;
  double gap = 0.0;
  double min_eigenvalue = 0.0;
  bool rank_deficient = false;

  double rotation_error_deg = 0.0;
  double translation_error_deg = 0.0;

  double oracle_best_cost = 0.0;
  bool oracle_optimal = false;
  Label label = Label::kTrueNegative;
  /// Certifier and oracle disagree on a certified point. Never expected.
  bool flagged = false;

  bool ok() const { return error.empty(); }
};

struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
  int tp = 0;
  int fp = 0;
  int fnp = 0;
  int tn = 0;
};

/// precision = TP / (TP + FP), recall = TP / (TP + FNP); empty denominators
/// give std::nullopt. Failed trials are skipped.
inline PrecisionRecall precision_recall(std::span<const TrialRecord> records) {
  PrecisionRecall pr;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    switch (r.label) {
      case Label::kTruePositive: ++pr.tp; break;
      case Label::kFalsePositive: ++pr.fp; break;
      case Label::kFalseNonPositive: ++pr.fnp; break;
      case Label::kTrueNegative: ++pr.tn; break;
    }
  }
  if (pr.tp + pr.fp > 0) pr.precision = static_cast<double>(pr.tp) / (pr.tp + pr.fp);
  if (pr.tp + pr.fnp > 0) pr.recall = static_cast<double>(pr.tp) / (pr.tp + pr.fnp);
  return pr;
}

/// Linear-interpolated quantile; NaN for an empty sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct CellSummary {
  GridCell cell;
  int trials = 0;
  int failures = 0;
  /// Share of refined trials certified optimal (failures count as uncertified).
  double certified_fraction = 0.0;
  PrecisionRecall classification;
  double median_outer_iterations = 0.0;
  double mean_outer_iterations = 0.0;
  double rotation_error_q25 = 0.0;
  double rotation_error_median = 0.0;
  double rotation_error_q75 = 0.0;
  double rotation_error_median_certified = 0.0;
  double translation_error_median = 0.0;
  int flagged = 0;
};

/// Aggregates the records of one cell (both kinds).
inline CellSummary summarize_cell(const GridCell& cell, std::span<const TrialRecord> records) {
  CellSummary s;
  s.cell = cell;
  s.classification = precision_recall(records);
  std::vector<double> iters;
  std::vector<double> rot;
  std::vector<double> rot_cert;
  std::vector<double> trans;
  int certified = 0;
  for (const auto& r : records) {
    if (r.flagged) ++s.flagged;
    if (r.kind != "refined") continue;
    ++s.trials;
    if (!r.ok()) {
      ++s.failures;
      continue;
    }
    if (r.verdict == Verdict::kOptimal) {
      ++certified;
      rot_cert.push_back(r.rotation_error_deg);
    }
    iters.push_back(r.outer_iterations);
    rot.push_back(r.rotation_error_deg);
    trans.push_back(r.translation_error_deg);
  }
  s.certified_fraction = s.trials > 0 ? static_cast<double>(certified) / s.trials : 0.0;
  s.median_outer_iterations = median(iters);
  double sum = 0.0;
  for (const double v : iters) sum += v;
  s.mean_outer_iterations = iters.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / iters.size();
  s.rotation_error_q25 = quantile(rot, 0.25);
  s.rotation_error_median = quantile(rot, 0.5);
  s.rotation_error_q75 = quantile(rot, 0.75);
  s.rotation_error_median_certified = median(rot_cert);
  s.translation_error_median = median(trans);
  return s;
}

struct GridResult {
  ExperimentGrid grid;
  std::vector<GridCell> cells;
  /// Ordered by (cell, trial, kind).
  std::vector<TrialRecord> records;
  std::vector<CellSummary> summaries;
};

namespace detail {

inline void fill_certificate(TrialRecord& rec, const CertificateReport& c) {
  rec.verdict = c.verdict;
  rec.dual_value = c.dual_value;
  rec.gap = c.gap;
  rec.min_eigenvalue = c.min_eigenvalue;
  rec.rank_deficient = c.rank_deficient;
}

inline void fill_errors(TrialRecord& rec, const EssentialElement& e, const SyntheticProblem& scene) {
  const EssentialElement pose = resolve_pose(e, scene.pairs);
  rec.rotation_error_deg = rotation_error(pose.rotation(), scene.gt_rotation);
  rec.translation_error_deg = translation_error(pose.translation(), scene.gt_translation);
}

inline void fill_label(TrialRecord& rec, const OracleResult& oracle, const OracleConfig& cfg) {
  rec.oracle_best_cost = std::min(oracle.best_cost, rec.cost);
  rec.oracle_optimal = oracle_says_optimal(oracle, rec.cost, cfg);
  rec.label = classify(rec.oracle_optimal, rec.verdict);
  rec.flagged = rec.label == Label::kFalsePositive;
}

}  // namespace detail

/// Seeds of one trial, derived from (master seed, scene index, trial index).
struct TrialSeeds {
  std::uint64_t scene = 0;
  std::uint64_t init = 0;
  std::uint64_t oracle = 0;
};

inline TrialSeeds trial_seeds(std::uint64_t master_seed, int scene_index, int trial) {
  Rng rng = make_rng({master_seed, static_cast<std::uint64_t>(scene_index), static_cast<std::uint64_t>(trial)});
  TrialSeeds s;
  s.scene = rng();
  s.init = rng();
  s.oracle = rng();
  return s;
}

/// Runs one trial and returns its records: the refined solution first, then
/// (optionally) the certified initial guess.
inline std::vector<TrialRecord> run_trial(const ExperimentGrid& grid, const GridCell& cell, int trial) {
  const TrialSeeds seeds = trial_seeds(grid.master_seed, cell.scene_index, trial);
  TrialRecord rec;
  rec.cell = cell;
  rec.trial = trial;
  rec.scene_seed = seeds.scene;

  SceneConfig sc;
  sc.n_points = cell.n_points;
  sc.noise_px = cell.noise_px;
  sc.focal_px = cell.focal_px;
  sc.fov_deg = cell.fov_deg;
  sc.parallax_min = std::min(grid.parallax_min, cell.parallax_max);
  sc.parallax_max = cell.parallax_max;
  sc.seed = seeds.scene;

  try {
    const SyntheticProblem scene = generate(sc);
    const ProblemData data = build_data_matrix(scene.pairs);
    PipelineConfig pc;
    pc.init = cell.init;
    pc.init_seed = seeds.init;
    pc.rtr = grid.rtr;
    pc.certifier = grid.certifier;
    const PipelineResult res = run_pipeline(data, scene.pairs, pc);
    const OracleResult oracle = optimality_oracle(data, cell.noise_px, seeds.oracle, grid.oracle, grid.rtr);

    rec.cost = res.solve.final_cost;
    rec.outer_iterations = res.solve.outer_iterations;
    rec.inner_iterations = res.solve.inner_iterations;
    rec.gradient_norm = res.solve.gradient_norm;
    rec.converged = res.solve.converged;
    rec.cost_trace = res.solve.cost_trace;
    detail::fill_certificate(rec, res.certificate);
    detail::fill_errors(rec, res.solve.solution, scene);
    detail::fill_label(rec, oracle, grid.oracle);

    std::vector<TrialRecord> out{rec};
    if (grid.certify_initial) {
      TrialRecord init = rec;
      init.kind = "initial";
      init.cost = cost(data, res.initial.matrix());
      init.outer_iterations = 0;
      init.inner_iterations = 0;
      init.gradient_norm = riemannian_gradient(data, res.initial).norm();
      init.converged = false;
      init.cost_trace = {init.cost};
      detail::fill_certificate(init, certify(data, res.initial, grid.certifier));
      detail::fill_errors(init, res.initial, scene);
      detail::fill_label(init, oracle, grid.oracle);
      out.push_back(init);
    }
    return out;
  } catch (const Error& e) {
    rec.error = e.what();
    rec.label = Label::kTrueNegative;
    return {rec};
  }
}

/// Runs every trial of every cell. Each trial owns its RNG, so the result is
/// identical for any thread count.
inline GridResult run_grid(const ExperimentGrid& grid) {
  grid.validate();
  GridResult out;
  out.grid = grid;
  out.cells = enumerate_cells(grid);
  const std::size_t total = out.cells.size() * static_cast<std::size_t>(grid.trials);
  std::vector<std::vector<TrialRecord>> slots(total);

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < total; k += stride) {
      const GridCell& cell = out.cells[k / static_cast<std::size_t>(grid.trials)];
      slots[k] = run_trial(grid, cell, static_cast<int>(k % static_cast<std::size_t>(grid.trials)));
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t threads = grid.threads == 0 ? hw : static_cast<std::size_t>(grid.threads);
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const std::size_t first = out.records.size();
    for (int t = 0; t < grid.trials; ++t) {
      auto& s = slots[c * static_cast<std::size_t>(grid.trials) + static_cast<std::size_t>(t)];
      out.records.insert(out.records.end(), s.begin(), s.end());
    }
    out.summaries.push_back(summarize_cell(
        out.cells[c], std::span<const TrialRecord>(out.records.data() + first, out.records.size() - first)));
  }
  return out;
}

}  // namespace certpose
