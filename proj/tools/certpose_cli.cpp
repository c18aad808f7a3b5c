// Command-line front end: synthetic problems, solve/certify, RANSAC, and the
// benchmark grid with per-figure CSV series.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "certpose/certpose.hpp"

namespace fs = std::filesystem;
using namespace certpose;

namespace {

struct CertifierFlags {
  double tau_mu = -0.02;
  double tau_gap = 1e-14;
  std::string gap_mode = "absolute";

  void add(CLI::App* app) {
    app->add_option("--tau-mu", tau_mu, "Minimum eigenvalue threshold")->capture_default_str();
    app->add_option("--tau-gap", tau_gap, "Duality gap threshold")->capture_default_str();
    app->add_option("--gap-mode", gap_mode, "absolute or relative")
        ->check(CLI::IsMember({"absolute", "relative"}))
        ->capture_default_str();
  }

  CertifierConfig config() const {
    CertifierConfig c;
    c.tau_mu = tau_mu;
    c.tau_gap = tau_gap;
    c.gap_mode = gap_mode == "relative" ? GapMode::kRelative : GapMode::kAbsolute;
    return c;
  }

  Json json() const { return Json{{"tau_mu", tau_mu}, {"tau_gap", tau_gap}, {"gap_mode", gap_mode}}; }
};

void emit(const Json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f = detail::open_out(out);
  f << j.dump(2) << '\n';
  if (!f) throw IoError(out + ": write failed");
}

Json ground_truth_errors(const ProblemFile& pf, const EssentialElement& pose) {
  if (!pf.gt_rotation || !pf.gt_translation) return nullptr;
  return Json{{"rotation_error_deg", rotation_error(pose.rotation(), *pf.gt_rotation)},
              {"translation_error_deg", translation_error(pose.translation(), *pf.gt_translation)}};
}

// Candidate essential element from a result JSON (rotation + translation, or
// a bare essential matrix that is projected onto the manifold).
EssentialElement read_candidate(const fs::path& path) {
  std::ifstream in = detail::open_in(path);
  try {
    const Json j = Json::parse(in);
    if (j.contains("rotation") && j.contains("translation")) {
      const Rotation3 r = Rotation3::nearest(detail::matrix3_from_json(j["rotation"], path.string()));
      return essential_from_pose(r, UnitVector3::normalized(detail::vector3_from_json(j["translation"], path.string())));
    }
    return project_to_essential(detail::matrix3_from_json(j.at("essential"), path.string()));
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

EssentialElement parse_essential_list(const std::vector<double>& v) {
  if (v.size() != 9) throw InvalidArgument("--essential expects 9 numbers (row-major)");
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[static_cast<std::size_t>(i)];
  return project_to_essential(m);
}

// ---------------------------------------------------------------- plot data

void write_plot_series(const std::vector<TrialRecord>& records, const fs::path& dir) {
  const std::vector<CellSummary> cells = summarize(records);

  {
    // Precision / recall and certified fraction against N, one series per noise level.
    std::ofstream f = detail::open_out(dir / "fig_a_precision_recall.csv");
    f << "init,noise_px,n_points,precision,recall,certified_fraction,tp,fp,fnp,tn\n";
    for (const auto& s : cells) {
      const auto& pr = s.classification;
      f << to_string(s.cell.init) << ',' << format_double(s.cell.noise_px) << ',' << s.cell.n_points << ','
        << (pr.precision ? format_double(*pr.precision) : "") << ','
        << (pr.recall ? format_double(*pr.recall) : "") << ',' << format_double(s.certified_fraction) << ','
        << pr.tp << ',' << pr.fp << ',' << pr.fnp << ',' << pr.tn << '\n';
    }
  }
  {
    // Outer iterations per initializer and noise level, averaged over N.
    std::map<std::pair<std::string, double>, std::vector<double>> iters;
    for (const auto& r : records) {
      if (r.kind == "refined" && r.ok()) {
        iters[{to_string(r.cell.init), r.cell.noise_px}].push_back(r.outer_iterations);
      }
    }
    std::ofstream f = detail::open_out(dir / "fig_b_iterations.csv");
    f << "init,noise_px,mean_iterations,median_iterations,max_iterations\n";
    for (const auto& [key, v] : iters) {
      double sum = 0.0;
      double mx = 0.0;
      for (const double x : v) {
        sum += x;
        mx = std::max(mx, x);
      }
      f << key.first << ',' << format_double(key.second) << ',' << format_double(sum / v.size()) << ','
        << format_double(median(v)) << ',' << format_double(mx) << '\n';
    }
  }
  {
    // Cost against iteration for the first successful trial of each initializer.
    std::ofstream f = detail::open_out(dir / "fig_c_cost_trace.csv");
    f << "init,cell,trial,iteration,cost\n";
    std::map<std::string, bool> done;
    for (const auto& r : records) {
      const std::string init = to_string(r.cell.init);
      if (r.kind != "refined" || !r.ok() || done[init]) continue;
      done[init] = true;
      for (std::size_t k = 0; k < r.cost_trace.size(); ++k) {
        f << init << ',' << r.cell.index << ',' << r.trial << ',' << k << ',' << format_double(r.cost_trace[k])
          << '\n';
      }
    }
  }
  {
    // Rotation error quantiles per cell, over all refined trials and over certified ones.
    std::ofstream f = detail::open_out(dir / "fig5_rotation_error.csv");
    f << "init,noise_px,n_points,q25,median,q75,median_certified,translation_median\n";
    for (const auto& s : cells) {
      f << to_string(s.cell.init) << ',' << format_double(s.cell.noise_px) << ',' << s.cell.n_points << ','
        << format_double(s.rotation_error_q25) << ',' << format_double(s.rotation_error_median) << ','
        << format_double(s.rotation_error_q75) << ',' << format_double(s.rotation_error_median_certified) << ','
        << format_double(s.translation_error_median) << '\n';
    }
  }
}

// Applies key = value pairs of a TOML file to the options of `app` that were
// not given on the command line.
void apply_config_file(CLI::App* app, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw IoError(path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == app->get_name())) {
      throw IoError(path + ": unexpected section for key '" + item.fullname() + "'");
    }
    CLI::Option* opt = app->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") throw IoError(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

std::string toml_array(const auto& values, auto format) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + format(values[i]);
  return s + "]";
}

// Replaying this file with `benchmark --config` reproduces the run.
std::string benchmark_config_toml(const ExperimentGrid& g, const std::vector<std::string>& inits, double tau_gap,
                                  const std::string& gap_mode) {
  const auto num = [](double v) { return format_double(v); };
  const auto str = [](const std::string& v) { return "\"" + v + "\""; };
  std::ostringstream out;
  out << "seed = " << g.master_seed << '\n'
      << "noise = " << toml_array(g.noise_levels, num) << '\n'
      << "points = " << toml_array(g.point_counts, [](int v) { return std::to_string(v); }) << '\n'
      << "trials = " << g.trials << '\n'
      << "init = " << toml_array(inits, str) << '\n'
      << "fov = " << toml_array(g.fov_degs, num) << '\n'
      << "parallax = " << toml_array(g.parallax_maxes, num) << '\n'
      << "parallax-min = " << num(g.parallax_min) << '\n'
      << "focal = " << toml_array(g.focal_pxs, num) << '\n'
      << "tau-mu = " << num(g.certifier.tau_mu) << '\n'
      << "tau-gap = " << num(tau_gap) << '\n'
      << "gap-mode = " << str(gap_mode) << '\n'
      << "restarts = " << g.oracle.restarts << '\n'
      << "threads = " << g.threads << '\n'
      << "certify-initial = " << (g.certify_initial ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certifiable relative pose estimation"};
  app.require_subcommand(1);

  // ---- synth
  SceneConfig scene;
  double outlier_ratio = 0.0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-view problem");
  synth->add_option("--points,-n", scene.n_points, "Number of correspondences")->capture_default_str();
  synth->add_option("--noise", scene.noise_px, "Noise level in pixels")->capture_default_str();
  synth->add_option("--focal", scene.focal_px, "Focal length in pixels")->capture_default_str();
  synth->add_option("--fov", scene.fov_deg, "Field of view in degrees")->capture_default_str();
  synth->add_option("--parallax-min", scene.parallax_min)->capture_default_str();
  synth->add_option("--parallax-max", scene.parallax_max)->capture_default_str();
  synth->add_option("--depth-min", scene.depth_min)->capture_default_str();
  synth->add_option("--depth-max", scene.depth_max)->capture_default_str();
  synth->add_option("--seed", scene.seed)->capture_default_str();
  synth->add_option("--outliers", outlier_ratio, "Fraction of pairs replaced by random outliers")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--out,-o", synth_out, "Output file (.json with ground truth, otherwise CSV)")->required();

  // ---- solve
  std::string solve_in;
  std::string solve_out;
  std::string solve_init = "8pt";
  std::uint64_t solve_seed = 0;
  CertifierFlags solve_cert;
  auto* solve = app.add_subcommand("solve", "Estimate the pose and certify it");
  solve->add_option("--input,-i", solve_in, "Correspondence file")->required()->check(CLI::ExistingFile);
  solve->add_option("--init", solve_init, "8pt, identity or random")
      ->check(CLI::IsMember({"8pt", "identity", "random"}))
      ->capture_default_str();
  solve->add_option("--seed", solve_seed, "Seed for the random initializer")->capture_default_str();
  solve->add_option("--out,-o", solve_out, "Result JSON (stdout if omitted)");
  solve_cert.add(solve);

  // ---- certify
  std::string cert_in;
  std::string cert_candidate;
  std::vector<double> cert_essential;
  std::string cert_out;
  CertifierFlags cert_flags;
  auto* certify_cmd = app.add_subcommand("certify", "Certify a candidate essential matrix");
  certify_cmd->add_option("--input,-i", cert_in, "Correspondence file")->required()->check(CLI::ExistingFile);
  auto* cand_opt = certify_cmd->add_option("--candidate", cert_candidate, "Result JSON holding the candidate")
                       ->check(CLI::ExistingFile);
  auto* ess_opt = certify_cmd->add_option("--essential", cert_essential, "Candidate E, 9 numbers row-major")
                      ->expected(9);
  cand_opt->excludes(ess_opt);
  certify_cmd->add_option("--out,-o", cert_out, "Certificate JSON (stdout if omitted)");
  cert_flags.add(certify_cmd);

  // ---- ransac
  std::string ransac_in;
  std::string ransac_out;
  RansacConfig rcfg;
  CertifierFlags ransac_cert;
  auto* ransac = app.add_subcommand("ransac", "Robust estimation on contaminated correspondences");
  ransac->add_option("--input,-i", ransac_in, "Correspondence file")->required()->check(CLI::ExistingFile);
  ransac->add_option("--max-iterations", rcfg.max_iterations)->capture_default_str();
  ransac->add_option("--threshold", rcfg.inlier_threshold, "Squared algebraic error threshold")
      ->capture_default_str();
  ransac->add_option("--confidence", rcfg.confidence)->capture_default_str();
  ransac->add_option("--seed", rcfg.seed)->capture_default_str();
  ransac->add_option("--out,-o", ransac_out, "Result JSON (stdout if omitted)");
  ransac_cert.add(ransac);

  // ---- benchmark
  ExperimentGrid grid;
  std::vector<std::string> bench_inits{"8pt"};
  std::string bench_out = "results";
  std::string bench_gap_mode = "relative";
  double bench_tau_gap = 1e-10;
  auto* bench = app.add_subcommand("benchmark", "Run the synthetic experiment grid");
  std::string bench_config;
  bench->add_option("--config", bench_config, "TOML key-value file; flags override it")
      ->check(CLI::ExistingFile);
  bench->add_option("--seed", grid.master_seed, "Master seed (required, here or in --config)");
  bench->add_option("--noise", grid.noise_levels, "Noise levels in pixels")->capture_default_str();
  bench->add_option("--points", grid.point_counts, "Correspondence counts")->capture_default_str();
  bench->add_option("--trials", grid.trials, "Trials per cell")->capture_default_str();
  bench->add_option("--init", bench_inits, "Initializers")
      ->check(CLI::IsMember({"8pt", "identity", "random"}))
      ->capture_default_str();
  bench->add_option("--fov", grid.fov_degs, "Field of view sweep (degrees)")->capture_default_str();
  bench->add_option("--parallax", grid.parallax_maxes, "Maximum parallax sweep (meters)")->capture_default_str();
  bench->add_option("--parallax-min", grid.parallax_min)->capture_default_str();
  bench->add_option("--focal", grid.focal_pxs, "Focal length sweep (pixels)")->capture_default_str();
  bench->add_option("--tau-mu", grid.certifier.tau_mu)->capture_default_str();
  bench->add_option("--tau-gap", bench_tau_gap)->capture_default_str();
  bench->add_option("--gap-mode", bench_gap_mode)
      ->check(CLI::IsMember({"absolute", "relative"}))
      ->capture_default_str();
  bench->add_option("--restarts", grid.oracle.restarts, "Random restarts of the optimality oracle")
      ->capture_default_str();
  bench->add_option("--threads", grid.threads, "Worker threads (0 = all cores)")->capture_default_str();
  bench->add_flag("--certify-initial", grid.certify_initial, "Also certify the initial guesses as extra records");
  bench->add_option("--out,-o", bench_out, "Output directory")->capture_default_str();

  // ---- plotdata
  std::string plot_in;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plotdata", "Per-figure CSV series from a trial file");
  plot->add_option("--input,-i", plot_in, "trials.csv written by benchmark")->required()->check(CLI::ExistingFile);
  plot->add_option("--out,-o", plot_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const SyntheticProblem p = generate(scene);
      ProblemFile pf = problem_file(p);
      if (outlier_ratio > 0.0) {
        ContaminatedProblem c = contaminate(p.pairs, outlier_ratio, scene.seed);
        pf.pairs = std::move(c.pairs);
        pf.inlier_mask = std::move(c.inlier_mask);
      }
      if (fs::path(synth_out).extension() == ".json") {
        write_problem_json(synth_out, pf);
      } else {
        write_correspondences_csv(synth_out, pf.pairs);
      }
      std::cerr << "wrote " << pf.pairs.size() << " pairs to " << synth_out << '\n';
    } else if (*solve) {
      const ProblemFile pf = read_problem(solve_in);
      PipelineConfig pc;
      pc.init = init_method_from_string(solve_init);
      pc.init_seed = solve_seed;
      pc.certifier = solve_cert.config();
      const PipelineResult r = run_pipeline(pf.pairs, pc);
      Json config{{"input", solve_in}, {"init", solve_init}, {"certifier", solve_cert.json()}};
      Json j = result_to_json(r, solve_seed, config);
      if (const Json e = ground_truth_errors(pf, r.pose); !e.is_null()) j["ground_truth_errors"] = e;
      emit(j, solve_out);
    } else if (*certify_cmd) {
      const ProblemFile pf = read_problem(cert_in);
      if (cert_candidate.empty() && cert_essential.empty()) {
        throw InvalidArgument("certify needs --candidate or --essential");
      }
      const EssentialElement e =
          cert_candidate.empty() ? parse_essential_list(cert_essential) : read_candidate(cert_candidate);
      const ProblemData data = build_data_matrix(pf.pairs);
      Json j = essential_to_json(e);
      const Json c = certificate_to_json(certify(data, e, cert_flags.config()));
      for (auto it = c.begin(); it != c.end(); ++it) j[it.key()] = it.value();
      j["config"] = Json{{"input", cert_in}, {"certifier", cert_flags.json()}};
      emit(j, cert_out);
    } else if (*ransac) {
      const ProblemFile pf = read_problem(ransac_in);
      const RansacReport rr = ransac_essential(pf.pairs, rcfg);
      std::vector<BearingPair> inliers;
      for (std::size_t i = 0; i < pf.pairs.size(); ++i) {
        if (rr.inlier_mask[i]) inliers.push_back(pf.pairs[i]);
      }
      PipelineConfig pc;
      pc.certifier = ransac_cert.config();
      const PipelineResult r = refine_and_certify(build_data_matrix(inliers), inliers, rr.best_model, pc);
      Json config{{"input", ransac_in},
                  {"max_iterations", rcfg.max_iterations},
                  {"threshold", rcfg.inlier_threshold},
                  {"confidence", rcfg.confidence},
                  {"certifier", ransac_cert.json()}};
      Json j = result_to_json(r, rcfg.seed, config);
      j["inlier_mask"] = rr.inlier_mask;
      j["inlier_count"] = rr.inlier_count;
      j["ransac_iterations"] = rr.iterations_used;
      if (const Json e = ground_truth_errors(pf, r.pose); !e.is_null()) j["ground_truth_errors"] = e;
      emit(j, ransac_out);
    } else if (*bench) {
      if (!bench_config.empty()) apply_config_file(bench, bench_config);
      if (bench->get_option("--seed")->count() == 0) throw InvalidArgument("benchmark: --seed is required");
      grid.inits.clear();
      for (const auto& s : bench_inits) grid.inits.push_back(init_method_from_string(s));
      grid.certifier.tau_gap = bench_tau_gap;
      grid.certifier.gap_mode = bench_gap_mode == "relative" ? GapMode::kRelative : GapMode::kAbsolute;
      const GridResult result = run_grid(grid);
      const fs::path dir(bench_out);
      write_trials_csv(dir / "trials.csv", result.records);
      {
        std::ofstream f = detail::open_out(dir / "summary.json");
        f << grid_result_to_json(result).dump(2) << '\n';
      }
      {
        // Replaying this file reproduces the run.
        std::ofstream f = detail::open_out(dir / "config.toml");
        f << benchmark_config_toml(grid, bench_inits, bench_tau_gap, bench_gap_mode);
      }
      int flagged = 0;
      for (const auto& s : result.summaries) flagged += s.flagged;
      std::cerr << result.records.size() << " records in " << result.cells.size() << " cells written to " << dir
                << (flagged ? " (" + std::to_string(flagged) + " flagged disagreements)" : std::string()) << '\n';
    } else if (*plot) {
      write_plot_series(read_trials_csv(plot_in), plot_out);
      std::cerr << "wrote plot series to " << plot_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
