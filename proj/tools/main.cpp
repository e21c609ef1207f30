// microcal: inverse process-structure calibration toolkit.
// Subcommands expose each pipeline stage: forward simulation, descriptor
// extraction, microstructure comparison, noise quantification, calibration,
// and report generation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "microcal/campaign.hpp"

namespace {

using namespace microcal;

void print_summary(const Microstructure& ms) {
  const auto grains = segment_grains(ms);
  double mean_area = 0.0;
  for (const auto& g : grains) mean_area += g.area();
  if (!grains.empty()) mean_area /= double(grains.size());
  std::cout << "grains=" << grains.size() << " mean_area=" << mean_area
            << " size=" << ms.width << "x" << ms.length << '\n';
}

std::uint64_t env_seed_override(std::uint64_t fallback) {
  if (const char* env = std::getenv("MICROCAL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error("MICROCAL_SEED is not an integer");
    }
  }
  return fallback;
}

struct DescriptorFlags {
  std::vector<int> descriptors{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  double threshold = 150.0;
  bool no_filter = false;
  int band_width = 60;
  int band_spacing = 20;
  int band_count = 5;
  int band_axis = -1;

  FilterConfig filter() const { return {!no_filter, threshold}; }
  BandConfig bands() const {
    return {band_width, band_spacing, band_count, band_axis};
  }
};

void add_descriptor_flags(CLI::App* cmd, DescriptorFlags& f) {
  cmd->add_option("--descriptors", f.descriptors,
                  "descriptor ids (1..11), comma separated")
      ->delimiter(',');
  cmd->add_option("--threshold", f.threshold,
                  "grain-area filter threshold, pixel^2");
  cmd->add_flag("--no-filter", f.no_filter, "disable the grain-area filter");
  cmd->add_option("--band-width", f.band_width, "band height, rows");
  cmd->add_option("--band-spacing", f.band_spacing, "gap between bands, rows");
  cmd->add_option("--band-count", f.band_count, "number of bands");
  cmd->add_option("--band-axis", f.band_axis,
                  "weld-axis row (default: centerline)");
}

int run(int argc, char** argv) {
  CLI::App app{"microstructure calibration toolkit"};
  app.require_subcommand(1);

  // ---- simulate-gg ----
  auto* gg = app.add_subcommand("simulate-gg",
                                "isothermal grain growth simulation");
  double gg_kbts = 0.5;
  std::uint64_t gg_seed = 0;
  std::string gg_out;
  int gg_steps = 100;
  int gg_q = 2000;
  std::vector<int> gg_size{256, 256};
  bool gg_paper_scale = false;
  gg->add_option("--kbts", gg_kbts, "simulation temperature")->required();
  gg->add_option("--seed", gg_seed, "rng seed")->required();
  gg->add_option("--out", gg_out, "output MSV1 path")->required();
  gg->add_option("--steps", gg_steps, "Monte Carlo sweeps");
  gg->add_option("--q", gg_q, "initial distinct labels");
  gg->add_option("--size", gg_size, "width length")->expected(2);
  gg->add_flag("--paper-scale", gg_paper_scale, "use the 1024x1024 domain");

  // ---- simulate-weld ----
  auto* weld = app.add_subcommand("simulate-weld", "moving weld-pool pass");
  double weld_v = 15.0, weld_haz = 150.0, weld_width = 200.0;
  double weld_kbts = 0.25;
  std::uint64_t weld_seed = 0;
  std::string weld_out, weld_shape = "teardrop";
  std::vector<int> weld_size{256, 512};
  bool weld_paper_scale = false;
  weld->add_option("--v", weld_v, "pool velocity, sites/MCS")->required();
  weld->add_option("--haz", weld_haz, "heat-affected-zone depth, sites")
      ->required();
  weld->add_option("--width", weld_width, "pool width, sites")->required();
  weld->add_option("--seed", weld_seed, "rng seed")->required();
  weld->add_option("--out", weld_out, "output MSV1 path")->required();
  weld->add_option("--kbts", weld_kbts, "simulation temperature");
  weld->add_option("--shape", weld_shape, "teardrop|ellipse");
  weld->add_option("--size", weld_size, "width length")->expected(2);
  weld->add_flag("--paper-scale", weld_paper_scale, "use the 805x1575 domain");

  // ---- describe ----
  auto* describe = app.add_subcommand(
      "describe", "descriptor sample populations of a microstructure");
  std::string d_in, d_out, d_densities_dir;
  DescriptorFlags d_flags;
  describe->add_option("--in", d_in, "input MSV1 path")->required();
  describe->add_option("--out", d_out, "samples CSV path (default: stdout)");
  describe->add_option("--densities-dir", d_densities_dir,
                       "also write per-descriptor density CSVs here");
  add_descriptor_flags(describe, d_flags);

  // ---- compare ----
  auto* compare = app.add_subcommand(
      "compare", "objective vector between target and candidate");
  std::string c_target, c_candidate, c_out;
  DescriptorFlags c_flags;
  std::vector<int> c_target_descriptors;
  compare->add_option("--target", c_target, "target MSV1 path")->required();
  compare->add_option("--candidate", c_candidate, "candidate MSV1 path")
      ->required();
  compare->add_option("--out", c_out, "write the result JSON here too");
  compare->add_option("--target-descriptors", c_target_descriptors,
                      "descriptor ids for the target side, if different")
      ->delimiter(',');
  add_descriptor_flags(compare, c_flags);

  // ---- noise ----
  auto* noise = app.add_subcommand(
      "noise", "aleatory noise of the objectives at the target parameters");
  std::string n_config, n_out_dir = ".";
  int n_replicates = 0;
  int n_jobs = 0;
  noise->add_option("--config", n_config, "campaign config JSON")->required();
  noise->add_option("--replicates", n_replicates, "replicate count override");
  noise->add_option("--out", n_out_dir, "output directory");
  noise->add_option("--jobs", n_jobs, "concurrent evaluations");

  // ---- calibrate ----
  auto* calibrate =
      app.add_subcommand("calibrate", "run the full calibration campaign");
  std::string cal_config, cal_out_dir = ".";
  int cal_jobs = 0;
  bool cal_resume = false;
  bool cal_quiet = false;
  calibrate->add_option("--config", cal_config, "campaign config JSON")
      ->required();
  calibrate->add_option("--out", cal_out_dir, "output directory");
  calibrate->add_option("--jobs", cal_jobs, "concurrent evaluations");
  calibrate->add_flag("--resume", cal_resume, "continue from trials.jsonl");
  calibrate->add_flag("--quiet", cal_quiet, "suppress per-trial progress");

  // ---- report ----
  auto* report = app.add_subcommand(
      "report", "convergence and correlation reports from a trial log");
  std::string r_log, r_out_dir = ".", r_config;
  report->add_option("--log", r_log, "trials.jsonl path")->required();
  report->add_option("--out", r_out_dir, "output directory");
  report->add_option("--config", r_config,
                     "campaign config (labels correlation columns)");

  CLI11_PARSE(app, argc, argv);

  if (gg->parsed()) {
    GrainGrowthParams p;
    p.width = gg_paper_scale ? 1024 : gg_size[0];
    p.length = gg_paper_scale ? 1024 : gg_size[1];
    p.kbts = gg_kbts;
    p.steps = gg_steps;
    p.num_spins = gg_q;
    p.seed = env_seed_override(gg_seed);
    const Microstructure ms = run_grain_growth(p);
    write_msv1_file(ms, gg_out);
    print_summary(ms);
    return 0;
  }

  if (weld->parsed()) {
    WeldParams p;
    p.width = weld_paper_scale ? 805 : weld_size[0];
    p.length = weld_paper_scale ? 1575 : weld_size[1];
    p.velocity = weld_v;
    p.haz = weld_haz;
    p.pool_width = weld_width;
    p.kbts = weld_kbts;
    p.seed = env_seed_override(weld_seed);
    if (weld_shape == "teardrop")
      p.pool_shape = PoolShape::teardrop;
    else if (weld_shape == "ellipse")
      p.pool_shape = PoolShape::ellipse;
    else
      throw std::runtime_error("unknown pool shape: " + weld_shape);
    const Microstructure ms = run_weld(p);
    write_msv1_file(ms, weld_out);
    print_summary(ms);
    return 0;
  }

  if (describe->parsed()) {
    const Microstructure ms = read_msv1_file(d_in);
    const auto samples = compute_descriptors(ms, d_flags.descriptors,
                                             d_flags.filter(), d_flags.bands());
    for (const auto& s : samples)
      if (s.insufficient())
        throw std::runtime_error("descriptor " +
                                 std::to_string(s.descriptor_id) +
                                 ": fewer than 2 samples after filtering");
    if (d_out.empty()) {
      write_samples_csv(samples, std::cout);
    } else {
      std::ofstream out(d_out);
      if (!out) throw std::runtime_error("cannot open: " + d_out);
      write_samples_csv(samples, out);
    }
    if (!d_densities_dir.empty()) {
      std::filesystem::create_directories(d_densities_dir);
      for (const auto& s : samples) {
        std::ofstream out(std::filesystem::path(d_densities_dir) /
                          ("density_d" + std::to_string(s.descriptor_id) +
                           ".csv"));
        write_density_csv(kde(s.samples), out);
      }
    }
    return 0;
  }

  if (compare->parsed()) {
    const Microstructure target_ms = read_msv1_file(c_target);
    const Microstructure candidate_ms = read_msv1_file(c_candidate);
    const auto target_ids = c_target_descriptors.empty()
                                ? c_flags.descriptors
                                : c_target_descriptors;
    const auto target = compute_descriptors(target_ms, target_ids,
                                            c_flags.filter(), c_flags.bands());
    const auto candidate = compute_descriptors(
        candidate_ms, c_flags.descriptors, c_flags.filter(), c_flags.bands());
    const ObjectiveVector y = objective_vector(target, candidate);
    ScalarizationConfig scal;
    nlohmann::json j;
    j["descriptorIds"] = y.descriptor_ids;
    j["yVector"] = y.y;
    j["yScalar"] = scalarize(y, scal);
    std::cout << j.dump(2) << '\n';
    if (!c_out.empty()) {
      std::ofstream out(c_out);
      if (!out) throw std::runtime_error("cannot open: " + c_out);
      out << j.dump(2) << '\n';
    }
    return 0;
  }

  if (noise->parsed()) {
    CampaignConfig config = load_campaign_config(n_config);
    config.master_seed = env_seed_override(config.master_seed);
    if (n_jobs > 0) config.jobs = n_jobs;
    const PreparedTarget target = prepare_target(config);
    const NoiseProfile profile =
        run_noise_study(config, target, n_replicates, &std::cerr);
    std::filesystem::create_directories(n_out_dir);
    std::ofstream out(std::filesystem::path(n_out_dir) / "noise.csv");
    write_noise_csv(profile, out);
    std::cout << "replicates=" << profile.replicates
              << " totalMean=" << profile.total_mean
              << " totalVariance=" << profile.total_variance << '\n';
    return 0;
  }

  if (calibrate->parsed()) {
    CampaignConfig config = load_campaign_config(cal_config);
    config.master_seed = env_seed_override(config.master_seed);
    if (cal_jobs > 0) config.jobs = cal_jobs;
    const CampaignResult result = run_campaign(
        config, cal_out_dir, cal_resume, cal_quiet ? nullptr : &std::cerr);
    if (result.aborted) {
      std::cerr << "campaign aborted: " << result.abort_reason << '\n';
      return 2;
    }
    std::cout << "best trial " << result.best.trial_id << ": yScalar="
              << result.best.y_scalar << " x=(";
    for (std::size_t k = 0; k < result.best.x.size(); ++k)
      std::cout << (k ? "," : "") << result.best.x[k];
    std::cout << ") trials=" << result.trials.size()
              << " wall=" << result.wall_time_sec << "s\n";
    return 0;
  }

  if (report->parsed()) {
    const auto trials = read_trial_log_file(r_log);
    std::filesystem::create_directories(r_out_dir);
    {
      std::ofstream out(std::filesystem::path(r_out_dir) / "convergence.csv");
      write_convergence_csv(trials, out);
    }
    std::vector<int> ids;
    if (!r_config.empty()) {
      ids = load_campaign_config(r_config).descriptor_set;
    } else if (!trials.empty()) {
      for (std::size_t i = 0; i < trials.front().y_vector.size(); ++i)
        ids.push_back(int(i) + 1);
    }
    std::vector<ObjectiveVector> completed;
    for (const auto& t : trials)
      if (t.completed()) completed.push_back({ids, t.y_vector});
    if (completed.size() >= 3) {
      std::ofstream out(std::filesystem::path(r_out_dir) /
                        "correlations.csv");
      write_correlations_csv(ids, objective_correlations(completed), out);
    } else {
      std::cerr << "report: fewer than 3 completed trials, "
                   "correlations.csv skipped\n";
    }
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
