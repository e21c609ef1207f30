#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "microcal/densities.hpp"
#include "microcal/descriptors.hpp"
#include "microcal/lattice.hpp"
#include "microcal/optimizer.hpp"

namespace microcal {

enum class ProcessModel { grain_growth, weld };

// One calibration campaign: forward model, parameter box, descriptor
// pipeline settings, optimizer settings, and the target definition.
// Loaded from a JSON document (see the README for the schema).
struct CampaignConfig {
  ProcessModel process_model = ProcessModel::grain_growth;
  std::vector<std::string> param_names;  // canonical axis order
  Bounds bounds;

  // fixed forward-model parameters
  int width = 256;
  int length = 256;
  int steps = 100;       // grain growth sweeps
  int num_spins = 2000;  // grain growth initial labels
  PoolShape pool_shape = PoolShape::teardrop;
  double weld_kbts = 0.25;

  std::vector<int> descriptor_set{4};
  FilterConfig filter{false, 150.0};
  BandConfig bands;
  ScalarizationConfig scalarization;

  BatchPolicy batch_policy{3, 1, 0};
  std::vector<std::vector<double>> initial_points;
  int max_trials = 50;
  std::optional<double> objective_threshold;
  int replicates_for_noise = 25;
  int failure_budget = 10;
  std::uint64_t master_seed = 0;
  int jobs = 0;  // 0: one worker per batch slot

  // target: synthesized from parameters + seed, or loaded from an MSV1 file
  std::optional<std::vector<double>> target_params;
  std::uint64_t target_seed = 1;
  std::optional<std::string> target_file;

  bool dump_microstructures = false;
};

CampaignConfig parse_campaign_config(const std::string& json_text);
CampaignConfig load_campaign_config(const std::string& path);

// Target descriptor populations and their densities, computed once and
// shared read-only by all candidate evaluations.
struct PreparedTarget {
  std::vector<int> descriptor_ids;
  std::vector<DescriptorSamples> samples;
  std::vector<Density> densities;
};

// Runs the forward model for parameter vector x (canonical order) and seed.
Microstructure simulate(const CampaignConfig& config,
                        const std::vector<double>& x, std::uint64_t seed);

// Synthesizes or loads the target microstructure and caches its descriptor
// samples and densities; throws naming any descriptor with fewer than two
// target samples.
PreparedTarget prepare_target(const CampaignConfig& config);

// simulate -> describe -> compare -> scalarize. Pure given (x, seed,
// config); failures (including insufficient descriptor samples) come back
// as a failed Trial rather than an exception.
Trial evaluate_candidate(const std::vector<double>& x, std::uint64_t trial_seed,
                         const CampaignConfig& config,
                         const PreparedTarget& target);

// Replicate evaluations at the target parameters under distinct seeds;
// failed replicates are dropped with a warning on `warnings`.
NoiseProfile run_noise_study(const CampaignConfig& config,
                             const PreparedTarget& target,
                             int replicates_override = 0,
                             std::ostream* warnings = nullptr);

struct CampaignResult {
  std::vector<Trial> trials;  // completion order
  Trial best;
  bool aborted = false;
  std::string abort_reason;
  double wall_time_sec = 0.0;
  std::vector<std::vector<double>> correlations;  // empty if < 3 completed
};

// Full campaign: wires evaluate_candidate into the dispatcher and writes
// trials.jsonl, convergence.csv, correlations.csv, and best.json under
// out_dir. With resume = true an existing trials.jsonl is replayed first
// and the campaign continues from it.
CampaignResult run_campaign(const CampaignConfig& config,
                            const std::string& out_dir, bool resume = false,
                            std::ostream* progress = nullptr);

// Per-trial seed: counter-split of the master seed so concurrency order
// cannot change any trial's randomness.
std::uint64_t trial_seed(std::uint64_t master_seed, int trial_id);

DispatcherOptions dispatcher_options(const CampaignConfig& config);

void write_convergence_csv(const std::vector<Trial>& trials,
                           std::ostream& out);

}  // namespace microcal
