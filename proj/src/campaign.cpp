#include "microcal/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace microcal {

namespace {

using nlohmann::json;

std::vector<std::string> model_param_names(ProcessModel model) {
  if (model == ProcessModel::grain_growth) return {"kbts"};
  return {"v", "haz", "poolWidth"};
}

ScalarizationMethod scalarization_from_string(const std::string& name) {
  if (name == "weightedSum") return ScalarizationMethod::weighted_sum;
  if (name == "chebyshev") return ScalarizationMethod::chebyshev;
  if (name == "augmentedChebyshev")
    return ScalarizationMethod::augmented_chebyshev;
  throw std::invalid_argument("unknown scalarization method: " + name);
}

void validate(const CampaignConfig& c) {
  const int d = int(c.param_names.size());
  if (d < 1 || c.bounds.dim() != d)
    throw std::invalid_argument("config: malformed parameter space");
  for (int k = 0; k < d; ++k) {
    if (!std::isfinite(c.bounds.lower[std::size_t(k)]) ||
        !std::isfinite(c.bounds.upper[std::size_t(k)]) ||
        !(c.bounds.lower[std::size_t(k)] < c.bounds.upper[std::size_t(k)]))
      throw std::invalid_argument("config: bad bounds for parameter " +
                                  c.param_names[std::size_t(k)]);
  }
  if (c.descriptor_set.empty())
    throw std::invalid_argument("config: descriptor set must be nonempty");
  for (int id : c.descriptor_set)
    if (id < 1 || id > kNumDescriptors)
      throw std::invalid_argument("config: descriptor id outside 1..11");
  for (const auto& x : c.initial_points)
    if (!c.bounds.contains(x))
      throw std::invalid_argument("config: initial point outside bounds");
  if (bool(c.target_params) == bool(c.target_file))
    throw std::invalid_argument(
        "config: target needs exactly one of params or file");
  if (c.target_params && int(c.target_params->size()) != d)
    throw std::invalid_argument("config: target params dimension mismatch");
  if (c.width < 1 || c.length < 1)
    throw std::invalid_argument("config: zero-area domain");
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_id) {
  return derive_seed(master_seed, 0x791a1ULL + std::uint64_t(trial_id));
}

CampaignConfig parse_campaign_config(const std::string& json_text) {
  const json j = json::parse(json_text);
  CampaignConfig c;

  const std::string model = j.value("processModel", "grainGrowth");
  if (model == "grainGrowth")
    c.process_model = ProcessModel::grain_growth;
  else if (model == "weld")
    c.process_model = ProcessModel::weld;
  else
    throw std::invalid_argument("config: unknown processModel " + model);
  c.param_names = model_param_names(c.process_model);

  if (!j.contains("parameterSpace"))
    throw std::invalid_argument("config: parameterSpace required");
  for (const auto& name : c.param_names) {
    const auto& space = j.at("parameterSpace");
    if (!space.contains(name))
      throw std::invalid_argument("config: parameterSpace missing " + name);
    const auto range = space.at(name).get<std::vector<double>>();
    if (range.size() != 2)
      throw std::invalid_argument("config: bounds for " + name +
                                  " must be [lo, hi]");
    c.bounds.lower.push_back(range[0]);
    c.bounds.upper.push_back(range[1]);
  }

  if (j.contains("fixedParams")) {
    const auto& f = j.at("fixedParams");
    c.width = f.value("width", c.width);
    c.length = f.value("length", c.length);
    c.steps = f.value("steps", c.steps);
    c.num_spins = f.value("numSpins", c.num_spins);
    c.weld_kbts = f.value("weldKbts", c.weld_kbts);
    const std::string shape = f.value("poolShape", "teardrop");
    if (shape == "teardrop")
      c.pool_shape = PoolShape::teardrop;
    else if (shape == "ellipse")
      c.pool_shape = PoolShape::ellipse;
    else
      throw std::invalid_argument("config: unknown poolShape " + shape);
  }

  if (j.contains("descriptors"))
    c.descriptor_set = j.at("descriptors").get<std::vector<int>>();
  std::sort(c.descriptor_set.begin(), c.descriptor_set.end());
  c.descriptor_set.erase(
      std::unique(c.descriptor_set.begin(), c.descriptor_set.end()),
      c.descriptor_set.end());

  if (j.contains("filter")) {
    c.filter.enabled = j.at("filter").value("enabled", c.filter.enabled);
    c.filter.area_threshold =
        j.at("filter").value("areaThreshold", c.filter.area_threshold);
  }
  if (j.contains("bands")) {
    const auto& b = j.at("bands");
    c.bands.band_width = b.value("bandWidth", c.bands.band_width);
    c.bands.band_spacing = b.value("bandSpacing", c.bands.band_spacing);
    c.bands.num_bands = b.value("numBands", c.bands.num_bands);
    c.bands.axis_y = b.value("axisY", c.bands.axis_y);
  }
  if (j.contains("scalarization")) {
    const auto& s = j.at("scalarization");
    c.scalarization.method =
        scalarization_from_string(s.value("method", "weightedSum"));
    if (s.contains("weights"))
      c.scalarization.weights = s.at("weights").get<std::vector<double>>();
    if (s.contains("idealPoint"))
      c.scalarization.ideal_point =
          s.at("idealPoint").get<std::vector<double>>();
    c.scalarization.rho = s.value("rho", c.scalarization.rho);
  }
  if (j.contains("batchPolicy")) {
    const auto& b = j.at("batchPolicy");
    c.batch_policy.batch1 = b.value("batch1", c.batch_policy.batch1);
    c.batch_policy.batch2 = b.value("batch2", c.batch_policy.batch2);
    c.batch_policy.batch3 = b.value("batch3", c.batch_policy.batch3);
  }
  if (j.contains("initialPoints"))
    c.initial_points =
        j.at("initialPoints").get<std::vector<std::vector<double>>>();
  c.max_trials = j.value("maxTrials", c.max_trials);
  if (j.contains("objectiveThreshold") && !j.at("objectiveThreshold").is_null())
    c.objective_threshold = j.at("objectiveThreshold").get<double>();
  c.replicates_for_noise = j.value("replicatesForNoise", c.replicates_for_noise);
  c.failure_budget = j.value("failureBudget", c.failure_budget);
  c.master_seed = j.value("masterSeed", c.master_seed);
  c.jobs = j.value("jobs", c.jobs);
  c.dump_microstructures =
      j.value("dumpMicrostructures", c.dump_microstructures);

  if (!j.contains("target"))
    throw std::invalid_argument("config: target required");
  const auto& t = j.at("target");
  if (t.contains("file")) {
    c.target_file = t.at("file").get<std::string>();
  } else if (t.contains("params")) {
    const auto& p = t.at("params");
    std::vector<double> x;
    for (const auto& name : c.param_names) {
      if (!p.contains(name))
        throw std::invalid_argument("config: target params missing " + name);
      x.push_back(p.at(name).get<double>());
    }
    c.target_params = x;
    c.target_seed = t.value("seed", c.target_seed);
  }

  validate(c);
  return c;
}

CampaignConfig load_campaign_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_campaign_config(buf.str());
}

Microstructure simulate(const CampaignConfig& config,
                        const std::vector<double>& x, std::uint64_t seed) {
  if (int(x.size()) != config.bounds.dim())
    throw std::invalid_argument("simulate: parameter dimension mismatch");
  if (config.process_model == ProcessModel::grain_growth) {
    GrainGrowthParams p;
    p.width = config.width;
    p.length = config.length;
    p.num_spins = config.num_spins;
    p.kbts = x[0];
    p.steps = config.steps;
    p.seed = seed;
    return run_grain_growth(p);
  }
  WeldParams p;
  p.width = config.width;
  p.length = config.length;
  p.velocity = x[0];
  p.haz = x[1];
  p.pool_width = x[2];
  p.pool_shape = config.pool_shape;
  p.kbts = config.weld_kbts;
  p.seed = seed;
  return run_weld(p);
}

PreparedTarget prepare_target(const CampaignConfig& config) {
  Microstructure target_ms;
  if (config.target_file) {
    target_ms = read_msv1_file(*config.target_file);
  } else {
    target_ms = simulate(config, *config.target_params, config.target_seed);
  }
  PreparedTarget target;
  target.descriptor_ids = config.descriptor_set;
  target.samples = compute_descriptors(target_ms, config.descriptor_set,
                                       config.filter, config.bands);
  for (const auto& s : target.samples) {
    if (s.insufficient())
      throw std::runtime_error(
          "target: descriptor " + std::to_string(s.descriptor_id) +
          " has fewer than 2 samples; adjust filter/band settings");
    target.densities.push_back(kde(s.samples));
  }
  return target;
}

Trial evaluate_candidate(const std::vector<double>& x, std::uint64_t seed,
                         const CampaignConfig& config,
                         const PreparedTarget& target) {
  Trial t;
  t.x = x;
  t.seed = seed;
  if (!config.bounds.contains(x)) {
    t.status = "failed";
    t.reason = "candidate outside parameter bounds";
    return t;
  }
  try {
    const Microstructure ms = simulate(config, x, seed);
    const std::vector<DescriptorSamples> candidate = compute_descriptors(
        ms, config.descriptor_set, config.filter, config.bands);
    const ObjectiveVector y =
        objective_vector(target.descriptor_ids, target.densities, candidate);
    t.y_vector = y.y;
    t.y_scalar = scalarize(y, config.scalarization);
    t.status = "completed";
  } catch (const std::exception& e) {
    t.status = "failed";
    t.reason = e.what();
  }
  return t;
}

NoiseProfile run_noise_study(const CampaignConfig& config,
                             const PreparedTarget& target,
                             int replicates_override, std::ostream* warnings) {
  if (!config.target_params)
    throw std::invalid_argument(
        "noise study: needs a parameter-defined target");
  const int replicates = replicates_override > 0 ? replicates_override
                                                 : config.replicates_for_noise;
  if (replicates < 2)
    throw std::invalid_argument("noise study: need at least 2 replicates");

  const auto seed_of = [&](int i) {
    return derive_seed(config.master_seed, 0x401e5eULL + std::uint64_t(i));
  };
  const Evaluator eval = [&](const Proposal& p) {
    return evaluate_candidate(*config.target_params, seed_of(p.trial_id),
                              config, target);
  };
  // reuse the dispatcher's worker pool for concurrency; proposals are
  // ignored, every slot evaluates the target parameters
  DispatcherOptions opts = dispatcher_options(config);
  opts.max_trials = replicates;
  opts.initial_points.assign(static_cast<std::size_t>(replicates), *config.target_params);
  opts.failure_budget = replicates + 1;
  opts.objective_threshold.reset();
  const DispatchResult result = run_dispatcher(eval, opts, config.jobs);

  std::vector<ObjectiveVector> vectors;
  for (const auto& t : result.trials) {
    if (t.completed()) {
      vectors.push_back({config.descriptor_set, t.y_vector});
    } else if (warnings) {
      *warnings << "noise study: replicate " << t.trial_id
                << " failed: " << t.reason << '\n';
    }
  }
  if (vectors.size() < 2)
    throw std::runtime_error("noise study: fewer than 2 usable replicates");
  return quantify_noise(vectors);
}

DispatcherOptions dispatcher_options(const CampaignConfig& config) {
  DispatcherOptions opts;
  opts.bounds = config.bounds;
  opts.policy = config.batch_policy;
  opts.initial_points = config.initial_points;
  opts.max_trials = config.max_trials;
  opts.objective_threshold = config.objective_threshold;
  opts.failure_budget = config.failure_budget;
  opts.seed = config.master_seed;
  return opts;
}

void write_convergence_csv(const std::vector<Trial>& trials,
                           std::ostream& out) {
  out << "completedIndex,trialId,yScalar,bestSoFar\n"
      << std::setprecision(17);
  double best = std::numeric_limits<double>::infinity();
  int index = 0;
  for (const auto& t : trials) {
    if (!t.completed()) continue;
    best = std::min(best, t.y_scalar);
    out << index++ << ',' << t.trial_id << ',' << t.y_scalar << ',' << best
        << '\n';
  }
}

CampaignResult run_campaign(const CampaignConfig& config,
                            const std::string& out_dir, bool resume,
                            std::ostream* progress) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const fs::path log_path = dir / "trials.jsonl";

  const auto wall_start = std::chrono::steady_clock::now();
  const PreparedTarget target = prepare_target(config);

  std::vector<Trial> previous;
  if (resume && fs::exists(log_path))
    previous = read_trial_log_file(log_path.string());

  Dispatcher dispatcher(dispatcher_options(config));
  // Replaying the log through the dispatcher restores the model, the rng
  // stream, and the budget exactly where the interrupted run left them.
  // Proposals that never completed are re-submitted below.
  std::vector<Proposal> outstanding;
  while (dispatcher.wants_proposal())
    outstanding.push_back(dispatcher.next_proposal());
  for (const auto& t : previous) {
    dispatcher.record_completion(t);
    std::erase_if(outstanding,
                  [&](const Proposal& p) { return p.trial_id == t.trial_id; });
    while (dispatcher.wants_proposal())
      outstanding.push_back(dispatcher.next_proposal());
  }

  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log)
    throw std::runtime_error("cannot open trial log: " + log_path.string());

  const Evaluator eval = [&](const Proposal& p) {
    Trial t = evaluate_candidate(p.x, trial_seed(config.master_seed, p.trial_id),
                                 config, target);
    if (config.dump_microstructures && t.completed()) {
      const Microstructure ms = simulate(config, p.x, t.seed);
      write_msv1_file(ms,
                      (dir / ("trial_" + std::to_string(p.trial_id) + ".ms"))
                          .string());
    }
    return t;
  };
  const auto on_trial = [&](const Trial& t) {
    append_trial_jsonl(t, log);
    log.flush();
    if (progress) {
      *progress << "trial " << t.trial_id << " [" << to_string(t.acquisition)
                << " b" << t.batch << "] ";
      for (std::size_t k = 0; k < t.x.size(); ++k)
        *progress << (k ? "," : "x=(") << t.x[k];
      *progress << ") -> " << (t.completed() ? std::to_string(t.y_scalar)
                                             : "failed: " + t.reason)
                << '\n';
    }
  };

  const DispatchResult dres = drive_dispatcher(
      dispatcher, eval, config.jobs, std::move(outstanding), on_trial);

  CampaignResult result;
  result.trials = previous;
  result.trials.insert(result.trials.end(), dres.trials.begin(),
                       dres.trials.end());
  result.aborted = dres.aborted;
  result.abort_reason = dres.abort_reason;

  const Trial* best = nullptr;
  for (const auto& t : result.trials)
    if (t.completed() && (!best || t.y_scalar < best->y_scalar)) best = &t;
  if (best) result.best = *best;

  {
    std::ofstream out(dir / "convergence.csv");
    write_convergence_csv(result.trials, out);
  }
  std::vector<ObjectiveVector> completed;
  for (const auto& t : result.trials)
    if (t.completed()) completed.push_back({config.descriptor_set, t.y_vector});
  if (completed.size() >= 3) {
    result.correlations = objective_correlations(completed);
    std::ofstream out(dir / "correlations.csv");
    write_correlations_csv(config.descriptor_set, result.correlations, out);
  }

  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  {
    nlohmann::json j;
    j["bestX"] = result.best.x;
    j["bestYScalar"] = result.best.y_scalar;
    j["bestTrialId"] = result.best.trial_id;
    j["trialCount"] = result.trials.size();
    j["wallTimeSec"] = result.wall_time_sec;
    j["aborted"] = result.aborted;
    if (result.aborted) j["abortReason"] = result.abort_reason;
    std::ofstream out(dir / "best.json");
    out << j.dump(2) << '\n';
  }
  return result;
}

}  // namespace microcal
