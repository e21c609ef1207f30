#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "microcal/rng.hpp"
#include "microcal/surrogate.hpp"

namespace microcal {

enum class Acquisition {
  expected_improvement,
  probability_of_improvement,
  upper_confidence_bound,
  max_posterior_variance,
  init_design,  // initialization proposals, no model involved
};

std::string to_string(Acquisition kind);
Acquisition acquisition_from_string(const std::string& name);

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return int(lower.size()); }
  bool contains(const std::vector<double>& x) const;
  std::vector<double> clamp(std::vector<double> x) const;
};

// Minimization-oriented acquisition closed forms (larger is better) at a
// posterior (mean, sigma); `incumbent` is the best observed scalarized
// objective. At sigma = 0: EI = max(incumbent - mean, 0), PI = indicator.
double acquisition_score(Acquisition kind, double mean, double sigma,
                         double incumbent, double ucb_beta = 2.0);

// acquisition_score evaluated on the surrogate's posterior at x.
double acquisition_value(const GpModel& model, const std::vector<double>& x,
                         Acquisition kind, double incumbent,
                         double ucb_beta = 2.0);

struct ProposeOptions {
  int candidates = 2048;   // quasi-random screening points
  int polish_starts = 8;   // best screened points polished locally
  int polish_budget = 100; // acquisition evaluations per polish start
  double ucb_beta = 2.0;
  double min_separation = 1e-6;  // vs existing/pending, normalized units
  bool posterior_mean_incumbent = true;
};

// Next evaluation point: imputes pending points with their posterior means
// ("believer"), then maximizes the acquisition by quasi-random screening
// plus coordinate-wise golden-section polish. A null/empty model yields a
// space-filling random point. Always returns a point inside bounds.
std::vector<double> propose(const GpModel* model, const Bounds& bounds,
                            Acquisition kind,
                            const std::vector<std::vector<double>>& pending,
                            Rng& rng, const ProposeOptions& options = {});

struct BatchPolicy {
  int batch1 = 20;  // acquisition-driven slots
  int batch2 = 5;   // exploration (max posterior variance) slots
  int batch3 = 0;   // feasibility-classification hook, unused stub

  int total() const { return batch1 + batch2 + batch3; }
};

// One forward-evaluation record.
struct Trial {
  int trial_id = -1;
  int batch = 1;
  Acquisition acquisition = Acquisition::init_design;
  std::vector<double> x;  // raw units
  std::uint64_t seed = 0;
  std::vector<double> y_vector;
  double y_scalar = std::numeric_limits<double>::quiet_NaN();
  std::string status = "completed";  // "completed" | "failed"
  std::string reason;                // set for failed trials
  double start_time = 0.0;           // unix seconds
  double end_time = 0.0;

  bool completed() const { return status == "completed"; }
};

struct Proposal {
  int trial_id = -1;
  int slot = -1;
  int batch = 1;
  Acquisition acquisition = Acquisition::init_design;
  std::vector<double> x;
};

struct DispatcherOptions {
  Bounds bounds;
  BatchPolicy policy;
  std::vector<std::vector<double>> initial_points;
  int max_trials = 50;
  std::optional<double> objective_threshold;
  int failure_budget = 10;  // consecutive failed trials before aborting
  std::uint64_t seed = 0;
  double ei_weight = 0.5;
  double pi_weight = 0.25;
  double ucb_weight = 0.25;
  int gp_multistarts = 8;
  ProposeOptions propose_options;
};

// Asynchronous-parallel BO core: slot bookkeeping, initialization design,
// multi-acquisition batch-1 / exploration batch-2 proposals, GP refit on
// every completion. Synchronous and single-threaded by itself so a trial
// log can replay the proposal sequence exactly; run_dispatcher supplies the
// concurrency.
class Dispatcher {
 public:
  explicit Dispatcher(DispatcherOptions options);

  // True while a slot is free, trial budget remains, and no stop condition
  // (objective threshold, failure budget) has triggered.
  bool wants_proposal() const;
  Proposal next_proposal();
  void record_completion(const Trial& trial);

  bool stop_requested() const { return aborted_ || threshold_hit_; }
  bool aborted() const { return aborted_; }
  const std::string& abort_reason() const { return abort_reason_; }
  const DispatcherOptions& options() const { return opts_; }
  int in_flight() const;
  int proposals_made() const { return proposals_made_; }
  const GpModel& model() const { return model_; }
  const std::vector<Trial>& trials() const { return trials_; }
  const Trial* best_trial() const;

 private:
  std::vector<std::vector<double>> pending_points() const;
  void refit();

  DispatcherOptions opts_;
  Rng rng_;
  std::vector<int> slot_trial_;  // trial id per slot, -1 when free
  std::vector<std::vector<double>> slot_x_;
  std::vector<std::vector<double>> init_design_;
  int proposals_made_ = 0;
  int consecutive_failures_ = 0;
  bool aborted_ = false;
  bool threshold_hit_ = false;
  std::string abort_reason_;
  std::vector<Trial> trials_;  // completion order
  std::vector<std::vector<double>> gp_inputs_;
  std::vector<double> gp_outputs_;
  GpModel model_;
  int best_index_ = -1;
};

using Evaluator = std::function<Trial(const Proposal&)>;

struct DispatchResult {
  std::vector<Trial> trials;
  bool aborted = false;
  std::string abort_reason;
};

// Runs the dispatcher over a worker pool with up to `jobs` concurrent
// evaluator calls (0: one per slot). on_trial fires once per recorded
// trial, in completion order, from the dispatching thread;
// in_flight_probe reports the number of in-flight evaluations after every
// submit/complete transition.
DispatchResult run_dispatcher(
    const Evaluator& evaluator, const DispatcherOptions& options,
    int jobs = 0, const std::function<void(const Trial&)>& on_trial = {},
    const std::function<void(int)>& in_flight_probe = {});

// Drives an existing dispatcher (e.g. one pre-seeded by replaying a trial
// log). `outstanding` holds proposals already made but not yet completed;
// they are submitted to the pool first.
DispatchResult drive_dispatcher(
    Dispatcher& dispatcher, const Evaluator& evaluator, int jobs = 0,
    std::vector<Proposal> outstanding = {},
    const std::function<void(const Trial&)>& on_trial = {},
    const std::function<void(int)>& in_flight_probe = {});

// Trial log (JSON lines, one object per trial, completion order).
void append_trial_jsonl(const Trial& trial, std::ostream& out);
std::vector<Trial> read_trial_log(std::istream& in);
std::vector<Trial> read_trial_log_file(const std::string& path);

// Re-derives the proposal sequence implied by a trial log: propose to fill
// the slots, then replay completions in log order. With the options used
// for the original run, the result matches the logged inputs bit-exactly.
std::vector<Proposal> replay_proposals(const std::vector<Trial>& log,
                                       const DispatcherOptions& options);

}  // namespace microcal
