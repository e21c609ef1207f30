#include "microcal/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace microcal {

namespace {

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double now_unix_seconds() {
  return std::chrono::duration<double>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// van der Corput radical inverse, the workhorse of the Halton candidates
double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double factor = inv;
  double value = 0.0;
  while (index > 0) {
    value += double(index % std::uint64_t(base)) * factor;
    index /= std::uint64_t(base);
    factor *= inv;
  }
  return value;
}

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                           23, 29, 31, 37, 41, 43, 47, 53};

double best_observed(const GpModel& model, bool posterior_mean) {
  double best = std::numeric_limits<double>::infinity();
  if (posterior_mean) {
    for (const auto& x : model.inputs())
      best = std::min(best, model.predict(x).mean);
  } else {
    for (double y : model.outputs()) best = std::min(best, y);
  }
  return best;
}

}  // namespace

std::string to_string(Acquisition kind) {
  switch (kind) {
    case Acquisition::expected_improvement:
      return "EI";
    case Acquisition::probability_of_improvement:
      return "PI";
    case Acquisition::upper_confidence_bound:
      return "UCB";
    case Acquisition::max_posterior_variance:
      return "MAXVAR";
    case Acquisition::init_design:
      return "init";
  }
  return "unknown";
}

Acquisition acquisition_from_string(const std::string& name) {
  if (name == "EI") return Acquisition::expected_improvement;
  if (name == "PI") return Acquisition::probability_of_improvement;
  if (name == "UCB") return Acquisition::upper_confidence_bound;
  if (name == "MAXVAR") return Acquisition::max_posterior_variance;
  if (name == "init") return Acquisition::init_design;
  throw std::invalid_argument("unknown acquisition: " + name);
}

bool Bounds::contains(const std::vector<double>& x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] < lower[k] || x[k] > upper[k]) return false;
  return true;
}

std::vector<double> Bounds::clamp(std::vector<double> x) const {
  for (std::size_t k = 0; k < x.size(); ++k)
    x[k] = std::min(upper[k], std::max(lower[k], x[k]));
  return x;
}

double acquisition_score(Acquisition kind, double mean, double sigma,
                         double incumbent, double ucb_beta) {
  switch (kind) {
    case Acquisition::expected_improvement: {
      if (sigma <= 0.0) return std::max(incumbent - mean, 0.0);
      const double z = (incumbent - mean) / sigma;
      return (incumbent - mean) * normal_cdf(z) + sigma * normal_pdf(z);
    }
    case Acquisition::probability_of_improvement: {
      if (sigma <= 0.0) return mean < incumbent ? 1.0 : 0.0;
      return normal_cdf((incumbent - mean) / sigma);
    }
    case Acquisition::upper_confidence_bound:
      return -(mean - ucb_beta * sigma);
    case Acquisition::max_posterior_variance:
      return sigma * sigma;
    case Acquisition::init_design:
      break;
  }
  throw std::invalid_argument("acquisition_score: not a model-based kind");
}

double acquisition_value(const GpModel& model, const std::vector<double>& x,
                         Acquisition kind, double incumbent, double ucb_beta) {
  const GpModel::Prediction p = model.predict(x);
  return acquisition_score(kind, p.mean, std::sqrt(p.variance), incumbent,
                           ucb_beta);
}

std::vector<double> propose(const GpModel* model, const Bounds& bounds,
                            Acquisition kind,
                            const std::vector<std::vector<double>>& pending,
                            Rng& rng, const ProposeOptions& options) {
  const int d = bounds.dim();
  if (d < 1) throw std::invalid_argument("propose: empty bounds");
  auto random_point = [&] {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      x[std::size_t(k)] = rng.uniform(bounds.lower[std::size_t(k)],
                                      bounds.upper[std::size_t(k)]);
    return x;
  };
  if (model == nullptr || model->empty()) return random_point();
  if (d > int(std::size(kPrimes)))
    throw std::invalid_argument("propose: dimension too large");

  const GpModel virtual_model =
      pending.empty() ? *model : model->with_imputed(pending);
  const double incumbent =
      best_observed(*model, options.posterior_mean_incumbent);

  auto denorm = [&](const std::vector<double>& u) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      x[std::size_t(k)] =
          bounds.lower[std::size_t(k)] +
          u[std::size_t(k)] *
              (bounds.upper[std::size_t(k)] - bounds.lower[std::size_t(k)]);
    return x;
  };
  auto score = [&](const std::vector<double>& u) {
    return acquisition_value(virtual_model, denorm(u), kind, incumbent,
                             options.ucb_beta);
  };

  // quasi-random screen: rotated Halton set over the unit box
  std::vector<double> shift(static_cast<std::size_t>(d));
  for (auto& s : shift) s = rng.uniform();
  struct Scored {
    double value;
    std::vector<double> u;
  };
  std::vector<Scored> top;
  for (int i = 0; i < options.candidates; ++i) {
    std::vector<double> u(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      double v = radical_inverse(std::uint64_t(i) + 1, kPrimes[k]) +
                 shift[std::size_t(k)];
      u[std::size_t(k)] = v - std::floor(v);
    }
    const double value = score(u);
    if (int(top.size()) < options.polish_starts) {
      top.push_back({value, u});
      std::sort(top.begin(), top.end(),
                [](const Scored& a, const Scored& b) { return a.value > b.value; });
    } else if (value > top.back().value) {
      top.back() = {value, u};
      std::sort(top.begin(), top.end(),
                [](const Scored& a, const Scored& b) { return a.value > b.value; });
    }
  }

  // local polish: golden-section over one coordinate at a time
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  Scored best = top.front();
  for (auto& start : top) {
    std::vector<double> u = start.u;
    double value = start.value;
    int evals = 0;
    double radius = 0.1;
    while (evals < options.polish_budget) {
      for (int k = 0; k < d && evals < options.polish_budget; ++k) {
        double a = std::max(0.0, u[std::size_t(k)] - radius);
        double b = std::min(1.0, u[std::size_t(k)] + radius);
        double x1 = b - golden * (b - a);
        double x2 = a + golden * (b - a);
        auto eval_at = [&](double t) {
          std::vector<double> probe = u;
          probe[std::size_t(k)] = t;
          ++evals;
          return score(probe);
        };
        double f1 = eval_at(x1);
        double f2 = eval_at(x2);
        for (int it = 0; it < 8 && evals < options.polish_budget; ++it) {
          if (f1 > f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = eval_at(x1);
          } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = eval_at(x2);
          }
        }
        const double t = f1 > f2 ? x1 : x2;
        const double f = std::max(f1, f2);
        if (f > value) {
          u[std::size_t(k)] = t;
          value = f;
        }
      }
      radius *= 0.5;
    }
    if (value > best.value) best = {value, u};
  }

  // keep clear of existing and pending points (normalized L-inf distance)
  auto normalized = [&](const std::vector<double>& x) {
    std::vector<double> u(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      u[std::size_t(k)] =
          (x[std::size_t(k)] - bounds.lower[std::size_t(k)]) /
          (bounds.upper[std::size_t(k)] - bounds.lower[std::size_t(k)]);
    return u;
  };
  std::vector<std::vector<double>> taken;
  for (const auto& x : model->inputs()) taken.push_back(normalized(x));
  for (const auto& x : pending) taken.push_back(normalized(x));
  auto separation = [&](const std::vector<double>& u) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& t : taken) {
      double dist = 0.0;
      for (int k = 0; k < d; ++k)
        dist = std::max(dist, std::abs(u[std::size_t(k)] - t[std::size_t(k)]));
      smallest = std::min(smallest, dist);
    }
    return smallest;
  };
  std::vector<double> u = best.u;
  for (int attempt = 0; attempt < 1000 && separation(u) < options.min_separation;
       ++attempt) {
    for (int k = 0; k < d; ++k) u[std::size_t(k)] = rng.uniform();
  }
  return bounds.clamp(denorm(u));
}

Dispatcher::Dispatcher(DispatcherOptions options)
    : opts_(std::move(options)), rng_(derive_seed(opts_.seed, 0xd15baULL)) {
  const int d = opts_.bounds.dim();
  if (d < 1) throw std::invalid_argument("dispatcher: empty bounds");
  for (int k = 0; k < d; ++k)
    if (!(opts_.bounds.lower[std::size_t(k)] < opts_.bounds.upper[std::size_t(k)]))
      throw std::invalid_argument("dispatcher: bounds must have lower < upper");
  if (opts_.policy.batch1 < 1 || opts_.policy.batch2 < 0 ||
      opts_.policy.batch3 < 0)
    throw std::invalid_argument("dispatcher: bad batch policy");
  if (opts_.max_trials < 1)
    throw std::invalid_argument("dispatcher: max_trials must be >= 1");
  slot_trial_.assign(static_cast<std::size_t>(opts_.policy.total()), -1);
  slot_x_.resize(static_cast<std::size_t>(opts_.policy.total()));

  // initialization design: explicit points verbatim, otherwise a seeded
  // latin-hypercube of size max(2d, 4)
  if (!opts_.initial_points.empty()) {
    for (const auto& x : opts_.initial_points) {
      if (!opts_.bounds.contains(x))
        throw std::invalid_argument("dispatcher: initial point out of bounds");
      init_design_.push_back(x);
    }
  } else {
    const int count = std::max(2 * d, 4);
    std::vector<std::vector<int>> strata(static_cast<std::size_t>(d));
    for (auto& perm : strata) {
      perm.resize(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) perm[std::size_t(i)] = i;
      for (int i = count - 1; i > 0; --i)
        std::swap(perm[std::size_t(i)],
                  perm[std::size_t(rng_.uniform_int(std::uint64_t(i + 1)))]);
    }
    for (int i = 0; i < count; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int k = 0; k < d; ++k) {
        const double u =
            (double(strata[std::size_t(k)][std::size_t(i)]) + rng_.uniform()) /
            double(count);
        x[std::size_t(k)] =
            opts_.bounds.lower[std::size_t(k)] +
            u * (opts_.bounds.upper[std::size_t(k)] -
                 opts_.bounds.lower[std::size_t(k)]);
      }
      init_design_.push_back(x);
    }
  }
}

int Dispatcher::in_flight() const {
  int n = 0;
  for (int t : slot_trial_) n += t >= 0 ? 1 : 0;
  return n;
}

bool Dispatcher::wants_proposal() const {
  if (aborted_ || threshold_hit_) return false;
  if (proposals_made_ >= opts_.max_trials) return false;
  return in_flight() < opts_.policy.total();
}

std::vector<std::vector<double>> Dispatcher::pending_points() const {
  std::vector<std::vector<double>> pending;
  for (std::size_t s = 0; s < slot_trial_.size(); ++s)
    if (slot_trial_[s] >= 0) pending.push_back(slot_x_[s]);
  return pending;
}

Proposal Dispatcher::next_proposal() {
  if (!wants_proposal())
    throw std::logic_error("dispatcher: no proposal wanted");
  int slot = -1;
  for (std::size_t s = 0; s < slot_trial_.size(); ++s)
    if (slot_trial_[s] < 0) {
      slot = int(s);
      break;
    }
  Proposal p;
  p.slot = slot;
  p.batch = slot < opts_.policy.batch1
                ? 1
                : (slot < opts_.policy.batch1 + opts_.policy.batch2 ? 2 : 3);
  p.trial_id = proposals_made_++;

  if (p.trial_id < int(init_design_.size())) {
    p.acquisition = Acquisition::init_design;
    p.x = init_design_[std::size_t(p.trial_id)];
  } else if (model_.empty()) {
    p.acquisition = Acquisition::init_design;
    p.x = propose(nullptr, opts_.bounds, Acquisition::init_design,
                  pending_points(), rng_, opts_.propose_options);
  } else {
    if (p.batch == 1) {
      // multi-acquisition draw for the exploitation batch
      const double total =
          opts_.ei_weight + opts_.pi_weight + opts_.ucb_weight;
      const double u = rng_.uniform() * total;
      p.acquisition = u < opts_.ei_weight
                          ? Acquisition::expected_improvement
                          : (u < opts_.ei_weight + opts_.pi_weight
                                 ? Acquisition::probability_of_improvement
                                 : Acquisition::upper_confidence_bound);
    } else {
      // batch 2 explores; batch 3 (feasibility classifier) is stubbed to
      // exploration as well
      p.acquisition = Acquisition::max_posterior_variance;
    }
    p.x = propose(&model_, opts_.bounds, p.acquisition, pending_points(),
                  rng_, opts_.propose_options);
  }
  slot_trial_[std::size_t(slot)] = p.trial_id;
  slot_x_[std::size_t(slot)] = p.x;
  return p;
}

void Dispatcher::refit() {
  GpFitOptions fit_opts;
  fit_opts.lower = opts_.bounds.lower;
  fit_opts.upper = opts_.bounds.upper;
  fit_opts.seed = derive_seed(opts_.seed, 0xf17ULL);
  fit_opts.multistarts = opts_.gp_multistarts;
  model_ = GpModel::fit(gp_inputs_, gp_outputs_, fit_opts);
}

void Dispatcher::record_completion(const Trial& trial) {
  int slot = -1;
  for (std::size_t s = 0; s < slot_trial_.size(); ++s)
    if (slot_trial_[s] == trial.trial_id) {
      slot = int(s);
      break;
    }
  if (slot < 0)
    throw std::logic_error("dispatcher: completion for unknown trial");
  slot_trial_[std::size_t(slot)] = -1;
  trials_.push_back(trial);

  if (trial.completed()) {
    consecutive_failures_ = 0;
    gp_inputs_.push_back(trial.x);
    gp_outputs_.push_back(trial.y_scalar);
    if (best_index_ < 0 ||
        trial.y_scalar < trials_[std::size_t(best_index_)].y_scalar)
      best_index_ = int(trials_.size()) - 1;
    if (opts_.objective_threshold &&
        trial.y_scalar <= *opts_.objective_threshold)
      threshold_hit_ = true;
    refit();
  } else {
    if (++consecutive_failures_ > opts_.failure_budget) {
      aborted_ = true;
      abort_reason_ = "failure budget exhausted (" +
                      std::to_string(consecutive_failures_) +
                      " consecutive failed trials)";
    }
  }
}

const Trial* Dispatcher::best_trial() const {
  return best_index_ >= 0 ? &trials_[std::size_t(best_index_)] : nullptr;
}

DispatchResult run_dispatcher(const Evaluator& evaluator,
                              const DispatcherOptions& options, int jobs,
                              const std::function<void(const Trial&)>& on_trial,
                              const std::function<void(int)>& in_flight_probe) {
  Dispatcher dispatcher(options);
  return drive_dispatcher(dispatcher, evaluator, jobs, {}, on_trial,
                          in_flight_probe);
}

DispatchResult drive_dispatcher(Dispatcher& dispatcher,
                                const Evaluator& evaluator, int jobs,
                                std::vector<Proposal> outstanding,
                                const std::function<void(const Trial&)>& on_trial,
                                const std::function<void(int)>& in_flight_probe) {
  const std::size_t already_recorded = dispatcher.trials().size();
  const int slots = dispatcher.options().policy.total();
  const int workers = std::max(1, jobs > 0 ? std::min(jobs, slots) : slots);

  std::mutex mu;
  std::condition_variable task_cv;
  std::condition_variable done_cv;
  std::deque<Proposal> tasks;
  std::deque<Trial> completions;
  bool shutdown = false;

  auto worker_loop = [&] {
    for (;;) {
      Proposal p;
      {
        std::unique_lock lock(mu);
        task_cv.wait(lock, [&] { return shutdown || !tasks.empty(); });
        if (tasks.empty()) return;
        p = std::move(tasks.front());
        tasks.pop_front();
      }
      Trial t;
      const double started = now_unix_seconds();
      try {
        t = evaluator(p);
      } catch (const std::exception& e) {
        t.status = "failed";
        t.reason = e.what();
      } catch (...) {
        t.status = "failed";
        t.reason = "unknown evaluator exception";
      }
      t.trial_id = p.trial_id;
      t.batch = p.batch;
      t.acquisition = p.acquisition;
      t.x = p.x;
      t.start_time = started;
      t.end_time = now_unix_seconds();
      {
        std::lock_guard lock(mu);
        completions.push_back(std::move(t));
      }
      done_cv.notify_one();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker_loop);

  auto submit = [&](Proposal p) {
    {
      std::lock_guard lock(mu);
      tasks.push_back(std::move(p));
    }
    task_cv.notify_one();
    if (in_flight_probe) in_flight_probe(dispatcher.in_flight());
  };

  for (auto& p : outstanding) submit(std::move(p));
  outstanding.clear();
  while (dispatcher.wants_proposal()) submit(dispatcher.next_proposal());

  while (dispatcher.in_flight() > 0) {
    Trial t;
    {
      std::unique_lock lock(mu);
      done_cv.wait(lock, [&] { return !completions.empty(); });
      t = std::move(completions.front());
      completions.pop_front();
    }
    dispatcher.record_completion(t);
    if (in_flight_probe) in_flight_probe(dispatcher.in_flight());
    if (on_trial) on_trial(t);
    while (dispatcher.wants_proposal()) submit(dispatcher.next_proposal());
  }

  {
    std::lock_guard lock(mu);
    shutdown = true;
  }
  task_cv.notify_all();
  for (auto& th : pool) th.join();

  DispatchResult result;
  result.trials.assign(dispatcher.trials().begin() +
                           std::ptrdiff_t(already_recorded),
                       dispatcher.trials().end());
  result.aborted = dispatcher.aborted();
  result.abort_reason = dispatcher.abort_reason();
  return result;
}

void append_trial_jsonl(const Trial& trial, std::ostream& out) {
  nlohmann::json j;
  j["trialId"] = trial.trial_id;
  j["batch"] = trial.batch;
  j["acquisition"] = to_string(trial.acquisition);
  j["x"] = trial.x;
  j["seed"] = trial.seed;
  j["yVector"] = trial.y_vector;
  j["yScalar"] = trial.y_scalar;
  j["status"] = trial.status;
  if (!trial.reason.empty()) j["reason"] = trial.reason;
  j["startTime"] = trial.start_time;
  j["endTime"] = trial.end_time;
  out << j.dump() << '\n';
}

std::vector<Trial> read_trial_log(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Trial t;
    t.trial_id = j.at("trialId").get<int>();
    t.batch = j.at("batch").get<int>();
    t.acquisition = acquisition_from_string(j.at("acquisition").get<std::string>());
    t.x = j.at("x").get<std::vector<double>>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.y_vector = j.at("yVector").get<std::vector<double>>();
    t.y_scalar = j.at("yScalar").is_null()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : j.at("yScalar").get<double>();
    t.status = j.at("status").get<std::string>();
    if (j.contains("reason")) t.reason = j.at("reason").get<std::string>();
    t.start_time = j.at("startTime").get<double>();
    t.end_time = j.at("endTime").get<double>();
    trials.push_back(std::move(t));
  }
  return trials;
}

std::vector<Trial> read_trial_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trial log: " + path);
  return read_trial_log(in);
}

std::vector<Proposal> replay_proposals(const std::vector<Trial>& log,
                                       const DispatcherOptions& options) {
  Dispatcher dispatcher(options);
  std::vector<Proposal> proposals;
  while (dispatcher.wants_proposal())
    proposals.push_back(dispatcher.next_proposal());
  for (const auto& trial : log) {
    dispatcher.record_completion(trial);
    while (dispatcher.wants_proposal())
      proposals.push_back(dispatcher.next_proposal());
  }
  return proposals;
}

}  // namespace microcal
