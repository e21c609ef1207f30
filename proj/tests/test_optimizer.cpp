#include "microcal/optimizer.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"

using namespace microcal;

namespace {

GpModel fit_1d(const std::vector<double>& xs, const std::vector<double>& ys,
               std::optional<double> noise = std::nullopt) {
  GpFitOptions opts;
  opts.lower = {0.0};
  opts.upper = {1.0};
  opts.seed = 42;
  opts.fixed_noise_variance = noise;
  std::vector<std::vector<double>> x;
  for (double v : xs) x.push_back({v});
  return GpModel::fit(x, ys, opts);
}

Trial synthetic_trial(const Proposal& p, double y) {
  Trial t;
  t.trial_id = p.trial_id;
  t.x = p.x;
  t.y_vector = {y};
  t.y_scalar = y;
  t.status = "completed";
  return t;
}

}  // namespace

TEST_CASE("acquisition closed forms at zero variance") {
  // EI = max(incumbent - mean, 0) and PI = indicator when sigma = 0
  CHECK(acquisition_score(Acquisition::expected_improvement, 0.2, 0.0, 0.2) ==
        0.0);
  CHECK(acquisition_score(Acquisition::expected_improvement, 0.5, 0.0, 0.2) ==
        0.0);
  CHECK(acquisition_score(Acquisition::expected_improvement, 0.1, 0.0, 0.2) ==
        doctest::Approx(0.1).epsilon(1e-14));
  CHECK(acquisition_score(Acquisition::probability_of_improvement, 0.1, 0.0,
                          0.2) == 1.0);
  CHECK(acquisition_score(Acquisition::probability_of_improvement, 0.2, 0.0,
                          0.2) == 0.0);
}

TEST_CASE("acquisition closed forms") {
  const GpModel m =
      fit_1d({0.1, 0.3, 0.5, 0.7, 0.9}, {0.9, 0.4, 0.2, 0.4, 0.9}, 1e-8);

  // at a near-noise-free training point equal to the incumbent, EI shrinks
  // to the sigma*phi(0) floor set by the 1e-8 noise variance
  const double incumbent = 0.2;
  const double ei_at_min = acquisition_value(
      m, {0.5}, Acquisition::expected_improvement, incumbent);
  CHECK(ei_at_min < 1e-4);

  // mu == incumbent with sigma > 0: EI = sigma * phi(0)
  const auto far = m.predict({0.05});
  const double ei = acquisition_value(m, {0.05},
                                      Acquisition::expected_improvement,
                                      far.mean);
  CHECK(ei == doctest::Approx(std::sqrt(far.variance) * 0.3989422804014327)
                  .epsilon(1e-9));

  // PI at mu == incumbent is one half
  CHECK(acquisition_value(m, {0.05}, Acquisition::probability_of_improvement,
                          far.mean) == doctest::Approx(0.5).epsilon(1e-9));

  // UCB score is -(mu - beta sigma)
  const double beta = 2.0;
  CHECK(acquisition_value(m, {0.05}, Acquisition::upper_confidence_bound,
                          incumbent, beta) ==
        doctest::Approx(-(far.mean - beta * std::sqrt(far.variance)))
            .epsilon(1e-9));

  CHECK(acquisition_value(m, {0.05}, Acquisition::max_posterior_variance,
                          incumbent) == doctest::Approx(far.variance));

  // EI and PI are nonnegative everywhere
  for (int i = 0; i <= 40; ++i) {
    const std::vector<double> x{i / 40.0};
    CHECK(acquisition_value(m, x, Acquisition::expected_improvement,
                            incumbent) >= 0.0);
    CHECK(acquisition_value(m, x, Acquisition::probability_of_improvement,
                            incumbent) >= 0.0);
  }
}

TEST_CASE("max posterior variance peaks away from the data") {
  const GpModel m = fit_1d({0.05, 0.15}, {0.3, 0.5}, 1e-6);
  Bounds bounds{{0.0}, {1.0}};
  Rng rng(7);
  const auto x =
      propose(&m, bounds, Acquisition::max_posterior_variance, {}, rng);
  CHECK(x[0] > 0.5);  // data sits at the left edge
}

TEST_CASE("propose stays inside bounds") {
  const GpModel m = fit_1d({0.2, 0.5, 0.8}, {1.0, 0.2, 0.6});
  Bounds bounds{{-2.0}, {3.0}};
  GpFitOptions opts;  // model above is on [0,1]; use its own bounds instead
  Bounds unit{{0.0}, {1.0}};
  Rng rng(11);
  ProposeOptions popts;
  popts.candidates = 128;
  popts.polish_starts = 2;
  popts.polish_budget = 20;
  for (int i = 0; i < 1000; ++i) {
    const Acquisition kind =
        i % 2 == 0 ? Acquisition::expected_improvement
                   : Acquisition::upper_confidence_bound;
    const auto x = propose(&m, unit, kind, {}, rng, popts);
    REQUIRE(x.size() == 1);
    CHECK(x[0] >= 0.0);
    CHECK(x[0] <= 1.0);
  }
  // with no model, proposals are space-filling random but still in bounds
  for (int i = 0; i < 100; ++i) {
    const auto x = propose(nullptr, bounds, Acquisition::init_design, {}, rng);
    CHECK(x[0] >= -2.0);
    CHECK(x[0] <= 3.0);
  }
}

TEST_CASE("pending point pushes the next proposal away") {
  const GpModel m = fit_1d({0.1, 0.9}, {0.8, 0.6}, 1e-6);
  Bounds unit{{0.0}, {1.0}};
  ProposeOptions popts;
  popts.candidates = 1024;

  // unconstrained exploration argmax
  Rng rng_a(3);
  const auto unconstrained = propose(&m, unit, Acquisition::max_posterior_variance,
                                     {}, rng_a, popts);
  // the same proposal with that point pending moves elsewhere
  Rng rng_b(3);
  const auto moved = propose(&m, unit, Acquisition::max_posterior_variance,
                             {unconstrained}, rng_b, popts);
  CHECK(std::abs(moved[0] - unconstrained[0]) >= 1e-3);
}

TEST_CASE("dispatcher honours slots, budget, and initial design") {
  DispatcherOptions opts;
  opts.bounds = {{0.0}, {1.0}};
  opts.policy = {2, 1, 0};
  opts.initial_points = {{0.45}, {0.25}, {0.95}};
  opts.max_trials = 8;
  opts.seed = 5;

  Dispatcher d(opts);
  CHECK(d.wants_proposal());
  std::vector<Proposal> live;
  while (d.wants_proposal()) live.push_back(d.next_proposal());
  CHECK(live.size() == 3);  // slots filled
  CHECK(d.in_flight() == 3);
  CHECK_FALSE(d.wants_proposal());
  CHECK(live[0].x == std::vector<double>{0.45});
  CHECK(live[1].x == std::vector<double>{0.25});
  CHECK(live[2].x == std::vector<double>{0.95});
  CHECK(live[0].batch == 1);
  CHECK(live[1].batch == 1);
  CHECK(live[2].batch == 2);

  // completing a trial frees its slot and allows exactly one proposal
  d.record_completion(synthetic_trial(live[1], 0.5));
  CHECK(d.in_flight() == 2);
  CHECK(d.wants_proposal());
  const Proposal next = d.next_proposal();
  CHECK(next.trial_id == 3);
  CHECK(next.slot == live[1].slot);
  CHECK_FALSE(d.wants_proposal());

  // budget: after 8 proposals, no more
  std::vector<Proposal> rest{live[0], live[2], next};
  int made = 4;
  while (made < 8) {
    d.record_completion(synthetic_trial(rest.front(), 0.4));
    rest.erase(rest.begin());
    if (d.wants_proposal()) {
      rest.push_back(d.next_proposal());
      ++made;
    }
  }
  CHECK(d.proposals_made() == 8);
  while (!rest.empty()) {
    d.record_completion(synthetic_trial(rest.front(), 0.3));
    rest.erase(rest.begin());
    CHECK_FALSE(d.wants_proposal());
  }
  CHECK(d.trials().size() == 8);
}

TEST_CASE("dispatcher aborts after the failure budget") {
  DispatcherOptions opts;
  opts.bounds = {{0.0}, {1.0}};
  opts.policy = {1, 0, 0};
  opts.max_trials = 50;
  opts.failure_budget = 3;
  Dispatcher d(opts);
  for (int i = 0; i < 4; ++i) {
    const Proposal p = d.next_proposal();
    Trial t;
    t.trial_id = p.trial_id;
    t.x = p.x;
    t.status = "failed";
    t.reason = "synthetic";
    d.record_completion(t);
  }
  CHECK(d.aborted());
  CHECK_FALSE(d.wants_proposal());
  CHECK(d.abort_reason().find("failure budget") != std::string::npos);
}

TEST_CASE("sequential policy (1,0,0) keeps one evaluation in flight") {
  DispatcherOptions opts;
  opts.bounds = {{0.0}, {1.0}};
  opts.policy = {1, 0, 0};
  opts.max_trials = 6;
  opts.seed = 9;
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  const Evaluator eval = [&](const Proposal& p) {
    const int now = ++in_flight;
    int expected = peak.load();
    while (now > expected && !peak.compare_exchange_weak(expected, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    --in_flight;
    return synthetic_trial(p, (p.x[0] - 0.3) * (p.x[0] - 0.3));
  };
  const DispatchResult r = run_dispatcher(eval, opts);
  CHECK(r.trials.size() == 6);
  CHECK(peak.load() == 1);
}

TEST_CASE("trial log jsonl round trip") {
  Trial t;
  t.trial_id = 3;
  t.batch = 2;
  t.acquisition = Acquisition::max_posterior_variance;
  t.x = {0.123456789012345, 7.5};
  t.seed = 0xdeadbeefULL;
  t.y_vector = {0.1, 0.2};
  t.y_scalar = 0.30000000000000004;
  t.status = "completed";
  t.start_time = 1700000000.25;
  t.end_time = 1700000001.5;

  Trial failed;
  failed.trial_id = 4;
  failed.x = {0.5, 1.0};
  failed.status = "failed";
  failed.reason = "descriptor 4: fewer than 2 candidate samples";

  std::stringstream buf;
  append_trial_jsonl(t, buf);
  append_trial_jsonl(failed, buf);
  const auto back = read_trial_log(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].trial_id == 3);
  CHECK(back[0].batch == 2);
  CHECK(back[0].acquisition == Acquisition::max_posterior_variance);
  CHECK(back[0].x == t.x);  // bit-exact doubles
  CHECK(back[0].seed == t.seed);
  CHECK(back[0].y_vector == t.y_vector);
  CHECK(back[0].y_scalar == t.y_scalar);
  CHECK(back[1].status == "failed");
  CHECK(back[1].reason == failed.reason);
  CHECK(std::isnan(back[1].y_scalar));
}

TEST_CASE("replay reproduces the proposal sequence bit-exactly") {
  DispatcherOptions opts;
  opts.bounds = {{-1.0}, {2.0}};
  opts.policy = {2, 1, 0};
  opts.max_trials = 12;
  opts.seed = 31;

  // live run writes a log through a jsonl round trip
  const Evaluator eval = [](const Proposal& p) {
    Trial t;
    t.trial_id = p.trial_id;
    t.x = p.x;
    const double v = (p.x[0] - 0.4) * (p.x[0] - 0.4);
    t.y_vector = {v};
    t.y_scalar = v;
    t.status = p.trial_id == 5 ? "failed" : "completed";
    if (!t.completed()) t.reason = "synthetic failure";
    return t;
  };
  const DispatchResult live = run_dispatcher(eval, opts);
  REQUIRE(live.trials.size() == 12);

  std::stringstream buf;
  for (const auto& t : live.trials) append_trial_jsonl(t, buf);
  const auto log = read_trial_log(buf);

  const auto proposals = replay_proposals(log, opts);
  REQUIRE(proposals.size() == live.trials.size());
  // proposal k must match the logged trial with id k exactly
  for (const auto& t : log) {
    REQUIRE(t.trial_id < int(proposals.size()));
    const auto& p = proposals[std::size_t(t.trial_id)];
    CHECK(p.trial_id == t.trial_id);
    CHECK(p.x == t.x);
    CHECK(p.batch == t.batch);
    CHECK(p.acquisition == t.acquisition);
  }
}

TEST_CASE("best-so-far trace is non-increasing") {
  DispatcherOptions opts;
  opts.bounds = {{0.0}, {1.0}};
  opts.policy = {3, 1, 0};
  opts.max_trials = 20;
  opts.seed = 13;
  const Evaluator eval = [](const Proposal& p) {
    Trial t;
    t.trial_id = p.trial_id;
    t.x = p.x;
    const double v = std::abs(p.x[0] - 0.62) +
                     0.01 * std::sin(double(p.trial_id));
    t.y_vector = {v};
    t.y_scalar = v;
    t.status = "completed";
    return t;
  };
  const DispatchResult r = run_dispatcher(eval, opts);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : r.trials) {
    if (!t.completed()) continue;
    const double next_best = std::min(best, t.y_scalar);
    CHECK(next_best <= best);
    best = next_best;
  }
  CHECK(best < 0.2);
}

TEST_CASE("objective threshold stops the campaign early") {
  DispatcherOptions opts;
  opts.bounds = {{0.0}, {1.0}};
  opts.policy = {2, 0, 0};
  opts.max_trials = 40;
  opts.objective_threshold = 0.05;
  opts.seed = 2;
  const Evaluator eval = [](const Proposal& p) {
    return synthetic_trial(p, p.x[0]);  // minimum at x = 0
  };
  const DispatchResult r = run_dispatcher(eval, opts);
  CHECK(r.trials.size() < 40);
  double best = 1e9;
  for (const auto& t : r.trials) best = std::min(best, t.y_scalar);
  CHECK(best <= 0.05);
}
