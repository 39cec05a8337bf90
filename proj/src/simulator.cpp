#include "ssgd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "ssgd/errors.hpp"

namespace ssgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Answers "when does worker w finish a gradient started at `start`".
class WorkerClock {
 public:
  WorkerClock(const TimeModel& model, std::uint64_t seed) : model_(model) {
    if (const auto* random = std::get_if<RandomDelays>(&model_)) {
      for (std::size_t w = 0; w < random->per_worker.size(); ++w) {
        rngs_.push_back(make_stream(seed, w, Stream::kDelay));
      }
    }
  }

  double finish(std::size_t w, double start) {
    switch (model_.index()) {
      case 0:
        return start + std::get<FixedTimes>(model_)[w];
      case 1:
        return start + std::get<RandomDelays>(model_).per_worker[w].sample(rngs_[w]);
      default:
        return std::get<PowerProfiles>(model_).per_worker[w].time_to_complete(start, 1.0);
    }
  }

 private:
  const TimeModel& model_;
  std::vector<Rng> rngs_;
};

// Trajectory sampling: every update until the buffer is full, then thin by
// half and double the stride. Records at an already recorded instant replace
// the earlier one so that times stay strictly increasing.
class Recorder {
 public:
  Recorder(const QuadraticProblem& problem, const SimConfig& config, Trajectory& out)
      : problem_(problem), out_(out), stride_(std::max<std::size_t>(1, config.record_stride)),
        cap_(std::max<std::size_t>(4, config.max_records)), grad_(problem.dim()) {}

  // Returns false if the iterate is no longer finite.
  bool record(double time, std::int64_t k, std::span<const double> x, bool force = false) {
    if (!force && k % static_cast<std::int64_t>(stride_) != 0) return true;
    problem_.gradient_into(x, grad_);
    double sq = 0.0;
    for (double g : grad_) sq += g * g;
    const TrajectoryRecord rec{time, k, problem_.objective(x), sq};
    if (!out_.records.empty() && out_.records.back().time == time) {
      out_.records.back() = rec;
    } else if (out_.records.empty() || out_.records.back().iteration != k) {
      out_.records.push_back(rec);
    }
    if (out_.records.size() >= cap_) thin();
    return std::isfinite(rec.objective) && std::isfinite(sq);
  }

 private:
  void thin() {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < out_.records.size(); i += 2) out_.records[keep++] = out_.records[i];
    out_.records.resize(keep);
    stride_ *= 2;
  }

  const QuadraticProblem& problem_;
  Trajectory& out_;
  std::size_t stride_;
  std::size_t cap_;
  std::vector<double> grad_;
};

bool step_iterate(std::vector<double>& x, std::span<const double> g, double gamma) {
  bool finite = true;
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] -= gamma * g[j];
    finite = finite && std::isfinite(x[j]);
  }
  return finite;
}

void require_tag(const SimConfig& config, Algorithm expected) {
  validate(config);
  if (config.algorithm != expected) {
    throw ContractError(std::string("configuration is for ") +
                        std::string(to_string(config.algorithm)) + ", not " +
                        std::string(to_string(expected)));
  }
}

bool iteration_cap_reached(const SimConfig& config, std::int64_t k) {
  return config.max_iterations > 0 && k >= config.max_iterations;
}

struct WorkerState {
  bool busy = false;
  bool waiting = false;  // contributed to the current round, idle until the update
  std::int64_t version = 0;
  bool heads = false;
};

// Shared engine for the two batch-at-current-iterate methods. Rennala
// restarts every worker right after a completion; m-Synchronous keeps
// contributors idle until the round's update.
Trajectory run_fresh_batch(const SimConfig& config, std::size_t batch, bool hold_contributors) {
  const QuadraticProblem& problem = *config.problem;
  const TimeModel& model = *config.time_model;
  const std::size_t n = worker_count(model);
  const double p = problem.noise_probability();

  Trajectory traj;
  Recorder recorder(problem, config, traj);
  WorkerClock clock(model, config.seed);
  std::vector<Rng> noise;
  for (std::size_t w = 0; w < n; ++w) noise.push_back(make_stream(config.seed, w, Stream::kNoise));

  std::vector<double> x = problem.initial_point();
  std::vector<double> g(problem.dim());
  std::vector<WorkerState> workers(n);
  std::vector<Contribution> round;
  EventQueue queue;
  std::int64_t k = 0;
  std::size_t heads = 0;
  recorder.record(0.0, 0, x, true);

  const auto start_idle = [&](double now) {
    for (std::size_t w = 0; w < n; ++w) {
      WorkerState& s = workers[w];
      if (s.busy || s.waiting) continue;
      s.busy = true;
      s.version = k;
      s.heads = bernoulli(noise[w], p);
      queue.push(clock.finish(w, now), w);
    }
  };

  double now = 0.0;
  start_idle(now);
  while (!iteration_cap_reached(config, k)) {
    if (queue.next_time() > config.time_budget) break;
    const Event ev = queue.advance_to_next_event();
    now = ev.time;
    WorkerState& s = workers[ev.worker];
    s.busy = false;
    ++traj.gradients_computed;

    if (s.version == k) {
      round.push_back({ev.worker, s.version});
      heads += s.heads ? 1 : 0;
      s.waiting = hold_contributors;
      if (round.size() == batch) {
        problem.minibatch_gradient_into(x, heads, batch, g);
        const bool finite = step_iterate(x, g, config.stepsize);
        if (config.record_updates) traj.updates.push_back({now, k, config.stepsize, round});
        traj.gradients_used += static_cast<std::int64_t>(batch);
        ++k;
        round.clear();
        heads = 0;
        for (auto& w : workers) w.waiting = false;
        if (!recorder.record(now, k, x) || !finite) {
          traj.diverged = true;
          break;
        }
      }
    } else {
      ++traj.gradients_discarded;
    }
    if (queue.next_time() != now) start_idle(now);
  }
  // A partially filled round is never applied.
  traj.gradients_discarded += static_cast<std::int64_t>(round.size());
  traj.iterations = k;
  recorder.record(now, k, x, true);
  return traj;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kSync:
      return "sync";
    case Algorithm::kMSync:
      return "m_sync";
    case Algorithm::kAsync:
      return "async";
    case Algorithm::kRennala:
      return "rennala";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "sync") return Algorithm::kSync;
  if (name == "m_sync") return Algorithm::kMSync;
  if (name == "async") return Algorithm::kAsync;
  if (name == "rennala") return Algorithm::kRennala;
  throw ContractError("unknown algorithm '" + std::string(name) + "'");
}

void validate(const SimConfig& c) {
  if (!c.problem) throw ContractError("SimConfig: problem is not set");
  if (!c.time_model) throw ContractError("SimConfig: time model is not set");
  const std::size_t n = worker_count(*c.time_model);
  if (n == 0) throw ContractError("SimConfig: time model has no workers");
  if (!(c.stepsize > 0.0) || !std::isfinite(c.stepsize)) {
    throw ContractError("SimConfig: stepsize must be positive");
  }
  if (!(c.time_budget > 0.0)) throw ContractError("SimConfig: time budget must be positive");
  if (c.max_iterations < 0) throw ContractError("SimConfig: max_iterations must be >= 0");
  if (!std::isfinite(c.time_budget) && c.max_iterations == 0) {
    throw ContractError("SimConfig: set a time budget or an iteration cap");
  }
  const bool is_m = c.algorithm == Algorithm::kMSync;
  const bool is_rennala = c.algorithm == Algorithm::kRennala;
  const bool is_async = c.algorithm == Algorithm::kAsync;
  if (is_m && (c.m < 1 || c.m > n)) throw ContractError("SimConfig: m must lie in [1, n]");
  if (!is_m && c.m != 0) throw ContractError("SimConfig: m is only used by m_sync");
  if (is_rennala && c.batch < 1) throw ContractError("SimConfig: batch must be >= 1");
  if (!is_rennala && c.batch != 0) throw ContractError("SimConfig: batch is only used by rennala");
  if (c.staleness_clip && !is_async) {
    throw ContractError("SimConfig: staleness clip is only used by async");
  }
  if (c.staleness_clip && !(*c.staleness_clip > 0.0)) {
    throw ContractError("SimConfig: staleness clip must be positive");
  }
}

double EventQueue::next_time() const { return heap_.empty() ? kInf : heap_.top().time; }

Event EventQueue::advance_to_next_event() {
  if (heap_.empty() || heap_.top().time == kInf) {
    throw StalledError("simulation stalled: no worker can finish its gradient", -1);
  }
  Event ev = heap_.top();
  heap_.pop();
  return ev;
}

Trajectory run_sync(const SimConfig& config) {
  require_tag(config, Algorithm::kSync);
  const QuadraticProblem& problem = *config.problem;
  const TimeModel& model = *config.time_model;
  const std::size_t n = worker_count(model);
  const double p = problem.noise_probability();

  Trajectory traj;
  Recorder recorder(problem, config, traj);
  WorkerClock clock(model, config.seed);
  std::vector<Rng> noise;
  for (std::size_t w = 0; w < n; ++w) noise.push_back(make_stream(config.seed, w, Stream::kNoise));

  std::vector<double> x = problem.initial_point();
  std::vector<double> g(problem.dim());
  double now = 0.0;
  std::int64_t k = 0;
  recorder.record(0.0, 0, x, true);

  while (!iteration_cap_reached(config, k)) {
    double done = now;
    std::size_t heads = 0;
    for (std::size_t w = 0; w < n; ++w) {
      // Same draw discipline as the event-driven methods: one delay and one
      // coin per started gradient, each from the worker's own stream.
      done = std::max(done, clock.finish(w, now));
      heads += bernoulli(noise[w], p) ? 1 : 0;
    }
    if (done == kInf) {
      if (std::isfinite(config.time_budget)) break;
      throw StalledError("simulation stalled: a worker never finishes", k);
    }
    if (done > config.time_budget) break;
    now = done;
    problem.minibatch_gradient_into(x, heads, n, g);
    const bool finite = step_iterate(x, g, config.stepsize);
    if (config.record_updates) {
      UpdateEvent ev{now, k, config.stepsize, {}};
      for (std::size_t w = 0; w < n; ++w) ev.used.push_back({w, k});
      traj.updates.push_back(std::move(ev));
    }
    traj.gradients_computed += static_cast<std::int64_t>(n);
    traj.gradients_used += static_cast<std::int64_t>(n);
    ++k;
    if (!recorder.record(now, k, x) || !finite) {
      traj.diverged = true;
      break;
    }
  }
  traj.iterations = k;
  recorder.record(now, k, x, true);
  return traj;
}

Trajectory run_m_sync(const SimConfig& config) {
  require_tag(config, Algorithm::kMSync);
  return run_fresh_batch(config, config.m, true);
}

Trajectory run_rennala(const SimConfig& config) {
  require_tag(config, Algorithm::kRennala);
  return run_fresh_batch(config, config.batch, false);
}

Trajectory run_async(const SimConfig& config) {
  require_tag(config, Algorithm::kAsync);
  const QuadraticProblem& problem = *config.problem;
  const TimeModel& model = *config.time_model;
  const std::size_t n = worker_count(model);
  const double p = problem.noise_probability();

  Trajectory traj;
  Recorder recorder(problem, config, traj);
  WorkerClock clock(model, config.seed);
  std::vector<Rng> noise;
  for (std::size_t w = 0; w < n; ++w) noise.push_back(make_stream(config.seed, w, Stream::kNoise));

  std::vector<double> x = problem.initial_point();
  std::vector<double> g(problem.dim());
  // Each worker computes at a snapshot of the iterate it started from.
  std::vector<std::vector<double>> snapshot(n, x);
  std::vector<WorkerState> workers(n);
  EventQueue queue;
  std::int64_t k = 0;
  recorder.record(0.0, 0, x, true);

  const auto start = [&](std::size_t w, double now) {
    WorkerState& s = workers[w];
    s.busy = true;
    s.version = k;
    s.heads = bernoulli(noise[w], p);
    snapshot[w] = x;
    queue.push(clock.finish(w, now), w);
  };
  for (std::size_t w = 0; w < n; ++w) start(w, 0.0);

  double now = 0.0;
  while (!iteration_cap_reached(config, k)) {
    if (queue.next_time() > config.time_budget) break;
    const Event ev = queue.advance_to_next_event();
    now = ev.time;
    WorkerState& s = workers[ev.worker];
    s.busy = false;
    ++traj.gradients_computed;

    const std::int64_t staleness = k - s.version;
    double gamma = config.stepsize;
    if (config.staleness_clip) {
      gamma *= std::min(1.0, *config.staleness_clip /
                                 static_cast<double>(std::max<std::int64_t>(staleness, 1)));
    }
    problem.minibatch_gradient_into(snapshot[ev.worker], s.heads ? 1 : 0, 1, g);
    const bool finite = step_iterate(x, g, gamma);
    if (config.record_updates) traj.updates.push_back({now, k, gamma, {{ev.worker, s.version}}});
    ++traj.gradients_used;
    ++k;
    if (!recorder.record(now, k, x) || !finite) {
      traj.diverged = true;
      break;
    }
    start(ev.worker, now);
  }
  traj.iterations = k;
  recorder.record(now, k, x, true);
  return traj;
}

Trajectory simulate(const SimConfig& config) {
  switch (config.algorithm) {
    case Algorithm::kSync:
      return run_sync(config);
    case Algorithm::kMSync:
      return run_m_sync(config);
    case Algorithm::kAsync:
      return run_async(config);
    case Algorithm::kRennala:
      return run_rennala(config);
  }
  throw ContractError("unknown algorithm");
}

}  // namespace ssgd
