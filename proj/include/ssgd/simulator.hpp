#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "ssgd/problem.hpp"
#include "ssgd/time_models.hpp"

namespace ssgd {

enum class Algorithm { kSync, kMSync, kAsync, kRennala };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct SimConfig {
  Algorithm algorithm = Algorithm::kSync;
  std::shared_ptr<const QuadraticProblem> problem;
  std::shared_ptr<const TimeModel> time_model;
  double stepsize = 0.0;
  // Asynchronous SGD only: gamma_k = gamma * min{1, D / max(delta_k, 1)}.
  std::optional<double> staleness_clip;
  std::size_t m = 0;      // m-Synchronous SGD only
  std::size_t batch = 0;  // Rennala SGD only
  double time_budget = std::numeric_limits<double>::infinity();
  std::int64_t max_iterations = 0;  // 0 means no iteration cap
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  std::size_t max_records = 10000;
  bool record_updates = false;  // keep per-update contributor lists
};

// Throws ContractError listing the first violated requirement.
void validate(const SimConfig& config);

struct TrajectoryRecord {
  double time;
  std::int64_t iteration;
  double objective;
  double grad_sq_norm;
};

struct Contribution {
  std::size_t worker;
  std::int64_t point_version;  // iterate index the gradient was computed at
};

struct UpdateEvent {
  double time;
  std::int64_t iteration;  // k, the update produces x^{k+1}
  double stepsize;
  std::vector<Contribution> used;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::vector<UpdateEvent> updates;  // filled only with record_updates
  std::int64_t iterations = 0;
  std::int64_t gradients_computed = 0;
  std::int64_t gradients_used = 0;
  std::int64_t gradients_discarded = 0;
  bool diverged = false;

  const TrajectoryRecord& final_record() const { return records.back(); }
};

struct Event {
  double time;
  std::size_t worker;
};

/// Pending worker completions ordered by (time, worker id).
class EventQueue {
 public:
  void push(double time, std::size_t worker) { heap_.push({time, worker}); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  // Time of the next completion, +infinity when nothing is pending.
  double next_time() const;

  // Pops the earliest completion. Throws StalledError when nothing is pending
  // or every pending completion is at +infinity.
  Event advance_to_next_event();

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.worker > b.worker;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
};

Trajectory simulate(const SimConfig& config);
Trajectory run_sync(const SimConfig& config);
Trajectory run_m_sync(const SimConfig& config);
Trajectory run_async(const SimConfig& config);
Trajectory run_rennala(const SimConfig& config);

}  // namespace ssgd
