#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace varsched {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One service request: a units of work (demand) that should be completed
// within sojourn time units of the arrival.  cost_demand is the per-unit
// price of demand left unserved at the deadline; cost_deadline the per-unit
// price of finishing late.  +inf means the corresponding constraint is hard.
// known=false marks jobs whose demand/deadline are hidden from the scheduler
// (the system still enforces their departure rules).
struct JobRequest {
  double arrival = 0.0;
  double demand = 0.0;
  double sojourn = 0.0;
  double cost_demand = kInf;
  double cost_deadline = kInf;
  bool known = true;

  double deadline() const { return arrival + sojourn; }
};

// Live per-job state tracked by the simulation engine.  remaining_time is
// measured against the activation-adjusted deadline and may go negative for
// jobs that are served past their deadline.
struct JobState {
  JobRequest request;
  std::size_t index = 0;         // position in the input JobSet
  double activation = 0.0;       // arrival snapped to the step grid
  double deadline = 0.0;         // activation + sojourn
  double remaining_demand = 0.0; // y
  double remaining_time = 0.0;   // x = deadline - t
  double served = 0.0;

  double laxity() const { return remaining_time - remaining_demand; }
};

// A generated or loaded set of jobs over a finite horizon, sorted by arrival.
struct JobSet {
  std::vector<JobRequest> jobs;
  double horizon = 0.0;
  // Generation bookkeeping (zero for loaded traces).
  std::size_t dropped_past_horizon = 0;  // deadline would exceed the horizon
  std::size_t mark_resamples = 0;        // mark redraws to enforce demand <= sojourn
};

struct Violation {
  enum class Kind {
    NegativeArrival,
    NegativeDemand,
    InfeasibleWindow,   // demand > sojourn
    PastHorizon,        // arrival + sojourn > horizon
    BadCost,            // cost <= 0 or NaN
  };
  Kind kind;
  std::size_t job = 0;
  std::string message;
};

// Checks every job against the model invariants; returns one entry per
// offending job/field, empty when the set is clean.
std::vector<Violation> validate_jobset(const JobSet& set);

std::string violation_to_string(const Violation& v);

}  // namespace varsched
