#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "varsched/engine.hpp"
#include "varsched/jobs.hpp"

namespace varsched {

// A full schedule on the step grid. Entry (k, i) is job k's per-step average
// service rate (amount served in the step divided by dt) for the i-th step of
// its window; steps outside the window carry no entries. For steps fully
// inside the window this equals the instantaneous rate; a step cut short by
// the deadline has its entry bounded by the in-window fraction instead of 1.
struct RateMatrix {
  double dt = 0.0;
  std::size_t steps = 0;  // global step count covering every window
  std::vector<std::size_t> first_step;       // per job: window start step
  std::vector<std::vector<double>> rates;    // per job: window rates
  std::vector<std::vector<double>> caps;     // per job: per-step rate bound

  std::vector<double> capacity() const;  // total rate per global step
  double objective() const;              // sum over steps of capacity^2 * dt
};

struct QpReport {
  std::size_t iterations = 0;
  double objective = 0.0;
  double kkt = 0.0;
  bool converged = true;  // false = iteration cap hit; kkt carries residual
  std::vector<double> objective_history;  // accepted iterates, non-increasing
};

// Minimum-variance schedule: minimizes the time integral of capacity^2
// subject to each job's demand being met inside its window at rates in
// [0,1], by projected gradient with exact per-job projection (bisection on
// the dual of the box-capped simplex). Throws ValidationError for infeasible
// jobs and SolverError when a window cannot hold its demand on this grid.
RateMatrix solve_offline(const JobSet& jobs, double dt, double tol = 1e-8,
                         std::size_t max_iters = 50000,
                         QpReport* report = nullptr, bool parallel = true);

// Re-solves the offline problem at every step over the jobs currently
// present (remaining demands, horizon to their latest deadline), applies the
// first step, and advances the engine. Warm-started from the previous step.
CapacityTrace simulate_mpc(const JobSet& jobs, double dt, double tol = 1e-8,
                           std::size_t max_iters = 50000);

// Expands a schedule into the engine's trace shape (capacity, backlog, zero
// penalty channels) so the same summaries apply to solver output.
CapacityTrace trace_from_rates(const JobSet& jobs, const RateMatrix& rates);

struct ValleyReport {
  bool pass = true;
  std::vector<std::string> violations;
};
// Level-service optimality conditions: where a job is served at an interior
// rate the capacity must be flat, and any unserved in-window step must carry
// at least that level. Steps at the rate bound are exempt.
ValleyReport check_valley_filling(const RateMatrix& rates, double dt,
                                  double tol);

// First-order optimality residual: the largest profitable demand transfer
// between two steps of one job's window (0 at the optimum), plus any
// feasibility slack in the row sums.
double kkt_residual(const RateMatrix& rates, double dt);

// CSV export: job_index,step_index,rate (global step indices).
void save_rate_matrix(const RateMatrix& m, const std::string& path);

namespace detail {
// Euclidean projection of g onto {0 <= x <= cap, sum x = demand} by
// bisection on the dual shift; the equality holds exactly on exit.
void project_box_simplex(const std::vector<double>& cap, double demand,
                         const double* g, double* out);
}  // namespace detail

}  // namespace varsched
