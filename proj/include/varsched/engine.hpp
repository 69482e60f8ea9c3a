#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "varsched/jobs.hpp"
#include "varsched/policies.hpp"

namespace varsched {

// One record per step: P is the service rate delivered on [t, t+dt), X the
// total remaining demand at t (after arrivals, before service), U_cum/W_cum
// the penalties accumulated through the end of the step.
struct TraceSample {
  double t = 0.0;
  double P = 0.0;
  double X = 0.0;
  double U_cum = 0.0;
  double W_cum = 0.0;
};

struct JobOutcome {
  double served = 0.0;      // delivered demand
  double completion = NAN;  // absolute completion time; NaN if never finished
  double tau_hat = NAN;     // completion - activation
  double unmet = 0.0;       // demand abandoned at the deadline
  double extension = 0.0;   // time served past the deadline
};

struct CapacityTrace {
  double dt = 0.0;
  std::vector<TraceSample> samples;
  std::vector<JobOutcome> outcomes;  // aligned with the input JobSet
  double total_served = 0.0;
  double total_unmet = 0.0;
  double total_extension = 0.0;
  // Sub-dt residue force-dropped at strict deadlines (discretization, not a
  // contract breach; anything larger raises ValidationError).
  double strict_shortfall = 0.0;
  std::size_t overflow_jobs = 0;  // unfinished when the step cap was reached
};

struct SimOptions {
  // Extra simulated time past the horizon allowed for jobs served beyond
  // their deadline; NaN picks a bound from the jobs' fallback rates.
  double max_extension = NAN;
};

// Fixed-step simulation.  Arrivals activate at the first step boundary at or
// after their arrival time; each active job receives min(rate*dt, y) service
// per step (capped at the deadline for jobs that stop there).  Policies that
// promise completion by the deadline may leave at most dt demand unserved
// (counted in strict_shortfall); more raises ValidationError naming the job.
// Offline/Mpc configs are solved by the quadratic-program module, not here.
CapacityTrace simulate(const JobSet& jobs, const PolicyConfig& policy,
                       double dt, const SimOptions& opts = {});

CapacityTrace simulate_es_pc(const JobSet& jobs, double mu, double p_bar,
                             double dt, const SimOptions& opts = {});

// Hook for centralized schedulers (receding-horizon re-optimization): the
// provider fills rates[job_index] for the jobs listed in active.  Jobs are
// held to the strict contract.
struct StepView {
  double t = 0.0;
  std::size_t step = 0;
  const std::vector<std::size_t>* active = nullptr;
  const std::vector<JobState>* states = nullptr;
};
using RateProvider =
    std::function<void(const StepView&, std::vector<double>& rates)>;
CapacityTrace simulate_with_provider(const JobSet& jobs,
                                     const RateProvider& provider, double dt,
                                     const SimOptions& opts = {});

struct Metrics {
  double mean_P = 0.0;
  double var_P = 0.0;
  double var_X = 0.0;
  double mean_U_rate = 0.0;  // unmet-demand penalty per unit time
  double mean_W_rate = 0.0;  // lateness penalty per unit time
  double total_unmet = 0.0;
  double total_extension = 0.0;
  double window = 0.0;
  std::size_t samples = 0;
  std::size_t overflow_jobs = 0;
  double strict_shortfall = 0.0;

  // alpha*mean_P^2 + beta*var_P + penalty_scale*(U + W rates).
  double objective(double alpha, double beta, double penalty_scale) const;
  // Penalized variance used for policy comparisons.
  double cost() const { return objective(0.0, 1.0, 1.0); }
};

// Statistics over samples with t >= burn_in.
Metrics summarize(const CapacityTrace& trace, double burn_in);
// Same, but only over samples with burn_in <= t < t_end (so traces of
// different lengths can be compared on a common window).
Metrics summarize_window(const CapacityTrace& trace, double burn_in,
                         double t_end);

// cost / baseline_cost; throws std::invalid_argument unless the baseline is
// positive and finite.
double empirical_ratio(double cost, double baseline_cost);

// CSV with header t,P,X,U_cum,W_cum.
void save_capacity_trace(const CapacityTrace& trace, const std::string& path);
// Flat key=value lines.
void write_summary(std::ostream& out, const Metrics& m);

}  // namespace varsched
