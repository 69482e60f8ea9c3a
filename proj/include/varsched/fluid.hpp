#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "varsched/qp.hpp"

namespace varsched {

// Deterministic fluid model: each class is a continuum of identical jobs
// described by (arrival, demand, sojourn) with a total mass (arrival rate
// density integrated over the class). Service is a per-class rate profile
// v(t) in [0, 1]; aggregate capacity at time t is sum_k mass_k * v_k(t).
struct FluidClass {
  double arrival = 0.0;
  double demand = 0.0;   // per-job work sigma
  double sojourn = 0.0;  // per-job window length tau
  double mass = 0.0;     // jobs per unit volume in this class
};

struct FluidInstance {
  std::vector<FluidClass> classes;
  // Ordered breakpoints covering every class window. Always contains all
  // arrivals and deadlines, so each window is partitioned exactly by cells.
  std::vector<double> grid;
};

// Builds the breakpoint grid from arrivals, deadlines and optional extra
// refinement points; validates demands, sojourns and masses.
FluidInstance make_fluid_instance(std::vector<FluidClass> classes,
                                  const std::vector<double>& refinements = {});

// Per-class piecewise-constant service rates on the instance grid cells.
struct ClassRateProfiles {
  std::vector<double> grid;                // cell boundaries, size cells+1
  std::vector<std::vector<double>> rates;  // [class][cell], zero off-window
};

// Aggregate expected capacity per cell: sum_k mass_k * rate_k.
std::vector<double> mean_capacity(const FluidInstance& inst,
                                  const ClassRateProfiles& prof);

// Every class served flat at demand/sojourn across its whole window.
ClassRateProfiles flat_profiles(const FluidInstance& inst);

// Work density of classes whose whole window fits inside [t1, t2):
// sum of mass*demand over {a >= t1 and a+tau <= t2}, divided by t2-t1.
// Throws std::invalid_argument when t2 <= t1.
double intensity(const FluidInstance& inst, double t1, double t2);

struct IntensityInterval {
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
};

// Exhaustive search over breakpoint pairs; ties broken by earliest start,
// then by shortest interval. Throws SolverError when no class has mass.
IntensityInterval max_intensity_interval(const FluidInstance& inst);

struct MaxstabResult {
  ClassRateProfiles profiles;
  // One entry per round: the critical interval that was filled flat.
  std::vector<IntensityInterval> intervals;
};

// Peak-minimizing schedule: repeatedly find the densest interval (measuring
// intensity against cells not yet consumed by earlier rounds), serve the
// classes confined to it at a flat aggregate level, then remove that
// interval's free cells from play. Throws SolverError, naming the class and
// interval, when a confined class cannot be packed under the unit rate cap.
MaxstabResult run_maxstab(const FluidInstance& inst, double tol = 1e-9);

// Minimizes the time average of alpha*E[P]^2 + beta*sum_k mass_k*v_k^2
// subject to each class delivering demand*mass with rates in [0, 1].
// Projected gradient on per-class amounts; same contract as solve_offline.
ClassRateProfiles solve_fluid_qp(const FluidInstance& inst, double alpha,
                                 double beta, double tol = 1e-8,
                                 std::size_t max_iters = 50000,
                                 QpReport* report = nullptr);

// Time average over the grid span of alpha*E[P]^2 + beta*sum mass*v^2.
double fluid_objective(const FluidInstance& inst,
                       const ClassRateProfiles& prof, double alpha,
                       double beta);

struct ParetoReport {
  bool pass = true;
  std::vector<std::string> violations;
};

// First-order optimality for the fluid objective: within each class,
// alpha*E[P] + beta*v is constant over served cells (spread <= tol), and on
// unserved window cells alpha*E[P] must not fall below that level - tol.
ParetoReport check_pareto_conditions(const FluidInstance& inst,
                                     const ClassRateProfiles& prof,
                                     double alpha, double beta,
                                     double tol = 1e-6);

// CSV with header arrival,demand,sojourn,mass.
FluidInstance load_fluid_instance(const std::string& path,
                                  const std::vector<double>& refinements = {});
void save_fluid_instance(const FluidInstance& inst, const std::string& path);

// CSV with header class_index,cell_start,cell_end,rate (zero rates skipped).
void save_profiles(const ClassRateProfiles& prof, const std::string& path);

}  // namespace varsched
