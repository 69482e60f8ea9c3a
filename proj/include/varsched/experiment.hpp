#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varsched/arrivals.hpp"
#include "varsched/config.hpp"
#include "varsched/engine.hpp"
#include "varsched/jobs.hpp"
#include "varsched/policies.hpp"

namespace varsched {

// Batch comparison setup: instances come either from an arrival model (one
// job set per seed) or from a single fixed trace file.
struct ExperimentConfig {
  std::optional<ArrivalModel> model;
  std::string trace_path;
  std::vector<std::string> policies;  // policy_from_string forms
  double dt = 0.1;
  double burn_in = 0.0;
  std::uint64_t seed_base = 1;
  std::size_t seed_count = 1;
  double c_override = NAN;    // overwrite every job's cost_demand when set
  double eps_override = NAN;  // overwrite every job's cost_deadline when set
  std::string ratio_against = "offline";
  double tol = 1e-8;
  std::size_t max_iters = 50000;
  std::string out_dir;
};

// Flat key-value form: either `model = <model-file>` / a `[model]` section
// with the model schema, or `trace = <trace-file>`; plus policies, dt,
// burn_in, seed, seeds, C, eps, ratio_against, tol, max_iters, out.
ExperimentConfig experiment_from_kv(const KvMap& kv);
void validate_experiment(const ExperimentConfig& cfg);

// Runs one policy on one job set; clairvoyant and receding-horizon configs
// dispatch to the quadratic-program solvers, everything else to the engine.
// p_bar_hint supplies the capacity target for the catch-up policy when the
// config leaves it unset (NaN falls back to the engine's running mean).
CapacityTrace run_policy(const JobSet& jobs, const PolicyConfig& pc,
                         double dt, double tol = 1e-8,
                         std::size_t max_iters = 50000,
                         double p_bar_hint = NAN);

// Sets cost_demand / cost_deadline on every job; NaN leaves a field alone.
void override_prices(JobSet& jobs, double c, double eps);

// One (instance, seed, policy) outcome on the common comparison window.
struct RunRow {
  std::size_t instance = 0;
  std::uint64_t seed = 0;
  std::string policy;
  Metrics metrics;
  double cost = NAN;
  double ratio = NAN;  // cost / baseline cost on the same instance
};

struct PolicyAggregate {
  std::string policy;
  std::size_t runs = 0;
  double mean_cost = NAN;
  double mean_ratio = NAN;
  double se_ratio = NAN;  // standard error of the mean ratio
};

struct CompareResult {
  std::vector<RunRow> rows;  // instance-major, policy-minor order
  std::vector<PolicyAggregate> aggregates;
  double window_end = 0.0;
};

// Every policy on every instance, metrics on the shared window
// [burn_in, horizon); the ratio baseline joins the policy list when absent.
// Runs execute concurrently; the output is identical either way.
CompareResult run_compare(const ExperimentConfig& cfg, bool parallel = true);

// Long-format CSV: instance,seed,policy,var_P,mean_P,var_X,U,W,cost,ratio.
void write_compare_csv(const CompareResult& res, const std::string& path);
// policy,runs,mean_cost,mean_ratio,se_ratio in first-seen policy order.
void write_aggregate_csv(const CompareResult& res, const std::string& path);

struct TuneResult {
  double best_value = NAN;
  double best_mean_cost = NAN;
  std::vector<std::pair<double, double>> grid;  // (value, mean cost)
};

// Grid search over the policy's free parameter (constant rate for the
// equal-service family and the unknown-job fallback, total capacity for the
// priority allocators) minimizing mean cost across instances; ties keep the
// smallest value.
TuneResult tune_policy_parameter(const std::vector<JobSet>& instances,
                                 PolicyConfig base,
                                 const std::vector<double>& grid, double dt,
                                 double burn_in, double window_end,
                                 bool parallel = true);

// Paired bootstrap over instances: the probability that mean(a) <= mean(b)
// under joint resampling. Deterministic for a fixed seed.
double bootstrap_prob_mean_le(std::span<const double> a,
                              std::span<const double> b,
                              std::size_t resamples, std::uint64_t seed);

}  // namespace varsched
