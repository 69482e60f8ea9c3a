#include "varsched/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "varsched/errors.hpp"
#include "varsched/qp.hpp"
#include "varsched/rng.hpp"
#include "varsched/trace_io.hpp"

namespace varsched {

namespace {

// Writes through a temp file and renames, so readers never see partial CSVs.
void atomic_write(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + tmp);
    out << body;
    if (!out) throw ValidationError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ValidationError("cannot rename " + tmp + " to " + path);
}

std::string canonical_policy(const std::string& text) {
  return policy_to_string(policy_from_string(text));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return NAN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ExperimentConfig experiment_from_kv(const KvMap& kv) {
  ExperimentConfig cfg;
  KvMap model_kv;
  for (const auto& [key, value] : kv)
    if (key.rfind("model.", 0) == 0) model_kv[key.substr(6)] = value;
  if (!model_kv.empty()) {
    cfg.model = model_from_kv(model_kv);
  } else if (auto path = kv_get(kv, "model")) {
    cfg.model = load_model_file(*path);
  }
  if (auto path = kv_get(kv, "trace")) cfg.trace_path = *path;
  if (auto pols = kv_get(kv, "policies"))
    cfg.policies = split_tokens(*pols);
  cfg.dt = kv_get_double(kv, "dt", cfg.dt);
  cfg.burn_in = kv_get_double(kv, "burn_in", cfg.burn_in);
  cfg.seed_base = static_cast<std::uint64_t>(
      kv_get_double(kv, "seed", static_cast<double>(cfg.seed_base)));
  cfg.seed_count = static_cast<std::size_t>(
      kv_get_double(kv, "seeds", static_cast<double>(cfg.seed_count)));
  cfg.c_override = kv_get_double(kv, "C", cfg.c_override);
  cfg.eps_override = kv_get_double(kv, "eps", cfg.eps_override);
  if (auto r = kv_get(kv, "ratio_against")) cfg.ratio_against = *r;
  cfg.tol = kv_get_double(kv, "tol", cfg.tol);
  cfg.max_iters = static_cast<std::size_t>(
      kv_get_double(kv, "max_iters", static_cast<double>(cfg.max_iters)));
  if (auto o = kv_get(kv, "out")) cfg.out_dir = *o;
  return cfg;
}

void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.policies.empty())
    throw ValidationError("experiment: at least one policy is required");
  if (!(cfg.dt > 0.0))
    throw ValidationError("experiment: dt must be positive");
  if (cfg.seed_count < 1)
    throw ValidationError("experiment: seed count must be at least 1");
  if (!cfg.model && cfg.trace_path.empty())
    throw ValidationError(
        "experiment: either an arrival model or a trace path is required");
  if (cfg.model && !cfg.trace_path.empty())
    throw ValidationError(
        "experiment: give an arrival model or a trace path, not both");
  if (cfg.burn_in < 0.0)
    throw ValidationError("experiment: burn_in must be non-negative");
  for (const std::string& p : cfg.policies)
    policy_from_string(p);  // throws with the offending text
  policy_from_string(cfg.ratio_against);
  if (cfg.model) validate_model(*cfg.model);
}

CapacityTrace run_policy(const JobSet& jobs, const PolicyConfig& pc,
                         double dt, double tol, std::size_t max_iters,
                         double p_bar_hint) {
  switch (pc.kind) {
    case PolicyKind::Offline: {
      QpReport rep;
      const RateMatrix rates = solve_offline(jobs, dt, tol, max_iters, &rep);
      if (!rep.converged) {
        std::ostringstream msg;
        msg << "offline solve stopped at the iteration cap with residual "
            << rep.kkt;
        throw SolverError(msg.str());
      }
      return trace_from_rates(jobs, rates);
    }
    case PolicyKind::Mpc:
      return simulate_mpc(jobs, dt, tol, max_iters);
    case PolicyKind::EsPc: {
      const double p_bar = std::isnan(pc.p_bar) ? p_bar_hint : pc.p_bar;
      return simulate_es_pc(jobs, pc.mu, p_bar, dt);
    }
    default:
      return simulate(jobs, pc, dt);
  }
}

void override_prices(JobSet& jobs, double c, double eps) {
  for (JobRequest& j : jobs.jobs) {
    if (!std::isnan(c)) j.cost_demand = c;
    if (!std::isnan(eps)) j.cost_deadline = eps;
  }
}

CompareResult run_compare(const ExperimentConfig& cfg, bool parallel) {
  validate_experiment(cfg);

  std::vector<JobSet> instances;
  std::vector<std::uint64_t> seeds;
  if (cfg.model) {
    for (std::size_t i = 0; i < cfg.seed_count; ++i) {
      seeds.push_back(cfg.seed_base + i);
      instances.push_back(sample_arrivals(*cfg.model, seeds.back()));
    }
  } else {
    seeds.push_back(cfg.seed_base);
    instances.push_back(load_trace(cfg.trace_path));
  }
  for (JobSet& js : instances)
    override_prices(js, cfg.c_override, cfg.eps_override);

  std::vector<PolicyConfig> pcs;
  std::vector<std::string> names;
  for (const std::string& p : cfg.policies) {
    pcs.push_back(policy_from_string(p));
    names.push_back(policy_to_string(pcs.back()));
  }
  const std::string baseline_name = canonical_policy(cfg.ratio_against);
  std::size_t baseline_idx = names.size();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == baseline_name) {
      baseline_idx = i;
      break;
    }
  if (baseline_idx == names.size()) {
    pcs.push_back(policy_from_string(cfg.ratio_against));
    names.push_back(baseline_name);
  }

  double p_bar_hint = NAN;
  CompareResult res;
  if (cfg.model) {
    res.window_end = cfg.model->horizon;
    p_bar_hint = cfg.model->arrival_rate() * cfg.model->marks.demand.mean();
  } else {
    res.window_end = instances[0].horizon;
  }

  const std::size_t n_inst = instances.size(), n_pol = pcs.size();
  res.rows.assign(n_inst * n_pol, RunRow{});
  std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (std::ptrdiff_t flat = 0;
       flat < static_cast<std::ptrdiff_t>(n_inst * n_pol); ++flat) {
    const std::size_t i = static_cast<std::size_t>(flat) / n_pol;
    const std::size_t p = static_cast<std::size_t>(flat) % n_pol;
    try {
      const CapacityTrace trace = run_policy(
          instances[i], pcs[p], cfg.dt, cfg.tol, cfg.max_iters, p_bar_hint);
      RunRow& row = res.rows[flat];
      row.instance = i;
      row.seed = seeds[i];
      row.policy = names[p];
      row.metrics = summarize_window(trace, cfg.burn_in, res.window_end);
      row.cost = row.metrics.cost();
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  (void)parallel;

  for (std::size_t i = 0; i < n_inst; ++i) {
    const double base_cost = res.rows[i * n_pol + baseline_idx].cost;
    for (std::size_t p = 0; p < n_pol; ++p) {
      RunRow& row = res.rows[i * n_pol + p];
      try {
        row.ratio = empirical_ratio(row.cost, base_cost);
      } catch (const std::invalid_argument&) {
        row.ratio = NAN;
      }
    }
  }

  for (std::size_t p = 0; p < n_pol; ++p) {
    PolicyAggregate agg;
    agg.policy = names[p];
    std::vector<double> costs, ratios;
    for (std::size_t i = 0; i < n_inst; ++i) {
      const RunRow& row = res.rows[i * n_pol + p];
      costs.push_back(row.cost);
      if (!std::isnan(row.ratio)) ratios.push_back(row.ratio);
    }
    agg.runs = n_inst;
    agg.mean_cost = mean_of(costs);
    agg.mean_ratio = mean_of(ratios);
    if (ratios.size() > 1) {
      double ss = 0.0;
      for (double r : ratios) {
        const double d = r - agg.mean_ratio;
        ss += d * d;
      }
      const double n = static_cast<double>(ratios.size());
      agg.se_ratio = std::sqrt(ss / (n - 1.0) / n);
    }
    res.aggregates.push_back(agg);
  }
  return res;
}

void write_compare_csv(const CompareResult& res, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  out << "instance,seed,policy,var_P,mean_P,var_X,U,W,cost,ratio\n";
  for (const RunRow& row : res.rows)
    out << row.instance << "," << row.seed << "," << row.policy << ","
        << row.metrics.var_P << "," << row.metrics.mean_P << ","
        << row.metrics.var_X << "," << row.metrics.mean_U_rate << ","
        << row.metrics.mean_W_rate << "," << row.cost << "," << row.ratio
        << "\n";
  atomic_write(path, out.str());
}

void write_aggregate_csv(const CompareResult& res, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  out << "policy,runs,mean_cost,mean_ratio,se_ratio\n";
  for (const PolicyAggregate& agg : res.aggregates)
    out << agg.policy << "," << agg.runs << "," << agg.mean_cost << ","
        << agg.mean_ratio << "," << agg.se_ratio << "\n";
  atomic_write(path, out.str());
}

TuneResult tune_policy_parameter(const std::vector<JobSet>& instances,
                                 PolicyConfig base,
                                 const std::vector<double>& grid, double dt,
                                 double burn_in, double window_end,
                                 bool parallel) {
  if (grid.empty())
    throw ValidationError("tune: the parameter grid is empty");
  if (instances.empty())
    throw ValidationError("tune: no instances to tune on");
  const bool uses_capacity = base.kind == PolicyKind::Edf ||
                             base.kind == PolicyKind::Llf ||
                             base.kind == PolicyKind::FairSharing;

  TuneResult res;
  res.grid.resize(grid.size());
  std::vector<double> costs(grid.size() * instances.size(), NAN);
  std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) collapse(2) if (parallel)
#endif
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(grid.size());
       ++g)
    for (std::ptrdiff_t i = 0;
         i < static_cast<std::ptrdiff_t>(instances.size()); ++i) {
      try {
        PolicyConfig pc = base;
        if (uses_capacity)
          pc.capacity = grid[g];
        else
          pc.c = grid[g];
        const CapacityTrace trace = run_policy(instances[i], pc, dt);
        costs[g * instances.size() + i] =
            summarize_window(trace, burn_in, window_end).cost();
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        if (!failure) failure = std::current_exception();
      }
    }
  if (failure) std::rethrow_exception(failure);
  (void)parallel;

  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i)
      s += costs[g * instances.size() + i];
    const double mean = s / static_cast<double>(instances.size());
    res.grid[g] = {grid[g], mean};
    if (std::isnan(res.best_mean_cost) || mean < res.best_mean_cost) {
      res.best_mean_cost = mean;
      res.best_value = grid[g];
    }
  }
  return res;
}

double bootstrap_prob_mean_le(std::span<const double> a,
                              std::span<const double> b,
                              std::size_t resamples, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument(
        "bootstrap: paired samples must be non-empty and equal length");
  Rng rng(seed);
  const std::size_t n = a.size();
  std::size_t hits = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % n);
      diff += a[j] - b[j];
    }
    if (diff <= 0.0) ++hits;
  }
  return static_cast<double>(hits) /
         static_cast<double>(std::max<std::size_t>(resamples, 1));
}

}  // namespace varsched
