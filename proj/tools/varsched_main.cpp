#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "varsched/analytics.hpp"
#include "varsched/arrivals.hpp"
#include "varsched/engine.hpp"
#include "varsched/errors.hpp"
#include "varsched/experiment.hpp"
#include "varsched/fluid.hpp"
#include "varsched/qp.hpp"
#include "varsched/trace_io.hpp"

namespace {

using namespace varsched;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct CommonArgs {
  std::string model_path;
  std::string trace_path;
  double dt = 0.1;
  double burn_in = 0.0;
  std::uint64_t seed = 1;
  double C = NAN;
  double eps = NAN;
  double tol = 1e-8;
  std::size_t max_iters = 50000;
  std::string out;
};

// One instance from either source; returns the comparison window end and the
// catch-up capacity target when the model provides one.
JobSet load_instance(const CommonArgs& a, double& window_end,
                     double& p_bar_hint) {
  if (!a.model_path.empty() && !a.trace_path.empty())
    throw ValidationError("give --model or --trace, not both");
  JobSet jobs;
  if (!a.model_path.empty()) {
    const ArrivalModel model = load_model_file(a.model_path);
    jobs = sample_arrivals(model, a.seed);
    window_end = model.horizon;
    p_bar_hint = model.arrival_rate() * model.marks.demand.mean();
  } else if (!a.trace_path.empty()) {
    jobs = load_trace(a.trace_path);
    window_end = jobs.horizon;
    p_bar_hint = NAN;
  } else {
    throw ValidationError("an input is required: --model or --trace");
  }
  override_prices(jobs, a.C, a.eps);
  return jobs;
}

void print_kv(const std::string& key, double value) {
  std::cout.precision(17);
  std::cout << key << "=" << value << "\n";
}

int cmd_generate(const CommonArgs& a) {
  if (a.model_path.empty())
    throw ValidationError("generate needs --model");
  if (a.out.empty()) throw ValidationError("generate needs --out");
  const ArrivalModel model = load_model_file(a.model_path);
  const JobSet jobs = sample_arrivals(model, a.seed);
  save_trace(jobs, a.out);
  std::cout << "jobs=" << jobs.jobs.size() << "\n"
            << "dropped_past_horizon=" << jobs.dropped_past_horizon << "\n"
            << "mark_resamples=" << jobs.mark_resamples << "\n";
  return kExitOk;
}

int cmd_simulate(const CommonArgs& a, const std::string& policy,
                 double mu_override) {
  double window_end = 0.0, p_bar_hint = NAN;
  const JobSet jobs = load_instance(a, window_end, p_bar_hint);
  PolicyConfig pc = policy_from_string(policy);
  if (!std::isnan(mu_override)) pc.mu = mu_override;
  const CapacityTrace trace =
      run_policy(jobs, pc, a.dt, a.tol, a.max_iters, p_bar_hint);
  if (!a.out.empty()) save_capacity_trace(trace, a.out);
  write_summary(std::cout, summarize_window(trace, a.burn_in, window_end));
  return kExitOk;
}

int cmd_compare(const CommonArgs& a, const std::vector<std::string>& policies,
                std::size_t seeds, const std::string& ratio_against) {
  ExperimentConfig cfg;
  if (!a.model_path.empty() && !a.trace_path.empty())
    throw ValidationError("give --model or --trace, not both");
  if (!a.model_path.empty()) cfg.model = load_model_file(a.model_path);
  cfg.trace_path = a.trace_path;
  for (const std::string& chunk : policies)
    for (const std::string& p : split_tokens(chunk)) cfg.policies.push_back(p);
  cfg.dt = a.dt;
  cfg.burn_in = a.burn_in;
  cfg.seed_base = a.seed;
  cfg.seed_count = seeds;
  cfg.c_override = a.C;
  cfg.eps_override = a.eps;
  cfg.ratio_against = ratio_against;
  cfg.tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.out_dir = a.out.empty() ? "." : a.out;

  const CompareResult res = run_compare(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string csv = cfg.out_dir + "/compare.csv";
  const std::string agg = cfg.out_dir + "/aggregate.csv";
  write_compare_csv(res, csv);
  write_aggregate_csv(res, agg);
  std::cout << "rows=" << res.rows.size() << "\n"
            << "compare_csv=" << csv << "\n"
            << "aggregate_csv=" << agg << "\n";
  for (const PolicyAggregate& pa : res.aggregates) {
    print_kv("mean_cost_" + pa.policy, pa.mean_cost);
    print_kv("mean_ratio_" + pa.policy, pa.mean_ratio);
  }
  return kExitOk;
}

int cmd_offline(const CommonArgs& a) {
  if (a.trace_path.empty()) throw ValidationError("offline needs --trace");
  JobSet jobs = load_trace(a.trace_path);
  override_prices(jobs, a.C, a.eps);
  QpReport rep;
  const RateMatrix rates =
      solve_offline(jobs, a.dt, a.tol, a.max_iters, &rep);
  if (!a.out.empty()) save_rate_matrix(rates, a.out);
  print_kv("objective", rep.objective);
  print_kv("kkt", rep.kkt);
  std::cout << "iterations=" << rep.iterations << "\n"
            << "converged=" << (rep.converged ? 1 : 0) << "\n";
  if (!rep.converged) {
    std::cerr << "offline solve stopped at the iteration cap with residual "
              << rep.kkt << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_maxstab(const CommonArgs& a) {
  if (a.trace_path.empty())
    throw ValidationError(
        "maxstab needs --trace (CSV: arrival,demand,sojourn,mass)");
  const FluidInstance inst = load_fluid_instance(a.trace_path);
  const MaxstabResult res = run_maxstab(inst);
  if (!a.out.empty()) save_profiles(res.profiles, a.out);
  std::cout.precision(17);
  std::cout << "rounds=" << res.intervals.size() << "\n";
  for (std::size_t r = 0; r < res.intervals.size(); ++r)
    std::cout << "interval_" << r << "=" << res.intervals[r].t1 << ":"
              << res.intervals[r].t2 << ":" << res.intervals[r].value
              << "\n";
  double peak = 0.0;
  for (double v : mean_capacity(inst, res.profiles))
    peak = std::max(peak, v);
  print_kv("peak", peak);
  print_kv("objective", fluid_objective(inst, res.profiles, 1.0, 0.0));
  return kExitOk;
}

int cmd_analyze(const CommonArgs& a, std::size_t samples) {
  MarkMoments moments = [&] {
    if (!a.model_path.empty() && !a.trace_path.empty())
      throw ValidationError("give --model or --trace, not both");
    if (!a.model_path.empty()) {
      ArrivalModel model = load_model_file(a.model_path);
      return MarkMoments::from_model(model, samples, a.seed);
    }
    if (a.trace_path.empty())
      throw ValidationError("an input is required: --model or --trace");
    const JobSet jobs = load_trace(a.trace_path);
    if (jobs.jobs.empty())
      throw ValidationError("analyze: the trace holds no jobs");
    std::vector<double> sig, tau;
    for (const JobRequest& j : jobs.jobs) {
      sig.push_back(j.demand);
      tau.push_back(j.sojourn);
    }
    const double lambda =
        jobs.horizon > 0.0
            ? static_cast<double>(jobs.jobs.size()) / jobs.horizon
            : 0.0;
    return MarkMoments::from_pairs(lambda, sig, tau);
  }();

  print_kv("lambda", moments.lambda());
  std::cout << "moments_exact=" << (moments.exact() ? 1 : 0) << "\n"
            << "moment_samples=" << moments.sample_count() << "\n";
  print_kv("e_sigma", moments.e_sigma());
  print_kv("e_sigma2", moments.e_sigma2());
  print_kv("e_tau", moments.e_tau());
  print_kv("e_sigma2_over_tau", moments.e_sigma2_over_tau());
  print_kv("e_sigma2_tau", moments.e_sigma2_tau());
  print_kv("mean_exact", stationary_mean(moments, moments.e_sigma()));
  print_kv("var_exact", var_exact(moments));
  print_kv("var_x_exact", var_x_exact(moments));
  const RatioBounds rb = ratio_bound_exact(moments);
  print_kv("bound_cor2", rb.general);
  print_kv("bound_cor4", rb.matched_var_x);
  if (!std::isnan(a.C)) print_kv("cost_soft_demand", cost_soft_demand(moments, a.C));
  if (!std::isnan(a.eps))
    print_kv("cost_soft_deadline", cost_soft_deadline(moments, a.eps));
  if (!std::isnan(a.C) && !std::isnan(a.eps)) {
    print_kv("cost_ges", cost_ges(moments, a.C, a.eps));
    print_kv("var_x_ges", var_x_ges(moments, a.C, a.eps));
    print_kv("bound_ges", ratio_bound_ges(moments, a.C, a.eps));
  }
  for (const std::string& w :
       threshold_warnings(std::isnan(a.C) ? kInf : a.C,
                          std::isnan(a.eps) ? kInf : a.eps))
    std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_solver = true) {
  cmd->add_option("--model", a.model_path, "arrival model file (key=value)");
  cmd->add_option("--trace", a.trace_path, "input CSV");
  cmd->add_option("--dt", a.dt, "step length")->check(CLI::PositiveNumber);
  cmd->add_option("--burn-in", a.burn_in, "discard samples before this time");
  cmd->add_option("--seed", a.seed, "base RNG seed");
  cmd->add_option("--C", a.C, "override every job's unmet-demand price");
  cmd->add_option("--eps", a.eps, "override every job's lateness price");
  cmd->add_option("--out", a.out, "output path");
  if (with_solver) {
    cmd->add_option("--tol", a.tol, "solver tolerance");
    cmd->add_option("--max-iters", a.max_iters, "solver iteration cap");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Deadline-scheduling workbench: simulate rate policies, solve "
      "minimum-variance schedules, and evaluate closed-form predictions"};
  app.require_subcommand(1);

  CommonArgs gen_args, sim_args, cmp_args, off_args, stab_args, ana_args;
  std::string sim_policy = "exact";
  double sim_mu = NAN;
  std::vector<std::string> cmp_policies;
  std::size_t cmp_seeds = 1;
  std::string cmp_ratio = "offline";
  std::size_t ana_samples = 200000;

  CLI::App* gen = app.add_subcommand("generate", "sample a job trace CSV");
  add_common(gen, gen_args, false);

  CLI::App* sim =
      app.add_subcommand("simulate", "run one policy, print a summary");
  add_common(sim, sim_args);
  sim->add_option("--policy", sim_policy, "policy spec, e.g. ges or espc:1.4");
  sim->add_option("--mu", sim_mu, "catch-up boost override");

  CLI::App* cmp = app.add_subcommand(
      "compare", "run many policies over seeded instances, write CSVs");
  add_common(cmp, cmp_args);
  cmp->add_option("--policies", cmp_policies,
                  "policy specs (repeat or space-separate)")
      ->required();
  cmp->add_option("--seeds", cmp_seeds, "number of seeded instances");
  cmp->add_option("--ratio-against", cmp_ratio, "ratio baseline policy");

  CLI::App* off = app.add_subcommand(
      "offline", "clairvoyant minimum-variance schedule for a trace");
  add_common(off, off_args);

  CLI::App* stab = app.add_subcommand(
      "maxstab", "peak-minimizing schedule for a fluid instance CSV");
  add_common(stab, stab_args, false);

  CLI::App* ana = app.add_subcommand(
      "analyze", "closed-form moments and bounds for a model or trace");
  add_common(ana, ana_args, false);
  ana->add_option("--samples", ana_samples, "Monte Carlo pool size");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(gen_args);
    if (sim->parsed()) return cmd_simulate(sim_args, sim_policy, sim_mu);
    if (cmp->parsed())
      return cmd_compare(cmp_args, cmp_policies, cmp_seeds, cmp_ratio);
    if (off->parsed()) return cmd_offline(off_args);
    if (stab->parsed()) return cmd_maxstab(stab_args);
    if (ana->parsed()) return cmd_analyze(ana_args, ana_samples);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
