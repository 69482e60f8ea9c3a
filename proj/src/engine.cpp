#include "varsched/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "varsched/errors.hpp"

namespace varsched {

namespace {

// What happens to a job that reaches its deadline unfinished.
enum class Departure {
  Strict,        // contract breach beyond the dt discretization slack
  DropChargeU,   // abandoned; remaining demand billed at cost_demand
  ExtendChargeW  // keeps running; lateness billed at cost_deadline
};

Departure departure_rule(const PolicyConfig& pc, const JobRequest& j) {
  switch (pc.kind) {
    case PolicyKind::Immediate:
    case PolicyKind::Delayed:
    case PolicyKind::Exact:
    case PolicyKind::EsPc:
    case PolicyKind::Offline:
    case PolicyKind::Mpc:
      return Departure::Strict;
    case PolicyKind::EqualService:
    case PolicyKind::Edf:
    case PolicyKind::Llf:
    case PolicyKind::FairSharing:
      switch (pc.mode) {
        case ServiceMode::Strict:
          return Departure::Strict;
        case ServiceMode::SoftDemand:
          return Departure::DropChargeU;
        case ServiceMode::SoftDeadline:
          return Departure::ExtendChargeW;
      }
      return Departure::Strict;
    case PolicyKind::Ges:
    case PolicyKind::GesUnknown: {
      // Cheaper to finish late than to drop: run past the deadline.
      const double half_c = 0.5 * j.cost_demand;
      const double root_eps = std::sqrt(j.cost_deadline);
      if (root_eps < half_c) return Departure::ExtendChargeW;
      return j.cost_demand == kInf ? Departure::Strict
                                   : Departure::DropChargeU;
    }
  }
  return Departure::Strict;
}

// Lowest positive rate a job can be served at past its deadline; bounds the
// extension the engine must be prepared to simulate.
double fallback_rate(const PolicyConfig& pc, const JobRequest& j) {
  double r = 1.0;
  switch (pc.kind) {
    case PolicyKind::Ges:
    case PolicyKind::GesUnknown:
      r = std::sqrt(j.cost_deadline);
      break;
    case PolicyKind::EqualService:
      r = pc.c;
      break;
    case PolicyKind::Edf:
    case PolicyKind::Llf:
    case PolicyKind::FairSharing:
      r = std::min(pc.capacity, 1.0);
      break;
    default:
      break;
  }
  return std::clamp(r, 1e-9, 1.0);
}

struct Core {
  const JobSet& jobs;
  PolicyConfig pc;  // defaults filled; kind may be ignored by a provider
  double dt;
  SimOptions opts;

  CapacityTrace trace;
  std::vector<JobState> states;
  std::vector<Departure> rules;
  std::vector<std::size_t> active;
  std::vector<double> rates;
  std::size_t next_arrival = 0;
  double U_cum = 0.0, W_cum = 0.0, sum_P = 0.0;

  Core(const JobSet& jobs_, const PolicyConfig& pc_, double dt_,
       const SimOptions& opts_)
      : jobs(jobs_), pc(pc_.with_defaults()), dt(dt_), opts(opts_) {}

  // Basic sanity only: jobs with demand > sojourn are legitimate inputs for
  // soft-demand policies (they surface as strict violations under policies
  // that promise completion).
  void check_inputs() const {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (!std::is_sorted(jobs.jobs.begin(), jobs.jobs.end(),
                        [](const JobRequest& a, const JobRequest& b) {
                          return a.arrival < b.arrival;
                        }))
      throw ValidationError("simulate: jobs must be sorted by arrival");
    for (std::size_t i = 0; i < jobs.jobs.size(); ++i) {
      const JobRequest& j = jobs.jobs[i];
      if (!(j.arrival >= 0.0) || !(j.demand >= 0.0) || !(j.sojourn >= 0.0) ||
          std::isnan(j.cost_demand) || j.cost_demand <= 0.0 ||
          std::isnan(j.cost_deadline) || j.cost_deadline <= 0.0)
        throw ValidationError("simulate: job " + std::to_string(i) +
                              " has a negative or NaN field");
    }
  }

  template <typename RateFn>
  CapacityTrace run(RateFn&& rate_fn) {
    check_inputs();
    const std::size_t n = jobs.jobs.size();
    states.resize(n);
    rules.resize(n);
    rates.assign(n, 0.0);
    trace.dt = dt;
    trace.outcomes.resize(n);

    double extension_bound = 0.0;
    double last_deadline = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const JobRequest& j = jobs.jobs[i];
      JobState& s = states[i];
      s.request = j;
      s.index = i;
      s.activation = std::ceil(j.arrival / dt - 1e-12) * dt;
      s.deadline = s.activation + j.sojourn;
      s.remaining_demand = j.demand;
      s.remaining_time = j.sojourn;
      last_deadline = std::max(last_deadline, s.deadline);
      rules[i] = departure_rule(pc, j);
      if (rules[i] == Departure::ExtendChargeW)
        extension_bound += j.demand / fallback_rate(pc, j);
    }
    if (!std::isnan(opts.max_extension)) extension_bound = opts.max_extension;

    const std::size_t horizon_steps =
        static_cast<std::size_t>(std::ceil(jobs.horizon / dt - 1e-9));
    const std::size_t cap_steps =
        std::max(horizon_steps,
                 static_cast<std::size_t>(std::ceil(last_deadline / dt))) +
        static_cast<std::size_t>(
            std::ceil(std::min(extension_bound * 1.05 / dt + 10.0, 1e8)));
    trace.samples.reserve(std::min<std::size_t>(horizon_steps, 1u << 24));

    StepView view;
    view.active = &active;
    view.states = &states;

    for (std::size_t step = 0;; ++step) {
      const double t = step * dt;
      while (next_arrival < n &&
             states[next_arrival].activation <= t + 1e-9 * dt)
        active.push_back(next_arrival++);
      if (step >= horizon_steps && active.empty() && next_arrival == n) break;
      if (step >= cap_steps) {
        for (std::size_t idx : active) {
          trace.outcomes[idx].served = states[idx].served;
          trace.outcomes[idx].unmet = states[idx].remaining_demand;
          ++trace.overflow_jobs;
        }
        active.clear();
        break;
      }

      double X = 0.0;
      for (std::size_t idx : active) {
        states[idx].remaining_time = states[idx].deadline - t;
        X += states[idx].remaining_demand;
      }

      view.t = t;
      view.step = step;
      rate_fn(view, rates);

      double served_step = 0.0;
      std::size_t keep = 0;
      for (std::size_t pos = 0; pos < active.size(); ++pos) {
        const std::size_t idx = active[pos];
        JobState& s = states[idx];
        const Departure rule = rules[idx];
        const double r = clamp01(rates[idx]);

        double cap_time = dt;
        if (rule != Departure::ExtendChargeW && s.deadline < t + dt)
          cap_time = std::max(0.0, s.deadline - t);
        double serve = std::min(r * cap_time, s.remaining_demand);
        // absorb accumulation residue so jobs complete instead of lingering
        // with ~1e-18 demand into the deadline sweep
        if (r > 0.0 &&
            s.remaining_demand - serve <=
                1e-12 * std::max(1.0, s.request.demand))
          serve = s.remaining_demand;
        s.remaining_demand -= serve;
        s.served += serve;
        served_step += serve;

        if (s.remaining_demand <= 0.0) {
          JobOutcome& o = trace.outcomes[idx];
          o.served = s.served;
          o.completion = serve > 0.0 ? t + serve / r : t;
          o.tau_hat = o.completion - s.activation;
          if (o.completion > s.deadline + 1e-9 * dt) {
            o.extension = o.tau_hat - s.request.sojourn;
            trace.total_extension += o.extension;
            W_cum += s.request.cost_deadline * o.extension;
          }
          continue;  // departs completed
        }
        if (rule != Departure::ExtendChargeW &&
            s.deadline <= t + dt * (1.0 + 1e-9)) {
          const double y_rem = s.remaining_demand;
          JobOutcome& o = trace.outcomes[idx];
          o.served = s.served;
          o.unmet = y_rem;
          if (rule == Departure::Strict) {
            if (y_rem > dt * (1.0 + 1e-6) + 1e-12) {
              std::ostringstream msg;
              msg << "strict-violation: job " << idx << " (arrival "
                  << s.request.arrival << ") reached its deadline with "
                  << y_rem << " demand remaining under policy "
                  << policy_to_string(pc);
              throw ValidationError(msg.str());
            }
            trace.strict_shortfall += y_rem;
          } else {
            trace.total_unmet += y_rem;
            U_cum += s.request.cost_demand * y_rem;
          }
          continue;  // departs at the deadline
        }
        active[keep++] = idx;
      }
      active.resize(keep);

      const double P = served_step / dt;
      trace.samples.push_back({t, P, X, U_cum, W_cum});
      trace.total_served += served_step;
      sum_P += P;
    }
    return std::move(trace);
  }
};

}  // namespace

CapacityTrace simulate(const JobSet& jobs, const PolicyConfig& policy,
                       double dt, const SimOptions& opts) {
  if (policy.kind == PolicyKind::Offline || policy.kind == PolicyKind::Mpc)
    throw std::invalid_argument(
        "simulate: offline/mpc schedules come from the quadratic-program "
        "module (solve_offline / simulate_mpc)");

  Core core(jobs, policy, dt, opts);
  const PolicyConfig pc = core.pc;

  switch (pc.kind) {
    case PolicyKind::Edf:
    case PolicyKind::Llf:
    case PolicyKind::FairSharing: {
      const PriorityOrder order = pc.kind == PolicyKind::Llf
                                      ? PriorityOrder::Laxity
                                      : PriorityOrder::Deadline;
      std::vector<JobState> snapshot;
      return core.run([&, order](const StepView& v, std::vector<double>& out) {
        snapshot.clear();
        for (std::size_t idx : *v.active) snapshot.push_back((*v.states)[idx]);
        std::vector<double> got =
            pc.kind == PolicyKind::FairSharing
                ? assign_fair(snapshot, pc.capacity, pc.mode)
                : assign_priority(snapshot, pc.capacity, order, pc.mode);
        for (std::size_t j = 0; j < v.active->size(); ++j)
          out[(*v.active)[j]] = got[j];
      });
    }
    case PolicyKind::EsPc: {
      return core.run([&](const StepView& v, std::vector<double>& out) {
        const auto& samples = core.trace.samples;
        const double p_bar = !std::isnan(pc.p_bar)
                                 ? pc.p_bar
                                 : (v.step > 0 ? core.sum_P / double(v.step)
                                               : 0.0);
        const double p_prev = samples.empty() ? p_bar : samples.back().P;
        for (std::size_t idx : *v.active) {
          const JobState& s = (*v.states)[idx];
          out[idx] = rate_es_pc(s.remaining_demand, s.remaining_time, pc.mu,
                                p_prev, p_bar);
        }
      });
    }
    default: {
      return core.run([&](const StepView& v, std::vector<double>& out) {
        for (std::size_t idx : *v.active) {
          const JobState& s = (*v.states)[idx];
          const double y = s.remaining_demand;
          const double x = s.remaining_time;
          const JobRequest& j = s.request;
          switch (pc.kind) {
            case PolicyKind::Exact:
              out[idx] = rate_exact(y, x);
              break;
            case PolicyKind::Immediate:
              out[idx] = rate_immediate(y);
              break;
            case PolicyKind::Delayed:
              out[idx] = rate_delayed(y, x);
              break;
            case PolicyKind::Ges:
              out[idx] = rate_ges(y, x, j.cost_demand, j.cost_deadline);
              break;
            case PolicyKind::EqualService:
              out[idx] = rate_equal_service(pc.mode, pc.c, y, x);
              break;
            case PolicyKind::GesUnknown:
              out[idx] = rate_ges_unknown(j.known, pc.c, y, x, j.cost_demand,
                                          j.cost_deadline);
              break;
            default:
              out[idx] = 0.0;
              break;
          }
        }
      });
    }
  }
}

CapacityTrace simulate_es_pc(const JobSet& jobs, double mu, double p_bar,
                             double dt, const SimOptions& opts) {
  PolicyConfig pc;
  pc.kind = PolicyKind::EsPc;
  pc.mu = mu;
  pc.p_bar = p_bar;
  return simulate(jobs, pc, dt, opts);
}

CapacityTrace simulate_with_provider(const JobSet& jobs,
                                     const RateProvider& provider, double dt,
                                     const SimOptions& opts) {
  PolicyConfig pc;
  pc.kind = PolicyKind::Mpc;  // strict departures
  Core core(jobs, pc, dt, opts);
  return core.run(
      [&](const StepView& v, std::vector<double>& out) { provider(v, out); });
}

double Metrics::objective(double alpha, double beta,
                          double penalty_scale) const {
  return alpha * mean_P * mean_P + beta * var_P +
         penalty_scale * (mean_U_rate + mean_W_rate);
}

Metrics summarize_window(const CapacityTrace& trace, double burn_in,
                         double t_end) {
  Metrics m;
  m.total_unmet = trace.total_unmet;
  m.total_extension = trace.total_extension;
  m.overflow_jobs = trace.overflow_jobs;
  m.strict_shortfall = trace.strict_shortfall;

  const auto& s = trace.samples;
  std::size_t first = 0;
  while (first < s.size() && s[first].t < burn_in - 1e-12) ++first;
  std::size_t last = s.size();
  while (last > first && s[last - 1].t >= t_end - 1e-12) --last;
  const std::size_t n = last - first;
  m.samples = n;
  if (n == 0) return m;
  m.window = double(n) * trace.dt;

  double mean_P = 0.0, mean_X = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    mean_P += s[i].P;
    mean_X += s[i].X;
  }
  mean_P /= double(n);
  mean_X /= double(n);
  double var_P = 0.0, var_X = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    var_P += (s[i].P - mean_P) * (s[i].P - mean_P);
    var_X += (s[i].X - mean_X) * (s[i].X - mean_X);
  }
  m.mean_P = mean_P;
  m.var_P = var_P / double(n);
  m.var_X = var_X / double(n);

  const double U0 = first > 0 ? s[first - 1].U_cum : 0.0;
  const double W0 = first > 0 ? s[first - 1].W_cum : 0.0;
  m.mean_U_rate = (s[last - 1].U_cum - U0) / m.window;
  m.mean_W_rate = (s[last - 1].W_cum - W0) / m.window;
  return m;
}

Metrics summarize(const CapacityTrace& trace, double burn_in) {
  return summarize_window(trace, burn_in, kInf);
}

double empirical_ratio(double cost, double baseline_cost) {
  if (!(baseline_cost > 0.0) || !std::isfinite(baseline_cost))
    throw std::invalid_argument(
        "empirical_ratio: baseline cost must be positive and finite");
  return cost / baseline_cost;
}

void save_capacity_trace(const CapacityTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace file: " + path);
  out << "t,P,X,U_cum,W_cum\n";
  out.precision(12);
  for (const auto& s : trace.samples)
    out << s.t << "," << s.P << "," << s.X << "," << s.U_cum << ","
        << s.W_cum << "\n";
}

void write_summary(std::ostream& out, const Metrics& m) {
  out.precision(17);
  out << "mean_P=" << m.mean_P << "\n"
      << "var_P=" << m.var_P << "\n"
      << "var_X=" << m.var_X << "\n"
      << "mean_U_rate=" << m.mean_U_rate << "\n"
      << "mean_W_rate=" << m.mean_W_rate << "\n"
      << "cost=" << m.cost() << "\n"
      << "total_unmet=" << m.total_unmet << "\n"
      << "total_extension=" << m.total_extension << "\n"
      << "strict_shortfall=" << m.strict_shortfall << "\n"
      << "overflow_jobs=" << m.overflow_jobs << "\n"
      << "samples=" << m.samples << "\n"
      << "window=" << m.window << "\n";
}

}  // namespace varsched
