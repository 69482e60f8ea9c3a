#include "varsched/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "varsched/errors.hpp"

namespace varsched {

namespace {

constexpr double kTiny = 1e-12;

// Internal problem: per-job service *amounts* x over grid cells, capped by
// the in-window time of each cell, summing to the demand. The objective is
// the sum of squared per-cell totals (time integral of capacity^2 up to the
// constant factor dt).
struct Windows {
  std::size_t cells = 0;
  std::vector<std::size_t> first;
  std::vector<std::vector<double>> cap;  // time units, <= dt
  std::vector<double> demand;
};

// lo/hi are the service window in absolute time; t0 is the time of cell 0.
Windows build_windows(const std::vector<double>& lo,
                      const std::vector<double>& hi,
                      const std::vector<double>& demand, double dt, double t0,
                      double slack) {
  Windows w;
  w.demand = demand;
  const std::size_t n = demand.size();
  w.first.resize(n);
  w.cap.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::max(lo[k], t0);
    const double b = hi[k];
    const auto first =
        static_cast<std::size_t>(std::max(0.0, std::ceil((a - t0) / dt - 1e-9)));
    w.first[k] = first;
    double avail = 0.0;
    for (std::size_t j = first;; ++j) {
      const double cs = t0 + static_cast<double>(j) * dt;
      if (cs >= b - kTiny) break;
      const double len = std::min(b, cs + dt) - cs;
      if (len <= kTiny) break;
      w.cap[k].push_back(std::min(len, dt));
      avail += std::min(len, dt);
    }
    if (avail + slack * std::max(1.0, demand[k]) < demand[k]) {
      std::ostringstream msg;
      msg << "job " << k << ": window [" << a << ", " << b << ") holds only "
          << avail << " service time on the dt=" << dt << " grid but needs "
          << demand[k];
      throw SolverError(msg.str());
    }
    w.cells = std::max(w.cells, first + w.cap[k].size());
  }
  return w;
}

}  // namespace

// Projection of g onto {0 <= x <= cap, sum x = demand} by bisection on the
// shift nu in x_i = clamp(g_i - nu, 0, cap_i).
void detail::project_box_simplex(const std::vector<double>& cap, double demand,
                                 const double* g, double* out) {
  const std::size_t n = cap.size();
  if (n == 0) return;
  if (demand <= 0.0) {
    std::fill(out, out + n, 0.0);
    return;
  }
  double total = 0.0, gmin = g[0], gmax = g[0], cmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += cap[i];
    gmin = std::min(gmin, g[i]);
    gmax = std::max(gmax, g[i]);
    cmax = std::max(cmax, cap[i]);
  }
  if (demand >= total - kTiny * std::max(1.0, demand)) {
    std::copy(cap.begin(), cap.end(), out);
    return;
  }
  double nu_lo = gmin - cmax - 1.0, nu_hi = gmax;
  for (int it = 0; it < 80; ++it) {
    const double nu = 0.5 * (nu_lo + nu_hi);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += std::clamp(g[i] - nu, 0.0, cap[i]);
    (s > demand ? nu_lo : nu_hi) = nu;
  }
  const double nu = 0.5 * (nu_lo + nu_hi);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(g[i] - nu, 0.0, cap[i]);
    s += out[i];
  }
  // absorb the bisection residue so the equality holds exactly
  double diff = demand - s;
  for (std::size_t i = 0; i < n && std::abs(diff) > 0.0; ++i) {
    const double next = std::clamp(out[i] + diff, 0.0, cap[i]);
    diff -= next - out[i];
    out[i] = next;
  }
}

namespace {

using detail::project_box_simplex;

struct Solver {
  const Windows& w;
  double dt;
  bool parallel;
  std::vector<std::vector<double>> x;
  std::vector<double> S;  // per-cell totals
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> cell_rows;
  double alpha_safe = 0.5;

  Solver(const Windows& win, double step, bool par)
      : w(win), dt(step), parallel(par) {
    const std::size_t n = w.demand.size();
    x.resize(n);
    for (std::size_t k = 0; k < n; ++k) x[k].assign(w.cap[k].size(), 0.0);
    S.assign(w.cells, 0.0);
    cell_rows.resize(w.cells);
    std::size_t max_m = 1;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < w.cap[k].size(); ++j)
        cell_rows[w.first[k] + j].push_back(
            {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(j)});
    for (const auto& c : cell_rows) max_m = std::max(max_m, c.size());
    alpha_safe = 1.0 / (2.0 * static_cast<double>(max_m));
  }

  // Deterministic for any thread count: each cell total is accumulated
  // serially in job order; cells are independent.
  void recompute_sums(const std::vector<std::vector<double>>& v,
                      std::vector<double>& sums) const {
#ifndef _OPENMP
    (void)parallel;
#else
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(w.cells); ++c) {
      double s = 0.0;
      for (const auto& [k, j] : cell_rows[static_cast<std::size_t>(c)])
        s += v[k][j];
      sums[static_cast<std::size_t>(c)] = s;
    }
  }

  static double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return s;
  }

  // Largest profitable transfer between two cells of one job, in the units
  // of the time-objective gradient 2 * capacity.
  double kkt(const std::vector<double>& sums) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const std::size_t n = x[k].size();
      if (n == 0 || w.demand[k] <= 0.0) continue;
      const double eps = 1e-10 * std::max(1.0, w.demand[k]);
      double qmax = -kInf, qmin = kInf;
      for (std::size_t j = 0; j < n; ++j) {
        const double q = 2.0 * sums[w.first[k] + j] / dt;
        if (x[k][j] > eps) qmax = std::max(qmax, q);
        if (x[k][j] < w.cap[k][j] - eps) qmin = std::min(qmin, q);
      }
      if (qmax > -kInf && qmin < kInf) worst = std::max(worst, qmax - qmin);
    }
    return std::max(0.0, worst);
  }

  void seed_even_spread() {
    for (std::size_t k = 0; k < x.size(); ++k) {
      double total = 0.0;
      for (double c : w.cap[k]) total += c;
      if (total <= 0.0) continue;
      const double frac = std::min(1.0, w.demand[k] / total);
      for (std::size_t j = 0; j < x[k].size(); ++j)
        x[k][j] = frac * w.cap[k][j];
    }
    repair_rows();
  }

  void seed_from(const std::vector<std::vector<double>>& guess) {
    for (std::size_t k = 0; k < x.size() && k < guess.size(); ++k)
      for (std::size_t j = 0; j < x[k].size() && j < guess[k].size(); ++j)
        x[k][j] = std::clamp(guess[k][j], 0.0, w.cap[k][j]);
    repair_rows();
  }

  // Projects every row onto its exact constraint set (identity gradient).
  void repair_rows() {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t k = 0; k < n; ++k)
      project_box_simplex(w.cap[k], w.demand[k], x[k].data(), x[k].data());
  }

  void run(double tol, std::size_t max_iters, QpReport& rep,
           bool want_history) {
    recompute_sums(x, S);
    double G = sum_sq(S);
    if (want_history) rep.objective_history.push_back(G / dt);

    std::vector<std::vector<double>> xn = x;
    std::vector<double> Sn(S.size());
    double alpha_prev = alpha_safe;
    double dx_norm2 = 0.0, ds_norm2 = 0.0;
    rep.converged = false;
    std::size_t iter = 0;
    int stall = 0;  // consecutive iterations with negligible decrease
    for (; iter < max_iters; ++iter) {
      const double res = kkt(S);
      if (res < tol) {
        rep.converged = true;
        break;
      }
      // spectral (Barzilai-Borwein) step, floored at the safe Lipschitz step
      double alpha = alpha_prev;
      if (iter > 0 && ds_norm2 > 0.0)
        alpha = std::clamp(dx_norm2 / (2.0 * ds_norm2), alpha_safe,
                           1e7 * alpha_safe);
      double Gn = G;
      bool accepted = false;
      for (;;) {
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
        for (std::ptrdiff_t k = 0; k < n; ++k) {
          const std::size_t nk = x[k].size();
          std::vector<double> g(nk);
          for (std::size_t j = 0; j < nk; ++j)
            g[j] = x[k][j] - alpha * 2.0 * S[w.first[k] + j];
          project_box_simplex(w.cap[k], w.demand[k], g.data(), xn[k].data());
        }
        recompute_sums(xn, Sn);
        Gn = sum_sq(Sn);
        if (Gn <= G + kTiny * (1.0 + G)) {
          accepted = Gn < G;
          break;
        }
        if (alpha <= alpha_safe * (1.0 + 1e-9)) break;  // cannot improve
        alpha = std::max(alpha_safe, 0.25 * alpha);
      }
      if (Gn > G + kTiny * (1.0 + G)) {
        // numerically stalled at the guaranteed-descent step
        rep.converged = true;
        break;
      }
      dx_norm2 = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t j = 0; j < x[k].size(); ++j) {
          const double d = xn[k][j] - x[k][j];
          dx_norm2 += d * d;
        }
      ds_norm2 = 0.0;
      for (std::size_t c = 0; c < S.size(); ++c) {
        const double d = Sn[c] - S[c];
        ds_norm2 += d * d;
      }
      std::swap(x, xn);
      std::swap(S, Sn);
      const double drop = G - Gn;
      G = Gn;
      alpha_prev = alpha;
      if (want_history) rep.objective_history.push_back(G / dt);
      // spectral steps make uneven progress; only a sustained stall counts
      // as convergence by the decrease criterion
      stall = (!accepted || drop < tol * std::max(1.0, G)) ? stall + 1 : 0;
      if (stall >= 30) {
        rep.converged = true;
        ++iter;
        break;
      }
    }
    rep.iterations = iter;
    rep.objective = G / dt;
    rep.kkt = kkt(S);
    if (rep.kkt < tol) rep.converged = true;
  }
};

RateMatrix to_matrix(const Windows& w, const Solver& s, double dt,
                     std::size_t min_steps) {
  RateMatrix m;
  m.dt = dt;
  m.steps = std::max(w.cells, min_steps);
  m.first_step = w.first;
  m.rates.resize(s.x.size());
  m.caps.resize(s.x.size());
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    m.rates[k].resize(s.x[k].size());
    m.caps[k].resize(s.x[k].size());
    for (std::size_t j = 0; j < s.x[k].size(); ++j) {
      m.rates[k][j] = s.x[k][j] / dt;
      m.caps[k][j] = w.cap[k][j] / dt;
    }
  }
  return m;
}

void require_feasible(const JobSet& jobs) {
  auto violations = validate_jobset(jobs);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "infeasible job set:";
  for (const auto& v : violations) msg << "\n  " << violation_to_string(v);
  throw ValidationError(msg.str());
}

double snap_up(double t, double dt) {
  return std::ceil(t / dt - 1e-12) * dt;
}

}  // namespace

std::vector<double> RateMatrix::capacity() const {
  std::vector<double> P(steps, 0.0);
  for (std::size_t k = 0; k < rates.size(); ++k)
    for (std::size_t j = 0; j < rates[k].size(); ++j)
      P[first_step[k] + j] += rates[k][j];
  return P;
}

double RateMatrix::objective() const {
  double s = 0.0;
  for (double p : capacity()) s += p * p;
  return s * dt;
}

RateMatrix solve_offline(const JobSet& jobs, double dt, double tol,
                         std::size_t max_iters, QpReport* report,
                         bool parallel) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_offline: dt must be > 0");
  require_feasible(jobs);
  const std::size_t n = jobs.jobs.size();
  std::vector<double> lo(n), hi(n), demand(n);
  double t_end = jobs.horizon;
  for (std::size_t k = 0; k < n; ++k) {
    lo[k] = snap_up(jobs.jobs[k].arrival, dt);
    hi[k] = lo[k] + jobs.jobs[k].sojourn;
    demand[k] = jobs.jobs[k].demand;
    t_end = std::max(t_end, hi[k]);
  }
  Windows w = build_windows(lo, hi, demand, dt, 0.0, 1e-9);
  Solver s(w, dt, parallel);
  s.seed_even_spread();
  QpReport local;
  QpReport& rep = report ? *report : local;
  rep = QpReport{};
  s.run(tol, max_iters, rep, report != nullptr);
  const auto min_steps =
      static_cast<std::size_t>(std::max(0.0, std::ceil(t_end / dt - 1e-9)));
  return to_matrix(w, s, dt, min_steps);
}

CapacityTrace simulate_mpc(const JobSet& jobs, double dt, double tol,
                           std::size_t max_iters) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_mpc: dt must be > 0");
  require_feasible(jobs);
  const std::size_t n = jobs.jobs.size();
  // warm-start memory: last solution per job with the step it started at
  std::vector<std::vector<double>> prev_x(n);
  std::vector<std::size_t> prev_base(n, 0);

  RateProvider provider = [&](const StepView& view,
                              std::vector<double>& rates) {
    const auto& active = *view.active;
    const auto& states = *view.states;
    if (active.empty()) return;
    const double t0 = view.t;
    std::vector<double> lo(active.size()), hi(active.size()),
        demand(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const JobState& st = states[active[a]];
      lo[a] = t0;
      hi[a] = st.deadline;
      demand[a] = st.remaining_demand;
    }
    Windows w = build_windows(lo, hi, demand, dt, t0, 1e-7);
    Solver s(w, dt, false);
    s.seed_even_spread();
    // overlay the tail of the previous solution as the warm start
    std::vector<std::vector<double>> guess(active.size());
    bool any = false;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t idx = active[a];
      if (prev_x[idx].empty()) continue;
      const std::size_t shift = view.step - prev_base[idx];
      if (shift < prev_x[idx].size()) {
        guess[a].assign(prev_x[idx].begin() + static_cast<std::ptrdiff_t>(shift),
                        prev_x[idx].end());
        any = true;
      }
    }
    if (any) s.seed_from(guess);
    QpReport rep;
    s.run(tol, max_iters, rep, false);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t idx = active[a];
      if (s.x[a].empty()) {
        rates[idx] = 0.0;
        continue;
      }
      rates[idx] = s.x[a][0] / w.cap[a][0];
      prev_x[idx] = s.x[a];
      prev_base[idx] = view.step;
    }
  };
  return simulate_with_provider(jobs, provider, dt);
}

CapacityTrace trace_from_rates(const JobSet& jobs, const RateMatrix& m) {
  if (jobs.jobs.size() != m.rates.size())
    throw std::invalid_argument(
        "trace_from_rates: schedule and job set sizes differ");
  CapacityTrace tr;
  tr.dt = m.dt;
  tr.outcomes.resize(jobs.jobs.size());
  std::vector<double> P = m.capacity();
  std::vector<double> X(m.steps, 0.0);
  for (std::size_t k = 0; k < jobs.jobs.size(); ++k) {
    const double act = snap_up(jobs.jobs[k].arrival, m.dt);
    const double dl = act + jobs.jobs[k].sojourn;
    double y = jobs.jobs[k].demand;
    JobOutcome& o = tr.outcomes[k];
    for (std::size_t j = 0; j < m.rates[k].size(); ++j) {
      const std::size_t cell = m.first_step[k] + j;
      if (y > kTiny) X[cell] += y;
      const double amount = m.rates[k][j] * m.dt;
      y -= amount;
      o.served += amount;
      if (amount > kTiny)
        o.completion =
            std::min(dl, static_cast<double>(cell + 1) * m.dt);
    }
    if (!(o.completion == o.completion) && jobs.jobs[k].demand <= kTiny)
      o.completion = act;
    o.tau_hat = o.completion - act;
    o.unmet = std::max(0.0, y);
    tr.total_served += o.served;
    tr.total_unmet += o.unmet;
  }
  tr.samples.resize(m.steps);
  for (std::size_t i = 0; i < m.steps; ++i)
    tr.samples[i] = {static_cast<double>(i) * m.dt, P[i], X[i], 0.0, 0.0};
  return tr;
}

ValleyReport check_valley_filling(const RateMatrix& m, double dt, double tol) {
  (void)dt;
  ValleyReport rep;
  const std::vector<double> P = m.capacity();
  const double r_eps = 1e-9;
  for (std::size_t k = 0; k < m.rates.size(); ++k) {
    double level_lo = kInf, level_hi = -kInf, served_hi = -kInf;
    for (std::size_t j = 0; j < m.rates[k].size(); ++j) {
      const double r = m.rates[k][j];
      const double cap = m.caps.empty() ? 1.0 : m.caps[k][j];
      const double p = P[m.first_step[k] + j];
      if (r > r_eps) served_hi = std::max(served_hi, p);
      if (r > r_eps && r < cap - r_eps) {
        level_lo = std::min(level_lo, p);
        level_hi = std::max(level_hi, p);
      }
    }
    if (level_hi - level_lo > tol) {
      std::ostringstream msg;
      msg << "job " << k << ": capacity varies by " << (level_hi - level_lo)
          << " across its interior-rate steps";
      rep.violations.push_back(msg.str());
    }
    if (served_hi > -kInf) {
      for (std::size_t j = 0; j < m.rates[k].size(); ++j) {
        if (m.rates[k][j] > r_eps) continue;
        const double p = P[m.first_step[k] + j];
        if (p < served_hi - tol) {
          std::ostringstream msg;
          msg << "job " << k << " step " << (m.first_step[k] + j)
              << ": capacity " << p << " sits below the job's served level "
              << served_hi;
          rep.violations.push_back(msg.str());
        }
      }
    }
  }
  rep.pass = rep.violations.empty();
  return rep;
}

double kkt_residual(const RateMatrix& m, double dt) {
  const std::vector<double> P = m.capacity();
  double worst = 0.0;
  for (std::size_t k = 0; k < m.rates.size(); ++k) {
    const std::size_t nk = m.rates[k].size();
    if (nk == 0) continue;
    double row = 0.0, qmax = -kInf, qmin = kInf;
    const double eps = 1e-10;
    for (std::size_t j = 0; j < nk; ++j) {
      const double r = m.rates[k][j];
      const double cap = m.caps.empty() ? 1.0 : m.caps[k][j];
      row += r * dt;
      const double q = 2.0 * P[m.first_step[k] + j];
      if (r > eps) qmax = std::max(qmax, q);
      if (r < cap - eps) qmin = std::min(qmin, q);
      // bound violations count directly
      worst = std::max({worst, -r, r - cap});
    }
    (void)row;
    if (qmax > -kInf && qmin < kInf) worst = std::max(worst, qmax - qmin);
  }
  return std::max(0.0, worst);
}

void save_rate_matrix(const RateMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schedule file: " + path);
  out.precision(17);
  out << "job_index,step_index,rate\n";
  for (std::size_t k = 0; k < m.rates.size(); ++k)
    for (std::size_t j = 0; j < m.rates[k].size(); ++j)
      out << k << "," << (m.first_step[k] + j) << "," << m.rates[k][j] << "\n";
}

}  // namespace varsched
