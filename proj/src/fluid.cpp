#include "varsched/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "varsched/config.hpp"
#include "varsched/errors.hpp"

namespace varsched {

namespace {

constexpr double kTiny = 1e-12;

struct CellSpan {
  std::size_t lo = 0, hi = 0;  // cell index range [lo, hi)
};

double grid_tol(const std::vector<double>& grid) {
  if (grid.empty()) return 1e-9;
  const double scale =
      std::max(std::abs(grid.front()), std::abs(grid.back()));
  return 1e-9 * std::max(1.0, scale);
}

// Cells covered by [a, a+tau); grid construction guarantees both endpoints
// are breakpoints, so the window is an exact union of cells.
CellSpan window_span(const std::vector<double>& grid, double a, double dl) {
  const double tol = grid_tol(grid);
  CellSpan s;
  const auto lo = std::lower_bound(grid.begin(), grid.end(), a - tol);
  const auto hi = std::lower_bound(grid.begin(), grid.end(), dl - tol);
  s.lo = static_cast<std::size_t>(lo - grid.begin());
  s.hi = static_cast<std::size_t>(hi - grid.begin());
  if (s.hi < s.lo) s.hi = s.lo;
  return s;
}

std::vector<double> cell_lengths(const std::vector<double>& grid) {
  std::vector<double> len;
  if (grid.size() < 2) return len;
  len.resize(grid.size() - 1);
  for (std::size_t c = 0; c + 1 < grid.size(); ++c)
    len[c] = grid[c + 1] - grid[c];
  return len;
}

std::string interval_str(double t1, double t2) {
  std::ostringstream os;
  os.precision(12);
  os << "[" << t1 << ", " << t2 << ")";
  return os.str();
}

void check_instance(const FluidInstance& inst) {
  for (std::size_t k = 0; k < inst.classes.size(); ++k) {
    const FluidClass& fc = inst.classes[k];
    if (!std::isfinite(fc.arrival) || !std::isfinite(fc.demand) ||
        !std::isfinite(fc.sojourn) || !std::isfinite(fc.mass))
      throw ValidationError("class " + std::to_string(k) +
                            ": non-finite field");
    if (fc.demand < 0.0 || fc.sojourn < 0.0 || fc.mass < 0.0)
      throw ValidationError("class " + std::to_string(k) +
                            ": negative demand, sojourn or mass");
    if (fc.demand > fc.sojourn * (1.0 + 1e-12) + kTiny)
      throw ValidationError(
          "class " + std::to_string(k) + ": demand " +
          std::to_string(fc.demand) + " does not fit a window of length " +
          std::to_string(fc.sojourn) + " under the unit rate cap");
  }
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

}  // namespace

FluidInstance make_fluid_instance(std::vector<FluidClass> classes,
                                  const std::vector<double>& refinements) {
  FluidInstance inst;
  inst.classes = std::move(classes);
  check_instance(inst);
  if (inst.classes.empty()) return inst;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> pts;
  for (const FluidClass& fc : inst.classes) {
    pts.push_back(fc.arrival);
    pts.push_back(fc.arrival + fc.sojourn);
    lo = std::min(lo, fc.arrival);
    hi = std::max(hi, fc.arrival + fc.sojourn);
  }
  for (double r : refinements)
    if (r >= lo && r <= hi) pts.push_back(r);  // ignore points off the hull
  std::sort(pts.begin(), pts.end());
  const double tol = 1e-12 * std::max(1.0, std::abs(hi) + std::abs(lo));
  for (double p : pts)
    if (inst.grid.empty() || p - inst.grid.back() > tol)
      inst.grid.push_back(p);
  return inst;
}

std::vector<double> mean_capacity(const FluidInstance& inst,
                                  const ClassRateProfiles& prof) {
  const std::size_t cells = prof.grid.size() < 2 ? 0 : prof.grid.size() - 1;
  std::vector<double> cap(cells, 0.0);
  for (std::size_t k = 0; k < inst.classes.size(); ++k)
    for (std::size_t c = 0; c < cells; ++c)
      cap[c] += inst.classes[k].mass * prof.rates[k][c];
  return cap;
}

ClassRateProfiles flat_profiles(const FluidInstance& inst) {
  ClassRateProfiles prof;
  prof.grid = inst.grid;
  const std::size_t cells = inst.grid.size() < 2 ? 0 : inst.grid.size() - 1;
  prof.rates.assign(inst.classes.size(), std::vector<double>(cells, 0.0));
  for (std::size_t k = 0; k < inst.classes.size(); ++k) {
    const FluidClass& fc = inst.classes[k];
    if (fc.sojourn <= 0.0) continue;
    const CellSpan s =
        window_span(inst.grid, fc.arrival, fc.arrival + fc.sojourn);
    for (std::size_t c = s.lo; c < s.hi; ++c)
      prof.rates[k][c] = fc.demand / fc.sojourn;
  }
  return prof;
}

double intensity(const FluidInstance& inst, double t1, double t2) {
  if (!(t2 > t1))
    throw std::invalid_argument("intensity: interval end must exceed start");
  const double tol = grid_tol(inst.grid);
  double work = 0.0;
  for (const FluidClass& fc : inst.classes)
    if (fc.arrival >= t1 - tol && fc.arrival + fc.sojourn <= t2 + tol)
      work += fc.mass * fc.demand;
  return work / (t2 - t1);
}

IntensityInterval max_intensity_interval(const FluidInstance& inst) {
  double total = 0.0;
  for (const FluidClass& fc : inst.classes) total += fc.mass * fc.demand;
  if (inst.grid.size() < 2 || total <= 0.0)
    throw ValidationError(
        "max_intensity_interval: instance carries no work");
  IntensityInterval best;
  bool have = false;
  for (std::size_t i = 0; i + 1 < inst.grid.size(); ++i)
    for (std::size_t j = i + 1; j < inst.grid.size(); ++j) {
      const double val = intensity(inst, inst.grid[i], inst.grid[j]);
      // keep the first maximizer in (earlier t1, shorter interval) order
      if (!have || val > best.value + 1e-9 * std::max(1.0, best.value)) {
        best = {inst.grid[i], inst.grid[j], val};
        have = true;
      }
    }
  return best;
}

MaxstabResult run_maxstab(const FluidInstance& inst, double tol) {
  check_instance(inst);
  MaxstabResult res;
  res.profiles.grid = inst.grid;
  const std::size_t cells = inst.grid.size() < 2 ? 0 : inst.grid.size() - 1;
  res.profiles.rates.assign(inst.classes.size(),
                            std::vector<double>(cells, 0.0));

  const std::vector<double> len = cell_lengths(inst.grid);
  std::vector<CellSpan> span(inst.classes.size());
  std::vector<char> pending(inst.classes.size(), 0);
  std::size_t left = 0;
  for (std::size_t k = 0; k < inst.classes.size(); ++k) {
    const FluidClass& fc = inst.classes[k];
    span[k] = window_span(inst.grid, fc.arrival, fc.arrival + fc.sojourn);
    if (fc.mass * fc.demand > 0.0) {
      pending[k] = 1;
      ++left;
    }
  }
  std::vector<char> consumed(cells, 0);

  while (left > 0) {
    // available = window cells not consumed by earlier rounds
    std::vector<std::size_t> avail_lo(inst.classes.size(), cells);
    std::vector<std::size_t> avail_hi(inst.classes.size(), 0);
    for (std::size_t k = 0; k < inst.classes.size(); ++k) {
      if (!pending[k]) continue;
      for (std::size_t c = span[k].lo; c < span[k].hi; ++c)
        if (!consumed[c]) {
          avail_lo[k] = std::min(avail_lo[k], c);
          avail_hi[k] = std::max(avail_hi[k], c + 1);
        }
      if (avail_hi[k] <= avail_lo[k])
        throw SolverError("class " + std::to_string(k) + ": window " +
                          interval_str(inst.classes[k].arrival,
                                       inst.classes[k].arrival +
                                           inst.classes[k].sojourn) +
                          " was fully consumed by earlier rounds");
    }

    // densest breakpoint interval, measured against still-free cells; a
    // class counts when every free cell it has left lies inside
    double best_val = -1.0;
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i + 1 < inst.grid.size(); ++i)
      for (std::size_t j = i + 1; j < inst.grid.size(); ++j) {
        double free_len = 0.0;
        for (std::size_t c = i; c < j; ++c)
          if (!consumed[c]) free_len += len[c];
        if (free_len <= 0.0) continue;
        double work = 0.0;
        for (std::size_t k = 0; k < inst.classes.size(); ++k)
          if (pending[k] && avail_lo[k] >= i && avail_hi[k] <= j)
            work += inst.classes[k].mass * inst.classes[k].demand;
        if (work <= 0.0) continue;
        const double val = work / free_len;
        if (best_val < 0.0 ||
            val > best_val + 1e-9 * std::max(1.0, best_val)) {
          best_val = val;
          best_i = i;
          best_j = j;
        }
      }
    if (best_val < 0.0)
      throw SolverError("no schedulable interval left");  // unreachable

    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < inst.classes.size(); ++k)
      if (pending[k] && avail_lo[k] >= best_i && avail_hi[k] <= best_j)
        chosen.push_back(k);
    // earliest-deadline-first within the interval
    std::stable_sort(chosen.begin(), chosen.end(),
                     [&](std::size_t a, std::size_t b) {
                       const double da = inst.classes[a].arrival +
                                         inst.classes[a].sojourn;
                       const double db = inst.classes[b].arrival +
                                         inst.classes[b].sojourn;
                       return da < db;
                     });

    std::vector<double> rem(chosen.size());
    for (std::size_t q = 0; q < chosen.size(); ++q)
      rem[q] = inst.classes[chosen[q]].mass * inst.classes[chosen[q]].demand;

    for (std::size_t c = best_i; c < best_j; ++c) {
      if (consumed[c]) continue;
      double fill = best_val * len[c];
      for (std::size_t q = 0; q < chosen.size() && fill > 0.0; ++q) {
        const std::size_t k = chosen[q];
        if (c < span[k].lo || c >= span[k].hi) continue;
        const double room = inst.classes[k].mass * len[c];
        const double take = std::min({rem[q], room, fill});
        if (take <= 0.0) continue;
        res.profiles.rates[k][c] = take / room;
        rem[q] -= take;
        fill -= take;
      }
    }
    for (std::size_t q = 0; q < chosen.size(); ++q) {
      const std::size_t k = chosen[q];
      const double scale =
          std::max(1.0, inst.classes[k].mass * inst.classes[k].demand);
      if (rem[q] > tol * scale)
        throw SolverError(
            "class " + std::to_string(k) + ": cannot deliver " +
            std::to_string(rem[q]) + " of its work inside " +
            interval_str(inst.grid[best_i], inst.grid[best_j]) +
            " under the unit rate cap");
      pending[k] = 0;
      --left;
    }
    for (std::size_t c = best_i; c < best_j; ++c) consumed[c] = 1;
    res.intervals.push_back(
        {inst.grid[best_i], inst.grid[best_j], best_val});
  }
  return res;
}

namespace {

// Projected gradient over per-class served amounts u (mass * rate * length
// per cell), so each class row lives on {0 <= u <= mass*len, sum u =
// mass*demand} and the objective integrates alpha*E[P]^2 + beta*sum m*v^2.
struct FluidSolver {
  const FluidInstance& inst;
  double alpha, beta;
  std::vector<double> len;
  std::vector<CellSpan> span;
  std::vector<double> rowd;                // mass*demand per class
  std::vector<std::vector<double>> cap, x; // window-local arrays
  std::vector<double> T;                   // per-cell aggregate amount
  double step_safe = 0.5;

  explicit FluidSolver(const FluidInstance& in, double a, double b)
      : inst(in), alpha(a), beta(b), len(cell_lengths(in.grid)) {
    const std::size_t n = inst.classes.size();
    span.resize(n);
    rowd.resize(n);
    cap.resize(n);
    x.resize(n);
    T.assign(len.size(), 0.0);
    std::vector<std::size_t> members(len.size(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      const FluidClass& fc = inst.classes[k];
      span[k] = window_span(inst.grid, fc.arrival, fc.arrival + fc.sojourn);
      rowd[k] = fc.mass * fc.demand;
      const std::size_t w = span[k].hi - span[k].lo;
      cap[k].resize(w);
      x[k].assign(w, 0.0);
      for (std::size_t j = 0; j < w; ++j)
        cap[k][j] = fc.mass * len[span[k].lo + j];
      if (rowd[k] > 0.0)
        for (std::size_t c = span[k].lo; c < span[k].hi; ++c) ++members[c];
    }
    double lip = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (rowd[k] <= 0.0) continue;
      const FluidClass& fc = inst.classes[k];
      for (std::size_t c = span[k].lo; c < span[k].hi; ++c) {
        const double row = (2.0 * alpha * static_cast<double>(members[c]) +
                            2.0 * beta / std::max(fc.mass, kTiny)) /
                           len[c];
        lip = std::max(lip, row);
      }
    }
    step_safe = lip > 0.0 ? 1.0 / lip : 1.0;
  }

  void recompute(const std::vector<std::vector<double>>& u,
                 std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < u.size(); ++k)
      for (std::size_t j = 0; j < u[k].size(); ++j)
        out[span[k].lo + j] += u[k][j];
  }

  double objective(const std::vector<std::vector<double>>& u,
                   const std::vector<double>& tot) const {
    double g = 0.0;
    for (std::size_t c = 0; c < tot.size(); ++c)
      g += alpha * tot[c] * tot[c] / len[c];
    if (beta > 0.0)
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double m = inst.classes[k].mass;
        if (m <= 0.0) continue;
        for (std::size_t j = 0; j < u[k].size(); ++j)
          g += beta * u[k][j] * u[k][j] / (m * len[span[k].lo + j]);
      }
    return g;
  }

  double grad_at(std::size_t k, std::size_t j,
                 const std::vector<double>& tot) const {
    const std::size_t c = span[k].lo + j;
    const double m = std::max(inst.classes[k].mass, kTiny);
    return (2.0 * alpha * tot[c] + 2.0 * beta * x[k][j] / m) / len[c];
  }

  // largest profitable transfer within any class row
  double kkt() const {
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (rowd[k] <= 0.0 || x[k].empty()) continue;
      const double eps = 1e-10 * std::max(1.0, rowd[k]);
      double qmax = -std::numeric_limits<double>::infinity();
      double qmin = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < x[k].size(); ++j) {
        const double q = grad_at(k, j, T);
        if (x[k][j] > eps) qmax = std::max(qmax, q);
        if (x[k][j] < cap[k][j] - eps) qmin = std::min(qmin, q);
      }
      if (qmax > qmin) worst = std::max(worst, qmax - qmin);
    }
    return worst;
  }

  void run(double tol, std::size_t max_iters, QpReport& rep) {
    for (std::size_t k = 0; k < x.size(); ++k)
      detail::project_box_simplex(cap[k], rowd[k], x[k].data(),
                                  x[k].data());
    recompute(x, T);
    double G = objective(x, T);
    std::vector<std::vector<double>> xn = x;
    std::vector<double> Tn(T.size());
    double step_prev = step_safe, du2 = 0.0, sy = 0.0;
    rep.converged = false;
    std::size_t iter = 0;
    int stall = 0;
    for (; iter < max_iters; ++iter) {
      if (kkt() < tol) {
        rep.converged = true;
        break;
      }
      double step = step_prev;
      if (iter > 0 && sy > 0.0)
        step = std::clamp(du2 / sy, step_safe, 1e7 * step_safe);
      double Gn = G;
      for (;;) {
        for (std::size_t k = 0; k < x.size(); ++k) {
          std::vector<double> g(x[k].size());
          for (std::size_t j = 0; j < x[k].size(); ++j)
            g[j] = x[k][j] - step * grad_at(k, j, T);
          detail::project_box_simplex(cap[k], rowd[k], g.data(),
                                      xn[k].data());
        }
        recompute(xn, Tn);
        Gn = objective(xn, Tn);
        if (Gn <= G + kTiny * (1.0 + G)) break;
        if (step <= step_safe * (1.0 + 1e-9)) break;
        step = std::max(step_safe, 0.25 * step);
      }
      if (Gn > G + kTiny * (1.0 + G)) {
        rep.converged = true;  // stalled at the guaranteed-descent step
        break;
      }
      du2 = 0.0;
      sy = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double m = std::max(inst.classes[k].mass, kTiny);
        for (std::size_t j = 0; j < x[k].size(); ++j) {
          const double d = xn[k][j] - x[k][j];
          du2 += d * d;
          sy += 2.0 * beta * d * d / (m * len[span[k].lo + j]);
        }
      }
      for (std::size_t c = 0; c < T.size(); ++c) {
        const double d = Tn[c] - T[c];
        sy += 2.0 * alpha * d * d / len[c];
      }
      std::swap(x, xn);
      std::swap(T, Tn);
      const double drop = G - Gn;
      G = Gn;
      step_prev = step;
      stall = drop < tol * std::max(1.0, G) ? stall + 1 : 0;
      if (stall >= 30) {
        rep.converged = true;
        ++iter;
        break;
      }
    }
    rep.iterations = iter;
    rep.objective = G;
    rep.kkt = kkt();
    if (rep.kkt < tol) rep.converged = true;
  }
};

}  // namespace

ClassRateProfiles solve_fluid_qp(const FluidInstance& inst, double alpha,
                                 double beta, double tol,
                                 std::size_t max_iters, QpReport* report) {
  check_instance(inst);
  if (alpha < 0.0 || beta < 0.0)
    throw ValidationError("fluid objective weights must be non-negative");
  ClassRateProfiles prof;
  prof.grid = inst.grid;
  const std::size_t cells = inst.grid.size() < 2 ? 0 : inst.grid.size() - 1;
  prof.rates.assign(inst.classes.size(), std::vector<double>(cells, 0.0));
  if (cells == 0) return prof;

  FluidSolver s(inst, alpha, beta);
  QpReport local;
  QpReport& rep = report ? *report : local;
  s.run(tol, max_iters, rep);
  for (std::size_t k = 0; k < inst.classes.size(); ++k)
    for (std::size_t j = 0; j < s.x[k].size(); ++j) {
      const double room = s.cap[k][j];
      if (room > 0.0)
        prof.rates[k][s.span[k].lo + j] = s.x[k][j] / room;
    }
  return prof;
}

double fluid_objective(const FluidInstance& inst,
                       const ClassRateProfiles& prof, double alpha,
                       double beta) {
  if (prof.grid.size() < 2) return 0.0;
  const std::vector<double> len = cell_lengths(prof.grid);
  const std::vector<double> cap = mean_capacity(inst, prof);
  double acc = 0.0;
  for (std::size_t c = 0; c < len.size(); ++c) {
    double cell = alpha * cap[c] * cap[c];
    for (std::size_t k = 0; k < inst.classes.size(); ++k) {
      const double v = prof.rates[k][c];
      cell += beta * inst.classes[k].mass * v * v;
    }
    acc += cell * len[c];
  }
  const double span = prof.grid.back() - prof.grid.front();
  return span > 0.0 ? acc / span : 0.0;
}

ParetoReport check_pareto_conditions(const FluidInstance& inst,
                                     const ClassRateProfiles& prof,
                                     double alpha, double beta, double tol) {
  ParetoReport report;
  const std::vector<double> cap = mean_capacity(inst, prof);
  constexpr double kServed = 1e-9;
  for (std::size_t k = 0; k < inst.classes.size(); ++k) {
    const FluidClass& fc = inst.classes[k];
    if (fc.mass * fc.demand <= 0.0) continue;
    const CellSpan s =
        window_span(prof.grid, fc.arrival, fc.arrival + fc.sojourn);
    double qmin = std::numeric_limits<double>::infinity(), qmax = -qmin;
    for (std::size_t c = s.lo; c < s.hi; ++c) {
      const double v = prof.rates[k][c];
      if (v <= kServed) continue;
      const double q = alpha * cap[c] + beta * v;
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
    if (!(qmin <= qmax)) {
      report.pass = false;
      report.violations.push_back("class " + std::to_string(k) +
                                  ": carries work but serves no cell");
      continue;
    }
    if (qmax - qmin > tol) {
      report.pass = false;
      std::ostringstream os;
      os.precision(12);
      os << "class " << k << ": served level varies by " << (qmax - qmin);
      report.violations.push_back(os.str());
    }
    for (std::size_t c = s.lo; c < s.hi; ++c) {
      if (prof.rates[k][c] > kServed) continue;
      if (alpha * cap[c] < qmin - tol) {
        report.pass = false;
        std::ostringstream os;
        os.precision(12);
        os << "class " << k << ": idle cell [" << prof.grid[c] << ", "
           << prof.grid[c + 1] << ") sits below the served level";
        report.violations.push_back(os.str());
      }
    }
  }
  return report;
}

FluidInstance load_fluid_instance(const std::string& path,
                                  const std::vector<double>& refinements) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open fluid instance: " + path);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  std::vector<FluidClass> classes;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!saw_header) {
      if (t != "arrival,demand,sojourn,mass")
        throw ValidationError(path +
                              ": expected header arrival,demand,sojourn,"
                              "mass, got '" +
                              t + "'");
      saw_header = true;
      continue;
    }
    const std::vector<std::string> cells = split_line(t);
    if (cells.size() != 4)
      throw ValidationError(path + " line " + std::to_string(lineno) +
                            ": expected 4 columns, got " +
                            std::to_string(cells.size()));
    FluidClass fc;
    try {
      fc.arrival = parse_double(cells[0]);
      fc.demand = parse_double(cells[1]);
      fc.sojourn = parse_double(cells[2]);
      fc.mass = parse_double(cells[3]);
    } catch (const std::exception&) {
      throw ValidationError(path + " line " + std::to_string(lineno) +
                            ": malformed number");
    }
    classes.push_back(fc);
  }
  if (!saw_header)
    throw ValidationError(path + ": missing header line");
  return make_fluid_instance(std::move(classes), refinements);
}

void save_fluid_instance(const FluidInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write fluid instance: " + path);
  out << "arrival,demand,sojourn,mass\n";
  out.precision(17);
  for (const FluidClass& fc : inst.classes)
    out << fc.arrival << "," << fc.demand << "," << fc.sojourn << ","
        << fc.mass << "\n";
}

void save_profiles(const ClassRateProfiles& prof, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write profiles: " + path);
  out << "class_index,cell_start,cell_end,rate\n";
  out.precision(17);
  for (std::size_t k = 0; k < prof.rates.size(); ++k)
    for (std::size_t c = 0; c < prof.rates[k].size(); ++c) {
      if (prof.rates[k][c] <= 0.0) continue;
      out << k << "," << prof.grid[c] << "," << prof.grid[c + 1] << ","
          << prof.rates[k][c] << "\n";
    }
}

}  // namespace varsched
