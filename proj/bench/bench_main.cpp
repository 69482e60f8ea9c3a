// Compares the OpenMP kernels against their serial reference twins on the
// same inputs: wall time plus a bitwise-equality check, since every parallel
// reduction in the library is specified to reproduce the serial result.
#include <chrono>
#include <cstdio>
#include <functional>

#include "varsched/analytics.hpp"
#include "varsched/arrivals.hpp"
#include "varsched/experiment.hpp"
#include "varsched/qp.hpp"

using namespace varsched;

namespace {

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool match) {
  std::printf("%-18s serial %8.1f ms   parallel %8.1f ms   x%.2f   %s\n",
              name, serial_ms, parallel_ms,
              parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0,
              match ? "bitwise-equal" : "MISMATCH");
}

ArrivalModel bench_model(double horizon) {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::StationaryPoisson;
  m.rate = 2.0;
  m.horizon = horizon;
  m.marks.demand = Dist::uniform(0.5, 1.5);
  m.marks.sojourn = SojournRule::multiplicative_stretch(3.0);
  return m;
}

int bench_offline_qp() {
  const JobSet jobs = sample_arrivals(bench_model(80.0), 7);
  auto t0 = std::chrono::steady_clock::now();
  const RateMatrix serial =
      solve_offline(jobs, 0.1, 1e-8, 20000, nullptr, false);
  const double serial_ms = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  const RateMatrix parallel =
      solve_offline(jobs, 0.1, 1e-8, 20000, nullptr, true);
  const double parallel_ms = ms_since(t0);
  const bool match = serial.rates == parallel.rates;
  report("offline-qp", serial_ms, parallel_ms, match);
  return match ? 0 : 1;
}

int bench_moments() {
  const ArrivalModel m = bench_model(1.0);
  const MarkMoments moments =
      MarkMoments::monte_carlo(m.rate, m.marks, 4000000, 99);
  const auto integrand = [](double sigma, double tau) {
    return sigma * sigma / tau + sigma * tau;
  };
  auto t0 = std::chrono::steady_clock::now();
  const double serial = moments.expect_serial(integrand);
  const double serial_ms = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  const double parallel = moments.expect(integrand);
  const double parallel_ms = ms_since(t0);
  const bool match = serial == parallel;
  report("moment-pool", serial_ms, parallel_ms, match);
  return match ? 0 : 1;
}

int bench_batch() {
  ExperimentConfig cfg;
  cfg.model = bench_model(60.0);
  cfg.policies = {"exact", "immediate", "delayed", "equal:strict:0.7"};
  cfg.ratio_against = "exact";
  cfg.dt = 0.05;
  cfg.burn_in = 5.0;
  cfg.seed_base = 21;
  cfg.seed_count = 12;

  auto t0 = std::chrono::steady_clock::now();
  const CompareResult serial = run_compare(cfg, false);
  const double serial_ms = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  const CompareResult parallel = run_compare(cfg, true);
  const double parallel_ms = ms_since(t0);
  bool match = serial.rows.size() == parallel.rows.size();
  for (std::size_t i = 0; match && i < serial.rows.size(); ++i)
    match = serial.rows[i].cost == parallel.rows[i].cost &&
            serial.rows[i].metrics.var_P == parallel.rows[i].metrics.var_P &&
            serial.rows[i].ratio == parallel.rows[i].ratio;
  report("batch-compare", serial_ms, parallel_ms, match);
  return match ? 0 : 1;
}

}  // namespace

int main() {
  int failures = 0;
  failures += bench_offline_qp();
  failures += bench_moments();
  failures += bench_batch();
  if (failures) std::printf("%d kernel(s) diverged from the reference\n",
                            failures);
  return failures ? 1 : 0;
}
