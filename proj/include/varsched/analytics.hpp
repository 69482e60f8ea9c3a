#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "varsched/arrivals.hpp"
#include "varsched/policies.hpp"

namespace varsched {

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero for closed-form (degenerate) moments
};

// Expectation engine over the joint (demand, window) mark distribution,
// paired with the arrival rate. Degenerate (point-mass) marks evaluate
// exactly; everything else uses a frozen Monte Carlo pool so every formula
// below is a deterministic function of (marks, sample count, seed).
class MarkMoments {
 public:
  static MarkMoments degenerate(double lambda, double sigma, double tau);
  static MarkMoments monte_carlo(double lambda, const MarkSampler& marks,
                                 std::size_t samples, std::uint64_t seed);
  // Pool drawn from the model's marks; lambda = model.arrival_rate().
  static MarkMoments from_model(const ArrivalModel& model, std::size_t samples,
                                std::uint64_t seed);
  // Explicit support points with equal weights (handy for tests).
  static MarkMoments from_pairs(double lambda,
                                std::vector<double> sigma,
                                std::vector<double> tau);

  double lambda() const { return lambda_; }
  bool exact() const { return exact_; }
  std::size_t sample_count() const { return sigma_.size(); }

  // E[f(demand, window)] over the pool. Deterministic chunked summation:
  // the result is bitwise identical whether run serially or with OpenMP.
  double expect(const std::function<double(double, double)>& f) const;
  MomentEstimate expect_se(const std::function<double(double, double)>& f) const;
  // Serial reference used by tests/benchmarks to pin the parallel path.
  double expect_serial(const std::function<double(double, double)>& f) const;

  const std::vector<double>& sigmas() const { return sigma_; }
  const std::vector<double>& taus() const { return tau_; }

  double e_sigma() const;           // E[demand]
  double e_sigma2() const;          // E[demand^2]
  double e_sigma2_over_tau() const; // E[demand^2 / window]
  double e_sigma2_tau() const;      // E[demand^2 * window]
  double e_sigma_tau() const;       // E[demand * window]
  double e_tau() const;             // E[window]

 private:
  double lambda_ = 0.0;
  bool exact_ = false;
  std::vector<double> sigma_;
  std::vector<double> tau_;
};

// Long-run mean capacity: lambda * E[served demand per job].
double stationary_mean(const MarkMoments& m, double sigma_hat_expectation);

// Stationary capacity variance of even spreading (rate demand/window).
double var_exact(const MarkMoments& m);

// Stationary backlog variance of even spreading: lambda * E[sigma^2 tau] / 3.
double var_x_exact(const MarkMoments& m);

// Stationary cost (variance + penalty rate) of the price-capped policies.
double cost_soft_demand(const MarkMoments& m, double C);
double cost_soft_deadline(const MarkMoments& m, double eps);
double cost_ges(const MarkMoments& m, double C, double eps);

// Backlog variance of the price-capped policy (three-branch form).
double var_x_ges(const MarkMoments& m, double C, double eps);

// Any scheduler with backlog variance at most D has capacity variance at
// least lambda^2 E[sigma^2]^2 / (4 D). Throws std::invalid_argument if D <= 0.
double lower_bound_centralized(const MarkMoments& m, double D);

struct RatioBounds {
  double general = 0.0;        // bound against the unconstrained optimum
  double matched_var_x = 0.0;  // bound against optima with equal backlog vari.
};
// Upper bounds on var_exact / var(best centralized schedule).
RatioBounds ratio_bound_exact(const MarkMoments& m);

// Same matched-backlog bound for the price-capped policy.
double ratio_bound_ges(const MarkMoments& m, double C, double eps);

// Extra stationary variance incurred when a fraction of jobs hide their
// deadline and are served at flat fallback rate c. mode selects which
// constraint is soft; Strict is invalid.
double unknown_degradation(const MarkMoments& m, double p_unknown,
                           ServiceMode mode, double c);

struct CampbellResult {
  double mean = 0.0;
  double variance = 0.0;
};
// Stationary mean/variance of capacity for an arbitrary per-job service
// shape v(sigma, tau, x), x = time since activation. The inner integral runs
// over [0, support(sigma, tau)] (default: the window tau) by midpoint rule.
CampbellResult campbell_moments(
    const MarkMoments& m,
    const std::function<double(double sigma, double tau, double x)>& rate,
    const std::function<double(double sigma, double tau)>& support = {},
    std::size_t grid = 4096);

// Formula thresholds above the unit rate cap are evaluated as written; the
// CLI surfaces these notes so clamped simulations are not compared blindly.
std::vector<std::string> threshold_warnings(double C, double eps);

}  // namespace varsched
