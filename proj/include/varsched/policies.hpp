#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "varsched/jobs.hpp"

namespace varsched {

// Which jobs a scheduler may serve:
//  - Strict: demand and deadline are both hard (only meaningful for policies
//    that guarantee completion by the deadline).
//  - SoftDemand: jobs leave at their deadline; unserved demand is charged at
//    the job's cost_demand price.
//  - SoftDeadline: jobs stay until completion; lateness is charged at the
//    job's cost_deadline price.
enum class ServiceMode { Strict, SoftDemand, SoftDeadline };

enum class PolicyKind {
  Immediate,      // full rate from arrival
  Delayed,        // full rate once remaining time <= remaining demand
  Exact,          // remaining demand spread evenly over remaining time
  Ges,            // Exact capped by the penalty prices; see rate_ges
  EqualService,   // constant rate c (mode-dependent eligibility)
  EsPc,           // Exact with a catch-up boost when capacity ran low
  Edf,            // priority allocation, earliest deadline first
  Llf,            // priority allocation, least laxity first
  FairSharing,    // capacity split equally among eligible jobs
  GesUnknown,     // Ges for known jobs, constant fallback for unknown ones
  Offline,        // clairvoyant quadratic program over the whole horizon
  Mpc             // receding-horizon re-solve over currently present jobs
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Exact;
  ServiceMode mode = ServiceMode::Strict;  // EqualService / Edf / Llf / Fair
  double c = NAN;         // EqualService rate / GesUnknown fallback
  double capacity = NAN;  // Edf / Llf / FairSharing total capacity
  double mu = 1.4;        // EsPc boost factor
  double p_bar = NAN;     // EsPc target capacity; NaN = derive at run time

  // Fill NaN parameters with the documented defaults (c = 0.5, capacity = 1).
  PolicyConfig with_defaults() const;
};

// "name[:arg...]" forms: exact | immediate | delayed | ges | offline | mpc |
// equal:<mode>[:c] | espc[:mu[:p_bar]] | edf:<mode>[:p] | llf:<mode>[:p] |
// fair:<mode>[:p] | ges_unknown[:c]   (mode = strict|soft_demand|soft_deadline)
PolicyConfig policy_from_string(const std::string& text);
std::string policy_to_string(const PolicyConfig& pc);

inline double clamp01(double v) {
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

// Distributed per-job rates, all clamped to [0, 1].  y is the remaining
// demand, x the time left to the deadline (negative once past it).

inline double rate_exact(double y, double x) {
  if (y <= 0.0 || x <= 0.0) return 0.0;
  return clamp01(y / x);
}

inline double rate_immediate(double y) { return y > 0.0 ? 1.0 : 0.0; }

inline double rate_delayed(double y, double x) {
  return (y > 0.0 && x <= y) ? 1.0 : 0.0;
}

// Exact service capped by the prices: never pay more per unit than dropping
// demand (cap C/2) or finishing late (cap sqrt(eps)) would cost.  Whichever
// cap is lower decides which constraint gets relaxed.
inline double rate_ges(double y, double x, double cost_demand,
                       double cost_deadline) {
  if (y <= 0.0) return 0.0;
  const double half_c = 0.5 * cost_demand;
  const double root_eps = std::sqrt(cost_deadline);
  if (x > 0.0) {
    const double ratio = y / x;
    if (ratio <= std::min(half_c, root_eps)) return clamp01(ratio);
    if (half_c <= root_eps) return clamp01(half_c);
  }
  return clamp01(root_eps);
}

inline double rate_equal_service(ServiceMode mode, double c, double y,
                                 double x) {
  if (y <= 0.0) return 0.0;
  switch (mode) {
    case ServiceMode::Strict:
      // Laxity exhausted: switch to full rate to keep the deadline.
      return (x - y > 0.0) ? clamp01(c) : 1.0;
    case ServiceMode::SoftDemand:
      return x > 0.0 ? clamp01(c) : 0.0;
    case ServiceMode::SoftDeadline:
      return clamp01(c);
  }
  return 0.0;
}

// Exact service with a catch-up boost: when the previous step's capacity ran
// below the target p_bar, serve mu times the even-spread rate.
inline double rate_es_pc(double y, double x, double mu, double p_prev,
                         double p_bar) {
  if (y <= 0.0 || x <= 0.0) return 0.0;
  const double base = y / x;
  return clamp01(p_prev < p_bar ? mu * base : base);
}

inline double rate_ges_unknown(bool known, double fallback_c, double y,
                               double x, double cost_demand,
                               double cost_deadline) {
  if (known) return rate_ges(y, x, cost_demand, cost_deadline);
  return y > 0.0 ? clamp01(fallback_c) : 0.0;
}

// Centralized allocators.  Eligibility: SoftDemand needs y > 0 and x > 0,
// SoftDeadline needs y > 0.  Returned rates align with the input span.

enum class PriorityOrder { Deadline, Laxity };

// Hands min{1, remaining capacity} to each eligible job in ascending key
// order (key = x for Deadline, x - y for Laxity), ties broken by arrival
// time, then input position.
std::vector<double> assign_priority(std::span<const JobState> jobs,
                                    double capacity, PriorityOrder order,
                                    ServiceMode mode);

// Every eligible job gets min{capacity / n_eligible, 1}.
std::vector<double> assign_fair(std::span<const JobState> jobs,
                                double capacity, ServiceMode mode);

}  // namespace varsched
