#pragma once

#include <string>
#include <vector>

#include "varsched/config.hpp"
#include "varsched/jobs.hpp"
#include "varsched/rng.hpp"

namespace varsched {

// Scalar mark distribution.
struct Dist {
  enum class Kind { Constant, Uniform, Exponential };
  Kind kind = Kind::Constant;
  double a = 0.0;  // Constant: value; Uniform: low; Exponential: mean
  double b = 0.0;  // Uniform: high

  static Dist constant(double v) { return {Kind::Constant, v, 0.0}; }
  static Dist uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Dist exponential(double mean) {
    return {Kind::Exponential, mean, 0.0};
  }

  double sample(Rng& rng) const;
  double mean() const;
};

// Sojourn (deadline window) conditioned on the sampled demand.
struct SojournRule {
  enum class Kind {
    Constant,              // tau = a
    Uniform,               // tau ~ U[a, b]
    AdditiveLaxity,        // tau = sigma + Exp(mean a); guarantees sigma <= tau
    MultiplicativeStretch  // tau = sigma * U[1, a];     guarantees sigma <= tau
  };
  Kind kind = Kind::Constant;
  double a = 0.0;
  double b = 0.0;

  static SojournRule constant(double v) { return {Kind::Constant, v, 0.0}; }
  static SojournRule uniform(double lo, double hi) {
    return {Kind::Uniform, lo, hi};
  }
  static SojournRule additive_laxity(double mean) {
    return {Kind::AdditiveLaxity, mean, 0.0};
  }
  static SojournRule multiplicative_stretch(double gamma_max) {
    return {Kind::MultiplicativeStretch, gamma_max, 0.0};
  }

  double sample(double sigma, Rng& rng) const;
};

// Per-job mark sampler: demand, sojourn window, penalty prices, known flag.
// Draw order per job is demand, sojourn, cost_demand, cost_deadline, known;
// (demand, sojourn) pairs violating demand <= sojourn are redrawn (counted).
struct MarkSampler {
  Dist demand = Dist::constant(1.0);
  SojournRule sojourn = SojournRule::constant(1.0);
  Dist cost_demand = Dist::constant(kInf);
  Dist cost_deadline = Dist::constant(kInf);
  double known_prob = 1.0;
};

// Arrival process over a finite horizon.
//  - StationaryPoisson: Poisson arrivals at constant rate.
//  - NonstationaryPoisson: piecewise-constant rate; rate_times must start at
//    0; rate_values[i] applies on [rate_times[i], rate_times[i+1]).
//  - BernoulliGridI: arrival with prob p_arrival at each grid point
//    0, step, 2*step, ...; sojourn = demand + Exp(mean laxity).
//  - BernoulliGridII: same grid; sojourn = demand * U[1, stretch_max].
struct ArrivalModel {
  enum class Kind {
    StationaryPoisson,
    NonstationaryPoisson,
    BernoulliGridI,
    BernoulliGridII
  };
  Kind kind = Kind::StationaryPoisson;
  double horizon = 0.0;
  double rate = 1.0;                // StationaryPoisson
  std::vector<double> rate_times;   // NonstationaryPoisson
  std::vector<double> rate_values;  // NonstationaryPoisson
  double step = 1.0;                // grid kinds
  double p_arrival = 0.0;           // grid kinds
  MarkSampler marks;

  // Long-run arrival rate (jobs per unit time) before horizon rejection.
  double arrival_rate() const;
};

// Throws std::invalid_argument when parameters are out of range.
void validate_model(const ArrivalModel& model);

// One mark draw (demand, sojourn, prices, known flag) at the given arrival
// time. Pairs violating demand <= sojourn are redrawn and counted in
// *resamples when provided.
JobRequest sample_marks(const MarkSampler& marks, double arrival, Rng& rng,
                        std::size_t* resamples = nullptr);

// Deterministic: identical (model, seed) yields a byte-identical JobSet.
// Jobs whose deadline would exceed the horizon are dropped and counted.
JobSet sample_arrivals(const ArrivalModel& model, std::uint64_t seed);

// Flat key-value model files; see docs/formats.md for the schema.
ArrivalModel load_model_file(const std::string& path);
ArrivalModel model_from_kv(const KvMap& kv);
void save_model_file(const ArrivalModel& model, const std::string& path);

}  // namespace varsched
