#include "varsched/arrivals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace varsched {

double Dist::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Constant:
      return a;
    case Kind::Uniform:
      return rng.uniform(a, b);
    case Kind::Exponential:
      return rng.exponential(a);
  }
  return a;
}

double Dist::mean() const {
  switch (kind) {
    case Kind::Constant:
      return a;
    case Kind::Uniform:
      return 0.5 * (a + b);
    case Kind::Exponential:
      return a;
  }
  return a;
}

double SojournRule::sample(double sigma, Rng& rng) const {
  switch (kind) {
    case Kind::Constant:
      return a;
    case Kind::Uniform:
      return rng.uniform(a, b);
    case Kind::AdditiveLaxity:
      return sigma + rng.exponential(a);
    case Kind::MultiplicativeStretch:
      return sigma * rng.uniform(1.0, a);
  }
  return a;
}

double ArrivalModel::arrival_rate() const {
  switch (kind) {
    case Kind::StationaryPoisson:
      return rate;
    case Kind::NonstationaryPoisson: {
      if (rate_times.empty()) return 0.0;
      // Time average of the piecewise-constant intensity over [0, horizon).
      double mass = 0.0;
      for (std::size_t i = 0; i < rate_times.size(); ++i) {
        double t0 = rate_times[i];
        double t1 = (i + 1 < rate_times.size()) ? rate_times[i + 1] : horizon;
        t0 = std::min(t0, horizon);
        t1 = std::min(t1, horizon);
        if (t1 > t0) mass += rate_values[i] * (t1 - t0);
      }
      return horizon > 0.0 ? mass / horizon : 0.0;
    }
    case Kind::BernoulliGridI:
    case Kind::BernoulliGridII:
      return step > 0.0 ? p_arrival / step : 0.0;
  }
  return 0.0;
}

void validate_model(const ArrivalModel& m) {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("model: " + msg);
  };
  if (!(m.horizon > 0.0)) fail("horizon must be positive");
  switch (m.kind) {
    case ArrivalModel::Kind::StationaryPoisson:
      if (!(m.rate > 0.0)) fail("rate must be positive");
      break;
    case ArrivalModel::Kind::NonstationaryPoisson:
      if (m.rate_times.empty() || m.rate_times.size() != m.rate_values.size())
        fail("rate_times and rate_values must be nonempty and equal length");
      if (m.rate_times.front() != 0.0) fail("rate_times must start at 0");
      if (!std::is_sorted(m.rate_times.begin(), m.rate_times.end()))
        fail("rate_times must be increasing");
      for (double v : m.rate_values)
        if (!(v >= 0.0)) fail("rate_values must be >= 0");
      break;
    case ArrivalModel::Kind::BernoulliGridI:
    case ArrivalModel::Kind::BernoulliGridII:
      if (!(m.step > 0.0)) fail("step must be positive");
      if (!(m.p_arrival >= 0.0 && m.p_arrival <= 1.0))
        fail("p_arrival must lie in [0, 1]");
      break;
  }
  if (m.kind == ArrivalModel::Kind::BernoulliGridI &&
      m.marks.sojourn.kind != SojournRule::Kind::AdditiveLaxity)
    fail("grid model I requires the additive-laxity sojourn rule");
  if (m.kind == ArrivalModel::Kind::BernoulliGridII &&
      m.marks.sojourn.kind != SojournRule::Kind::MultiplicativeStretch)
    fail("grid model II requires the multiplicative-stretch sojourn rule");
  if (!(m.marks.known_prob >= 0.0 && m.marks.known_prob <= 1.0))
    fail("known_prob must lie in [0, 1]");
}

JobRequest sample_marks(const MarkSampler& marks, double arrival, Rng& rng,
                        std::size_t* resamples) {
  std::size_t local = 0;
  if (!resamples) resamples = &local;
  JobRequest j;
  j.arrival = arrival;
  for (int attempt = 0;; ++attempt) {
    j.demand = marks.demand.sample(rng);
    j.sojourn = marks.sojourn.sample(j.demand, rng);
    if (j.demand <= j.sojourn) break;
    ++*resamples;
    if (attempt >= 10000)
      throw std::runtime_error(
          "mark sampler cannot satisfy demand <= sojourn after 10000 tries");
  }
  j.cost_demand = marks.cost_demand.sample(rng);
  j.cost_deadline = marks.cost_deadline.sample(rng);
  j.known =
      marks.known_prob >= 1.0 ? true : rng.bernoulli(marks.known_prob);
  return j;
}

JobSet sample_arrivals(const ArrivalModel& model, std::uint64_t seed) {
  validate_model(model);
  JobSet set;
  set.horizon = model.horizon;
  Rng rng(seed);

  auto emit = [&](double arrival) {
    JobRequest j = sample_marks(model.marks, arrival, rng, &set.mark_resamples);
    if (j.deadline() > model.horizon) {
      ++set.dropped_past_horizon;
      return;
    }
    set.jobs.push_back(j);
  };

  switch (model.kind) {
    case ArrivalModel::Kind::StationaryPoisson: {
      double t = rng.exponential(1.0 / model.rate);
      while (t < model.horizon) {
        emit(t);
        t += rng.exponential(1.0 / model.rate);
      }
      break;
    }
    case ArrivalModel::Kind::NonstationaryPoisson: {
      // Thinning against the peak intensity.
      double peak = *std::max_element(model.rate_values.begin(),
                                      model.rate_values.end());
      if (peak <= 0.0) break;
      auto intensity_at = [&](double t) {
        std::size_t i = model.rate_times.size();
        while (i > 0 && model.rate_times[i - 1] > t) --i;
        return i == 0 ? 0.0 : model.rate_values[i - 1];
      };
      double t = rng.exponential(1.0 / peak);
      while (t < model.horizon) {
        if (rng.next_uniform01() * peak < intensity_at(t)) emit(t);
        t += rng.exponential(1.0 / peak);
      }
      break;
    }
    case ArrivalModel::Kind::BernoulliGridI:
    case ArrivalModel::Kind::BernoulliGridII: {
      for (double t = 0.0; t < model.horizon; t += model.step)
        if (rng.bernoulli(model.p_arrival)) emit(t);
      break;
    }
  }
  return set;
}

namespace {

Dist parse_dist(const std::string& text, const std::string& key) {
  auto toks = split_tokens(text);
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("model key '" + key + "': " + msg);
  };
  if (toks.empty()) fail("empty distribution");
  if (toks.size() == 1) {
    // bare number or "inf" means a constant
    return Dist::constant(parse_double(toks[0]));
  }
  if (toks[0] == "constant" && toks.size() == 2)
    return Dist::constant(parse_double(toks[1]));
  if (toks[0] == "uniform" && toks.size() == 3) {
    Dist d = Dist::uniform(parse_double(toks[1]), parse_double(toks[2]));
    if (d.a > d.b) fail("uniform low exceeds high");
    return d;
  }
  if (toks[0] == "exp" && toks.size() == 2)
    return Dist::exponential(parse_double(toks[1]));
  fail("expected 'constant v', 'uniform lo hi', 'exp mean', or a number");
  return Dist{};
}

SojournRule parse_sojourn(const std::string& text, const std::string& key) {
  auto toks = split_tokens(text);
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("model key '" + key + "': " + msg);
  };
  if (toks.empty()) fail("empty sojourn rule");
  if (toks.size() == 1) return SojournRule::constant(parse_double(toks[0]));
  if (toks[0] == "constant" && toks.size() == 2)
    return SojournRule::constant(parse_double(toks[1]));
  if (toks[0] == "uniform" && toks.size() == 3) {
    SojournRule r = SojournRule::uniform(parse_double(toks[1]),
                                         parse_double(toks[2]));
    if (r.a > r.b) fail("uniform low exceeds high");
    return r;
  }
  if (toks[0] == "laxity_exp" && toks.size() == 2)
    return SojournRule::additive_laxity(parse_double(toks[1]));
  if (toks[0] == "stretch" && toks.size() == 2)
    return SojournRule::multiplicative_stretch(parse_double(toks[1]));
  fail(
      "expected 'constant v', 'uniform lo hi', 'laxity_exp mean', "
      "'stretch gamma_max', or a number");
  return SojournRule{};
}

std::string dist_to_string(const Dist& d) {
  std::ostringstream out;
  out.precision(17);
  switch (d.kind) {
    case Dist::Kind::Constant:
      if (d.a == kInf) return "inf";
      out << "constant " << d.a;
      break;
    case Dist::Kind::Uniform:
      out << "uniform " << d.a << " " << d.b;
      break;
    case Dist::Kind::Exponential:
      out << "exp " << d.a;
      break;
  }
  return out.str();
}

std::string sojourn_to_string(const SojournRule& r) {
  std::ostringstream out;
  out.precision(17);
  switch (r.kind) {
    case SojournRule::Kind::Constant:
      out << "constant " << r.a;
      break;
    case SojournRule::Kind::Uniform:
      out << "uniform " << r.a << " " << r.b;
      break;
    case SojournRule::Kind::AdditiveLaxity:
      out << "laxity_exp " << r.a;
      break;
    case SojournRule::Kind::MultiplicativeStretch:
      out << "stretch " << r.a;
      break;
  }
  return out.str();
}

}  // namespace

ArrivalModel model_from_kv(const KvMap& kv) {
  ArrivalModel m;
  std::string kind = kv_require(kv, "kind");
  if (kind == "stationary_poisson")
    m.kind = ArrivalModel::Kind::StationaryPoisson;
  else if (kind == "nonstationary_poisson")
    m.kind = ArrivalModel::Kind::NonstationaryPoisson;
  else if (kind == "bernoulli_grid_i")
    m.kind = ArrivalModel::Kind::BernoulliGridI;
  else if (kind == "bernoulli_grid_ii")
    m.kind = ArrivalModel::Kind::BernoulliGridII;
  else
    throw std::runtime_error("unknown model kind: " + kind);

  m.horizon = kv_require_double(kv, "horizon");
  if (auto v = kv_get(kv, "demand"))
    m.marks.demand = parse_dist(*v, "demand");
  if (auto v = kv_get(kv, "cost_demand"))
    m.marks.cost_demand = parse_dist(*v, "cost_demand");
  if (auto v = kv_get(kv, "cost_deadline"))
    m.marks.cost_deadline = parse_dist(*v, "cost_deadline");
  m.marks.known_prob = kv_get_double(kv, "known_prob", 1.0);

  switch (m.kind) {
    case ArrivalModel::Kind::StationaryPoisson:
      m.rate = kv_require_double(kv, "rate");
      m.marks.sojourn = parse_sojourn(kv_require(kv, "sojourn"), "sojourn");
      break;
    case ArrivalModel::Kind::NonstationaryPoisson:
      m.rate_times = kv_get_doubles(kv, "rate_times");
      m.rate_values = kv_get_doubles(kv, "rate_values");
      m.marks.sojourn = parse_sojourn(kv_require(kv, "sojourn"), "sojourn");
      break;
    case ArrivalModel::Kind::BernoulliGridI:
      m.step = kv_get_double(kv, "step", 1.0);
      m.p_arrival = kv_require_double(kv, "p_arrival");
      m.marks.sojourn =
          SojournRule::additive_laxity(kv_require_double(kv, "mean_laxity"));
      break;
    case ArrivalModel::Kind::BernoulliGridII:
      m.step = kv_get_double(kv, "step", 1.0);
      m.p_arrival = kv_require_double(kv, "p_arrival");
      m.marks.sojourn = SojournRule::multiplicative_stretch(
          kv_require_double(kv, "stretch_max"));
      break;
  }
  validate_model(m);
  return m;
}

ArrivalModel load_model_file(const std::string& path) {
  return model_from_kv(parse_kv_file(path));
}

void save_model_file(const ArrivalModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out.precision(17);
  switch (m.kind) {
    case ArrivalModel::Kind::StationaryPoisson:
      out << "kind = stationary_poisson\n";
      out << "rate = " << m.rate << "\n";
      break;
    case ArrivalModel::Kind::NonstationaryPoisson: {
      out << "kind = nonstationary_poisson\n";
      out << "rate_times =";
      for (double t : m.rate_times) out << " " << t;
      out << "\nrate_values =";
      for (double v : m.rate_values) out << " " << v;
      out << "\n";
      break;
    }
    case ArrivalModel::Kind::BernoulliGridI:
      out << "kind = bernoulli_grid_i\n";
      out << "step = " << m.step << "\n";
      out << "p_arrival = " << m.p_arrival << "\n";
      out << "mean_laxity = " << m.marks.sojourn.a << "\n";
      break;
    case ArrivalModel::Kind::BernoulliGridII:
      out << "kind = bernoulli_grid_ii\n";
      out << "step = " << m.step << "\n";
      out << "p_arrival = " << m.p_arrival << "\n";
      out << "stretch_max = " << m.marks.sojourn.a << "\n";
      break;
  }
  out << "horizon = " << m.horizon << "\n";
  out << "demand = " << dist_to_string(m.marks.demand) << "\n";
  if (m.kind == ArrivalModel::Kind::StationaryPoisson ||
      m.kind == ArrivalModel::Kind::NonstationaryPoisson)
    out << "sojourn = " << sojourn_to_string(m.marks.sojourn) << "\n";
  out << "cost_demand = " << dist_to_string(m.marks.cost_demand) << "\n";
  out << "cost_deadline = " << dist_to_string(m.marks.cost_deadline) << "\n";
  out << "known_prob = " << m.marks.known_prob << "\n";
}

}  // namespace varsched
