#include "varsched/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace varsched {

namespace {

constexpr std::size_t kChunk = 4096;

// Fixed-size chunked accumulation: per-chunk partial sums are computed
// (optionally in parallel) and then reduced in index order, so the result is
// bitwise identical for any thread count.
double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& f,
                   bool parallel) {
  if (n == 0) return 0.0;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
#ifndef _OPENMP
  (void)parallel;
#else
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

double sq(double x) { return x * x; }

double sq_over_tau(double sigma, double tau) {
  return sigma == 0.0 ? 0.0 : sigma * sigma / tau;
}

double ratio_of(double sigma, double tau) {
  if (tau > 0.0) return sigma / tau;
  return sigma > 0.0 ? kInf : 0.0;
}

// Which regime a mark falls into under demand price C and lateness price eps:
// 1 = the even-spread rate is affordable, 2 = cap the rate at C/2 and drop
// the tail, 3 = serve at sqrt(eps) and run late. Dropping demand is chosen
// exactly when it is the cheaper escape (C/2 <= sqrt(eps)).
int ges_branch(double sigma, double tau, double half_c, double root_eps) {
  const double r = ratio_of(sigma, tau);
  if (r <= std::min(half_c, root_eps)) return 1;
  if (half_c <= root_eps) return 2;
  return 3;
}

}  // namespace

MarkMoments MarkMoments::degenerate(double lambda, double sigma, double tau) {
  if (!(lambda >= 0.0) || !(sigma >= 0.0) || !(tau >= 0.0))
    throw std::invalid_argument("moments: lambda, sigma, tau must be >= 0");
  MarkMoments m;
  m.lambda_ = lambda;
  m.exact_ = true;
  m.sigma_ = {sigma};
  m.tau_ = {tau};
  return m;
}

MarkMoments MarkMoments::monte_carlo(double lambda, const MarkSampler& marks,
                                     std::size_t samples, std::uint64_t seed) {
  if (samples == 0)
    throw std::invalid_argument("moments: sample count must be positive");
  // point-mass marks collapse to the closed form: one atom, zero std error
  if (marks.demand.kind == Dist::Kind::Constant &&
      marks.sojourn.kind == SojournRule::Kind::Constant)
    return degenerate(lambda, marks.demand.a, marks.sojourn.a);
  MarkMoments m;
  m.lambda_ = lambda;
  m.exact_ = false;
  m.sigma_.reserve(samples);
  m.tau_.reserve(samples);
  Rng rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    JobRequest j = sample_marks(marks, 0.0, rng);
    m.sigma_.push_back(j.demand);
    m.tau_.push_back(j.sojourn);
  }
  return m;
}

MarkMoments MarkMoments::from_model(const ArrivalModel& model,
                                    std::size_t samples, std::uint64_t seed) {
  validate_model(model);
  return monte_carlo(model.arrival_rate(), model.marks, samples, seed);
}

MarkMoments MarkMoments::from_pairs(double lambda, std::vector<double> sigma,
                                    std::vector<double> tau) {
  if (sigma.empty() || sigma.size() != tau.size())
    throw std::invalid_argument(
        "moments: support points must be nonempty and matched in length");
  MarkMoments m;
  m.lambda_ = lambda;
  m.exact_ = true;
  m.sigma_ = std::move(sigma);
  m.tau_ = std::move(tau);
  return m;
}

double MarkMoments::expect(
    const std::function<double(double, double)>& f) const {
  const std::size_t n = sigma_.size();
  return chunked_sum(
             n, [&](std::size_t i) { return f(sigma_[i], tau_[i]); }, true) /
         static_cast<double>(n);
}

double MarkMoments::expect_serial(
    const std::function<double(double, double)>& f) const {
  const std::size_t n = sigma_.size();
  return chunked_sum(
             n, [&](std::size_t i) { return f(sigma_[i], tau_[i]); }, false) /
         static_cast<double>(n);
}

MomentEstimate MarkMoments::expect_se(
    const std::function<double(double, double)>& f) const {
  MomentEstimate est;
  est.value = expect(f);
  const std::size_t n = sigma_.size();
  if (exact_ || n < 2) return est;
  const double mean = est.value;
  const double ss = chunked_sum(
      n, [&](std::size_t i) { return sq(f(sigma_[i], tau_[i]) - mean); },
      true);
  est.std_error = std::sqrt(ss / (static_cast<double>(n - 1)) /
                            static_cast<double>(n));
  return est;
}

double MarkMoments::e_sigma() const {
  return expect([](double s, double) { return s; });
}
double MarkMoments::e_sigma2() const {
  return expect([](double s, double) { return s * s; });
}
double MarkMoments::e_sigma2_over_tau() const {
  return expect([](double s, double t) { return sq_over_tau(s, t); });
}
double MarkMoments::e_sigma2_tau() const {
  return expect([](double s, double t) { return s * s * t; });
}
double MarkMoments::e_sigma_tau() const {
  return expect([](double s, double t) { return s * t; });
}
double MarkMoments::e_tau() const {
  return expect([](double, double t) { return t; });
}

double stationary_mean(const MarkMoments& m, double sigma_hat_expectation) {
  return m.lambda() * sigma_hat_expectation;
}

double var_exact(const MarkMoments& m) {
  return m.lambda() * m.e_sigma2_over_tau();
}

double var_x_exact(const MarkMoments& m) {
  return m.lambda() * m.e_sigma2_tau() / 3.0;
}

double cost_soft_demand(const MarkMoments& m, double C) {
  if (!(C >= 0.0))
    throw std::invalid_argument("cost_soft_demand: C must be >= 0");
  const double half_c = 0.5 * C;
  return m.lambda() * m.expect([&](double s, double t) {
    if (ratio_of(s, t) <= half_c) return sq_over_tau(s, t);
    return C * (s - 0.25 * C * t);
  });
}

double cost_soft_deadline(const MarkMoments& m, double eps) {
  if (!(eps >= 0.0))
    throw std::invalid_argument("cost_soft_deadline: eps must be >= 0");
  const double root_eps = std::sqrt(eps);
  return m.lambda() * m.expect([&](double s, double t) {
    if (ratio_of(s, t) <= root_eps) return sq_over_tau(s, t);
    return 2.0 * root_eps * s - eps * t;
  });
}

double cost_ges(const MarkMoments& m, double C, double eps) {
  if (!(C >= 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("cost_ges: C and eps must be >= 0");
  const double half_c = 0.5 * C;
  const double root_eps = std::sqrt(eps);
  return m.lambda() * m.expect([&](double s, double t) {
    switch (ges_branch(s, t, half_c, root_eps)) {
      case 1:
        return sq_over_tau(s, t);
      case 2:
        return C * (s - 0.25 * C * t);
      default:
        return 2.0 * root_eps * s - eps * t;
    }
  });
}

namespace {

// Shared alpha/beta expectations for the matched-backlog ratio bound and the
// price-capped policy's backlog variance.
struct AlphaBeta {
  double alpha;
  double beta;
};

AlphaBeta ges_alpha_beta(const MarkMoments& m, double C, double eps) {
  const double half_c = 0.5 * C;
  const double root_eps = std::sqrt(eps);
  AlphaBeta ab;
  ab.alpha = m.expect([&](double s, double t) {
    switch (ges_branch(s, t, half_c, root_eps)) {
      case 1:
        return sq_over_tau(s, t);
      case 2:
        return C * (root_eps - 0.25 * C * t);
      default:
        return 2.0 * root_eps * s - eps * t;
    }
  });
  ab.beta = m.expect([&](double s, double t) {
    switch (ges_branch(s, t, half_c, root_eps)) {
      case 1:
        return s * s * t / 3.0;
      case 2:
        return C * C * t * t * t / 12.0 - 0.5 * C * s * t * t + s * s * t;
      default:
        return s * s * s / (3.0 * root_eps);
    }
  });
  return ab;
}

}  // namespace

double var_x_ges(const MarkMoments& m, double C, double eps) {
  if (!(C >= 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("var_x_ges: C and eps must be >= 0");
  return m.lambda() * ges_alpha_beta(m, C, eps).beta;
}

double lower_bound_centralized(const MarkMoments& m, double D) {
  if (!(D > 0.0))
    throw std::invalid_argument(
        "lower_bound_centralized: backlog variance D must be positive");
  return sq(m.lambda() * m.e_sigma2()) / (4.0 * D);
}

RatioBounds ratio_bound_exact(const MarkMoments& m) {
  RatioBounds b;
  const double denom = sq(m.e_sigma2());
  if (!(denom > 0.0)) {
    b.general = b.matched_var_x = kInf;
    return b;
  }
  b.general = 4.0 * m.e_sigma2_over_tau() *
              (m.e_sigma2_tau() + m.lambda() * sq(m.e_sigma_tau())) / denom;
  b.matched_var_x =
      (4.0 / 3.0) * m.e_sigma2_over_tau() * m.e_sigma2_tau() / denom;
  return b;
}

double ratio_bound_ges(const MarkMoments& m, double C, double eps) {
  if (!(C >= 0.0) || !(eps >= 0.0))
    throw std::invalid_argument("ratio_bound_ges: C and eps must be >= 0");
  const double denom = sq(m.e_sigma2());
  if (!(denom > 0.0)) return kInf;
  const AlphaBeta ab = ges_alpha_beta(m, C, eps);
  return 4.0 * ab.alpha * ab.beta / denom;
}

double unknown_degradation(const MarkMoments& m, double p_unknown,
                           ServiceMode mode, double c) {
  if (!(p_unknown >= 0.0 && p_unknown <= 1.0))
    throw std::invalid_argument(
        "unknown_degradation: p_unknown must lie in [0, 1]");
  if (!(c >= 0.0))
    throw std::invalid_argument("unknown_degradation: c must be >= 0");
  if (mode == ServiceMode::Strict)
    throw std::invalid_argument(
        "unknown_degradation: only soft modes admit hidden deadlines");
  const double term = m.expect([&](double s, double t) {
    if (mode == ServiceMode::SoftDemand) {
      // flat rate c until the window closes or the demand runs out
      const double cover = c > 0.0 ? std::min(t, s / c) : (s > 0.0 ? t : 0.0);
      return c * c * cover - sq_over_tau(s, t);
    }
    // soft deadline: rate c until the demand is done, however late
    return c * s - sq_over_tau(s, t);
  });
  return p_unknown * term;
}

CampbellResult campbell_moments(
    const MarkMoments& m,
    const std::function<double(double, double, double)>& rate,
    const std::function<double(double, double)>& support, std::size_t grid) {
  if (grid == 0)
    throw std::invalid_argument("campbell_moments: grid must be positive");
  CampbellResult out;
  const std::vector<double>& sig = m.sigmas();
  const std::vector<double>& tau = m.taus();
  const std::size_t n = sig.size();
  // midpoint rule per mark; heavyweight, so pools are expected to be small.
  // Chunked partials keep the reduction order fixed under OpenMP.
  struct Pair {
    double mean, var;
  };
  std::vector<Pair> partial((n + kChunk - 1) / kChunk, {0.0, 0.0});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(partial.size());
       ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    double ms = 0.0, vs = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double s = sig[i], t = tau[i];
      const double L = support ? support(s, t) : t;
      if (!(L > 0.0)) continue;
      const double h = L / static_cast<double>(grid);
      double a0 = 0.0, a1 = 0.0;
      for (std::size_t j = 0; j < grid; ++j) {
        const double v = rate(s, t, (static_cast<double>(j) + 0.5) * h);
        a0 += v;
        a1 += v * v;
      }
      ms += a0 * h;
      vs += a1 * h;
    }
    partial[static_cast<std::size_t>(c)] = {ms, vs};
  }
  double mean_sum = 0.0, var_sum = 0.0;
  for (const auto& p : partial) {
    mean_sum += p.mean;
    var_sum += p.var;
  }
  out.mean = m.lambda() * mean_sum / static_cast<double>(n);
  out.variance = m.lambda() * var_sum / static_cast<double>(n);
  if (!std::isfinite(out.mean) || !std::isfinite(out.variance))
    throw std::runtime_error("campbell_moments: integral is not finite");
  return out;
}

std::vector<std::string> threshold_warnings(double C, double eps) {
  std::vector<std::string> notes;
  std::ostringstream msg;
  msg.precision(6);
  if (std::isfinite(C) && 0.5 * C > 1.0) {
    msg << "demand-price threshold C/2 = " << 0.5 * C
        << " exceeds the unit rate cap; closed forms assume unclamped rates";
    notes.push_back(msg.str());
    msg.str("");
  }
  if (std::isfinite(eps) && std::sqrt(eps) > 1.0) {
    msg << "lateness-price threshold sqrt(eps) = " << std::sqrt(eps)
        << " exceeds the unit rate cap; closed forms assume unclamped rates";
    notes.push_back(msg.str());
  }
  return notes;
}

}  // namespace varsched
