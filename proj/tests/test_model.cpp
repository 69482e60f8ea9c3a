#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "varsched/arrivals.hpp"
#include "varsched/errors.hpp"
#include "varsched/jobs.hpp"
#include "varsched/trace_io.hpp"

using namespace varsched;

namespace {

ArrivalModel grid1(double p, double step, double horizon, Dist demand,
                   double mean_laxity) {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::BernoulliGridI;
  m.p_arrival = p;
  m.step = step;
  m.horizon = horizon;
  m.marks.demand = demand;
  m.marks.sojourn = SojournRule::additive_laxity(mean_laxity);
  return m;
}

ArrivalModel poisson(double rate, double horizon, Dist demand,
                     SojournRule sojourn) {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::StationaryPoisson;
  m.rate = rate;
  m.horizon = horizon;
  m.marks.demand = demand;
  m.marks.sojourn = sojourn;
  return m;
}

bool same_jobs(const JobSet& a, const JobSet& b) {
  if (a.jobs.size() != b.jobs.size()) return false;
  for (std::size_t i = 0; i < a.jobs.size(); ++i) {
    const auto &x = a.jobs[i], &y = b.jobs[i];
    if (x.arrival != y.arrival || x.demand != y.demand ||
        x.sojourn != y.sojourn || x.cost_demand != y.cost_demand ||
        x.cost_deadline != y.cost_deadline || x.known != y.known)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("saturated unit grid produces one unit job per slot") {
  auto set = sample_arrivals(grid1(1.0, 1.0, 3.0, Dist::constant(1.0), 0.0), 1);
  REQUIRE(set.jobs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(set.jobs[i].arrival == double(i));
    CHECK(set.jobs[i].demand == 1.0);
    CHECK(set.jobs[i].sojourn == 1.0);
    CHECK(set.jobs[i].known);
    CHECK(set.jobs[i].cost_demand == kInf);
  }
  CHECK(set.dropped_past_horizon == 0);
}

TEST_CASE("Poisson arrival count lands in the 3-sigma band") {
  // rate 2 over horizon 1e4 with unit demand, sojourn 2: jobs arriving in the
  // last 2 time units are dropped, so the count is Poisson with mean ~19996;
  // the frozen band below is mean 2e4 +- 3 sigma (rounded outward).
  auto set = sample_arrivals(
      poisson(2.0, 1e4, Dist::constant(1.0), SojournRule::constant(2.0)), 7);
  CHECK(set.jobs.size() >= 19576);
  CHECK(set.jobs.size() <= 20424);
}

TEST_CASE("identical model and seed reproduce the job set exactly") {
  auto m = poisson(1.5, 500.0, Dist::uniform(1.0, 2.0),
                   SojournRule::additive_laxity(3.0));
  m.marks.cost_demand = Dist::uniform(0.5, 2.0);
  m.marks.known_prob = 0.7;
  auto a = sample_arrivals(m, 99);
  auto b = sample_arrivals(m, 99);
  CHECK(same_jobs(a, b));
  auto c = sample_arrivals(m, 100);
  CHECK_FALSE(same_jobs(a, c));
}

TEST_CASE("every sampled job is feasible and inside the horizon") {
  // Uniform sojourn can fall below the demand; those draws must be rejected
  // and resampled, never emitted.
  auto m = poisson(1.0, 2000.0, Dist::uniform(1.0, 4.0),
                   SojournRule::uniform(2.0, 6.0));
  auto set = sample_arrivals(m, 5);
  CHECK(set.mark_resamples > 0);
  for (const auto& j : set.jobs) {
    CHECK(j.demand <= j.sojourn);
    CHECK(j.deadline() <= set.horizon);
    CHECK(j.arrival >= 0.0);
  }
  CHECK(validate_jobset(set).empty());
}

TEST_CASE("sampled demand mean matches the distribution within 1%") {
  auto m = poisson(2.0, 60000.0, Dist::uniform(10.0, 20.0),
                   SojournRule::additive_laxity(5.0));
  auto set = sample_arrivals(m, 11);
  REQUIRE(set.jobs.size() > 100000);
  double mean = 0.0;
  for (const auto& j : set.jobs) mean += j.demand;
  mean /= double(set.jobs.size());
  CHECK(std::abs(mean - 15.0) < 0.15);
}

TEST_CASE("grid II sojourns are bounded stretches of the demand") {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::BernoulliGridII;
  m.p_arrival = 0.3;
  m.step = 1.0;
  m.horizon = 5000.0;
  m.marks.demand = Dist::uniform(10.0, 20.0);
  m.marks.sojourn = SojournRule::multiplicative_stretch(2.0);
  auto set = sample_arrivals(m, 13);
  REQUIRE(set.jobs.size() > 500);
  for (const auto& j : set.jobs) {
    CHECK(j.sojourn >= j.demand);
    CHECK(j.sojourn <= 2.0 * j.demand + 1e-12);
    CHECK(std::fmod(j.arrival, 1.0) == 0.0);
  }
}

TEST_CASE("nonstationary intensity shifts arrivals between segments") {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::NonstationaryPoisson;
  m.horizon = 200.0;
  m.rate_times = {0.0, 100.0};
  m.rate_values = {1.0, 3.0};
  m.marks.demand = Dist::constant(0.5);
  m.marks.sojourn = SojournRule::constant(1.0);
  auto set = sample_arrivals(m, 17);
  int lo = 0, hi = 0;
  for (const auto& j : set.jobs) (j.arrival < 100.0 ? lo : hi)++;
  CHECK(std::abs(lo - 100) < 50);   // Poisson(100), 5 sigma
  CHECK(std::abs(hi - 297) < 90);   // Poisson(~297 after horizon drops)
  CHECK(m.arrival_rate() == doctest::Approx(2.0));
}

TEST_CASE("model validation rejects bad parameters") {
  auto m = poisson(2.0, 100.0, Dist::constant(1.0), SojournRule::constant(2.0));
  m.rate = -1.0;
  CHECK_THROWS_AS(sample_arrivals(m, 1), std::invalid_argument);
  m.rate = 1.0;
  m.horizon = 0.0;
  CHECK_THROWS_AS(sample_arrivals(m, 1), std::invalid_argument);
}

TEST_CASE("validate_jobset reports each broken invariant") {
  JobSet set;
  set.horizon = 10.0;
  set.jobs.push_back({0.0, 2.0, 1.0, kInf, kInf, true});   // demand > sojourn
  set.jobs.push_back({-1.0, 1.0, 2.0, kInf, kInf, true});  // negative arrival
  set.jobs.push_back({9.0, 1.0, 2.0, kInf, kInf, true});   // past horizon
  set.jobs.push_back({0.0, 1.0, 2.0, 0.0, kInf, true});    // bad cost
  auto v = validate_jobset(set);
  REQUIRE(v.size() == 4);
  CHECK(v[0].kind == Violation::Kind::InfeasibleWindow);
  CHECK(v[1].kind == Violation::Kind::NegativeArrival);
  CHECK(v[2].kind == Violation::Kind::PastHorizon);
  CHECK(v[3].kind == Violation::Kind::BadCost);
  CHECK(v[0].job == 0);
}

TEST_CASE("trace parsing fills defaults for empty columns") {
  auto set = parse_trace_text(
      "arrival,demand,sojourn,cost_demand,cost_deadline,known\n"
      "0.0,1.0,2.0,,\n",
      "test");
  REQUIRE(set.jobs.size() == 1);
  const auto& j = set.jobs[0];
  CHECK(j.arrival == 0.0);
  CHECK(j.demand == 1.0);
  CHECK(j.sojourn == 2.0);
  CHECK(j.cost_demand == kInf);
  CHECK(j.cost_deadline == kInf);
  CHECK(j.known);
  CHECK(set.horizon == 2.0);
}

TEST_CASE("trace parsing reports infeasible rows by line number") {
  try {
    parse_trace_text(
        "arrival,demand,sojourn,cost_demand,cost_deadline,known\n"
        "0.0,1.0,2.0,,,\n"
        "0.0,2.0,1.0,,,\n",
        "test");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("demand exceeds sojourn") != std::string::npos);
  }
}

TEST_CASE("trace parsing reports malformed cells by line number") {
  try {
    parse_trace_text(
        "arrival,demand,sojourn,cost_demand,cost_deadline,known\n"
        "0.0,abc,2.0,,,\n",
        "test");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_trace_text("bogus\n", "t"), ValidationError);
}

TEST_CASE("loaded traces come back sorted by arrival") {
  auto set = parse_trace_text(
      "arrival,demand,sojourn\n"
      "5.0,1.0,2.0\n"
      "1.0,0.5,1.0\n"
      "3.0,1.0,4.0\n",
      "test");
  REQUIRE(set.jobs.size() == 3);
  CHECK(set.jobs[0].arrival == 1.0);
  CHECK(set.jobs[1].arrival == 3.0);
  CHECK(set.jobs[2].arrival == 5.0);
  CHECK(set.horizon == 7.0);
}

TEST_CASE("trace save/load round trip preserves jobs") {
  auto m = poisson(1.0, 300.0, Dist::uniform(1.0, 2.0),
                   SojournRule::additive_laxity(2.0));
  m.marks.cost_demand = Dist::constant(2.0);
  m.marks.known_prob = 0.5;
  auto set = sample_arrivals(m, 23);
  const std::string path = "roundtrip_trace.csv";
  save_trace(set, path);
  auto back = load_trace(path);
  std::remove(path.c_str());
  CHECK(same_jobs(set, back));
}

TEST_CASE("model file save/load round trip samples identically") {
  ArrivalModel m;
  m.kind = ArrivalModel::Kind::BernoulliGridII;
  m.p_arrival = 0.2;
  m.step = 1.0;
  m.horizon = 400.0;
  m.marks.demand = Dist::uniform(10.0, 20.0);
  m.marks.sojourn = SojournRule::multiplicative_stretch(2.0);
  const std::string path = "roundtrip_model.cfg";
  save_model_file(m, path);
  auto back = load_model_file(path);
  std::remove(path.c_str());
  CHECK(same_jobs(sample_arrivals(m, 3), sample_arrivals(back, 3)));
  CHECK(back.arrival_rate() == doctest::Approx(0.2));
}
