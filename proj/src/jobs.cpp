#include "varsched/jobs.hpp"

#include <cmath>
#include <sstream>

namespace varsched {

std::vector<Violation> validate_jobset(const JobSet& set) {
  std::vector<Violation> out;
  auto add = [&](Violation::Kind kind, std::size_t job, std::string msg) {
    out.push_back(Violation{kind, job, std::move(msg)});
  };
  for (std::size_t k = 0; k < set.jobs.size(); ++k) {
    const JobRequest& j = set.jobs[k];
    std::ostringstream where;
    where << "job " << k << " (arrival " << j.arrival << "): ";
    if (!(j.arrival >= 0.0))
      add(Violation::Kind::NegativeArrival, k,
          where.str() + "arrival must be >= 0");
    if (!(j.demand >= 0.0))
      add(Violation::Kind::NegativeDemand, k,
          where.str() + "demand must be >= 0");
    if (j.demand > j.sojourn)
      add(Violation::Kind::InfeasibleWindow, k,
          where.str() + "demand exceeds sojourn (not servable at rate <= 1)");
    if (j.deadline() > set.horizon)
      add(Violation::Kind::PastHorizon, k,
          where.str() + "deadline lies past the horizon");
    if (std::isnan(j.cost_demand) || j.cost_demand <= 0.0)
      add(Violation::Kind::BadCost, k,
          where.str() + "cost_demand must be positive (or +inf)");
    if (std::isnan(j.cost_deadline) || j.cost_deadline <= 0.0)
      add(Violation::Kind::BadCost, k,
          where.str() + "cost_deadline must be positive (or +inf)");
  }
  return out;
}

std::string violation_to_string(const Violation& v) { return v.message; }

}  // namespace varsched
