#pragma once

#include <string>

#include "varsched/jobs.hpp"

namespace varsched {

// Job trace CSV.  Header and column order are fixed:
//
//   arrival,demand,sojourn,cost_demand,cost_deadline,known
//
// Trailing columns may be empty or omitted: an empty cost means +inf (hard
// constraint), an empty known flag means true.  Loading sorts jobs by
// arrival and sets the horizon to the latest deadline.  Malformed rows are
// reported as ValidationError with their line numbers, as are rows whose
// demand exceeds their sojourn.
JobSet load_trace(const std::string& path);
JobSet parse_trace_text(const std::string& text, const std::string& name);
void save_trace(const JobSet& set, const std::string& path);

}  // namespace varsched
