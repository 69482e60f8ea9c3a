#include "varsched/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "varsched/config.hpp"
#include "varsched/errors.hpp"

namespace varsched {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
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

double parse_cell(const std::string& cell, double empty_value,
                  const std::string& what, int lineno,
                  const std::string& name) {
  if (cell.empty()) return empty_value;
  try {
    return parse_double(cell);
  } catch (const std::exception&) {
    throw ValidationError(name + " line " + std::to_string(lineno) + ": " +
                          what + " is not a number: '" + cell + "'");
  }
}

bool parse_known(const std::string& cell, int lineno,
                 const std::string& name) {
  if (cell.empty() || cell == "1" || cell == "true") return true;
  if (cell == "0" || cell == "false") return false;
  throw ValidationError(name + " line " + std::to_string(lineno) +
                        ": known flag must be 0/1/true/false, got '" + cell +
                        "'");
}

}  // namespace

JobSet parse_trace_text(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  JobSet set;
  std::vector<std::string> bad_rows;

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!saw_header) {
      if (t.rfind("arrival,demand,sojourn", 0) != 0)
        throw ValidationError(
            name + " line " + std::to_string(lineno) +
            ": expected header starting with 'arrival,demand,sojourn'");
      saw_header = true;
      continue;
    }
    auto cells = split_csv(t);
    if (cells.size() < 3 || cells.size() > 6)
      throw ValidationError(name + " line " + std::to_string(lineno) +
                            ": expected 3 to 6 columns, got " +
                            std::to_string(cells.size()));
    JobRequest j;
    j.arrival = parse_cell(cells[0], NAN, "arrival", lineno, name);
    j.demand = parse_cell(cells[1], NAN, "demand", lineno, name);
    j.sojourn = parse_cell(cells[2], NAN, "sojourn", lineno, name);
    if (std::isnan(j.arrival) || std::isnan(j.demand) || std::isnan(j.sojourn))
      throw ValidationError(name + " line " + std::to_string(lineno) +
                            ": arrival, demand and sojourn are required");
    j.cost_demand = cells.size() > 3
                        ? parse_cell(cells[3], kInf, "cost_demand", lineno,
                                     name)
                        : kInf;
    j.cost_deadline = cells.size() > 4
                          ? parse_cell(cells[4], kInf, "cost_deadline", lineno,
                                       name)
                          : kInf;
    j.known = cells.size() > 5 ? parse_known(cells[5], lineno, name) : true;

    if (j.arrival < 0.0 || j.demand < 0.0 || j.demand > j.sojourn ||
        j.cost_demand <= 0.0 || j.cost_deadline <= 0.0) {
      std::ostringstream why;
      why << "line " << lineno << " (arrival " << j.arrival << "): ";
      if (j.arrival < 0.0) why << "negative arrival; ";
      if (j.demand < 0.0) why << "negative demand; ";
      if (j.demand > j.sojourn) why << "demand exceeds sojourn; ";
      if (j.cost_demand <= 0.0 || j.cost_deadline <= 0.0)
        why << "costs must be positive; ";
      bad_rows.push_back(why.str());
    }
    set.jobs.push_back(j);
  }

  if (!saw_header)
    throw ValidationError(name + ": empty trace (no header found)");
  if (!bad_rows.empty()) {
    std::ostringstream msg;
    msg << name << ": " << bad_rows.size() << " invalid row(s):";
    for (const auto& r : bad_rows) msg << "\n  " << r;
    throw ValidationError(msg.str());
  }

  std::stable_sort(set.jobs.begin(), set.jobs.end(),
                   [](const JobRequest& a, const JobRequest& b) {
                     return a.arrival < b.arrival;
                   });
  set.horizon = 0.0;
  for (const auto& j : set.jobs)
    set.horizon = std::max(set.horizon, j.deadline());
  return set;
}

JobSet load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace_text(buf.str(), path);
}

void save_trace(const JobSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace file: " + path);
  out << "arrival,demand,sojourn,cost_demand,cost_deadline,known\n";
  out.precision(17);
  for (const auto& j : set.jobs) {
    out << j.arrival << "," << j.demand << "," << j.sojourn << ",";
    if (j.cost_demand != kInf) out << j.cost_demand;
    out << ",";
    if (j.cost_deadline != kInf) out << j.cost_deadline;
    out << "," << (j.known ? 1 : 0) << "\n";
  }
}

}  // namespace varsched
