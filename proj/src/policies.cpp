#include "varsched/policies.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace varsched {

PolicyConfig PolicyConfig::with_defaults() const {
  PolicyConfig pc = *this;
  if (std::isnan(pc.c)) pc.c = 0.5;
  if (std::isnan(pc.capacity)) pc.capacity = 1.0;
  return pc;
}

namespace {

ServiceMode mode_from_string(const std::string& s) {
  if (s == "strict") return ServiceMode::Strict;
  if (s == "soft_demand") return ServiceMode::SoftDemand;
  if (s == "soft_deadline") return ServiceMode::SoftDeadline;
  throw std::runtime_error("unknown service mode: '" + s +
                           "' (want strict|soft_demand|soft_deadline)");
}

std::string mode_to_string(ServiceMode m) {
  switch (m) {
    case ServiceMode::Strict:
      return "strict";
    case ServiceMode::SoftDemand:
      return "soft_demand";
    case ServiceMode::SoftDeadline:
      return "soft_deadline";
  }
  return "?";
}

std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

double arg_double(const std::vector<std::string>& parts, std::size_t i) {
  try {
    return std::stod(parts.at(i));
  } catch (const std::exception&) {
    throw std::runtime_error("bad numeric policy argument in '" +
                             parts.at(i) + "'");
  }
}

}  // namespace

PolicyConfig policy_from_string(const std::string& text) {
  auto parts = split_colon(text);
  const std::string& name = parts[0];
  auto nargs = parts.size() - 1;
  PolicyConfig pc;
  auto expect_args = [&](std::size_t lo, std::size_t hi) {
    if (nargs < lo || nargs > hi)
      throw std::runtime_error("policy '" + name + "' takes " +
                               std::to_string(lo) + ".." + std::to_string(hi) +
                               " arguments, got " + std::to_string(nargs));
  };
  if (name == "exact" || name == "immediate" || name == "delayed" ||
      name == "ges" || name == "offline" || name == "mpc") {
    expect_args(0, 0);
    pc.kind = name == "exact"       ? PolicyKind::Exact
              : name == "immediate" ? PolicyKind::Immediate
              : name == "delayed"   ? PolicyKind::Delayed
              : name == "ges"       ? PolicyKind::Ges
              : name == "offline"   ? PolicyKind::Offline
                                    : PolicyKind::Mpc;
    return pc;
  }
  if (name == "equal") {
    expect_args(1, 2);
    pc.kind = PolicyKind::EqualService;
    pc.mode = mode_from_string(parts[1]);
    if (nargs >= 2) pc.c = arg_double(parts, 2);
    return pc;
  }
  if (name == "espc") {
    expect_args(0, 2);
    pc.kind = PolicyKind::EsPc;
    if (nargs >= 1) pc.mu = arg_double(parts, 1);
    if (nargs >= 2) pc.p_bar = arg_double(parts, 2);
    return pc;
  }
  if (name == "edf" || name == "llf") {
    expect_args(1, 2);
    pc.kind = name == "edf" ? PolicyKind::Edf : PolicyKind::Llf;
    pc.mode = mode_from_string(parts[1]);
    if (pc.mode == ServiceMode::Strict)
      throw std::runtime_error("policy '" + name +
                               "' supports only the soft service modes");
    if (nargs >= 2) pc.capacity = arg_double(parts, 2);
    return pc;
  }
  if (name == "fair") {
    expect_args(1, 2);
    pc.kind = PolicyKind::FairSharing;
    pc.mode = mode_from_string(parts[1]);
    if (pc.mode == ServiceMode::Strict)
      throw std::runtime_error(
          "policy 'fair' supports only the soft service modes");
    if (nargs >= 2) pc.capacity = arg_double(parts, 2);
    return pc;
  }
  if (name == "ges_unknown") {
    expect_args(0, 1);
    pc.kind = PolicyKind::GesUnknown;
    if (nargs >= 1) pc.c = arg_double(parts, 1);
    return pc;
  }
  throw std::runtime_error("unknown policy: '" + name + "'");
}

std::string policy_to_string(const PolicyConfig& pc) {
  std::ostringstream out;
  auto num = [&](double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  };
  switch (pc.kind) {
    case PolicyKind::Exact:
      return "exact";
    case PolicyKind::Immediate:
      return "immediate";
    case PolicyKind::Delayed:
      return "delayed";
    case PolicyKind::Ges:
      return "ges";
    case PolicyKind::Offline:
      return "offline";
    case PolicyKind::Mpc:
      return "mpc";
    case PolicyKind::EqualService:
      out << "equal:" << mode_to_string(pc.mode);
      if (!std::isnan(pc.c)) out << ":" << num(pc.c);
      return out.str();
    case PolicyKind::EsPc:
      out << "espc:" << num(pc.mu);
      if (!std::isnan(pc.p_bar)) out << ":" << num(pc.p_bar);
      return out.str();
    case PolicyKind::Edf:
    case PolicyKind::Llf:
      out << (pc.kind == PolicyKind::Edf ? "edf:" : "llf:")
          << mode_to_string(pc.mode);
      if (!std::isnan(pc.capacity)) out << ":" << num(pc.capacity);
      return out.str();
    case PolicyKind::FairSharing:
      out << "fair:" << mode_to_string(pc.mode);
      if (!std::isnan(pc.capacity)) out << ":" << num(pc.capacity);
      return out.str();
    case PolicyKind::GesUnknown:
      out << "ges_unknown";
      if (!std::isnan(pc.c)) out << ":" << num(pc.c);
      return out.str();
  }
  return "?";
}

namespace {

bool eligible(const JobState& j, ServiceMode mode) {
  if (j.remaining_demand <= 0.0) return false;
  if (mode == ServiceMode::SoftDemand) return j.remaining_time > 0.0;
  return true;  // SoftDeadline (Strict callers filter beforehand)
}

}  // namespace

std::vector<double> assign_priority(std::span<const JobState> jobs,
                                    double capacity, PriorityOrder order,
                                    ServiceMode mode) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (eligible(jobs[i], mode)) idx.push_back(i);

  auto key = [&](std::size_t i) {
    return order == PriorityOrder::Deadline ? jobs[i].remaining_time
                                            : jobs[i].laxity();
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) < key(b);
    if (jobs[a].request.arrival != jobs[b].request.arrival)
      return jobs[a].request.arrival < jobs[b].request.arrival;
    return a < b;
  });

  std::vector<double> rates(jobs.size(), 0.0);
  double remaining = std::max(capacity, 0.0);
  for (std::size_t i : idx) {
    if (remaining <= 0.0) break;
    double give = std::min(1.0, remaining);
    rates[i] = give;
    remaining -= give;
  }
  return rates;
}

std::vector<double> assign_fair(std::span<const JobState> jobs,
                                double capacity, ServiceMode mode) {
  std::size_t n = 0;
  for (const auto& j : jobs) n += eligible(j, mode) ? 1 : 0;
  std::vector<double> rates(jobs.size(), 0.0);
  if (n == 0) return rates;
  double share = std::min(std::max(capacity, 0.0) / double(n), 1.0);
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (eligible(jobs[i], mode)) rates[i] = share;
  return rates;
}

}  // namespace varsched
