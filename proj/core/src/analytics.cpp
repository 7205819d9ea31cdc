// SPDX-License-Identifier: Apache-2.0

#include "cdc/analytics.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace cdc {

double nearest_rank(std::span<const double> samples, double q) {
  if (samples.empty()) throw EmptySamples("no samples");
  if (!(q > 0.0) || q > 1.0) throw InvalidArgument("quantile must be in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
}

LatencyHistogram histogram(std::span<const double> samples_ms, double bin_width_ms) {
  if (!(bin_width_ms > 0)) throw InvalidArgument("bin width must be > 0");
  if (samples_ms.empty()) throw EmptySamples("histogram of zero samples");
  LatencyHistogram h;
  h.bin_width = bin_width_ms;
  double hi = 0.0;
  for (double s : samples_ms) {
    if (!(s >= 0) || !std::isfinite(s)) throw InvalidArgument("latency samples must be finite and >= 0");
    hi = std::max(hi, s);
  }
  h.bins.assign(static_cast<std::size_t>(std::floor(hi / bin_width_ms)) + 1, 0);
  for (double s : samples_ms) {
    const auto k = std::min(h.bins.size() - 1, static_cast<std::size_t>(std::floor(s / bin_width_ms)));
    ++h.bins[k];
  }
  h.total = samples_ms.size();
  h.mean = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(h.total);
  h.p50 = nearest_rank(samples_ms, 0.50);
  h.p90 = nearest_rank(samples_ms, 0.90);
  h.p99 = nearest_rank(samples_ms, 0.99);
  return h;
}

std::size_t SystemTopology::total_devices() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.devices;
  return n;
}

void SystemTopology::validate() const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].devices == 0) throw InvalidArgument("topology stage " + std::to_string(i) + " has no devices");
    if (stages[i].cdc_suitable && !stages[i].model_parallel) {
      throw InvalidArgument("topology stage " + std::to_string(i) + " is code-suitable but not model-parallel");
    }
  }
}

SystemTopology parse_topology(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_object() || !doc.contains("stages") || !doc.at("stages").is_array()) {
      throw ParseError("topology must be an object with a 'stages' array");
    }
    SystemTopology t;
    t.name = doc.value("name", std::string());
    for (const auto& js : doc.at("stages")) {
      TopologyStage s;
      if (!js.contains("devices") || !js.at("devices").is_number_unsigned()) {
        throw ParseError("topology stage needs a non-negative 'devices' count");
      }
      s.devices = js.at("devices").get<std::size_t>();
      s.model_parallel = js.value("model_parallel", s.devices > 1);
      s.cdc_suitable = js.value("cdc_suitable", false);
      t.stages.push_back(s);
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("topology: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
}

SystemTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open topology " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str());
}

std::string_view to_string(Scheme scheme) { return scheme == Scheme::TwoMR ? "2mr" : "cdc+2mr"; }

Scheme parse_scheme(std::string_view text) {
  if (text == "2mr") return Scheme::TwoMR;
  if (text == "cdc+2mr" || text == "cdc") return Scheme::CdcPlusTwoMR;
  throw ParseError("unknown scheme '" + std::string(text) + "' (2mr, cdc+2mr)");
}

namespace {

bool codable(const TopologyStage& s) { return s.cdc_suitable && s.model_parallel; }

}  // namespace

std::size_t tolerated_failures(const SystemTopology& topology, Scheme scheme, std::span<const Protection> assignment) {
  std::vector<bool> coded(topology.stages.size(), false);
  std::vector<std::vector<bool>> dup;
  for (const auto& s : topology.stages) dup.emplace_back(s.devices, false);
  for (const auto& p : assignment) {
    if (p.stage >= topology.stages.size()) throw InvalidArgument("protection names a missing stage");
    if (p.kind == Protection::Kind::Coded) {
      if (scheme != Scheme::CdcPlusTwoMR || !codable(topology.stages[p.stage])) {
        throw InvalidArgument("stage " + std::to_string(p.stage) + " cannot take a coded device");
      }
      coded[p.stage] = true;
    } else {
      if (p.device >= topology.stages[p.stage].devices) throw InvalidArgument("duplicate names a missing device");
      dup[p.stage][p.device] = true;
    }
  }
  std::size_t tolerated = 0;
  for (std::size_t s = 0; s < topology.stages.size(); ++s) {
    for (std::size_t d = 0; d < topology.stages[s].devices; ++d) {
      // Lose device (s, d): a duplicate takes over, or the stage's coded
      // device reconstructs its partial; otherwise the request fails.
      if (coded[s] || dup[s][d]) ++tolerated;
    }
  }
  return tolerated;
}

CoverageReport coverage(const SystemTopology& topology, Scheme scheme, std::size_t budget) {
  topology.validate();
  CoverageReport r;
  r.scheme = scheme;
  r.budget = budget;
  r.total = topology.total_devices();
  std::size_t left = budget;
  std::vector<bool> coded(topology.stages.size(), false);
  if (scheme == Scheme::CdcPlusTwoMR) {
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < topology.stages.size(); ++s) {
      if (codable(topology.stages[s]) && topology.stages[s].devices >= 2) order.push_back(s);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return topology.stages[a].devices > topology.stages[b].devices;
    });
    for (auto s : order) {
      if (left == 0) break;
      r.assignment.push_back({Protection::Kind::Coded, s, 0});
      coded[s] = true;
      --left;
    }
  }
  for (std::size_t s = 0; s < topology.stages.size() && left > 0; ++s) {
    if (coded[s]) continue;
    for (std::size_t d = 0; d < topology.stages[s].devices && left > 0; ++d) {
      r.assignment.push_back({Protection::Kind::Duplicate, s, d});
      --left;
    }
  }
  r.covered = tolerated_failures(topology, scheme, r.assignment);
  r.fraction = r.total == 0 ? 0.0 : static_cast<double>(r.covered) / static_cast<double>(r.total);
  return r;
}

double slowdown(std::span<const double> before_ms, std::span<const double> after_ms) {
  if (before_ms.empty() || after_ms.empty()) throw EmptySamples("slowdown needs samples on both sides");
  const double b = std::accumulate(before_ms.begin(), before_ms.end(), 0.0) / static_cast<double>(before_ms.size());
  const double a = std::accumulate(after_ms.begin(), after_ms.end(), 0.0) / static_cast<double>(after_ms.size());
  if (!(b > 0)) throw InvalidArgument("slowdown baseline mean must be > 0");
  return a / b;
}

double slowdown(const RunReport& before, const RunReport& after) {
  const auto b = completed_latencies(before);
  const auto a = completed_latencies(after);
  return slowdown(b, a);
}

std::pair<std::vector<double>, std::vector<double>> split_at_fallback(const RunReport& report) {
  std::pair<std::vector<double>, std::vector<double>> out;
  bool switched = false;
  for (const auto& r : report.requests) {
    if (!r.fallbacks.empty()) {
      switched = true;
      continue;
    }
    if (!r.completed) continue;
    (switched ? out.second : out.first).push_back(r.latency_ms);
  }
  return out;
}

LogNormal lognormal_with_quantile(double x_ms, double q, double sigma) {
  if (!(x_ms > 0) || !(q > 0 && q < 1) || !(sigma > 0)) {
    throw InvalidArgument("lognormal fit needs x > 0, 0 < q < 1, sigma > 0");
  }
  const boost::math::normal_distribution<double> z;
  return LogNormal{std::log(x_ms) - sigma * boost::math::quantile(z, q), sigma};
}

double lognormal_cdf(const LogNormal& dist, double x_ms) {
  if (x_ms <= 0) return 0.0;
  if (dist.sigma == 0) return std::log(x_ms) >= dist.mu ? 1.0 : 0.0;
  const boost::math::normal_distribution<double> z;
  return boost::math::cdf(z, (std::log(x_ms) - dist.mu) / dist.sigma);
}

}  // namespace cdc
