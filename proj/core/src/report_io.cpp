// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <sstream>

#include "cdc/analytics.hpp"
#include "json.hpp"

namespace cdc {

using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

ordered_json summary_json(const LatencySummary& s) {
  return {{"count", s.count}, {"mean_ms", s.mean}, {"p50_ms", s.p50},
          {"p90_ms", s.p90},  {"p99_ms", s.p99},   {"max_ms", s.max}};
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw ParseError("unknown report format '" + std::string(text) + "' (csv, json)");
}

std::string histogram_csv(const LatencyHistogram& h) {
  std::string out = "bin_start,bin_end,count\n";
  for (std::size_t k = 0; k < h.bins.size(); ++k) {
    out += num(static_cast<double>(k) * h.bin_width) + "," + num(static_cast<double>(k + 1) * h.bin_width) + "," +
           std::to_string(h.bins[k]) + "\n";
  }
  return out;
}

std::string to_json(const LatencyHistogram& h) {
  ordered_json doc;
  doc["bin_width_ms"] = h.bin_width;
  doc["bins"] = h.bins;
  doc["total"] = h.total;
  doc["mean_ms"] = h.mean;
  doc["p50_ms"] = h.p50;
  doc["p90_ms"] = h.p90;
  doc["p99_ms"] = h.p99;
  return doc.dump(2) + "\n";
}

std::string to_json(const CoverageReport& r) {
  ordered_json doc;
  doc["scheme"] = std::string(to_string(r.scheme));
  doc["definition"] = "fraction of base devices whose single failure is tolerated";
  doc["budget"] = r.budget;
  doc["covered"] = r.covered;
  doc["total"] = r.total;
  doc["fraction"] = r.fraction;
  doc["assignment"] = ordered_json::array();
  for (const auto& p : r.assignment) {
    ordered_json jp;
    jp["kind"] = p.kind == Protection::Kind::Coded ? "coded" : "duplicate";
    jp["stage"] = p.stage;
    if (p.kind == Protection::Kind::Duplicate) jp["device"] = p.device;
    doc["assignment"].push_back(std::move(jp));
  }
  return doc.dump(2) + "\n";
}

CoverageReport coverage_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    CoverageReport r;
    r.scheme = parse_scheme(doc.at("scheme").get<std::string>());
    r.budget = doc.at("budget").get<std::size_t>();
    r.covered = doc.at("covered").get<std::size_t>();
    r.total = doc.at("total").get<std::size_t>();
    r.fraction = doc.at("fraction").get<double>();
    for (const auto& jp : doc.at("assignment")) {
      Protection p;
      p.kind = jp.at("kind").get<std::string>() == "coded" ? Protection::Kind::Coded : Protection::Kind::Duplicate;
      p.stage = jp.at("stage").get<std::size_t>();
      p.device = jp.value("device", std::size_t{0});
      r.assignment.push_back(p);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("coverage report: ") + e.what());
  }
}

std::string coverage_csv(std::span<const CoverageReport> rows) {
  std::string out = "scheme,budget,covered,total,fraction\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.scheme)) + "," + std::to_string(r.budget) + "," + std::to_string(r.covered) +
           "," + std::to_string(r.total) + "," + num(r.fraction) + "\n";
  }
  return out;
}

std::string to_json(const DecodabilityReport& r) {
  ordered_json doc;
  doc["n"] = r.n;
  doc["groups"] = r.groups;
  doc["rows"] = ordered_json::array();
  for (const auto& row : r.rows) {
    doc["rows"].push_back({{"failures", row.failures},
                           {"total", row.total},
                           {"recoverable", row.recoverable},
                           {"fraction", row.fraction}});
  }
  return doc.dump(2) + "\n";
}

std::string decodability_csv(const DecodabilityReport& r) {
  std::string out = "failures,total,recoverable,fraction\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.failures) + "," + std::to_string(row.total) + "," + std::to_string(row.recoverable) +
           "," + num(row.fraction) + "\n";
  }
  return out;
}

std::string to_json(const RunReport& r) {
  ordered_json doc;
  doc["model"] = r.model;
  doc["policy"] = r.policy;
  doc["threshold_ms"] = r.threshold_ms;
  doc["seed"] = r.seed;
  doc["latency"] = r.latency;
  doc["failures"] = r.failures;
  doc["summary"] = summary_json(r.summary);
  doc["totals"] = {{"requests", r.requests.size()},
                   {"stage_timeouts", r.stage_timeouts},
                   {"lost_requests", r.lost_requests},
                   {"decode_events", r.decode_events},
                   {"fallback_switches", r.fallback_switches},
                   {"late_partials", r.late_partials},
                   {"output_mismatches", r.output_mismatches},
                   {"dropped_messages", r.dropped_messages}};
  doc["requests"] = ordered_json::array();
  for (const auto& q : r.requests) {
    ordered_json jq;
    jq["id"] = q.id;
    jq["allocation"] = q.allocation;
    jq["start_ms"] = q.start_ms;
    jq["end_ms"] = q.end_ms;
    jq["latency_ms"] = q.latency_ms;
    jq["completed"] = q.completed;
    jq["output_ok"] = q.output_ok;
    jq["max_rel_error"] = q.max_rel_error;
    jq["stage_timeouts"] = q.stage_timeouts;
    jq["fallbacks"] = ordered_json::array();
    for (const auto& f : q.fallbacks) {
      jq["fallbacks"].push_back(
          {{"at_ms", f.at_ms}, {"from", f.from_allocation}, {"to", f.to_allocation}, {"suspected", f.suspected}});
    }
    jq["stages"] = ordered_json::array();
    for (const auto& s : q.stages) {
      ordered_json js;
      js["stage"] = s.stage;
      js["layers"] = s.layers;
      js["start_ms"] = s.start_ms;
      js["collected_ms"] = s.collected_ms;
      js["done_ms"] = s.done_ms;
      js["complete"] = s.complete;
      js["decoded"] = s.decoded;
      js["decode_ops"] = s.decode_ops;
      js["arrivals"] = ordered_json::array();
      for (const auto& a : s.arrivals) {
        ordered_json ja;
        ja["device"] = a.device;
        ja["coded"] = a.coded;
        ja["at_ms"] = a.at_ms ? ordered_json(*a.at_ms) : ordered_json(nullptr);
        ja["used"] = a.used;
        ja["late"] = a.late;
        js["arrivals"].push_back(std::move(ja));
      }
      jq["stages"].push_back(std::move(js));
    }
    doc["requests"].push_back(std::move(jq));
  }
  return doc.dump(2) + "\n";
}

std::string latency_csv(const RunReport& r) {
  std::string out = "request,allocation,start_ms,end_ms,latency_ms,completed,decode_events,stage_timeouts\n";
  for (const auto& q : r.requests) {
    std::size_t decoded = 0;
    for (const auto& s : q.stages) decoded += s.decoded.size();
    out += std::to_string(q.id) + "," + std::to_string(q.allocation) + "," + num(q.start_ms) + "," + num(q.end_ms) +
           "," + num(q.latency_ms) + "," + (q.completed ? "1" : "0") + "," + std::to_string(decoded) + "," +
           std::to_string(q.stage_timeouts) + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.empty()) throw IoError("report path is empty");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void emit_report(const LatencyHistogram& h, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::Csv ? histogram_csv(h) : to_json(h));
}

void emit_report(const CoverageReport& r, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::Csv ? coverage_csv(std::span<const CoverageReport>(&r, 1)) : to_json(r));
}

void emit_report(const DecodabilityReport& r, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::Csv ? decodability_csv(r) : to_json(r));
}

void emit_report(const RunReport& r, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::Csv ? latency_csv(r) : to_json(r));
}

}  // namespace cdc
