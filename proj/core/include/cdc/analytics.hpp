// SPDX-License-Identifier: Apache-2.0
//
// Latency histograms, slowdown ratios, redundancy coverage and report files.
//
// Coverage is the fraction of base devices whose single failure the system
// tolerates. A duplicate (2MR) protects one device; a coded device on a
// code-suitable model-parallel stage protects every device of that stage.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdc/coder.hpp"
#include "cdc/latency.hpp"
#include "cdc/runtime.hpp"

namespace cdc {

struct LatencyHistogram {
  double bin_width = 1.0;
  std::vector<std::uint64_t> bins;  // bin k covers [k*w, (k+1)*w)
  std::uint64_t total = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

// Samples must be >= 0. Nearest-rank percentiles. Throws EmptySamples.
LatencyHistogram histogram(std::span<const double> samples_ms, double bin_width_ms);

// Nearest-rank q-quantile (0 < q <= 1) of unsorted samples.
double nearest_rank(std::span<const double> samples, double q);

struct TopologyStage {
  std::size_t devices = 1;
  bool model_parallel = false;
  bool cdc_suitable = false;
  friend bool operator==(const TopologyStage&, const TopologyStage&) = default;
};

struct SystemTopology {
  std::string name;
  std::vector<TopologyStage> stages;

  std::size_t total_devices() const;
  void validate() const;
  friend bool operator==(const SystemTopology&, const SystemTopology&) = default;
};

// {"name": ..., "stages": [{"devices": 2, "model_parallel": true, "cdc_suitable": true}]}
SystemTopology parse_topology(std::string_view json_text);
SystemTopology load_topology(const std::filesystem::path& path);

enum class Scheme : std::uint8_t { TwoMR, CdcPlusTwoMR };
std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);

struct Protection {
  enum class Kind : std::uint8_t { Duplicate, Coded };
  Kind kind = Kind::Duplicate;
  std::size_t stage = 0;
  std::size_t device = 0;  // Duplicate only: index within the stage
  friend bool operator==(const Protection&, const Protection&) = default;
};

struct CoverageReport {
  Scheme scheme = Scheme::TwoMR;
  std::size_t budget = 0;
  std::size_t covered = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  std::vector<Protection> assignment;
  friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};

// Greedy: codes on the largest suitable stages, then duplicates.
CoverageReport coverage(const SystemTopology& topology, Scheme scheme, std::size_t budget);

// Tries every single-device failure against the assignment; returns how many
// are tolerated. Throws InvalidArgument for an assignment the scheme forbids.
std::size_t tolerated_failures(const SystemTopology& topology, Scheme scheme, std::span<const Protection> assignment);

// after.mean / before.mean over completed requests. Throws EmptySamples.
double slowdown(const RunReport& before, const RunReport& after);
double slowdown(std::span<const double> before_ms, std::span<const double> after_ms);

// Requests served before the first fallback switch, and requests that ran
// entirely on the fallback allocation (the switching request is in neither).
std::pair<std::vector<double>, std::vector<double>> split_at_fallback(const RunReport& report);

// Lognormal with the given sigma whose q-quantile is x_ms.
LogNormal lognormal_with_quantile(double x_ms, double q, double sigma);
double lognormal_cdf(const LogNormal& dist, double x_ms);

// Report files. All writers produce a fixed field order.
enum class ReportFormat : std::uint8_t { Csv, Json };
ReportFormat parse_report_format(std::string_view text);

std::string histogram_csv(const LatencyHistogram& h);
std::string to_json(const LatencyHistogram& h);
std::string to_json(const CoverageReport& r);
CoverageReport coverage_from_json(std::string_view text);
std::string coverage_csv(std::span<const CoverageReport> rows);
std::string to_json(const DecodabilityReport& r);
std::string decodability_csv(const DecodabilityReport& r);
std::string to_json(const RunReport& r);
std::string latency_csv(const RunReport& r);

// Throws IoError for an empty path or a failed write.
void write_text(const std::filesystem::path& path, std::string_view text);

void emit_report(const LatencyHistogram& h, ReportFormat format, const std::filesystem::path& path);
void emit_report(const CoverageReport& r, ReportFormat format, const std::filesystem::path& path);
void emit_report(const DecodabilityReport& r, ReportFormat format, const std::filesystem::path& path);
void emit_report(const RunReport& r, ReportFormat format, const std::filesystem::path& path);

}  // namespace cdc
