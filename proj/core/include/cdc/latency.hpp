// SPDX-License-Identifier: Apache-2.0
//
// Link latency and failure injection for the virtual-clock simulator, plus
// the named RNG substreams every random draw comes from.
//
// Spec grammars (CLI-facing):
//   latency   det:10 | uniform:5..50 | lognorm:mu,sigma | emp:path
//             (lognorm parameters are of ln(ms); emp reads whitespace- or
//             comma-separated millisecond samples)
//   failures  "" | none | <dev>:perm@<t> | <dev>:down@<t0>..<t1> | <dev>:drop@<p>
//             joined with ';', e.g. "3:perm@0;2:down@100..500;1:drop@0.1"

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cdc {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed of the substream named by `tags` under `seed`; distinct tag lists give
// independent-looking streams and adding a tag never shifts another stream.
std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;

inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  return std::mt19937_64(stream_seed(seed, tags));
}

struct Deterministic {
  double ms = 0.0;
};
struct Uniform {
  double lo = 0.0;
  double hi = 0.0;
};
struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;
};
struct Empirical {
  std::vector<double> samples;
};
using LatencyDist = std::variant<Deterministic, Uniform, LogNormal, Empirical>;

void validate(const LatencyDist& dist);
double sample(const LatencyDist& dist, std::mt19937_64& rng);
double mean(const LatencyDist& dist);
std::string describe(const LatencyDist& dist);

// Relative emp: paths resolve against base_dir.
LatencyDist parse_latency(std::string_view spec, const std::filesystem::path& base_dir = {});

struct LatencyModel {
  LatencyDist base = Deterministic{0.0};
  // Per-device override of the device <-> coordinator link (both directions).
  std::map<std::uint32_t, LatencyDist> links;
  double ms_per_kib = 0.0;

  const LatencyDist& link(std::uint32_t device) const;
  // One sampled delay for a message of `bytes` over the device's link.
  double delay(std::uint32_t device, std::size_t bytes, std::mt19937_64& rng) const;
  void validate() const;
};

struct PermanentAt {
  double t_ms = 0.0;
};
struct DownInterval {
  double t0_ms = 0.0;
  double t1_ms = 0.0;
};
struct DropProbability {
  double p = 0.0;
};
using FailureEvent = std::variant<PermanentAt, DownInterval, DropProbability>;

struct FailureModel {
  std::map<std::uint32_t, std::vector<FailureEvent>> schedule;

  // Down permanently or inside a down interval (half-open [t0, t1)).
  bool is_down(std::uint32_t device, double t_ms) const;
  double drop_probability(std::uint32_t device) const;
  // Whether the device drops its results for the given request.
  bool drops(std::uint32_t device, std::uint64_t request, std::uint64_t seed) const;
  bool empty() const noexcept { return schedule.empty(); }
  void validate() const;
};

FailureModel parse_failures(std::string_view spec);
std::string to_string(const FailureModel& failures);

}  // namespace cdc
