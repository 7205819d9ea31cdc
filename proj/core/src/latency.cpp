// SPDX-License-Identifier: Apache-2.0

#include "cdc/latency.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cdc/errors.hpp"

namespace cdc {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ull));
  return h;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, std::string_view context) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError("bad number '" + std::string(text) + "' in " + std::string(context));
  }
  return v;
}

std::uint32_t parse_device(std::string_view text, std::string_view context) {
  text = trim(text);
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("bad device id '" + std::string(text) + "' in " + std::string(context));
  }
  return v;
}

std::vector<double> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open latency samples " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream words(text);
  std::vector<double> out;
  std::string w;
  while (words >> w) out.push_back(parse_number(w, path.string()));
  return out;
}

}  // namespace

void validate(const LatencyDist& dist) {
  std::visit(
      [](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Deterministic>) {
          if (d.ms < 0) throw InvalidArgument("deterministic latency must be >= 0");
        } else if constexpr (std::is_same_v<D, Uniform>) {
          if (d.lo < 0 || d.hi < d.lo) throw InvalidArgument("uniform latency needs 0 <= lo <= hi");
        } else if constexpr (std::is_same_v<D, LogNormal>) {
          if (d.sigma < 0) throw InvalidArgument("lognormal sigma must be >= 0");
        } else {
          if (d.samples.empty()) throw InvalidArgument("empirical latency needs at least one sample");
          for (double s : d.samples) {
            if (s < 0) throw InvalidArgument("empirical latency samples must be >= 0");
          }
        }
      },
      dist);
}

double sample(const LatencyDist& dist, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return std::visit(
      [&](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Deterministic>) {
          return d.ms;
        } else if constexpr (std::is_same_v<D, Uniform>) {
          return d.lo + (d.hi - d.lo) * unit(rng);
        } else if constexpr (std::is_same_v<D, LogNormal>) {
          std::normal_distribution<double> z(0.0, 1.0);
          return std::exp(d.mu + d.sigma * z(rng));
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, d.samples.size() - 1);
          return d.samples[pick(rng)];
        }
      },
      dist);
}

double mean(const LatencyDist& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Deterministic>) {
          return d.ms;
        } else if constexpr (std::is_same_v<D, Uniform>) {
          return 0.5 * (d.lo + d.hi);
        } else if constexpr (std::is_same_v<D, LogNormal>) {
          return std::exp(d.mu + 0.5 * d.sigma * d.sigma);
        } else {
          return std::accumulate(d.samples.begin(), d.samples.end(), 0.0) / static_cast<double>(d.samples.size());
        }
      },
      dist);
}

std::string describe(const LatencyDist& dist) {
  std::ostringstream out;
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Deterministic>) {
          out << "det:" << d.ms;
        } else if constexpr (std::is_same_v<D, Uniform>) {
          out << "uniform:" << d.lo << ".." << d.hi;
        } else if constexpr (std::is_same_v<D, LogNormal>) {
          out << "lognorm:" << d.mu << "," << d.sigma;
        } else {
          out << "emp:" << d.samples.size() << " samples";
        }
      },
      dist);
  return out.str();
}

LatencyDist parse_latency(std::string_view spec, const std::filesystem::path& base_dir) {
  spec = trim(spec);
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ParseError("latency spec '" + std::string(spec) + "' lacks a kind");
  const auto kind = spec.substr(0, colon);
  const auto args = spec.substr(colon + 1);
  LatencyDist out;
  if (kind == "det") {
    out = Deterministic{parse_number(args, "det latency")};
  } else if (kind == "uniform") {
    const auto dots = args.find("..");
    if (dots == std::string_view::npos) throw ParseError("uniform latency expects lo..hi");
    out = Uniform{parse_number(args.substr(0, dots), "uniform latency"),
                  parse_number(args.substr(dots + 2), "uniform latency")};
  } else if (kind == "lognorm") {
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) throw ParseError("lognorm latency expects mu,sigma");
    out = LogNormal{parse_number(args.substr(0, comma), "lognorm latency"),
                    parse_number(args.substr(comma + 1), "lognorm latency")};
  } else if (kind == "emp") {
    std::filesystem::path p{std::string(trim(args))};
    if (p.empty()) throw ParseError("emp latency needs a sample file");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    out = Empirical{read_samples(p)};
  } else {
    throw ParseError("unknown latency kind '" + std::string(kind) + "'");
  }
  try {
    validate(out);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return out;
}

const LatencyDist& LatencyModel::link(std::uint32_t device) const {
  auto it = links.find(device);
  return it == links.end() ? base : it->second;
}

double LatencyModel::delay(std::uint32_t device, std::size_t bytes, std::mt19937_64& rng) const {
  const double d = sample(link(device), rng) + ms_per_kib * static_cast<double>(bytes) / 1024.0;
  return std::max(0.0, d);
}

void LatencyModel::validate() const {
  cdc::validate(base);
  for (const auto& [dev, d] : links) cdc::validate(d);
  if (ms_per_kib < 0) throw InvalidArgument("ms_per_kib must be >= 0");
}

bool FailureModel::is_down(std::uint32_t device, double t_ms) const {
  auto it = schedule.find(device);
  if (it == schedule.end()) return false;
  for (const auto& ev : it->second) {
    if (const auto* p = std::get_if<PermanentAt>(&ev); p && t_ms >= p->t_ms) return true;
    if (const auto* d = std::get_if<DownInterval>(&ev); d && t_ms >= d->t0_ms && t_ms < d->t1_ms) return true;
  }
  return false;
}

double FailureModel::drop_probability(std::uint32_t device) const {
  auto it = schedule.find(device);
  if (it == schedule.end()) return 0.0;
  double keep = 1.0;
  for (const auto& ev : it->second) {
    if (const auto* d = std::get_if<DropProbability>(&ev)) keep *= 1.0 - d->p;
  }
  return 1.0 - keep;
}

bool FailureModel::drops(std::uint32_t device, std::uint64_t request, std::uint64_t seed) const {
  const double p = drop_probability(device);
  if (p <= 0.0) return false;
  auto rng = make_stream(seed, {0xd509, device, request});
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

void FailureModel::validate() const {
  for (const auto& [dev, events] : schedule) {
    for (const auto& ev : events) {
      if (const auto* p = std::get_if<PermanentAt>(&ev); p && p->t_ms < 0) {
        throw InvalidArgument("device " + std::to_string(dev) + ": permanent failure time must be >= 0");
      }
      if (const auto* d = std::get_if<DownInterval>(&ev); d && (d->t0_ms < 0 || d->t1_ms <= d->t0_ms)) {
        throw InvalidArgument("device " + std::to_string(dev) + ": down interval needs 0 <= t0 < t1");
      }
      if (const auto* d = std::get_if<DropProbability>(&ev); d && (d->p < 0 || d->p > 1)) {
        throw InvalidArgument("device " + std::to_string(dev) + ": drop probability must be in [0, 1]");
      }
    }
  }
}

FailureModel parse_failures(std::string_view spec) {
  FailureModel out;
  spec = trim(spec);
  if (spec.empty() || spec == "none") return out;
  while (!spec.empty()) {
    const auto semi = spec.find(';');
    const auto item = trim(spec.substr(0, semi));
    spec = semi == std::string_view::npos ? std::string_view{} : spec.substr(semi + 1);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const auto at = item.find('@');
    if (colon == std::string_view::npos || at == std::string_view::npos || at < colon) {
      throw ParseError("failure entry '" + std::string(item) + "' should look like dev:kind@args");
    }
    const auto dev = parse_device(item.substr(0, colon), "failure spec");
    const auto kind = trim(item.substr(colon + 1, at - colon - 1));
    const auto args = item.substr(at + 1);
    if (kind == "perm") {
      out.schedule[dev].push_back(PermanentAt{parse_number(args, "perm failure")});
    } else if (kind == "down") {
      const auto dots = args.find("..");
      if (dots == std::string_view::npos) throw ParseError("down failure expects t0..t1");
      out.schedule[dev].push_back(DownInterval{parse_number(args.substr(0, dots), "down failure"),
                                               parse_number(args.substr(dots + 2), "down failure")});
    } else if (kind == "drop") {
      out.schedule[dev].push_back(DropProbability{parse_number(args, "drop failure")});
    } else {
      throw ParseError("unknown failure kind '" + std::string(kind) + "'");
    }
  }
  try {
    out.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return out;
}

std::string to_string(const FailureModel& failures) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [dev, events] : failures.schedule) {
    for (const auto& ev : events) {
      if (!first) out << ';';
      first = false;
      out << dev << ':';
      if (const auto* p = std::get_if<PermanentAt>(&ev)) out << "perm@" << p->t_ms;
      if (const auto* d = std::get_if<DownInterval>(&ev)) out << "down@" << d->t0_ms << ".." << d->t1_ms;
      if (const auto* d = std::get_if<DropProbability>(&ev)) out << "drop@" << d->p;
    }
  }
  return first ? "none" : out.str();
}

}  // namespace cdc
