// SPDX-License-Identifier: Apache-2.0

#include "cdc/collector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cdc {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::WaitAll: return "wait_all";
    case Policy::DecodeAsap: return "decode_asap";
    case Policy::ThresholdThenDecode: return "threshold";
  }
  return "unknown";
}

Policy parse_policy(std::string_view text) {
  if (text == "wait_all" || text == "wait-all") return Policy::WaitAll;
  if (text == "decode_asap" || text == "decode-asap") return Policy::DecodeAsap;
  if (text == "threshold" || text == "threshold_then_decode") return Policy::ThresholdThenDecode;
  throw ParseError("unknown policy '" + std::string(text) + "' (wait_all, decode_asap, threshold)");
}

namespace {

std::vector<bool> present_at(const std::vector<std::optional<double>>& arrivals, std::size_t from, std::size_t to,
                             double t) {
  std::vector<bool> out;
  for (std::size_t i = from; i < to; ++i) out.push_back(arrivals[i] && *arrivals[i] <= t);
  return out;
}

}  // namespace

StageOutcome collect_stage(std::size_t n, const std::vector<Group>& groups,
                           const std::vector<std::optional<double>>& arrivals, const CollectParams& params) {
  const std::size_t total = n + groups.size();
  if (arrivals.size() != total) throw InvalidArgument("collect_stage: one arrival slot per device expected");
  if (params.policy == Policy::ThresholdThenDecode && !(params.threshold_ms > 0)) {
    throw InvalidArgument("threshold policy needs a waiting threshold > 0");
  }

  double first = std::numeric_limits<double>::infinity();
  for (const auto& a : arrivals) {
    if (a) first = std::min(first, *a);
  }
  if (!std::isfinite(first)) first = params.stage_start_ms;

  auto decodable_at = [&](double t) {
    return peel_unrecoverable(n, groups, present_at(arrivals, 0, n, t), present_at(arrivals, n, total, t)).empty();
  };

  StageOutcome out;
  const double wait = params.policy == Policy::ThresholdThenDecode ? params.threshold_ms : params.detection_ms;
  const double deadline = first + wait;

  if (params.policy == Policy::DecodeAsap) {
    std::vector<double> times;
    for (const auto& a : arrivals) {
      if (a && *a <= deadline) times.push_back(*a);
    }
    std::sort(times.begin(), times.end());
    for (double t : times) {
      if (decodable_at(t)) {
        out.complete = true;
        out.done_ms = t;
        break;
      }
    }
  } else {
    double last_base = -std::numeric_limits<double>::infinity();
    bool all_base = true;
    for (std::size_t d = 0; d < n; ++d) {
      if (!arrivals[d]) {
        all_base = false;
        break;
      }
      last_base = std::max(last_base, *arrivals[d]);
    }
    if (all_base && last_base <= deadline) {
      out.complete = true;
      out.done_ms = last_base;
    } else if (decodable_at(deadline)) {
      out.complete = true;
      out.done_ms = deadline;
    }
  }
  if (!out.complete) out.done_ms = deadline;

  out.used.assign(total, false);
  for (std::size_t i = 0; i < total; ++i) {
    if (!arrivals[i]) continue;
    if (*arrivals[i] <= out.done_ms) {
      out.used[i] = true;
    } else {
      out.late.push_back(i);
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    if (!out.used[d]) out.missing.push_back(d);
  }
  std::vector<bool> base(out.used.begin(), out.used.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<bool> coded(out.used.begin() + static_cast<std::ptrdiff_t>(n), out.used.end());
  out.unrecoverable = peel_unrecoverable(n, groups, base, coded);
  return out;
}

template <typename T>
CollectedPartials<T> finish_stage(std::size_t n, const CodedPlan<T>* coded, const StageOutcome& outcome,
                                  const std::map<std::size_t, Matrix<T>>& arrived) {
  if (!outcome.complete) throw InvalidArgument("finish_stage on a stage that did not complete");
  CollectedPartials<T> out;
  out.partials.resize(n);
  std::map<std::size_t, Matrix<T>> base;
  std::map<std::size_t, Matrix<T>> code;
  for (const auto& [i, m] : arrived) {
    if (i >= outcome.used.size() || !outcome.used[i]) continue;
    if (i < n) {
      base.insert_or_assign(i, m);
    } else {
      code.insert_or_assign(i - n, m);
    }
  }
  if (base.size() < n) {
    if (!coded) throw MissingPartial(outcome.missing);
    auto peeled = peel_decode(*coded, base, code);
    if (!peeled.complete) throw MissingPartial(peeled.unrecoverable);
    base = std::move(peeled.partials);
    out.recovered = std::move(peeled.recovered);
  }
  for (auto& [d, m] : base) out.partials[d] = std::move(m);
  return out;
}

template CollectedPartials<float> finish_stage(std::size_t, const CodedPlan<float>*, const StageOutcome&,
                                               const std::map<std::size_t, Matrix<float>>&);
template CollectedPartials<double> finish_stage(std::size_t, const CodedPlan<double>*, const StageOutcome&,
                                                const std::map<std::size_t, Matrix<double>>&);

}  // namespace cdc
