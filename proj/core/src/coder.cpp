// SPDX-License-Identifier: Apache-2.0

#include "cdc/coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace cdc {

template <typename T>
std::vector<Group> CodedPlan<T>::groups() const {
  std::vector<Group> out;
  out.reserve(coded.size());
  for (const auto& c : coded) out.push_back(c.covers);
  return out;
}

PartitionPlan coded_base_plan(const PartitionPlan& plan) {
  PartitionPlan out = plan;
  out.merge.activation = ActivationPlacement::AtMerge;
  return out;
}

std::vector<Group> default_groups(std::size_t n, std::size_t r) {
  if (n == 0) throw InvalidArgument("default_groups: n must be >= 1");
  Group all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (r == 1) return {all};
  if (r == 2) {
    const std::size_t len = std::min(n, (n + 1) / 2 + 1);
    Group a(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(len));
    Group b(all.end() - static_cast<std::ptrdiff_t>(len), all.end());
    return {a, b};
  }
  throw InvalidArgument("default_groups: only r = 1 or 2 has a built-in construction; pass explicit groups");
}

void validate_groups(std::size_t n, const std::vector<Group>& groups) {
  if (groups.empty()) throw InvalidArgument("at least one coded group is required");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw InvalidArgument("coded group " + std::to_string(g) + " is empty");
    std::set<std::size_t> seen;
    for (auto d : groups[g]) {
      if (d >= n) {
        throw UnknownDevice("coded group " + std::to_string(g) + " names device " + std::to_string(d) +
                            " outside 0.." + std::to_string(n - 1));
      }
      if (!seen.insert(d).second) {
        throw InvalidArgument("coded group " + std::to_string(g) + " repeats device " + std::to_string(d));
      }
    }
  }
}

namespace {

std::string table_row(SplitMethod m) {
  const auto s = suitability(m);
  auto mark = [](bool b) { return b ? "yes" : "no"; };
  return std::string(to_string(m)) + ": divides input " + mark(s.divides_input) + ", weight " +
         mark(s.divides_weight) + ", output " + mark(s.divides_output) + "; suitable for coding " +
         mark(s.suitable_for_cdc);
}

}  // namespace

template <typename T>
CodedPlan<T> encode(const PartitionPlan& plan, const LayerWeights<T>& weights, const std::vector<Group>& groups) {
  if (!suitability(plan.method).suitable_for_cdc) {
    throw UnsuitableMethod("cannot code layer " + std::to_string(plan.layer.id) + " (" + table_row(plan.method) + ")");
  }
  validate_groups(plan.n, groups);

  CodedPlan<T> out;
  out.base = coded_base_plan(plan);
  out.recovery.resize(plan.n);

  std::vector<DeviceTask<T>> base_tasks;
  base_tasks.reserve(plan.n);
  for (std::size_t d = 0; d < plan.n; ++d) base_tasks.push_back(extract_device_task(out.base, weights, d));

  for (std::size_t g = 0; g < groups.size(); ++g) {
    Group covers = groups[g];
    std::sort(covers.begin(), covers.end());
    std::size_t rows = 0;
    for (auto d : covers) rows = std::max(rows, base_tasks[d].weight.rows());
    const std::size_t cols = base_tasks[covers.front()].weight.cols();

    Matrix<T> sum(rows, cols);
    std::vector<T> bias_sum(plan.layer.has_bias ? rows : 0, T{0});
    std::vector<std::size_t> member_rows;
    for (auto d : covers) {
      const auto& t = base_tasks[d];
      if (t.weight.cols() != cols) {
        throw ShapeMismatch("coded group " + std::to_string(g) + " mixes blocks of different widths", plan.layer.id);
      }
      sum = add(sum, pad_rows(t.weight, rows));
      for (std::size_t i = 0; i < t.bias.size(); ++i) bias_sum[i] += t.bias[i];
      member_rows.push_back(t.weight.rows());
      out.recovery[d].push_back(g);
    }

    const auto& proto = base_tasks[covers.front()];
    std::optional<ConvGeometry> geom = proto.geometry;
    if (geom) geom->filters = rows;
    DeviceTask<T> task{plan.n + g,  plan.method,         std::move(sum),
                       std::move(bias_sum), SelectAll{}, proto.produces,
                       geom,        plan.layer.activation, false};
    out.coded.push_back(CodedDevice<T>{g, std::move(covers), std::move(member_rows), std::move(task)});
  }
  return out;
}

template <typename T>
CodedPlan<T> encode(const PartitionPlan& plan, const WeightStore<T>& weights, const std::vector<Group>& groups) {
  CodedPlan<T> out = encode(plan, weights.at(plan.layer.id), groups);
  for (const auto& c : out.coded) {
    auto it = weights.coded.find({plan.layer.id, static_cast<std::uint32_t>(c.index)});
    if (it == weights.coded.end()) continue;
    if (!(it->second.weight == c.task.weight) || it->second.bias != c.task.bias) {
      throw InvalidArgument("stored coded block for layer " + std::to_string(plan.layer.id) + " group " +
                            std::to_string(c.index) + " is not the sum of its members");
    }
  }
  return out;
}

template <typename T>
void store_coded_blocks(const CodedPlan<T>& plan, WeightStore<T>& weights) {
  for (const auto& c : plan.coded) {
    weights.coded.insert_or_assign({plan.base.layer.id, static_cast<std::uint32_t>(c.index)},
                                   CodedBlock<T>{c.task.weight, c.task.bias});
  }
}

template <typename T>
Recovered<T> decode_single(const CodedDevice<T>& coded, const Matrix<T>& coded_partial,
                           const std::map<std::size_t, Matrix<T>>& received) {
  std::vector<std::size_t> missing;
  std::size_t missing_pos = 0;
  for (std::size_t i = 0; i < coded.covers.size(); ++i) {
    if (!received.count(coded.covers[i])) {
      missing.push_back(coded.covers[i]);
      missing_pos = i;
    }
  }
  if (missing.empty()) throw NothingMissing("every member of coded group " + std::to_string(coded.index) + " arrived");
  if (missing.size() > 1) {
    std::string ids;
    for (auto d : missing) ids += " " + std::to_string(d);
    throw TooManyMissing("coded group " + std::to_string(coded.index) + " is missing" + ids);
  }

  const std::size_t rows = coded_partial.rows();
  const std::size_t cols = coded_partial.cols();
  Recovered<T> out{missing.front(), coded.index, Matrix<T>(1, 1), 0, 0};

  std::optional<Matrix<T>> others;
  for (auto d : coded.covers) {
    if (d == out.device) continue;
    const Matrix<T>& p = received.at(d);
    if (p.cols() != cols || p.rows() > rows) {
      throw ShapeMismatch("partial from device " + std::to_string(d) + " does not fit coded block");
    }
    if (!others) {
      others = pad_rows(p, rows);
    } else {
      others = add(*others, pad_rows(p, rows));
      out.additions += rows * cols;
    }
  }
  Matrix<T> full = others ? subtract(coded_partial, *others) : coded_partial;
  if (others) out.subtractions = rows * cols;
  out.partial = slice_rows(full, Range{0, coded.member_rows[missing_pos]});
  return out;
}

template <typename T>
PeelResult<T> peel_decode(const CodedPlan<T>& plan, const std::map<std::size_t, Matrix<T>>& received_base,
                          const std::map<std::size_t, Matrix<T>>& received_coded) {
  PeelResult<T> out;
  for (const auto& [d, m] : received_base) {
    if (d < plan.base.n) out.partials.insert_or_assign(d, m);
  }
  std::vector<bool> used(plan.coded.size(), false);
  bool progress = true;
  while (progress && out.partials.size() < plan.base.n) {
    progress = false;
    for (const auto& c : plan.coded) {
      if (used[c.index]) continue;
      auto cp = received_coded.find(c.index);
      if (cp == received_coded.end()) continue;
      std::size_t absent = 0;
      for (auto d : c.covers) absent += out.partials.count(d) ? 0 : 1;
      if (absent == 0) {
        used[c.index] = true;
        continue;
      }
      if (absent > 1) continue;
      auto rec = decode_single(c, cp->second, out.partials);
      used[c.index] = true;
      out.partials.insert_or_assign(rec.device, rec.partial);
      out.recovered.push_back(std::move(rec));
      progress = true;
    }
  }
  for (std::size_t d = 0; d < plan.base.n; ++d) {
    if (!out.partials.count(d)) out.unrecoverable.push_back(d);
  }
  out.complete = out.unrecoverable.empty();
  return out;
}

std::vector<std::size_t> peel_unrecoverable(std::size_t n, const std::vector<Group>& groups,
                                            const std::vector<bool>& base_present,
                                            const std::vector<bool>& coded_present) {
  std::vector<bool> known = base_present;
  known.resize(n, false);
  std::vector<bool> used(groups.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (used[g] || g >= coded_present.size() || !coded_present[g]) continue;
      std::size_t absent = 0;
      std::size_t which = 0;
      for (auto d : groups[g]) {
        if (!known[d]) {
          ++absent;
          which = d;
        }
      }
      if (absent <= 1) used[g] = true;
      if (absent == 1) {
        known[which] = true;
        progress = true;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < n; ++d) {
    if (!known[d]) out.push_back(d);
  }
  return out;
}

namespace {

// C(n, k) as a double; exact well past the pattern caps that matter here.
double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

}  // namespace

DecodabilityReport decodability(std::size_t n, const std::vector<Group>& groups, std::size_t max_failures,
                                std::uint64_t cap) {
  validate_groups(n, groups);
  const std::size_t total = n + groups.size();
  if (max_failures > total) {
    throw InvalidArgument("max_failures " + std::to_string(max_failures) + " exceeds the " +
                          std::to_string(total) + " devices");
  }
  double patterns = 0.0;
  for (std::size_t f = 0; f <= max_failures; ++f) patterns += binomial(total, f);
  if (patterns > static_cast<double>(cap)) {
    throw ExplosionGuard("enumerating ~" + std::to_string(static_cast<unsigned long long>(std::min(patterns, 1.8e19))) +
                         " failure patterns exceeds the cap of " + std::to_string(cap));
  }

  DecodabilityReport report;
  report.n = n;
  report.groups = groups;
  std::vector<std::size_t> pick;
  for (std::size_t f = 0; f <= max_failures; ++f) {
    DecodabilityRow row;
    row.failures = f;
    pick.resize(f);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    while (true) {
      std::vector<bool> base(n, true);
      std::vector<bool> coded(groups.size(), true);
      for (auto i : pick) {
        if (i < n) base[i] = false;
        else coded[i - n] = false;
      }
      ++row.total;
      if (peel_unrecoverable(n, groups, base, coded).empty()) ++row.recoverable;

      // next combination in lexicographic order
      std::size_t i = f;
      while (i > 0 && pick[i - 1] == total - f + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < f; ++j) pick[j] = pick[j - 1] + 1;
    }
    row.fraction = static_cast<double>(row.recoverable) / static_cast<double>(row.total);
    report.rows.push_back(row);
  }
  return report;
}

double hardware_cost(std::size_t n, std::size_t groups) {
  if (n == 0) throw InvalidArgument("hardware_cost: n must be >= 1");
  return static_cast<double>(n + groups) / static_cast<double>(n);
}

#define CDC_INSTANTIATE(T)                                                                                  \
  template struct CodedPlan<T>;                                                                             \
  template CodedPlan<T> encode(const PartitionPlan&, const LayerWeights<T>&, const std::vector<Group>&);     \
  template CodedPlan<T> encode(const PartitionPlan&, const WeightStore<T>&, const std::vector<Group>&);      \
  template void store_coded_blocks(const CodedPlan<T>&, WeightStore<T>&);                                   \
  template Recovered<T> decode_single(const CodedDevice<T>&, const Matrix<T>&,                              \
                                      const std::map<std::size_t, Matrix<T>>&);                             \
  template PeelResult<T> peel_decode(const CodedPlan<T>&, const std::map<std::size_t, Matrix<T>>&,           \
                                     const std::map<std::size_t, Matrix<T>>&);

CDC_INSTANTIATE(float)
CDC_INSTANTIATE(double)

#undef CDC_INSTANTIATE

}  // namespace cdc
