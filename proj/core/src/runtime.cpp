// SPDX-License-Identifier: Apache-2.0

#include "cdc/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace cdc {

void CoordinatorConfig::validate() const {
  if (policy == Policy::ThresholdThenDecode && !(threshold_ms > 0)) {
    throw InvalidArgument("threshold policy needs --threshold > 0");
  }
  if (threshold_ms < 0) throw InvalidArgument("waiting threshold must be >= 0");
  if (!(detection_ms > 0)) throw InvalidArgument("failure detection latency must be > 0");
  if (ns_per_flop < 0) throw InvalidArgument("ns per flop must be >= 0");
  if (tolerance < 0) throw InvalidArgument("tolerance must be >= 0");
}

LatencySummary summarize(std::span<const double> latencies_ms) {
  LatencySummary s;
  s.count = latencies_ms.size();
  if (latencies_ms.empty()) return s;
  std::vector<double> sorted(latencies_ms.begin(), latencies_ms.end());
  std::sort(sorted.begin(), sorted.end());
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
  };
  s.p50 = rank(0.50);
  s.p90 = rank(0.90);
  s.p99 = rank(0.99);
  s.max = sorted.back();
  return s;
}

std::vector<double> completed_latencies(const RunReport& report) {
  std::vector<double> out;
  for (const auto& r : report.requests) {
    if (r.completed) out.push_back(r.latency_ms);
  }
  return out;
}

std::uint64_t layer_flops(const LayerSpec& layer, const Shape& input) {
  if (layer.is_fc()) return gemm_flops(layer.fc().outputs, layer.fc().inputs, 1);
  if (layer.is_conv()) {
    const auto& g = layer.conv().geometry;
    return gemm_flops(g.filters, g.patch_size(), g.out_h() * g.out_w());
  }
  const auto out = layer_output_shape(layer, input);
  return static_cast<std::uint64_t>(out.elements()) * layer.pool().window * layer.pool().window;
}

namespace {

template <typename T>
Matrix<T> to_payload(const Tensor3<T>& t) {
  return Matrix<T>(t.height(), t.width() * t.channels(), t.values());
}

template <typename T>
Tensor3<T> from_payload(const Matrix<T>& m, const Shape& s) {
  if (m.rows() != s.h || m.cols() != s.w * s.c) throw ShapeMismatch("input block does not match the task's slice");
  return Tensor3<T>(s.h, s.w, s.c, m.values());
}

Shape selected_shape(const InputSelector& sel, const Shape& in) {
  if (const auto* r = std::get_if<SelectRowRange>(&sel)) return {1, 1, r->rows.size()};
  if (const auto* s = std::get_if<SelectSpatial>(&sel)) return {s->rows.size(), in.w, in.c};
  if (const auto* d = std::get_if<SelectDepth>(&sel)) return {in.h, in.w, d->channels.size()};
  return in;
}

template <typename T>
struct CompiledStage {
  StageAlloc alloc;
  std::vector<std::size_t> layer_idx;
  Shape input;
  Shape output;
  std::optional<PartitionPlan> plan;  // the plan partials are merged with
  std::optional<CodedPlan<T>> coded;
  std::vector<DeviceTask<T>> tasks;
  std::vector<std::uint32_t> devices;  // extended order: base then coded
  std::vector<Shape> slice_shapes;
  std::vector<std::uint64_t> flops;
  std::vector<Group> groups;
  std::vector<T> merge_bias;

  std::size_t n() const noexcept { return alloc.devices.size(); }
};

template <typename T>
std::vector<CompiledStage<T>> compile(const ModelSpec& model, const AllocationFile& alloc,
                                      const WeightStore<T>& weights) {
  validate_allocation(alloc, model);
  std::vector<CompiledStage<T>> out;
  for (const auto& sa : alloc.stages) {
    CompiledStage<T> cs;
    cs.alloc = sa;
    for (auto id : sa.layers) cs.layer_idx.push_back(model.index_of(id));
    cs.input = model.input_shapes[cs.layer_idx.front()];
    cs.output = model.output_shapes[cs.layer_idx.back()];
    cs.devices = sa.all_devices();
    if (!sa.method) {
      std::uint64_t f = 0;
      for (auto i : cs.layer_idx) f += layer_flops(model.layers[i], model.input_shapes[i]);
      cs.slice_shapes = {cs.input};
      cs.flops = {f};
      out.push_back(std::move(cs));
      continue;
    }
    const auto& layer = model.layers[cs.layer_idx.front()];
    PartitionPlan plan = plan_split(layer, *sa.method, sa.devices.size());
    if (sa.coded) {
      cs.groups = local_groups(sa);
      cs.coded = encode(plan, weights, cs.groups);
      plan = cs.coded->base;
    }
    for (std::size_t d = 0; d < plan.n; ++d) cs.tasks.push_back(extract_device_task(plan, weights, d));
    for (const auto& t : cs.tasks) {
      cs.slice_shapes.push_back(selected_shape(t.selector, cs.input));
      cs.flops.push_back(t.flops());
    }
    if (cs.coded) {
      for (const auto& c : cs.coded->coded) {
        cs.slice_shapes.push_back(cs.input);
        cs.flops.push_back(c.task.flops());
      }
    }
    if (layer.has_bias) cs.merge_bias = weights.at(layer.id).bias;
    cs.plan = std::move(plan);
    out.push_back(std::move(cs));
  }
  return out;
}

template <typename T>
struct Attempt {
  bool ok = false;
  double t_end = 0.0;
  std::vector<T> output;
  std::vector<std::uint32_t> silent;
};

template <typename T>
class Simulation {
 public:
  Simulation(const ModelSpec& model, const WeightStore<T>& weights, const LatencyModel& latency,
             const FailureModel& failures, const CoordinatorConfig& cfg)
      : model_(model), weights_(weights), failures_(failures), cfg_(cfg), net_(latency, failures, cfg.seed) {}

  Attempt<T> run(const std::vector<CompiledStage<T>>& stages, const Tensor3<T>& input, std::uint64_t request,
                 double t, RequestRecord& rec, RunReport& report) {
    Tensor3<T> x = input;
    for (std::size_t si = 0; si < stages.size(); ++si) {
      const auto& st = stages[si];
      StageRecord sr;
      sr.stage = si;
      sr.layers = st.alloc.layers;
      sr.start_ms = t;

      const std::uint32_t layer_id = st.alloc.layers.front();
      std::map<std::uint32_t, std::size_t> slot_of;
      for (std::size_t i = 0; i < st.devices.size(); ++i) slot_of[st.devices[i]] = i;

      for (std::size_t i = 0; i < st.devices.size(); ++i) {
        Tensor3<T> slice = i < st.tasks.size() ? select_input(st.tasks[i].selector, x) : x;
        Message msg{MsgType::InputBlock, request, layer_id, st.devices[i], encode_matrix(to_payload(slice))};
        net_.send(msg, kCoordinatorId, st.devices[i], t);
      }

      std::vector<std::optional<double>> arrivals(st.devices.size());
      std::map<std::size_t, Matrix<T>> partials;
      while (auto env = net_.recv()) {
        if (env->to == kCoordinatorId) {
          const std::size_t slot = slot_of.at(env->from);
          arrivals[slot] = env->delivered_ms;
          partials.insert_or_assign(slot, decode_matrix<T>(env->msg.payload));
          continue;
        }
        const std::uint32_t dev = env->to;
        const std::size_t slot = slot_of.at(dev);
        if (failures_.drops(dev, request, cfg_.seed)) continue;
        const Tensor3<T> in = from_payload(decode_matrix<T>(env->msg.payload), st.slice_shapes[slot]);
        const Matrix<T> result = execute(st, slot, in);
        double& busy = busy_[dev];
        const double start = std::max(env->delivered_ms, busy);
        const double finish = start + static_cast<double>(st.flops[slot]) * cfg_.ns_per_flop * 1e-6;
        busy = finish;
        const MsgType type = slot < st.n() ? MsgType::PartialOutput : MsgType::CodedOutput;
        net_.send(Message{type, request, layer_id, dev, encode_matrix(result)}, dev, kCoordinatorId, finish);
      }

      const auto outcome =
          collect_stage(st.n(), st.groups, arrivals, {cfg_.policy, cfg_.threshold_ms, cfg_.detection_ms, t});
      for (std::size_t i = 0; i < st.devices.size(); ++i) {
        const bool late = std::find(outcome.late.begin(), outcome.late.end(), i) != outcome.late.end();
        sr.arrivals.push_back({st.devices[i], i >= st.n(), arrivals[i], outcome.used[i], late});
      }
      report.late_partials += outcome.late.size();
      sr.complete = outcome.complete;
      sr.collected_ms = outcome.done_ms;
      if (!outcome.complete) {
        sr.done_ms = outcome.done_ms;
        rec.stages.push_back(std::move(sr));
        Attempt<T> fail;
        fail.t_end = outcome.done_ms;
        for (std::size_t i = 0; i < st.devices.size(); ++i) {
          if (!arrivals[i]) fail.silent.push_back(st.devices[i]);
        }
        return fail;
      }

      double done = outcome.done_ms;
      if (!st.plan) {
        x = from_payload(partials.at(0), st.output);
      } else {
        auto collected = finish_stage(st.n(), st.coded ? &*st.coded : nullptr, outcome, partials);
        for (const auto& r : collected.recovered) {
          sr.decoded.push_back(st.alloc.devices[r.device]);
          sr.decode_ops += r.subtractions + r.additions;
        }
        report.decode_events += collected.recovered.size();
        done += static_cast<double>(sr.decode_ops) * cfg_.ns_per_flop * 1e-6;
        const auto& layer = model_.layers[st.layer_idx.front()];
        const Matrix<T> merged =
            merge<T>(*st.plan, collected.partials, std::span<const T>(st.merge_bias), layer.activation);
        x = merged_to_tensor(*st.plan, merged);
        for (std::size_t k = 1; k < st.layer_idx.size(); ++k) x = pool_forward(x, model_.layers[st.layer_idx[k]].pool());
      }
      sr.done_ms = done;
      rec.stages.push_back(std::move(sr));
      t = done;
    }
    Attempt<T> ok;
    ok.ok = true;
    ok.t_end = t;
    ok.output = x.values();
    return ok;
  }

  std::size_t dropped() const noexcept { return net_.dropped(); }

 private:
  Matrix<T> execute(const CompiledStage<T>& st, std::size_t slot, const Tensor3<T>& in) const {
    if (!st.plan) {
      Tensor3<T> y = in;
      for (auto i : st.layer_idx) y = layer_forward(model_.layers[i], weights_, y);
      return to_payload(y);
    }
    if (slot < st.tasks.size()) return execute_task(st.tasks[slot], in);
    return execute_task(st.coded->coded[slot - st.n()].task, in);
  }

  const ModelSpec& model_;
  const WeightStore<T>& weights_;
  const FailureModel& failures_;
  const CoordinatorConfig& cfg_;
  SimTransport net_;
  std::map<std::uint32_t, double> busy_;
};

}  // namespace

template <typename T>
RunReport run_inference(const ModelSpec& model, std::span<const AllocationFile> catalog,
                        const WeightStore<T>& weights, const Tensor3<T>& input, const LatencyModel& latency,
                        const FailureModel& failures, const CoordinatorConfig& cfg, std::size_t requests) {
  if (catalog.empty()) throw AllocationInvalid("no allocation given");
  if (requests == 0) throw InvalidArgument("requests must be >= 1");
  cfg.validate();
  latency.validate();
  failures.validate();
  validate_weights(model, weights);
  const Shape in_shape = model.input_shape();
  if (input.height() != in_shape.h || input.width() != in_shape.w || input.channels() != in_shape.c) {
    throw ShapeMismatch("input tensor does not match the model's input shape");
  }

  std::vector<std::vector<CompiledStage<T>>> compiled;
  std::set<std::uint32_t> universe;
  for (const auto& a : catalog) {
    compiled.push_back(compile(model, a, weights));
    for (auto d : a.required_devices()) universe.insert(d);
    for (const auto& r : a.roster) universe.insert(r.id);
  }

  std::vector<T> reference;
  if (cfg.verify) reference = reference_forward(model, weights, input);
  const double tol = cfg.tolerance > 0 ? cfg.tolerance : (sizeof(T) == 4 ? 1e-4 : 1e-10);

  RunReport report;
  report.model = model.name;
  report.policy = std::string(to_string(cfg.policy));
  report.threshold_ms = cfg.threshold_ms;
  report.seed = cfg.seed;
  report.latency = describe(latency.base);
  report.failures = to_string(failures);

  Simulation<T> sim(model, weights, latency, failures, cfg);
  std::size_t current = 0;
  std::set<std::uint32_t> suspected;
  double clock = 0.0;
  for (std::uint64_t r = 0; r < requests; ++r) {
    RequestRecord rec;
    rec.id = r;
    rec.start_ms = clock;
    double t = clock;
    while (true) {
      auto attempt = sim.run(compiled[current], input, r, t, rec, report);
      if (attempt.ok) {
        rec.completed = true;
        rec.end_ms = attempt.t_end;
        if (cfg.verify) {
          rec.max_rel_error = max_relative_error<T>(attempt.output, reference);
          rec.output_ok = rec.max_rel_error <= tol;
          if (!rec.output_ok) ++report.output_mismatches;
        } else {
          rec.output_ok = true;
        }
        break;
      }
      ++rec.stage_timeouts;
      ++report.stage_timeouts;
      t = attempt.t_end;
      suspected.insert(attempt.silent.begin(), attempt.silent.end());
      std::optional<std::size_t> next;
      if (catalog.size() > 1) {
        std::set<std::uint32_t> alive;
        std::set_difference(universe.begin(), universe.end(), suspected.begin(), suspected.end(),
                            std::inserter(alive, alive.end()));
        try {
          const AllocationFile& pick = fallback_select(catalog, alive);
          next = static_cast<std::size_t>(&pick - catalog.data());
        } catch (const NoFeasibleAllocation&) {
        }
      }
      if (!next || *next == current) {
        rec.end_ms = t;
        ++report.lost_requests;
        break;
      }
      rec.fallbacks.push_back({t, current, *next, {suspected.begin(), suspected.end()}});
      ++report.fallback_switches;
      current = *next;
    }
    rec.allocation = current;
    rec.latency_ms = rec.end_ms - rec.start_ms;
    clock = rec.end_ms;
    report.requests.push_back(std::move(rec));
  }
  report.dropped_messages = sim.dropped();
  const auto lat = completed_latencies(report);
  report.summary = summarize(lat);
  return report;
}

template RunReport run_inference(const ModelSpec&, std::span<const AllocationFile>, const WeightStore<float>&,
                                 const Tensor3<float>&, const LatencyModel&, const FailureModel&,
                                 const CoordinatorConfig&, std::size_t);
template RunReport run_inference(const ModelSpec&, std::span<const AllocationFile>, const WeightStore<double>&,
                                 const Tensor3<double>&, const LatencyModel&, const FailureModel&,
                                 const CoordinatorConfig&, std::size_t);

}  // namespace cdc
