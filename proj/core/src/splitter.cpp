// SPDX-License-Identifier: Apache-2.0

#include "cdc/splitter.hpp"

#include <algorithm>
#include <string>

namespace cdc {

std::string_view to_string(SplitMethod method) {
  switch (method) {
    case SplitMethod::FcOutput: return "fc_output";
    case SplitMethod::FcInput: return "fc_input";
    case SplitMethod::ConvChannel: return "conv_channel";
    case SplitMethod::ConvSpatial: return "conv_spatial";
    case SplitMethod::ConvFilter: return "conv_filter";
  }
  return "unknown";
}

SplitMethod parse_split_method(std::string_view text) {
  if (text == "fc_output") return SplitMethod::FcOutput;
  if (text == "fc_input") return SplitMethod::FcInput;
  if (text == "conv_channel") return SplitMethod::ConvChannel;
  if (text == "conv_spatial") return SplitMethod::ConvSpatial;
  if (text == "conv_filter") return SplitMethod::ConvFilter;
  throw ParseError("unknown split method '" + std::string(text) + "'");
}

Suitability suitability(SplitMethod method) {
  switch (method) {
    case SplitMethod::FcOutput: return {true, false, true, true};
    case SplitMethod::FcInput: return {false, true, true, false};
    case SplitMethod::ConvChannel: return {true, false, true, true};
    case SplitMethod::ConvSpatial: return {false, true, false, true};
    case SplitMethod::ConvFilter: return {false, true, true, true};
  }
  return {};
}

std::vector<Range> balanced_blocks(std::size_t extent, std::size_t n) {
  if (n == 0) throw TooManyDevices("device count must be >= 1");
  if (n > extent) {
    throw TooManyDevices("cannot split an axis of " + std::to_string(extent) + " across " +
                         std::to_string(n) + " devices");
  }
  std::vector<Range> out;
  out.reserve(n);
  const std::size_t base = extent / n;
  const std::size_t extra = extent % n;
  std::size_t at = 0;
  for (std::size_t d = 0; d < n; ++d) {
    const std::size_t len = base + (d < extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

namespace {

bool is_fc_method(SplitMethod m) { return m == SplitMethod::FcOutput || m == SplitMethod::FcInput; }

MergeSpec merge_for(SplitMethod m) {
  switch (m) {
    case SplitMethod::FcOutput: return {MergeKind::ConcatRows, ActivationPlacement::PerDevice};
    case SplitMethod::FcInput: return {MergeKind::SumPartials, ActivationPlacement::AtMerge};
    case SplitMethod::ConvChannel: return {MergeKind::ConcatChannels, ActivationPlacement::PerDevice};
    case SplitMethod::ConvSpatial: return {MergeKind::ConcatSpatial, ActivationPlacement::PerDevice};
    case SplitMethod::ConvFilter: return {MergeKind::SumPartials, ActivationPlacement::AtMerge};
  }
  return {};
}

}  // namespace

PartitionPlan plan_split(const LayerSpec& layer, SplitMethod method, std::size_t n) {
  if (layer.is_pool()) throw IncompatibleMethod("pool layers are fused with their parent, never split");
  if (is_fc_method(method) != layer.is_fc()) {
    throw IncompatibleMethod(std::string(to_string(method)) + " does not apply to layer " +
                             std::to_string(layer.id));
  }
  PartitionPlan plan;
  plan.layer = layer;
  plan.method = method;
  plan.n = n;
  plan.merge = merge_for(method);

  std::size_t extent = 0;
  switch (method) {
    case SplitMethod::FcOutput: extent = layer.fc().outputs; break;
    case SplitMethod::FcInput: extent = layer.fc().inputs; break;
    case SplitMethod::ConvChannel: extent = layer.conv().geometry.filters; break;
    case SplitMethod::ConvSpatial: extent = layer.conv().geometry.out_h(); break;
    case SplitMethod::ConvFilter: extent = layer.conv().geometry.in_c; break;
  }
  plan.extent = extent;
  const auto ranges = balanced_blocks(extent, n);
  for (std::size_t d = 0; d < n; ++d) {
    DeviceBlock block;
    block.device = d;
    block.split = ranges[d];
    if (method == SplitMethod::ConvSpatial) {
      const auto& g = layer.conv().geometry;
      // Tile rows in padded coordinates: [oy0*s, (oy1-1)*s + f).
      const auto q0 = static_cast<std::ptrdiff_t>(ranges[d].begin * g.stride);
      const auto q1 = static_cast<std::ptrdiff_t>((ranges[d].end - 1) * g.stride + g.filter);
      const auto p = static_cast<std::ptrdiff_t>(g.padding);
      const auto h = static_cast<std::ptrdiff_t>(g.in_h);
      const std::ptrdiff_t y0 = q0 - p;
      const std::ptrdiff_t y1 = q1 - p;
      const std::ptrdiff_t r0 = std::clamp<std::ptrdiff_t>(y0, 0, h);
      const std::ptrdiff_t r1 = std::clamp<std::ptrdiff_t>(y1, 0, h);
      if (r1 <= r0) throw InvalidGeometry("spatial tile reads only padding; reduce padding or devices");
      block.input_rows = {static_cast<std::size_t>(r0), static_cast<std::size_t>(r1)};
      block.pad_top = static_cast<std::size_t>(r0 - y0);
      block.pad_bottom = static_cast<std::size_t>(y1 - r1);
    }
    plan.blocks.push_back(block);
  }
  return plan;
}

template <typename T>
std::uint64_t DeviceTask<T>::flops() const {
  if (!geometry) return gemm_flops(weight.rows(), weight.cols(), 1);
  return gemm_flops(weight.rows(), weight.cols(), geometry->out_h() * geometry->out_w());
}

template <typename T>
DeviceTask<T> extract_device_task(const PartitionPlan& plan, const LayerWeights<T>& weights, std::size_t device) {
  if (device >= plan.n) {
    throw UnknownDevice("device " + std::to_string(device) + " not in a plan of " + std::to_string(plan.n));
  }
  const auto& block = plan.blocks[device];
  const auto& layer = plan.layer;
  const bool per_device_act = plan.merge.activation == ActivationPlacement::PerDevice;
  auto sliced_bias = [&](Range r) {
    std::vector<T> b;
    if (layer.has_bias) {
      if (weights.bias.size() < r.end) throw ShapeMismatch("bias shorter than layer output", layer.id);
      b.assign(weights.bias.begin() + static_cast<std::ptrdiff_t>(r.begin),
               weights.bias.begin() + static_cast<std::ptrdiff_t>(r.end));
    }
    return b;
  };

  switch (plan.method) {
    case SplitMethod::FcOutput: {
      const auto& w = weights.matrix();
      return DeviceTask<T>{device, plan.method, slice_rows(w, block.split), sliced_bias(block.split),
                           SelectAll{}, Produces::OutputRows, std::nullopt, layer.activation, per_device_act};
    }
    case SplitMethod::FcInput: {
      const auto& w = weights.matrix();
      return DeviceTask<T>{device, plan.method, slice_cols(w, block.split), {}, SelectRowRange{block.split},
                           Produces::PartialSum, std::nullopt, layer.activation, false};
    }
    case SplitMethod::ConvChannel: {
      ConvGeometry g = layer.conv().geometry;
      g.filters = block.split.size();
      const Matrix<T> unrolled = unroll_filters(weights.filters());
      return DeviceTask<T>{device, plan.method, slice_rows(unrolled, block.split), sliced_bias(block.split),
                           SelectAll{}, Produces::OutputChannels, g, layer.activation, per_device_act};
    }
    case SplitMethod::ConvSpatial: {
      const auto& full = layer.conv().geometry;
      ConvGeometry g = full;
      g.in_h = block.pad_top + block.input_rows.size() + block.pad_bottom;
      g.in_w = full.in_w + 2 * full.padding;
      g.padding = 0;
      return DeviceTask<T>{device, plan.method, unroll_filters(weights.filters()),
                           sliced_bias({0, full.filters}),
                           SelectSpatial{block.input_rows, block.pad_top, block.pad_bottom, full.padding},
                           Produces::SpatialTile, g, layer.activation, per_device_act};
    }
    case SplitMethod::ConvFilter: {
      const auto& f = weights.filters();
      const std::size_t cd = block.split.size();
      Tensor4<T> sub(f.filter(), cd, f.filters());
      for (std::size_t k = 0; k < f.filters(); ++k) {
        for (std::size_t y = 0; y < f.filter(); ++y) {
          for (std::size_t x = 0; x < f.filter(); ++x) {
            for (std::size_t c = 0; c < cd; ++c) sub.at(k, y, x, c) = f.at(k, y, x, block.split.begin + c);
          }
        }
      }
      ConvGeometry g = layer.conv().geometry;
      g.in_c = cd;
      return DeviceTask<T>{device, plan.method, unroll_filters(sub), {}, SelectDepth{block.split},
                           Produces::PartialSum, g, layer.activation, false};
    }
  }
  throw IncompatibleMethod("unknown split method");
}

template <typename T>
Tensor3<T> select_input(const InputSelector& selector, const Tensor3<T>& in) {
  if (std::holds_alternative<SelectAll>(selector)) return in;
  if (const auto* rr = std::get_if<SelectRowRange>(&selector)) {
    if (rr->rows.empty() || rr->rows.end > in.size()) throw ShapeMismatch("input element range out of bounds");
    auto first = in.values().begin() + static_cast<std::ptrdiff_t>(rr->rows.begin);
    return Tensor3<T>(1, 1, rr->rows.size(), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(rr->rows.size())));
  }
  if (const auto* sp = std::get_if<SelectSpatial>(&selector)) {
    if (sp->rows.empty() || sp->rows.end > in.height()) throw ShapeMismatch("input row range out of bounds");
    const std::size_t row_len = in.width() * in.channels();
    auto first = in.values().begin() + static_cast<std::ptrdiff_t>(sp->rows.begin * row_len);
    auto last = in.values().begin() + static_cast<std::ptrdiff_t>(sp->rows.end * row_len);
    return Tensor3<T>(sp->rows.size(), in.width(), in.channels(), std::vector<T>(first, last));
  }
  const auto& dr = std::get<SelectDepth>(selector);
  if (dr.channels.empty() || dr.channels.end > in.channels()) throw ShapeMismatch("input depth range out of bounds");
  Tensor3<T> out(in.height(), in.width(), dr.channels.size());
  for (std::size_t y = 0; y < in.height(); ++y) {
    for (std::size_t x = 0; x < in.width(); ++x) {
      for (std::size_t c = 0; c < dr.channels.size(); ++c) out.at(y, x, c) = in.at(y, x, dr.channels.begin + c);
    }
  }
  return out;
}

template <typename T>
Matrix<T> execute_task(const DeviceTask<T>& task, const Tensor3<T>& in) {
  Matrix<T> out = [&] {
    if (!task.geometry) {
      if (in.size() != task.weight.cols()) {
        throw ShapeMismatch("device " + std::to_string(task.device) + " expects " +
                            std::to_string(task.weight.cols()) + " input elements, got " +
                            std::to_string(in.size()));
      }
      return gemm(task.weight, Matrix<T>::column(in.data()));
    }
    const ConvGeometry& g = *task.geometry;
    if (const auto* sp = std::get_if<SelectSpatial>(&task.selector)) {
      if (in.height() != sp->rows.size() || in.width() + 2 * sp->pad_side != g.in_w || in.channels() != g.in_c) {
        throw ShapeMismatch("spatial tile input does not match selector");
      }
      Tensor3<T> tile(g.in_h, g.in_w, g.in_c);
      for (std::size_t y = 0; y < in.height(); ++y) {
        for (std::size_t x = 0; x < in.width(); ++x) {
          for (std::size_t c = 0; c < in.channels(); ++c) {
            tile.at(y + sp->pad_top, x + sp->pad_side, c) = in.at(y, x, c);
          }
        }
      }
      return gemm(task.weight, im2col(tile, g));
    }
    if (in.height() != g.in_h || in.width() != g.in_w || in.channels() != g.in_c) {
      throw ShapeMismatch("device " + std::to_string(task.device) + " conv input does not match its geometry");
    }
    return gemm(task.weight, im2col(in, g));
  }();
  if (!task.bias.empty()) {
    out = affine_activate(out, std::span<const T>(task.bias),
                          task.apply_activation ? task.activation : ActivationKind::Identity);
  } else if (task.apply_activation) {
    out = activate(std::move(out), task.activation);
  }
  return out;
}

template <typename T>
Matrix<T> merge(const PartitionPlan& plan, std::span<const std::optional<Matrix<T>>> partials,
                std::span<const T> bias, ActivationKind act) {
  std::vector<std::size_t> missing;
  for (std::size_t d = 0; d < plan.n; ++d) {
    if (d >= partials.size() || !partials[d]) missing.push_back(d);
  }
  if (!missing.empty()) throw MissingPartial(std::move(missing));
  if (partials.size() != plan.n) throw ShapeMismatch("more partials than devices in the plan", plan.layer.id);

  std::vector<Matrix<T>> parts;
  parts.reserve(plan.n);
  for (const auto& p : partials) parts.push_back(*p);

  Matrix<T> merged = [&] {
    switch (plan.merge.kind) {
      case MergeKind::ConcatRows:
      case MergeKind::ConcatChannels:
        for (std::size_t d = 0; d < plan.n; ++d) {
          if (parts[d].rows() != plan.blocks[d].split.size()) {
            throw ShapeMismatch("partial from device " + std::to_string(d) + " has wrong row count", plan.layer.id);
          }
        }
        return concat_rows<T>(parts);
      case MergeKind::ConcatSpatial: {
        const std::size_t wo = plan.layer.conv().geometry.out_w();
        for (std::size_t d = 0; d < plan.n; ++d) {
          if (parts[d].cols() != plan.blocks[d].split.size() * wo) {
            throw ShapeMismatch("tile from device " + std::to_string(d) + " has wrong size", plan.layer.id);
          }
        }
        return concat_cols<T>(parts);
      }
      case MergeKind::SumPartials: {
        Matrix<T> acc = parts.front();
        for (std::size_t d = 1; d < plan.n; ++d) {
          if (parts[d].rows() != acc.rows() || parts[d].cols() != acc.cols()) {
            throw ShapeMismatch("partial sums differ in shape", plan.layer.id);
          }
          acc = add(acc, parts[d]);
        }
        return acc;
      }
    }
    throw ShapeMismatch("unknown merge kind", plan.layer.id);
  }();

  if (plan.merge.kind == MergeKind::SumPartials) {
    if (!bias.empty()) return affine_activate(merged, bias, act);
    return activate(std::move(merged), act);
  }
  if (plan.merge.activation == ActivationPlacement::AtMerge) return activate(std::move(merged), act);
  return merged;
}

template <typename T>
Tensor3<T> merged_to_tensor(const PartitionPlan& plan, const Matrix<T>& merged) {
  if (plan.layer.is_fc()) return Tensor3<T>(1, 1, merged.size(), merged.values());
  const auto& g = plan.layer.conv().geometry;
  return conv_matrix_to_tensor(merged, g.out_h(), g.out_w());
}

#define CDC_INSTANTIATE(T)                                                                            \
  template struct DeviceTask<T>;                                                                      \
  template DeviceTask<T> extract_device_task(const PartitionPlan&, const LayerWeights<T>&, std::size_t); \
  template Tensor3<T> select_input(const InputSelector&, const Tensor3<T>&);                          \
  template Matrix<T> execute_task(const DeviceTask<T>&, const Tensor3<T>&);                           \
  template Matrix<T> merge(const PartitionPlan&, std::span<const std::optional<Matrix<T>>>,           \
                           std::span<const T>, ActivationKind);                                       \
  template Tensor3<T> merged_to_tensor(const PartitionPlan&, const Matrix<T>&);

CDC_INSTANTIATE(float)
CDC_INSTANTIATE(double)

#undef CDC_INSTANTIATE

}  // namespace cdc
