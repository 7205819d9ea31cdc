// SPDX-License-Identifier: Apache-2.0

#include "cdc/model.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "cdc/weight_store.hpp"
#include "json.hpp"

namespace cdc {

using nlohmann::json;

namespace {

std::string layer_tag(std::uint32_t id) { return "layer " + std::to_string(id); }

std::size_t get_count(const json& j, const char* key, std::uint32_t id) {
  if (!j.contains(key)) throw ParseError(layer_tag(id) + ": missing field '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ParseError(layer_tag(id) + ": field '" + key + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

std::size_t get_count_or(const json& j, const char* key, std::size_t fallback, std::uint32_t id,
                         bool allow_zero = false) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() || (!allow_zero && v.get<std::uint64_t>() == 0)) {
    throw ParseError(layer_tag(id) + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

std::string_view to_string(ActivationKind act) {
  return act == ActivationKind::ReLU ? "relu" : "identity";
}

ActivationKind parse_activation(std::string_view text) {
  if (text == "relu") return ActivationKind::ReLU;
  if (text == "identity" || text == "linear" || text == "none") return ActivationKind::Identity;
  throw ParseError("unknown activation '" + std::string(text) + "'");
}

std::size_t ModelSpec::index_of(std::uint32_t layer_id) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].id == layer_id) return i;
  }
  throw ShapeMismatch("model '" + name + "' has no layer " + std::to_string(layer_id),
                      static_cast<std::int64_t>(layer_id));
}

Shape layer_output_shape(const LayerSpec& layer, const Shape& input) {
  if (layer.is_fc()) {
    const auto& fc = layer.fc();
    if (input.elements() != fc.inputs) {
      throw ShapeMismatch(layer_tag(layer.id) + ": fc expects " + std::to_string(fc.inputs) +
                              " inputs, previous layer produces " + std::to_string(input.elements()),
                          layer.id);
    }
    return {1, 1, fc.outputs};
  }
  if (layer.is_conv()) {
    const auto& g = layer.conv().geometry;
    if (g.in_h != input.h || g.in_w != input.w || g.in_c != input.c) {
      throw ShapeMismatch(layer_tag(layer.id) + ": conv input " + std::to_string(g.in_h) + "x" +
                              std::to_string(g.in_w) + "x" + std::to_string(g.in_c) +
                              " does not match incoming " + std::to_string(input.h) + "x" +
                              std::to_string(input.w) + "x" + std::to_string(input.c),
                          layer.id);
    }
    try {
      g.validate();
    } catch (const InvalidGeometry& e) {
      throw ShapeMismatch(layer_tag(layer.id) + ": " + e.what(), layer.id);
    }
    return {g.out_h(), g.out_w(), g.filters};
  }
  const auto& p = layer.pool();
  if (p.window == 0 || p.stride == 0 || p.window > input.h || p.window > input.w) {
    throw ShapeMismatch(layer_tag(layer.id) + ": pool window exceeds input", layer.id);
  }
  return {(input.h - p.window) / p.stride + 1, (input.w - p.window) / p.stride + 1, input.c};
}

void derive_shapes(ModelSpec& model, std::optional<Shape> first_input) {
  if (model.layers.empty()) throw ParseError("model '" + model.name + "' has no layers");
  model.input_shapes.clear();
  model.output_shapes.clear();
  std::vector<std::uint32_t> ids;
  Shape current{};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (std::find(ids.begin(), ids.end(), layer.id) != ids.end()) {
      throw ParseError("duplicate layer id " + std::to_string(layer.id));
    }
    if (layer.id > kMaxLayerId) throw ParseError(layer_tag(layer.id) + ": id too large");
    ids.push_back(layer.id);
    if (i == 0) {
      if (first_input) {
        current = *first_input;
      } else if (layer.is_fc()) {
        current = {1, 1, layer.fc().inputs};
      } else if (layer.is_conv()) {
        const auto& g = layer.conv().geometry;
        current = {g.in_h, g.in_w, g.in_c};
      } else {
        throw ShapeMismatch("a pool layer cannot be the first layer", layer.id);
      }
    }
    model.input_shapes.push_back(current);
    current = layer_output_shape(layer, current);
    model.output_shapes.push_back(current);
  }
}

namespace {

ModelSpec parse_model_doc(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model descriptor: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc.at("layers").is_array()) {
    throw ParseError("model descriptor must be an object with a 'layers' array");
  }
  ModelSpec model;
  model.name = doc.value("name", std::string("model"));
  std::optional<Shape> previous;
  for (const auto& jl : doc.at("layers")) {
    if (!jl.is_object()) throw ParseError("layer entries must be objects");
    LayerSpec layer;
    if (!jl.contains("id") || !jl.at("id").is_number_unsigned()) {
      throw ParseError("layer without a non-negative integer 'id'");
    }
    layer.id = jl.at("id").get<std::uint32_t>();
    const std::string kind = jl.value("kind", std::string());
    layer.activation = parse_activation(jl.value("activation", std::string("identity")));
    layer.has_bias = jl.value("bias", false);
    if (kind == "fc") {
      layer.kind = FcParams{get_count(jl, "inputs", layer.id), get_count(jl, "outputs", layer.id)};
    } else if (kind == "conv") {
      ConvGeometry g;
      if (jl.contains("input")) {
        const auto& in = jl.at("input");
        if (!in.is_array() || in.size() != 3) throw ParseError(layer_tag(layer.id) + ": input must be [h,w,c]");
        g.in_h = in[0].get<std::size_t>();
        g.in_w = in[1].get<std::size_t>();
        g.in_c = in[2].get<std::size_t>();
      } else if (previous) {
        g.in_h = previous->h;
        g.in_w = previous->w;
        g.in_c = previous->c;
      } else {
        throw ParseError(layer_tag(layer.id) + ": first conv layer needs 'input' [h,w,c]");
      }
      g.filter = get_count(jl, "filter", layer.id);
      g.stride = get_count_or(jl, "stride", 1, layer.id);
      g.padding = get_count_or(jl, "padding", 0, layer.id, true);
      g.filters = get_count(jl, "filters", layer.id);
      layer.kind = ConvParams{g};
    } else if (kind == "pool") {
      PoolParams p;
      p.window = get_count(jl, "window", layer.id);
      p.stride = get_count_or(jl, "stride", p.window, layer.id);
      const std::string mode = jl.value("mode", std::string("max"));
      if (mode == "max") {
        p.kind = PoolKind::Max;
      } else if (mode == "avg") {
        p.kind = PoolKind::Avg;
      } else {
        throw ParseError(layer_tag(layer.id) + ": unknown pool mode '" + mode + "'");
      }
      layer.kind = p;
      layer.has_bias = false;
    } else {
      throw ParseError(layer_tag(layer.id) + ": unknown kind '" + kind + "'");
    }
    if (!previous && layer.is_pool()) throw ShapeMismatch("a pool layer cannot be the first layer", layer.id);
    Shape in{};
    if (previous) {
      in = *previous;
    } else if (layer.is_fc()) {
      in = {1, 1, layer.fc().inputs};
    } else {
      const auto& g = layer.conv().geometry;
      in = {g.in_h, g.in_w, g.in_c};
    }
    previous = layer_output_shape(layer, in);
    model.layers.push_back(std::move(layer));
  }
  derive_shapes(model);
  return model;
}

}  // namespace

ModelSpec load_model(std::string_view json_text) {
  try {
    return parse_model_doc(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model descriptor: ") + e.what());
  }
}

ModelSpec load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model descriptor " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string model_to_json(const ModelSpec& model) {
  json doc;
  doc["name"] = model.name;
  doc["layers"] = json::array();
  for (const auto& layer : model.layers) {
    json jl;
    jl["id"] = layer.id;
    if (layer.is_fc()) {
      jl["kind"] = "fc";
      jl["inputs"] = layer.fc().inputs;
      jl["outputs"] = layer.fc().outputs;
    } else if (layer.is_conv()) {
      const auto& g = layer.conv().geometry;
      jl["kind"] = "conv";
      jl["input"] = {g.in_h, g.in_w, g.in_c};
      jl["filter"] = g.filter;
      jl["stride"] = g.stride;
      jl["padding"] = g.padding;
      jl["filters"] = g.filters;
    } else {
      jl["kind"] = "pool";
      jl["window"] = layer.pool().window;
      jl["stride"] = layer.pool().stride;
      jl["mode"] = layer.pool().kind == PoolKind::Max ? "max" : "avg";
    }
    jl["activation"] = std::string(to_string(layer.activation));
    jl["bias"] = layer.has_bias;
    doc["layers"].push_back(std::move(jl));
  }
  return doc.dump(2);
}

template <typename T>
Tensor3<T> pool_forward(const Tensor3<T>& input, const PoolParams& pool) {
  if (pool.window > input.height() || pool.window > input.width() || pool.stride == 0) {
    throw ShapeMismatch("pool window exceeds input");
  }
  const std::size_t ho = (input.height() - pool.window) / pool.stride + 1;
  const std::size_t wo = (input.width() - pool.window) / pool.stride + 1;
  Tensor3<T> out(ho, wo, input.channels());
  const T inv = T{1} / static_cast<T>(pool.window * pool.window);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      for (std::size_t c = 0; c < input.channels(); ++c) {
        T acc = pool.kind == PoolKind::Max ? std::numeric_limits<T>::lowest() : T{0};
        for (std::size_t dy = 0; dy < pool.window; ++dy) {
          for (std::size_t dx = 0; dx < pool.window; ++dx) {
            const T v = input.at(oy * pool.stride + dy, ox * pool.stride + dx, c);
            acc = pool.kind == PoolKind::Max ? std::max(acc, v) : acc + v;
          }
        }
        out.at(oy, ox, c) = pool.kind == PoolKind::Max ? acc : acc * inv;
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> layer_forward(const LayerSpec& layer, const WeightStore<T>& weights, const Tensor3<T>& input) {
  const Shape in_shape{input.height(), input.width(), input.channels()};
  const Shape out_shape = layer_output_shape(layer, in_shape);
  if (layer.is_pool()) return pool_forward(input, layer.pool());
  const auto& lw = weights.at(layer.id);
  std::vector<T> zero_bias;
  std::span<const T> bias = lw.bias;
  if (!layer.has_bias) {
    zero_bias.assign(out_shape.c, T{0});
    bias = zero_bias;
  }
  if (layer.is_fc()) {
    const Matrix<T> a = Matrix<T>::column(input.data());
    const Matrix<T> out = affine_activate(gemm(lw.matrix(), a), bias, layer.activation);
    return Tensor3<T>(1, 1, out.rows(), out.values());
  }
  const auto& g = layer.conv().geometry;
  const Matrix<T> out = affine_activate(gemm(unroll_filters(lw.filters()), im2col(input, g)), bias,
                                        layer.activation);
  return conv_matrix_to_tensor(out, g.out_h(), g.out_w());
}

template <typename T>
std::vector<T> reference_forward(const ModelSpec& model, const WeightStore<T>& weights,
                                 const Tensor3<T>& input) {
  const Shape expected = model.input_shape();
  if (input.height() != expected.h || input.width() != expected.w || input.channels() != expected.c) {
    // fc-first models accept any tensor with the right element count.
    if (!(model.layers.front().is_fc() && input.size() == expected.elements())) {
      throw ShapeMismatch("input shape does not match first layer", model.layers.front().id);
    }
  }
  Tensor3<T> act = input;
  for (const auto& layer : model.layers) act = layer_forward(layer, weights, act);
  return act.values();
}

template <typename T>
std::vector<T> reference_forward(const ModelSpec& model, const WeightStore<T>& weights,
                                 std::span<const T> input) {
  const Shape s = model.input_shape();
  if (input.size() != s.elements()) {
    throw ShapeMismatch("input has " + std::to_string(input.size()) + " elements, model expects " +
                            std::to_string(s.elements()),
                        model.layers.front().id);
  }
  return reference_forward(model, weights, Tensor3<T>(s.h, s.w, s.c, std::vector<T>(input.begin(), input.end())));
}

#define CDC_INSTANTIATE(T)                                                                         \
  template Tensor3<T> pool_forward(const Tensor3<T>&, const PoolParams&);                          \
  template Tensor3<T> layer_forward(const LayerSpec&, const WeightStore<T>&, const Tensor3<T>&);   \
  template std::vector<T> reference_forward(const ModelSpec&, const WeightStore<T>&, const Tensor3<T>&); \
  template std::vector<T> reference_forward(const ModelSpec&, const WeightStore<T>&, std::span<const T>);

CDC_INSTANTIATE(float)
CDC_INSTANTIATE(double)

#undef CDC_INSTANTIATE

}  // namespace cdc
