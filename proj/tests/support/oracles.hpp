// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations and random generators for tests.
// Nothing here calls the library's gemm/im2col/reference_forward: the
// oracles are plain loops over the natural index formulas.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "cdc/model.hpp"
#include "cdc/splitter.hpp"
#include "cdc/weight_store.hpp"

namespace cdc::testing {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <typename T>
std::vector<T> random_values(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(uniform(rng, -scale, scale));
  return v;
}

template <typename T>
Matrix<T> random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  return Matrix<T>(rows, cols, random_values<T>(rng, rows * cols));
}

template <typename T>
Tensor3<T> random_tensor(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  return Tensor3<T>(h, w, c, random_values<T>(rng, h * w * c));
}

template <typename T>
Matrix<T> naive_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<T>(acc);
    }
  }
  return out;
}

inline double relu_or(ActivationKind act, double v) { return act == ActivationKind::ReLU ? std::max(0.0, v) : v; }

// Sliding-window convolution straight from the definition.
template <typename T>
Tensor3<T> direct_conv(const Tensor3<T>& x, const Tensor4<T>& w, const std::vector<T>& bias, std::size_t stride,
                       std::size_t pad, ActivationKind act) {
  const std::size_t f = w.filter();
  const std::size_t ho = (x.height() + 2 * pad - f) / stride + 1;
  const std::size_t wo = (x.width() + 2 * pad - f) / stride + 1;
  Tensor3<T> y(ho, wo, w.filters());
  for (std::size_t k = 0; k < w.filters(); ++k) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        long double acc = bias.empty() ? 0.0L : bias[k];
        for (std::size_t dy = 0; dy < f; ++dy) {
          for (std::size_t dx = 0; dx < f; ++dx) {
            const long long iy = static_cast<long long>(oy * stride + dy) - static_cast<long long>(pad);
            const long long ix = static_cast<long long>(ox * stride + dx) - static_cast<long long>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long long>(x.height()) ||
                ix >= static_cast<long long>(x.width())) {
              continue;
            }
            for (std::size_t c = 0; c < x.channels(); ++c) {
              acc += static_cast<long double>(w.at(k, dy, dx, c)) * x.at(iy, ix, c);
            }
          }
        }
        y.at(oy, ox, k) = static_cast<T>(relu_or(act, static_cast<double>(acc)));
      }
    }
  }
  return y;
}

template <typename T>
std::vector<T> direct_fc(const Matrix<T>& w, const std::vector<T>& bias, std::span<const T> x, ActivationKind act) {
  std::vector<T> y(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    long double acc = bias.empty() ? 0.0L : bias[i];
    for (std::size_t k = 0; k < w.cols(); ++k) acc += static_cast<long double>(w(i, k)) * x[k];
    y[i] = static_cast<T>(relu_or(act, static_cast<double>(acc)));
  }
  return y;
}

template <typename T>
Tensor3<T> direct_pool(const Tensor3<T>& x, const PoolParams& p) {
  const std::size_t ho = (x.height() - p.window) / p.stride + 1;
  const std::size_t wo = (x.width() - p.window) / p.stride + 1;
  Tensor3<T> y(ho, wo, x.channels());
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      for (std::size_t c = 0; c < x.channels(); ++c) {
        double best = -INFINITY, sum = 0;
        for (std::size_t dy = 0; dy < p.window; ++dy) {
          for (std::size_t dx = 0; dx < p.window; ++dx) {
            const double v = x.at(oy * p.stride + dy, ox * p.stride + dx, c);
            best = std::max(best, v);
            sum += v;
          }
        }
        y.at(oy, ox, c) = static_cast<T>(p.kind == PoolKind::Max ? best : sum / (p.window * p.window));
      }
    }
  }
  return y;
}

template <typename T>
Tensor3<T> oracle_layer(const LayerSpec& layer, const WeightStore<T>& ws, const Tensor3<T>& x) {
  if (layer.is_pool()) return direct_pool(x, layer.pool());
  const auto& lw = ws.layers.at(layer.id);
  if (layer.is_fc()) {
    auto y = direct_fc(lw.matrix(), lw.bias, x.data(), layer.activation);
    const auto m = y.size();
    return Tensor3<T>(1, 1, m, std::move(y));
  }
  const auto& g = layer.conv().geometry;
  return direct_conv(x, lw.filters(), lw.bias, g.stride, g.padding, layer.activation);
}

template <typename T>
std::vector<T> oracle_forward(const ModelSpec& model, const WeightStore<T>& ws, Tensor3<T> x) {
  for (const auto& layer : model.layers) x = oracle_layer(layer, ws, x);
  return x.values();
}

inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double scale = 1e-30, diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

template <typename T, typename U>
double rel_error(std::span<const T> a, std::span<const U> b) {
  std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
  if (da.size() != db.size()) return INFINITY;
  return rel_error(std::span<const double>(da), std::span<const double>(db));
}

// Random single layers within the acceptance bounds.
inline LayerSpec random_fc(Rng& rng, std::size_t min_m = 1, std::size_t max_dim = 256) {
  LayerSpec l;
  l.id = 1;
  l.kind = FcParams{pick(rng, 1, max_dim), pick(rng, min_m, max_dim)};
  l.activation = pick(rng, 0, 1) ? ActivationKind::ReLU : ActivationKind::Identity;
  l.has_bias = pick(rng, 0, 1) == 1;
  return l;
}

inline LayerSpec random_conv(Rng& rng, std::size_t min_h = 1, std::size_t min_c = 1, std::size_t min_k = 1) {
  for (;;) {
    ConvGeometry g;
    g.in_h = pick(rng, std::max<std::size_t>(min_h, 1), 12);
    g.in_w = pick(rng, 1, 12);
    g.in_c = pick(rng, min_c, 6);
    g.filter = pick(rng, 1, 3);
    g.stride = pick(rng, 1, 2);
    g.padding = pick(rng, 0, g.filter - 1);  // every output row touches real input
    g.filters = pick(rng, min_k, 8);
    if (g.in_h + 2 * g.padding < g.filter || g.in_w + 2 * g.padding < g.filter) continue;
    LayerSpec l;
    l.id = 1;
    l.kind = ConvParams{g};
    l.activation = pick(rng, 0, 1) ? ActivationKind::ReLU : ActivationKind::Identity;
    l.has_bias = pick(rng, 0, 1) == 1;
    return l;
  }
}

// A random layer that `method` can split n ways.
inline LayerSpec random_layer_for(Rng& rng, SplitMethod method, std::size_t n) {
  switch (method) {
    case SplitMethod::FcOutput: return random_fc(rng, n);
    case SplitMethod::FcInput: {
      LayerSpec l = random_fc(rng);
      auto fc = l.fc();
      fc.inputs = std::max(fc.inputs, n);
      l.kind = fc;
      return l;
    }
    case SplitMethod::ConvChannel: return random_conv(rng, 1, 1, n);
    case SplitMethod::ConvFilter: return random_conv(rng, 1, n, 1);
    case SplitMethod::ConvSpatial: break;
  }
  for (;;) {
    LayerSpec l = random_conv(rng, n);
    if (l.conv().geometry.out_h() >= n) return l;
  }
}

inline ModelSpec single_layer_model(const LayerSpec& layer) {
  ModelSpec m;
  m.name = "one";
  m.layers = {layer};
  std::optional<Shape> in;
  if (layer.is_fc()) in = Shape{1, 1, layer.fc().inputs};
  derive_shapes(m, in);
  return m;
}

// Which base devices stay unknown after repeatedly solving any coded
// equation with a single unknown. Written as a fixpoint over sets.
inline std::set<std::size_t> closure_unknown(std::size_t n, const std::vector<std::vector<std::size_t>>& groups,
                                             const std::set<std::size_t>& failed_base,
                                             const std::set<std::size_t>& failed_coded) {
  std::set<std::size_t> unknown = failed_base;
  bool changed = true;
  while (changed && !unknown.empty()) {
    changed = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (failed_coded.count(g)) continue;
      std::vector<std::size_t> u;
      for (auto d : groups[g]) {
        if (unknown.count(d)) u.push_back(d);
      }
      if (u.size() == 1) {
        unknown.erase(u.front());
        changed = true;
      }
    }
  }
  (void)n;
  return unknown;
}

// Rank test: the missing base partials are determined by the surviving
// coded sums iff the 0/1 incidence matrix restricted to them has full
// column rank.
inline bool rank_recoverable(const std::vector<std::vector<std::size_t>>& groups,
                             const std::set<std::size_t>& failed_base, const std::set<std::size_t>& failed_coded) {
  const std::vector<std::size_t> cols(failed_base.begin(), failed_base.end());
  std::vector<std::vector<double>> a;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (failed_coded.count(g)) continue;
    std::vector<double> row(cols.size(), 0.0);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      row[j] = std::count(groups[g].begin(), groups[g].end(), cols[j]) ? 1.0 : 0.0;
    }
    a.push_back(row);
  }
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols.size() && rank < a.size(); ++c) {
    std::size_t p = rank;
    while (p < a.size() && std::abs(a[p][c]) < 1e-12) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[rank]);
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (r == rank || std::abs(a[r][c]) < 1e-12) continue;
      const double f = a[r][c] / a[rank][c];
      for (std::size_t k = 0; k < cols.size(); ++k) a[r][k] -= f * a[rank][k];
    }
    ++rank;
  }
  return rank == cols.size();
}

inline std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace cdc::testing
