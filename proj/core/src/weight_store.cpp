// SPDX-License-Identifier: Apache-2.0

#include "cdc/weight_store.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace cdc {

static_assert(std::endian::native == std::endian::little, "weight files are written in host order");

namespace {

constexpr char kMagic[4] = {'C', 'D', 'C', 'W'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ChecksumError("weight file truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

template <typename T>
void put_record(std::vector<std::uint8_t>& out, std::uint32_t id, std::span<const std::uint32_t> dims,
                std::span<const T> data) {
  const std::size_t start = out.size();
  put(out, id);
  put(out, dtype_tag<T>());
  put(out, static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put(out, d);
  const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
  out.insert(out.end(), p, p + data.size_bytes());
  put(out, crc_of(std::span<const std::uint8_t>(out).subspan(start)));
}

struct Record {
  std::uint32_t id;
  std::vector<std::uint32_t> dims;
  std::span<const std::uint8_t> raw;
};

template <typename T>
std::vector<T> as_values(std::span<const std::uint8_t> raw) {
  std::vector<T> v(raw.size() / sizeof(T));
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

std::uint32_t u32(std::size_t v) {
  if (v > 0xFFFF'FFFFu) throw InvalidArgument("dimension exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

template <typename T>
const LayerWeights<T>& WeightStore<T>::at(std::uint32_t layer_id) const {
  auto it = layers.find(layer_id);
  if (it == layers.end()) {
    throw ShapeMismatch("no weights for layer " + std::to_string(layer_id), layer_id);
  }
  return it->second;
}

template <typename T>
void validate_weights(const ModelSpec& model, const WeightStore<T>& store) {
  for (const auto& layer : model.layers) {
    if (!layer.has_weights()) continue;
    const auto& lw = store.at(layer.id);
    const std::string tag = "layer " + std::to_string(layer.id);
    std::size_t out = 0;
    if (layer.is_fc()) {
      const auto* m = std::get_if<Matrix<T>>(&lw.weight);
      if (!m || m->rows() != layer.fc().outputs || m->cols() != layer.fc().inputs) {
        throw ShapeMismatch(tag + ": fc weight must be outputs x inputs", layer.id);
      }
      out = layer.fc().outputs;
    } else {
      const auto& g = layer.conv().geometry;
      const auto* f = std::get_if<Tensor4<T>>(&lw.weight);
      if (!f || f->filter() != g.filter || f->channels() != g.in_c || f->filters() != g.filters) {
        throw ShapeMismatch(tag + ": filter bank does not match conv geometry", layer.id);
      }
      out = g.filters;
    }
    if (layer.has_bias ? lw.bias.size() != out : !lw.bias.empty()) {
      throw ShapeMismatch(tag + ": bias length mismatch", layer.id);
    }
  }
}

template <typename T>
WeightStore<T> random_weights(const ModelSpec& model, std::uint64_t seed, double scale) {
  WeightStore<T> store;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  auto draw = [&](std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
  };
  for (const auto& layer : model.layers) {
    if (!layer.has_weights()) continue;
    if (layer.is_fc()) {
      const auto& fc = layer.fc();
      LayerWeights<T> lw{Matrix<T>(fc.outputs, fc.inputs, draw(fc.outputs * fc.inputs)), {}};
      if (layer.has_bias) lw.bias = draw(fc.outputs);
      store.layers.emplace(layer.id, std::move(lw));
    } else {
      const auto& g = layer.conv().geometry;
      LayerWeights<T> lw{Tensor4<T>(g.filter, g.in_c, g.filters, draw(g.filters * g.patch_size())), {}};
      if (layer.has_bias) lw.bias = draw(g.filters);
      store.layers.emplace(layer.id, std::move(lw));
    }
  }
  return store;
}

template <typename T>
std::vector<std::uint8_t> serialize_weights(const WeightStore<T>& store) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kWeightFormatVersion);
  std::uint32_t count = 0;
  for (const auto& [id, lw] : store.layers) count += lw.bias.empty() ? 1 : 2;
  for (const auto& [key, cb] : store.coded) count += cb.bias.empty() ? 1 : 2;
  put(out, count);
  for (const auto& [id, lw] : store.layers) {
    if (id > kMaxLayerId) throw InvalidArgument("layer id too large for weight file");
    if (const auto* m = std::get_if<Matrix<T>>(&lw.weight)) {
      const std::uint32_t dims[] = {u32(m->rows()), u32(m->cols())};
      put_record<T>(out, id, dims, m->data());
    } else {
      const auto& f = std::get<Tensor4<T>>(lw.weight);
      const std::uint32_t dims[] = {u32(f.filters()), u32(f.filter()), u32(f.filter()), u32(f.channels())};
      put_record<T>(out, id, dims, f.data());
    }
    if (!lw.bias.empty()) {
      const std::uint32_t dims[] = {u32(lw.bias.size())};
      put_record<T>(out, id, dims, lw.bias);
    }
  }
  for (const auto& [key, cb] : store.coded) {
    const auto [layer, group] = key;
    if (layer > kMaxLayerId || group >= (1u << 11)) throw InvalidArgument("coded record key out of range");
    const std::uint32_t id = kCodedRecordFlag | (group << 20) | layer;
    const std::uint32_t dims[] = {u32(cb.weight.rows()), u32(cb.weight.cols())};
    put_record<T>(out, id, dims, cb.weight.data());
    if (!cb.bias.empty()) {
      const std::uint32_t bdims[] = {u32(cb.bias.size())};
      put_record<T>(out, id, bdims, cb.bias);
    }
  }
  return out;
}

template <typename T>
WeightStore<T> deserialize_weights(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  if (bytes.size() < 4) throw ChecksumError("weight file truncated");
  if (std::memcmp(rd.take(4).data(), kMagic, 4) != 0) throw FormatVersionError("not a CDCW weight file");
  const auto version = rd.get<std::uint16_t>();
  if (version != kWeightFormatVersion) {
    throw FormatVersionError("unsupported weight file version " + std::to_string(version));
  }
  const auto count = rd.get<std::uint32_t>();
  WeightStore<T> store;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::size_t start = rd.pos();
    Record rec;
    rec.id = rd.get<std::uint32_t>();
    const auto dtype = rd.get<std::uint8_t>();
    const auto rank = rd.get<std::uint8_t>();
    std::size_t elems = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      rec.dims.push_back(rd.get<std::uint32_t>());
      elems *= rec.dims.back();
    }
    const std::size_t width = dtype == 0 ? 4 : dtype == 1 ? 8 : 0;
    if (width == 0) throw FormatVersionError("unknown dtype tag " + std::to_string(dtype));
    rec.raw = rd.take(elems * width);
    const std::size_t end = rd.pos();
    const auto stored_crc = rd.get<std::uint32_t>();
    if (stored_crc != crc_of(bytes.subspan(start, end - start))) {
      throw ChecksumError("CRC mismatch in weight record " + std::to_string(r));
    }
    if (dtype != dtype_tag<T>()) {
      throw FormatVersionError("weight file element type does not match requested type");
    }
    auto values = as_values<T>(rec.raw);
    const bool coded = (rec.id & kCodedRecordFlag) != 0;
    const std::uint32_t layer = rec.id & kMaxLayerId;
    if (coded) {
      const std::uint32_t group = (rec.id & ~kCodedRecordFlag) >> 20;
      auto key = std::make_pair(layer, group);
      if (rank == 2) {
        store.coded.insert_or_assign(key, CodedBlock<T>{Matrix<T>(rec.dims[0], rec.dims[1], std::move(values)), {}});
      } else if (rank == 1) {
        auto it = store.coded.find(key);
        if (it == store.coded.end()) throw FormatVersionError("coded bias before coded weight");
        it->second.bias = std::move(values);
      } else {
        throw FormatVersionError("coded record must be rank 1 or 2");
      }
      continue;
    }
    if (rank == 2) {
      store.layers.insert_or_assign(layer, LayerWeights<T>{Matrix<T>(rec.dims[0], rec.dims[1], std::move(values)), {}});
    } else if (rank == 4) {
      if (rec.dims[1] != rec.dims[2]) throw FormatVersionError("filters must be square");
      store.layers.insert_or_assign(
          layer, LayerWeights<T>{Tensor4<T>(rec.dims[1], rec.dims[3], rec.dims[0], std::move(values)), {}});
    } else if (rank == 1) {
      auto it = store.layers.find(layer);
      if (it == store.layers.end()) throw FormatVersionError("bias record before weight record");
      it->second.bias = std::move(values);
    } else {
      throw FormatVersionError("unsupported record rank " + std::to_string(rank));
    }
  }
  if (!rd.done()) throw ChecksumError("trailing bytes after last weight record");
  return store;
}

template <typename T>
void save_weights(const WeightStore<T>& store, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

template <typename T>
WeightStore<T> load_weights(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return deserialize_weights<T>(bytes);
}

std::optional<std::uint8_t> weight_file_dtype(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  // magic(4) version(2) count(4) id(4) dtype(1)
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatVersionError("not a CDCW weight file");
  }
  if (bytes.size() < 15) return std::nullopt;
  return bytes[14];
}

#define CDC_INSTANTIATE(T)                                                                   \
  template struct WeightStore<T>;                                                            \
  template void validate_weights(const ModelSpec&, const WeightStore<T>&);                   \
  template WeightStore<T> random_weights(const ModelSpec&, std::uint64_t, double);           \
  template std::vector<std::uint8_t> serialize_weights(const WeightStore<T>&);               \
  template WeightStore<T> deserialize_weights(std::span<const std::uint8_t>);                \
  template void save_weights(const WeightStore<T>&, const std::filesystem::path&);          \
  template WeightStore<T> load_weights(const std::filesystem::path&);

CDC_INSTANTIATE(float)
CDC_INSTANTIATE(double)

#undef CDC_INSTANTIATE

}  // namespace cdc
