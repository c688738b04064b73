// SPDX-License-Identifier: Apache-2.0
#include "prunekit/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "prunekit/error.hpp"

namespace prunekit {

namespace {

using nlohmann::json;

constexpr std::size_t kHeaderBytes = 8 + 4;

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  if (s == "u8") return DType::U8;
  return std::nullopt;
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

template <typename U>
void put_le(std::vector<std::byte>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

template <typename U>
U get_le(const std::byte* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(std::to_integer<unsigned>(p[i])) << (8 * i);
  return v;
}

void append_payload(std::vector<std::byte>& out, const TensorData& data) {
  std::visit(
      [&out](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (T x : v) {
          if constexpr (std::is_same_v<T, float>) {
            put_le(out, std::bit_cast<std::uint32_t>(x));
          } else if constexpr (std::is_same_v<T, double>) {
            put_le(out, std::bit_cast<std::uint64_t>(x));
          } else {
            out.push_back(static_cast<std::byte>(x));
          }
        }
      },
      data);
}

TensorData read_payload(DType dtype, const std::byte* p, std::size_t count) {
  switch (dtype) {
    case DType::F32: {
      std::vector<float> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
      return v;
    }
    case DType::F64: {
      std::vector<double> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
      return v;
    }
    case DType::U8: {
      std::vector<std::uint8_t> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::to_integer<std::uint8_t>(p[i]);
      return v;
    }
  }
  return {};
}

json manifest_of(const TensorContainer& c) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& r : c.records()) {
    json e;
    e["name"] = r.name;
    e["shape"] = r.shape;
    e["dtype"] = std::string(to_string(r.dtype()));
    e["offset"] = offset;
    if (r.is_layer()) {
      e["centered"] = *r.centered;
      e["has_bias"] = r.has_bias.value_or(false);
    }
    tensors.push_back(std::move(e));
    offset += r.byte_length();
  }
  return json{{"version", 1}, {"tensors", std::move(tensors)}};
}

}  // namespace

std::string_view to_string(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::U8: return "u8";
  }
  return "?";
}

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

DType TensorRecord::dtype() const noexcept {
  switch (data.index()) {
    case 0: return DType::F32;
    case 1: return DType::F64;
    default: return DType::U8;
  }
}

std::size_t TensorRecord::element_count() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

std::size_t TensorRecord::byte_length() const noexcept { return element_count() * dtype_size(dtype()); }

void WeightLayer::validate(std::string_view name) const {
  if (!all_finite(weights.storage()))
    throw Error(ErrorCode::NonFiniteInput, "non-finite weight in '" + std::string(name) + "'");
  if (bias) {
    if (bias->size() != weights.cols())
      throw Error(ErrorCode::ShapeMismatch, "bias length of '" + std::string(name) + "' does not match output dim");
    if (!all_finite(*bias))
      throw Error(ErrorCode::NonFiniteInput, "non-finite bias in '" + std::string(name) + "'");
  }
}

const TensorRecord* TensorContainer::find(std::string_view name) const noexcept {
  auto it = std::find_if(records_.begin(), records_.end(), [&](const auto& r) { return r.name == name; });
  return it == records_.end() ? nullptr : &*it;
}

const TensorRecord& TensorContainer::at(std::string_view name) const {
  if (const auto* r = find(name)) return *r;
  throw Error(ErrorCode::InvalidArgument, "no tensor named '" + std::string(name) + "'");
}

void TensorContainer::add(TensorRecord record) {
  if (contains(record.name))
    throw Error(ErrorCode::InvariantViolation, "duplicate tensor name '" + record.name + "'");
  records_.push_back(std::move(record));
}

void TensorContainer::put(TensorRecord record) {
  auto it = std::find_if(records_.begin(), records_.end(), [&](const auto& r) { return r.name == record.name; });
  if (it == records_.end())
    records_.push_back(std::move(record));
  else
    *it = std::move(record);
}

void TensorContainer::add_layer(const std::string& name, const WeightLayer& layer) {
  if (contains(name) || contains(name + ".bias"))
    throw Error(ErrorCode::InvariantViolation, "duplicate tensor name '" + name + "'");
  put_layer(name, layer);
}

void TensorContainer::put_layer(const std::string& name, const WeightLayer& layer) {
  TensorRecord w{name, {layer.weights.rows(), layer.weights.cols()}, layer.weights.storage(), layer.centered,
                 layer.bias.has_value()};
  put(std::move(w));
  if (layer.bias) {
    put(TensorRecord{name + ".bias", {layer.bias->size()}, *layer.bias, std::nullopt, std::nullopt});
  } else {
    std::erase_if(records_, [&](const auto& r) { return r.name == name + ".bias"; });
  }
}

WeightLayer TensorContainer::layer(std::string_view name) const {
  const auto& r = at(name);
  if (!r.is_layer() || r.shape.size() != 2 || r.dtype() != DType::F32)
    throw Error(ErrorCode::InvalidArgument, "'" + r.name + "' is not a layer");
  WeightLayer layer;
  layer.weights = MatrixF(r.shape[0], r.shape[1], std::get<std::vector<float>>(r.data));
  layer.centered = *r.centered;
  if (r.has_bias.value_or(false)) {
    const auto& b = at(r.name + ".bias");
    layer.bias = std::get<std::vector<float>>(b.data);
  }
  return layer;
}

std::vector<std::string> TensorContainer::layer_names() const {
  std::vector<std::string> names;
  for (const auto& r : records_)
    if (r.is_layer()) names.push_back(r.name);
  return names;
}

void TensorContainer::put_matrix(const std::string& name, const MatrixF& m) {
  put(TensorRecord{name, {m.rows(), m.cols()}, m.storage(), std::nullopt, std::nullopt});
}

MatrixF TensorContainer::matrix(std::string_view name) const {
  const auto& r = at(name);
  if (r.shape.size() != 2 || r.dtype() != DType::F32)
    throw Error(ErrorCode::ShapeMismatch, "'" + r.name + "' is not a 2-D f32 tensor");
  return MatrixF(r.shape[0], r.shape[1], std::get<std::vector<float>>(r.data));
}

void TensorContainer::put_vector(const std::string& name, std::vector<double> v) {
  const std::size_t n = v.size();
  put(TensorRecord{name, {n}, std::move(v), std::nullopt, std::nullopt});
}

std::vector<double> TensorContainer::vector_f64(std::string_view name) const {
  const auto& r = at(name);
  if (r.dtype() != DType::F64) throw Error(ErrorCode::ShapeMismatch, "'" + r.name + "' is not an f64 tensor");
  return std::get<std::vector<double>>(r.data);
}

void TensorContainer::validate() const {
  std::set<std::string_view> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.name).second)
      throw Error(ErrorCode::InvariantViolation, "duplicate tensor name '" + r.name + "'");
    if (product(r.shape) != r.element_count())
      throw Error(ErrorCode::ShapeMismatch, "'" + r.name + "' declares shape " + shape_string(r.shape) + " but holds " +
                                                std::to_string(r.element_count()) + " elements");
    const bool finite = std::visit(
        [](const auto& v) {
          using T = typename std::decay_t<decltype(v)>::value_type;
          if constexpr (std::is_floating_point_v<T>) return all_finite(v);
          return true;
        },
        r.data);
    if (!finite) throw Error(ErrorCode::InvariantViolation, "non-finite value in '" + r.name + "'");
    if (r.is_layer()) {
      if (r.shape.size() != 2 || r.dtype() != DType::F32)
        throw Error(ErrorCode::ShapeMismatch, "layer '" + r.name + "' must be a 2-D f32 tensor");
      if (r.has_bias.value_or(false)) {
        const auto* b = find(r.name + ".bias");
        if (b == nullptr)
          throw Error(ErrorCode::ShapeMismatch, "layer '" + r.name + "' declares a bias but none is stored");
        if (b->shape != std::vector<std::size_t>{r.shape[1]} || b->dtype() != DType::F32)
          throw Error(ErrorCode::ShapeMismatch, "bias of layer '" + r.name + "' must be f32 of length " +
                                                    std::to_string(r.shape[1]));
      }
    }
  }
}

std::vector<std::byte> serialize_container(const TensorContainer& c) {
  c.validate();
  const std::string manifest = manifest_of(c).dump();
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + manifest.size());
  for (char ch : kContainerMagic) out.push_back(static_cast<std::byte>(ch));
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  for (char ch : manifest) out.push_back(static_cast<std::byte>(ch));
  for (const auto& r : c.records()) append_payload(out, r.data);
  return out;
}

TensorContainer deserialize_container(std::span<const std::byte> bytes) {
  if (bytes.size() < kContainerMagic.size() ||
      !std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin(),
                  [](char a, std::byte b) { return static_cast<std::byte>(a) == b; }))
    throw Error(ErrorCode::MagicMismatch, "missing container magic \"PRUNEKT1\"");
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedPayload, "header truncated");
  const auto manifest_len = get_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() - kHeaderBytes < manifest_len) throw Error(ErrorCode::TruncatedPayload, "manifest truncated");

  const auto* mbegin = reinterpret_cast<const char*>(bytes.data() + kHeaderBytes);
  json manifest = json::parse(mbegin, mbegin + manifest_len, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("tensors") || !manifest["tensors"].is_array())
    throw Error(ErrorCode::InvariantViolation, "manifest is not a valid tensor listing");

  const auto payload = bytes.subspan(kHeaderBytes + manifest_len);
  TensorContainer c;
  std::size_t expected_offset = 0;
  for (const auto& e : manifest["tensors"]) {
    std::string name = e.value("name", std::string{});
    try {
      auto dtype = parse_dtype(e.at("dtype").get<std::string>());
      if (!dtype) throw Error(ErrorCode::InvariantViolation, "unsupported dtype for '" + name + "'");
      auto shape = e.at("shape").get<std::vector<std::size_t>>();
      auto offset = e.at("offset").get<std::size_t>();
      const std::size_t count = product(shape);
      const std::size_t len = count * dtype_size(*dtype);
      if (offset != expected_offset)
        throw Error(ErrorCode::ShapeMismatch, "'" + name + "' offset " + std::to_string(offset) +
                                                  " does not follow the previous buffer");
      if (offset > payload.size() || payload.size() - offset < len)
        throw Error(ErrorCode::TruncatedPayload, "'" + name + "' needs " + std::to_string(len) + " bytes at offset " +
                                                     std::to_string(offset) + " but payload holds " +
                                                     std::to_string(payload.size()));
      TensorRecord r{name, std::move(shape), read_payload(*dtype, payload.data() + offset, count), std::nullopt,
                     std::nullopt};
      if (e.contains("centered")) {
        r.centered = e.at("centered").get<bool>();
        r.has_bias = e.value("has_bias", false);
      }
      c.add(std::move(r));
      expected_offset = offset + len;
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::InvariantViolation, "malformed manifest entry '" + name + "': " + ex.what());
    }
  }
  if (expected_offset != payload.size())
    throw Error(ErrorCode::ShapeMismatch, "payload holds " + std::to_string(payload.size() - expected_offset) +
                                              " bytes beyond the declared tensors");
  c.validate();
  return c;
}

TensorContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_container(std::as_bytes(std::span(raw)));
}

void save_container(const TensorContainer& c, const std::filesystem::path& path) {
  const auto bytes = serialize_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write to '" + path.string() + "' failed");
}

}  // namespace prunekit
