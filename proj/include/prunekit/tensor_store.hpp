// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor container.
//
// Layout (all integers little-endian):
//   "PRUNEKT1" (8 bytes) | u32 manifest length | UTF-8 JSON manifest | payload
//
// The manifest is {"tensors": [...], "version": 1}. Each entry carries name,
// shape, dtype ("f32", "f64" or "u8"), and a byte offset into the payload.
// Entries that describe a linear layer's weight matrix additionally carry
// `centered` and `has_bias`; the bias itself is stored as "<layer>.bias".
// Payload buffers are row-major and packed back to back in manifest order.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prunekit/matrix.hpp"

namespace prunekit {

inline constexpr std::string_view kContainerMagic = "PRUNEKT1";

enum class DType { F32, F64, U8 };

std::string_view to_string(DType dtype) noexcept;
std::size_t dtype_size(DType dtype) noexcept;

using TensorData = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint8_t>>;

struct TensorRecord {
  std::string name;
  std::vector<std::size_t> shape;
  TensorData data;
  // Present only on layer weight entries.
  std::optional<bool> centered;
  std::optional<bool> has_bias;

  DType dtype() const noexcept;
  std::size_t element_count() const noexcept;
  std::size_t byte_length() const noexcept;
  bool is_layer() const noexcept { return centered.has_value(); }
};

/// One linear layer y = x * weights + bias, weights shaped M (inputs) x H (outputs).
struct WeightLayer {
  MatrixF weights;
  std::optional<std::vector<float>> bias;
  bool centered = false;

  std::size_t input_dim() const noexcept { return weights.rows(); }
  std::size_t output_dim() const noexcept { return weights.cols(); }

  /// Throws NonFiniteInput / ShapeMismatch.
  void validate(std::string_view name = "layer") const;
};

class TensorContainer {
 public:
  const std::vector<TensorRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  const TensorRecord* find(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept { return find(name) != nullptr; }
  const TensorRecord& at(std::string_view name) const;

  /// Appends a record; a duplicate name is an InvariantViolation.
  void add(TensorRecord record);
  /// Replaces the record with the same name in place, or appends.
  void put(TensorRecord record);

  void add_layer(const std::string& name, const WeightLayer& layer);
  void put_layer(const std::string& name, const WeightLayer& layer);
  WeightLayer layer(std::string_view name) const;
  std::vector<std::string> layer_names() const;

  void put_matrix(const std::string& name, const MatrixF& m);
  MatrixF matrix(std::string_view name) const;
  void put_vector(const std::string& name, std::vector<double> v);
  std::vector<double> vector_f64(std::string_view name) const;

  /// Checks every container invariant; throws Error naming the offending tensor.
  void validate() const;

 private:
  std::vector<TensorRecord> records_;
};

std::vector<std::byte> serialize_container(const TensorContainer& c);
TensorContainer deserialize_container(std::span<const std::byte> bytes);

TensorContainer load_container(const std::filesystem::path& path);
void save_container(const TensorContainer& c, const std::filesystem::path& path);

}  // namespace prunekit
