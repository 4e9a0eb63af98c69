#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dtype.hpp"

namespace sspace {

using Shape = std::vector<std::int64_t>;

/// One named tensor. The payload is kept as raw little-endian bytes in the
/// storage dtype so that reading and re-writing a file never touches a bit.
class NamedTensor {
 public:
  NamedTensor(std::string name, DType dtype, Shape shape, std::vector<std::byte> raw);

  /// Builds a tensor by rounding `values` (row-major) into `dtype`.
  static NamedTensor from_values(std::string name, DType dtype, Shape shape,
                                 std::span<const double> values);

  const std::string& name() const { return name_; }
  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return numel_; }
  std::span<const std::byte> raw() const { return raw_; }

  double at(std::size_t flat_index) const;
  std::vector<double> to_f64() const;

  bool operator==(const NamedTensor& other) const = default;

 private:
  std::string name_;
  DType dtype_;
  Shape shape_;
  std::size_t numel_;
  std::vector<std::byte> raw_;
};

/// Name-ordered tensor map plus the container's free-form string metadata.
/// The provenance tag lives in metadata under `kProvenanceKey`.
class Checkpoint {
 public:
  static constexpr const char* kProvenanceKey = "provenance";

  Checkpoint() = default;

  /// Inserts a tensor; throws on a duplicate name.
  void add(NamedTensor tensor);
  const NamedTensor& at(const std::string& name) const;
  const NamedTensor* find(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  std::vector<std::string> names() const;

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::string provenance() const;
  void set_provenance(std::string tag);
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  void set_metadata(std::string key, std::string value);

  bool operator==(const Checkpoint& other) const = default;

 private:
  std::map<std::string, NamedTensor> tensors_;
  std::map<std::string, std::string> metadata_;
};

/// Serializes to the container layout: u64 LE header length, compact JSON
/// header (metadata first, then tensors by name) padded with spaces to an
/// 8-byte boundary, then payloads in header order.
std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

struct AnalysisMatrix {
  std::string source_name;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Rank-2 tensors map directly; higher ranks keep the first dimension as rows
/// and collapse the rest row-major. Rank 0/1 tensors yield nullopt (not analyzed).
/// Throws a numeric error on non-finite elements.
std::optional<AnalysisMatrix> tensor_as_matrix(const NamedTensor& tensor);

/// Inverse of tensor_as_matrix for writing results back: rounds into `dtype`.
NamedTensor matrix_as_tensor(const std::string& name, DType dtype, const Shape& shape,
                             const Eigen::MatrixXd& values);

}  // namespace sspace
