#include "tensor_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <utility>

#include <json.hpp>

#include "error.hpp"

namespace sspace {

namespace {

std::size_t checked_numel(const Shape& shape, const std::string& name) {
  std::size_t n = 1;
  for (auto dim : shape) {
    if (dim <= 0) throw Error(ErrorKind::Format, "tensor '" + name + "' has a non-positive dimension");
    const auto d = static_cast<std::size_t>(dim);
    if (n > std::numeric_limits<std::size_t>::max() / d)
      throw Error(ErrorKind::Format, "tensor '" + name + "' element count overflows");
    n *= d;
  }
  return n;
}

}  // namespace

NamedTensor::NamedTensor(std::string name, DType dtype, Shape shape, std::vector<std::byte> raw)
    : name_(std::move(name)), dtype_(dtype), shape_(std::move(shape)), raw_(std::move(raw)) {
  if (name_.empty()) throw Error(ErrorKind::Format, "tensor name is empty");
  numel_ = checked_numel(shape_, name_);
  if (raw_.size() != numel_ * dtype_size(dtype_))
    throw Error(ErrorKind::Format, "tensor '" + name_ + "' payload size does not match shape and dtype");
}

NamedTensor NamedTensor::from_values(std::string name, DType dtype, Shape shape,
                                     std::span<const double> values) {
  const std::size_t elem = dtype_size(dtype);
  std::vector<std::byte> raw(values.size() * elem);
  for (std::size_t i = 0; i < values.size(); ++i) store_element(dtype, values[i], raw.data() + i * elem);
  return NamedTensor(std::move(name), dtype, std::move(shape), std::move(raw));
}

double NamedTensor::at(std::size_t flat_index) const {
  return load_element(dtype_, raw_.data() + flat_index * dtype_size(dtype_));
}

std::vector<double> NamedTensor::to_f64() const {
  std::vector<double> out(numel_);
  const std::size_t elem = dtype_size(dtype_);
  for (std::size_t i = 0; i < numel_; ++i) out[i] = load_element(dtype_, raw_.data() + i * elem);
  return out;
}

void Checkpoint::add(NamedTensor tensor) {
  auto name = tensor.name();
  auto [it, inserted] = tensors_.emplace(name, std::move(tensor));
  if (!inserted) throw Error(ErrorKind::Format, "duplicate tensor name '" + name + "'");
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error(ErrorKind::Mismatch, "no tensor named '" + name + "'");
  return it->second;
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  auto it = tensors_.find(name);
  return it == tensors_.end() ? nullptr : &it->second;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

std::string Checkpoint::provenance() const {
  auto it = metadata_.find(kProvenanceKey);
  return it == metadata_.end() ? std::string{} : it->second;
}

void Checkpoint::set_provenance(std::string tag) { metadata_[kProvenanceKey] = std::move(tag); }

void Checkpoint::set_metadata(std::string key, std::string value) {
  metadata_[std::move(key)] = std::move(value);
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  if (!ckpt.metadata().empty()) {
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : ckpt.metadata()) meta[k] = v;
    header["__metadata__"] = std::move(meta);
  }
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt) {
    if (name == "__metadata__") throw Error(ErrorKind::Usage, "tensor name '__metadata__' is reserved");
    nlohmann::ordered_json entry = nlohmann::ordered_json::object();
    entry["dtype"] = std::string(dtype_name(t.dtype()));
    entry["shape"] = t.shape();
    entry["data_offsets"] = {offset, offset + t.raw().size()};
    header[name] = std::move(entry);
    offset += t.raw().size();
  }
  std::string text = header.dump();
  text.append((8 - text.size() % 8) % 8, ' ');

  std::vector<std::byte> out(8 + text.size() + offset);
  const std::uint64_t header_len = text.size();
  std::memcpy(out.data(), &header_len, 8);
  std::memcpy(out.data() + 8, text.data(), text.size());
  std::byte* cursor = out.data() + 8 + text.size();
  for (const auto& [name, t] : ckpt) {
    std::memcpy(cursor, t.raw().data(), t.raw().size());
    cursor += t.raw().size();
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 8) throw Error(ErrorKind::Format, "malformed header: file shorter than 8 bytes");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data(), 8);
  if (header_len > bytes.size() - 8) throw Error(ErrorKind::Format, "malformed header: header length exceeds file size");

  const auto* text = reinterpret_cast<const char*>(bytes.data() + 8);
  std::set<std::string> seen;
  std::string duplicate;
  auto on_event = [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
    if (event == nlohmann::json::parse_event_t::key && depth == 1) {
      auto key = parsed.get<std::string>();
      if (!seen.insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text, text + header_len, on_event);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed header: ") + e.what());
  }
  if (!duplicate.empty()) throw Error(ErrorKind::Format, "duplicate tensor name '" + duplicate + "'");
  if (!header.is_object()) throw Error(ErrorKind::Format, "malformed header: not a JSON object");

  const std::span<const std::byte> payload = bytes.subspan(8 + header_len);
  Checkpoint ckpt;
  struct Extent {
    std::uint64_t begin, end;
    std::string name;
  };
  std::vector<Extent> extents;

  for (const auto& [name, entry] : header.items()) {
    if (name == "__metadata__") {
      if (!entry.is_object()) throw Error(ErrorKind::Format, "malformed header: __metadata__ is not an object");
      for (const auto& [k, v] : entry.items()) {
        if (!v.is_string()) throw Error(ErrorKind::Format, "malformed header: metadata value for '" + k + "' is not a string");
        ckpt.set_metadata(k, v.get<std::string>());
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
        !entry.contains("data_offsets"))
      throw Error(ErrorKind::Format, "malformed header: incomplete entry for tensor '" + name + "'");
    const auto& dtype_field = entry["dtype"];
    if (!dtype_field.is_string()) throw Error(ErrorKind::Format, "malformed header: dtype of '" + name + "' is not a string");
    auto dtype = parse_dtype(dtype_field.get<std::string>());
    if (!dtype)
      throw Error(ErrorKind::Format,
                  "unknown dtype '" + dtype_field.get<std::string>() + "' for tensor '" + name + "'");
    const auto& shape_field = entry["shape"];
    if (!shape_field.is_array()) throw Error(ErrorKind::Format, "malformed header: shape of '" + name + "' is not an array");
    Shape shape;
    for (const auto& dim : shape_field) {
      if (!dim.is_number_unsigned()) throw Error(ErrorKind::Format, "malformed header: bad dimension in shape of '" + name + "'");
      shape.push_back(dim.get<std::int64_t>());
    }
    const auto& offsets = entry["data_offsets"];
    if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
        !offsets[1].is_number_unsigned())
      throw Error(ErrorKind::Format, "malformed header: bad data_offsets for '" + name + "'");
    const auto begin = offsets[0].get<std::uint64_t>();
    const auto end = offsets[1].get<std::uint64_t>();
    if (end < begin || end > payload.size())
      throw Error(ErrorKind::Format, "offset out of bounds for tensor '" + name + "'");
    const std::size_t numel = checked_numel(shape, name);
    if (end - begin != numel * dtype_size(*dtype))
      throw Error(ErrorKind::Format, "byte length of tensor '" + name + "' does not match shape and dtype");
    extents.push_back({begin, end, name});
    std::vector<std::byte> raw(payload.begin() + static_cast<std::ptrdiff_t>(begin),
                               payload.begin() + static_cast<std::ptrdiff_t>(end));
    ckpt.add(NamedTensor(name, *dtype, std::move(shape), std::move(raw)));
  }

  std::sort(extents.begin(), extents.end(),
            [](const Extent& a, const Extent& b) { return std::tie(a.begin, a.end) < std::tie(b.begin, b.end); });
  std::uint64_t cursor = 0;
  for (const auto& ext : extents) {
    if (ext.begin < cursor) throw Error(ErrorKind::Format, "offset overlap at tensor '" + ext.name + "'");
    if (ext.begin > cursor) throw Error(ErrorKind::Format, "unreferenced bytes before tensor '" + ext.name + "'");
    cursor = ext.end;
  }
  if (cursor != payload.size()) throw Error(ErrorKind::Format, "trailing bytes after last tensor payload");
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw Error(ErrorKind::Io, "short read from '" + path.string() + "'");
  return decode_checkpoint(bytes);
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::optional<AnalysisMatrix> tensor_as_matrix(const NamedTensor& tensor) {
  if (tensor.rank() < 2) return std::nullopt;
  const auto rows = static_cast<Eigen::Index>(tensor.shape()[0]);
  const auto cols = static_cast<Eigen::Index>(tensor.numel()) / rows;
  AnalysisMatrix m{tensor.name(), Eigen::MatrixXd(rows, cols)};
  std::size_t flat = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j, ++flat) {
      const double v = tensor.at(flat);
      if (!std::isfinite(v))
        throw Error(ErrorKind::Numeric, "non-finite element in tensor '" + tensor.name() + "'");
      m.values(i, j) = v;
    }
  }
  return m;
}

NamedTensor matrix_as_tensor(const std::string& name, DType dtype, const Shape& shape,
                             const Eigen::MatrixXd& values) {
  std::vector<double> flat(static_cast<std::size_t>(values.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) flat[k++] = values(i, j);
  return NamedTensor::from_values(name, dtype, shape, flat);
}

}  // namespace sspace
