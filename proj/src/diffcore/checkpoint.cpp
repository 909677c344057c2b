#include "diswm/diffcore/checkpoint.hpp"

#include <limits>

#include "diswm/diffcore/binary_io.hpp"

namespace diswm {

namespace {

constexpr char kMagic[] = "DWMC";

void check_name(const std::string& name) {
  if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ContractError("checkpoint entry name must have 1..65535 bytes");
  }
}

void check_shape(const Shape& shape, std::size_t count) {
  if (shape.empty() || shape.size() > 255) throw ShapeError("checkpoint entry rank must be 1..255");
  if (shape_numel(shape) != count) throw ShapeError("checkpoint entry shape " + shape_str(shape) + " does not match data");
}

}  // namespace

void Checkpoint::put(const std::string& name, Shape shape, std::span<const double> values) {
  check_name(name);
  check_shape(shape, values.size());
  CheckpointEntry e;
  e.dtype = DType::f64;
  e.shape = std::move(shape);
  e.f64.assign(values.begin(), values.end());
  entries_[name] = std::move(e);
}

void Checkpoint::put_f32(const std::string& name, Shape shape, std::span<const float> values) {
  check_name(name);
  check_shape(shape, values.size());
  CheckpointEntry e;
  e.dtype = DType::f32;
  e.shape = std::move(shape);
  e.f32.assign(values.begin(), values.end());
  entries_[name] = std::move(e);
}

void Checkpoint::put_u64(const std::string& name, std::span<const std::uint64_t> values) {
  check_name(name);
  if (values.empty()) throw ShapeError("checkpoint entry '" + name + "' is empty");
  CheckpointEntry e;
  e.dtype = DType::u64;
  e.shape = {values.size()};
  e.u64.assign(values.begin(), values.end());
  entries_[name] = std::move(e);
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw LoadError("checkpoint has no entry '" + name + "'");
  return it->second;
}

const std::vector<double>& Checkpoint::f64(const std::string& name) const {
  const auto& e = at(name);
  if (e.dtype != DType::f64) throw LoadError("checkpoint entry '" + name + "' is not f64");
  return e.f64;
}

const std::vector<float>& Checkpoint::f32(const std::string& name) const {
  const auto& e = at(name);
  if (e.dtype != DType::f32) throw LoadError("checkpoint entry '" + name + "' is not f32");
  return e.f32;
}

const std::vector<std::uint64_t>& Checkpoint::u64(const std::string& name) const {
  const auto& e = at(name);
  if (e.dtype != DType::u64) throw LoadError("checkpoint entry '" + name + "' is not u64");
  return e.u64;
}

double Checkpoint::scalar(const std::string& name) const {
  const auto& v = f64(name);
  if (v.size() != 1) throw LoadError("checkpoint entry '" + name + "' is not a scalar");
  return v[0];
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

void Checkpoint::add_params(const std::string& prefix, const ConstParamRefs& params) {
  for (const Param* p : params) put(prefix + p->name(), p->shape(), p->value());
}

void Checkpoint::restore_params(const std::string& prefix, const ParamRefs& params) const {
  for (Param* p : params) {
    const std::string key = prefix + p->name();
    const auto& e = at(key);
    if (e.dtype != DType::f64 || e.shape != p->shape()) {
      throw LoadError("checkpoint entry '" + key + "' has shape " + shape_str(e.shape) + ", parameter expects " +
                      shape_str(p->shape()));
    }
    p->assign(e.f64);
  }
}

std::vector<unsigned char> Checkpoint::serialize() const {
  ByteWriter out;
  out.put_bytes(kMagic);
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    out.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    out.put_bytes(name);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(e.dtype));
    out.put<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (std::size_t d : e.shape) out.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    switch (e.dtype) {
      case DType::f64: out.put_array<double>(e.f64); break;
      case DType::f32: out.put_array<float>(e.f32); break;
      case DType::u64: out.put_array<std::uint64_t>(e.u64); break;
    }
  }
  return out.bytes();
}

Checkpoint Checkpoint::deserialize(std::vector<unsigned char> bytes, const std::string& origin) {
  ByteReader in(std::move(bytes), origin);
  if (in.get_string(4) != kMagic) in.fail("bad magic, not a checkpoint");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    in.fail("checkpoint version " + std::to_string(version) + " is not supported (expected " +
            std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = in.get<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint16_t>();
    if (name_len == 0) in.fail("empty entry name");
    std::string name = in.get_string(name_len);
    const auto tag = in.get<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(DType::u64)) {
      in.fail("entry '" + name + "' has unknown dtype tag " + std::to_string(tag) + " for checkpoint version " +
              std::to_string(version));
    }
    const auto rank = in.get<std::uint8_t>();
    if (rank == 0) in.fail("entry '" + name + "' has rank 0");
    CheckpointEntry e;
    e.dtype = static_cast<DType>(tag);
    std::size_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = in.get<std::uint32_t>();
      if (d == 0) in.fail("entry '" + name + "' has a zero dimension");
      if (numel > in.remaining() / d) in.fail("entry '" + name + "' is larger than the file");
      numel *= d;
      e.shape.push_back(d);
    }
    switch (e.dtype) {
      case DType::f64: e.f64 = in.get_array<double>(numel); break;
      case DType::f32: e.f32 = in.get_array<float>(numel); break;
      case DType::u64: e.u64 = in.get_array<std::uint64_t>(numel); break;
    }
    if (ck.entries_.contains(name)) in.fail("duplicate entry '" + name + "'");
    ck.entries_.emplace(std::move(name), std::move(e));
  }
  if (in.remaining() != 0) in.fail("trailing bytes after last entry");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  ByteWriter out;
  const auto bytes = serialize();
  out.put_array<unsigned char>(bytes);
  out.save(path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  ByteReader raw = ByteReader::open(path);
  return deserialize(raw.get_array<unsigned char>(raw.remaining()), path.string());
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const auto& [name, e] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end()) return false;
    const auto& o = it->second;
    if (e.dtype != o.dtype || e.shape != o.shape || e.f32 != o.f32 || e.u64 != o.u64) return false;
    // bitwise, so NaNs and signed zeros compare exactly
    if (e.f64.size() != o.f64.size()) return false;
    if (!e.f64.empty() && std::memcmp(e.f64.data(), o.f64.data(), e.f64.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace diswm
