#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diswm/diffcore/tensor.hpp"

namespace diswm {

enum class DType : std::uint8_t { f64 = 0, f32 = 1, u64 = 2 };

struct CheckpointEntry {
  DType dtype = DType::f64;
  Shape shape;
  std::vector<double> f64;
  std::vector<float> f32;
  std::vector<std::uint64_t> u64;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named arrays serialized as a "DWMC" container:
///   magic, u32 version, u32 entry count, then per entry
///   u16 name length, name bytes, u8 dtype, u8 rank, u32 dims[rank], data.
/// Entries are written in name order so identical contents give identical bytes.
class Checkpoint {
 public:
  void put(const std::string& name, Shape shape, std::span<const double> values);
  void put_f32(const std::string& name, Shape shape, std::span<const float> values);
  void put_u64(const std::string& name, std::span<const std::uint64_t> values);
  void put_scalar(const std::string& name, double value) { put(name, {1}, std::span<const double>(&value, 1)); }

  bool contains(const std::string& name) const { return entries_.contains(name); }
  /// Throws LoadError when absent.
  const CheckpointEntry& at(const std::string& name) const;
  const std::vector<double>& f64(const std::string& name) const;
  const std::vector<float>& f32(const std::string& name) const;
  const std::vector<std::uint64_t>& u64(const std::string& name) const;
  double scalar(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return entries_.size(); }

  /// Stores every parameter under prefix + name.
  void add_params(const std::string& prefix, const ConstParamRefs& params);
  /// Overwrites parameter values from prefix + name; a missing entry or a
  /// shape mismatch is a LoadError.
  void restore_params(const std::string& prefix, const ParamRefs& params) const;

  std::vector<unsigned char> serialize() const;
  static Checkpoint deserialize(std::vector<unsigned char> bytes, const std::string& origin = {});

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint& other) const;

 private:
  std::map<std::string, CheckpointEntry> entries_;
};

}  // namespace diswm
