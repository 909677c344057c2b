#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

/// Little-endian byte sink kept in memory and flushed to disk in one write.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const unsigned char*>(values.data());
      bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    } else {
      for (T v : values) put(v);
    }
  }

  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

  /// Writes atomically via a temporary sibling file. Throws IoError.
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<unsigned char> bytes_;
};

/// Bounds-checked little-endian reader; overruns raise LoadError.
class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes, std::string origin = {})
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  /// Reads a whole file. Throws IoError when it cannot be opened.
  static ByteReader open(const std::filesystem::path& path);

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  template <typename T>
  std::vector<T> get_array(std::size_t count) {
    if (count > remaining() / sizeof(T)) fail("array of " + std::to_string(count) + " elements exceeds file size");
    std::vector<T> out(count);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(T));
      pos_ += count * sizeof(T);
    } else {
      for (auto& v : out) v = get<T>();
    }
    return out;
  }

  std::string get_string(std::size_t length) {
    need(length);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), length);
    pos_ += length;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  const std::string& origin() const noexcept { return origin_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail("unexpected end of data");
  }

  std::vector<unsigned char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace diswm
