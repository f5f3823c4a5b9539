#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace oldroyd::binary {

// Little-endian fixed-width encoding, independent of host byte order.

inline void put_u64(std::ostream& os, std::uint64_t value) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t value) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), 4);
}

inline void put_f64(std::ostream& os, double value) { put_u64(os, std::bit_cast<std::uint64_t>(value)); }

inline void put_bytes(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!is) throw std::runtime_error("binary: unexpected end of stream");
  std::uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | bytes[static_cast<std::size_t>(i)];
  return value;
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), 4);
  if (!is) throw std::runtime_error("binary: unexpected end of stream");
  std::uint32_t value = 0;
  for (int i = 3; i >= 0; --i) value = (value << 8) | bytes[static_cast<std::size_t>(i)];
  return value;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_bytes(std::istream& is, std::uint64_t limit = 1u << 26) {
  const auto n = get_u64(is);
  if (n > limit) throw std::runtime_error("binary: string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("binary: unexpected end of stream");
  return s;
}

inline void put_magic(std::ostream& os, const char (&magic)[9]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char (&magic)[9], const char* what) {
  std::array<char, 8> got{};
  is.read(got.data(), 8);
  if (!is || std::string(got.data(), 8) != std::string(magic, 8)) {
    throw std::runtime_error(std::string(what) + ": bad magic");
  }
}

}  // namespace oldroyd::binary
