#pragma once

// Small text/binary IO helpers shared by the file formats. Doubles are
// printed with std::to_chars shortest form, which round-trips exactly and
// keeps rerun outputs byte-identical.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "homopt/errors.hpp"

namespace homopt::io {

inline std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size())
    throw SchemaMismatch("bad numeric field: " + std::string(text));
  return value;
}

inline void write_f64le(std::ostream& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline double read_f64le(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw IOFailure("unexpected end of binary stream");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]))
            << (8 * i);
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

inline void write_u32le(std::ostream& out, std::uint32_t value) {
  char buf[4];
  for (int i = 0; i < 4; ++i)
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline std::uint32_t read_u32le(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  if (!in) throw IOFailure("unexpected end of binary stream");
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i)
    value |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i]))
             << (8 * i);
  return value;
}

}  // namespace homopt::io
