#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace acom {

// Exit-code classes used by the CLI: config 2, I/O 3, protocol/hash 4.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire or bitstream contract violation: bad magic, hash mismatch,
// out-of-order frames, unexpected message.
class protocol_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncated or malformed framing; carries the byte offset of the fault.
class framing_error : public protocol_error {
 public:
  framing_error(const std::string& what, size_t offset)
      : protocol_error(what + " at byte " + std::to_string(offset)),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Row-major matrix. Rows are frames for feature sequences.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

  T* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  std::span<T> row_span(int i) { return {row(i), static_cast<size_t>(cols)}; }
  std::span<const T> row_span(int i) const {
    return {row(i), static_cast<size_t>(cols)};
  }
  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  const T& at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols + j];
  }
  bool operator==(const Mat&) const = default;
};

using Matf = Mat<float>;
using Matd = Mat<double>;

template <typename To, typename From>
Mat<To> convert_mat(const Mat<From>& m) {
  Mat<To> out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = static_cast<To>(m.data[i]);
  return out;
}

inline uint64_t fnv1a64(const void* ptr, size_t n,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const uint8_t*>(ptr);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---- little-endian byte packing ----

inline void put_u8(std::vector<uint8_t>& b, uint8_t v) { b.push_back(v); }

inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v));
  b.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<uint8_t>& b, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(b, u);
}

// Bounds-checked little-endian reader; throws framing_error on exhaustion.
struct ByteReader {
  std::span<const uint8_t> buf;
  size_t pos = 0;

  explicit ByteReader(std::span<const uint8_t> b) : buf(b) {}

  size_t remaining() const { return buf.size() - pos; }

  void need(size_t n) const {
    if (remaining() < n) throw framing_error("truncated input", pos);
  }
  uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(buf[pos]) |
                 static_cast<uint16_t>(buf[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::span<const uint8_t> take(size_t n) {
    need(n);
    auto s = buf.subspan(pos, n);
    pos += n;
    return s;
  }
};

// ---- MSB-first bit packing ----

struct BitWriter {
  std::vector<uint8_t> bytes;
  int bits_in_last = 0;  // 0 means last byte is full (or no bytes yet)

  void put_bit(int b) {
    if (bits_in_last == 0) {
      bytes.push_back(0);
      bits_in_last = 8;
    }
    if (b) bytes.back() |= static_cast<uint8_t>(1u << (bits_in_last - 1));
    --bits_in_last;
  }
  // Writes the nbits low bits of value, most significant first.
  void put(uint32_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) put_bit((value >> i) & 1u);
  }
  size_t bit_count() const {
    return bytes.size() * 8 - static_cast<size_t>(bits_in_last);
  }
};

struct BitReader {
  std::span<const uint8_t> bytes;
  size_t bit = 0;
  size_t origin = 0;  // byte offset of this payload in the enclosing buffer

  BitReader(std::span<const uint8_t> b, size_t origin_bytes = 0)
      : bytes(b), origin(origin_bytes) {}

  size_t byte_offset() const { return origin + bit / 8; }

  int get_bit() {
    if (bit >= bytes.size() * 8)
      throw framing_error("truncated payload", byte_offset());
    int b = (bytes[bit / 8] >> (7 - bit % 8)) & 1;
    ++bit;
    return b;
  }
  uint32_t get(int nbits) {
    uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) v = (v << 1) | static_cast<uint32_t>(get_bit());
    return v;
  }
};

// ceil(log2(v)); 0 for v <= 1. Bits needed to address v symbols.
inline int bits_for_symbols(uint32_t v) {
  int b = 0;
  uint32_t c = 1;
  while (c < v) {
    c <<= 1;
    ++b;
  }
  return b;
}

// Deterministic uniform in [0,1) straight from raw engine draws; avoids the
// implementation-defined std::uniform_real_distribution.
inline float unit_float(std::mt19937& g) {
  return static_cast<float>(g() >> 8) * (1.0f / 16777216.0f);
}

inline double unit_double(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * (1.0 / 9007199254740992.0);
}

// Unbiased-enough index pick for utility sampling (Lemire reduction).
inline uint32_t pick_index(std::mt19937& g, uint32_t n) {
  return static_cast<uint32_t>((static_cast<uint64_t>(g()) * n) >> 32);
}

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  std::vector<uint8_t> out((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (f.bad()) throw io_error("read failed: " + path);
  return out;
}

inline void write_file(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

}  // namespace acom
