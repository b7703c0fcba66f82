#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace kfg {

// Little-endian primitives shared by the container and checkpoint formats.

inline void put_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32(std::ostream& os, float v) {
  static_assert(sizeof(float) == 4);
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

inline void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

/// Checked reader that reports the byte offset of any truncation.
struct BinaryReader {
  std::ifstream in;
  std::filesystem::path path;
  uint64_t offset = 0;

  explicit BinaryReader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw std::runtime_error("cannot open " + p.string());
  }
  void read(void* dst, size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) {
      throw std::runtime_error(path.string() + ": truncated at byte offset " +
                               std::to_string(offset));
    }
    offset += n;
  }
  void seek(uint64_t to) {
    in.seekg(static_cast<std::streamoff>(to));
    offset = to;
  }
  uint16_t u16() {
    unsigned char b[2];
    read(b, 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str16() {
    uint16_t len = u16();
    std::string s(len, '\0');
    read(s.data(), len);
    return s;
  }
  void expect_magic(const char (&magic)[5]) {
    char got[4];
    read(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
      throw std::runtime_error(path.string() + ": bad magic, expected " + magic);
    }
  }
};

}  // namespace kfg
