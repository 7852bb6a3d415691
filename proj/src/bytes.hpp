#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "s2sr/error.hpp"

// Little-endian stream helpers shared by the binary container writers.
namespace s2sr::bytes {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path.string()), out_(path, std::ios::binary | std::ios::trunc) {
    require(out_.good(), ErrorCode::IoFailure, "cannot open " + path_);
  }

  void raw(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  void u16(uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    raw(b, 2);
  }

  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    raw(b, 4);
  }

  void u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    raw(b, 8);
  }

  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void f32_array(const float* p, size_t n) {
    for (size_t i = 0; i < n; ++i) f32(p[i]);
  }

  void finish() {
    out_.flush();
    require(out_.good(), ErrorCode::IoFailure, "short write to " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    require(in_.good(), ErrorCode::IoFailure, "cannot open " + path_);
  }

  void raw(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), ErrorCode::CorruptHeader,
            path_ + ": truncated file");
  }

  uint16_t u16() {
    unsigned char b[2];
    raw(b, 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }

  uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }

  uint64_t u64() {
    unsigned char b[8];
    raw(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }

  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void f32_array(float* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = f32();
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace s2sr::bytes
