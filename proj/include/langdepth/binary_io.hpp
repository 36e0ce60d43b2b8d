#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "langdepth/errors.hpp"

namespace langdepth::io {

// Little-endian encoder used by the DHF1 / DHL2 / DHP1 formats.
class ByteWriter {
 public:
  void magic(std::string_view tag) { buffer_.append(tag); }
  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void bytes(std::string_view data) { buffer_.append(data); }

  const std::string& data() const { return buffer_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
      buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
  }

  std::string buffer_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void expect_magic(std::string_view tag) {
    if (data_.size() < tag.size() || data_.substr(0, tag.size()) != tag) {
      throw FormatError(what_ + ": bad magic (expected " + std::string(tag) + ")");
    }
    pos_ = tag.size();
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(take(4))); }
  std::string_view bytes(std::size_t n) {
    require(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) {
      throw FormatError(what_ + ": " + std::to_string(remaining()) +
                        " trailing bytes after payload");
    }
  }
  // Fails early when a declared element count cannot fit in what is left.
  void require(std::size_t n) const {
    if (n > remaining()) {
      throw FormatError(what_ + ": truncated payload at byte " + std::to_string(pos_));
    }
  }

 private:
  std::uint64_t take(int width) {
    require(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace langdepth::io
