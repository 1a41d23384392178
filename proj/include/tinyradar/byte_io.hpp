#pragma once

// Little-endian primitive writers/readers shared by the binary containers
// (TRD1 recordings, TRNW float models, TRQ1 quantized models).

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tinyradar/errors.hpp"

namespace tinyradar::bytes {

class Writer {
 public:
  void magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }

  template <typename U>
  void uint(U value) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
  }

  void u8(std::uint8_t v) { uint(v); }
  void u16(std::uint16_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void i8(std::int8_t v) { uint(static_cast<std::uint8_t>(v)); }
  void i16(std::int16_t v) { uint(static_cast<std::uint16_t>(v)); }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& data() const& { return buf_; }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  // Throws FormatError when the next bytes differ from `tag`.
  void expect_magic(std::string_view tag, std::string_view what) {
    need(tag.size(), what);
    for (std::size_t i = 0; i < tag.size(); ++i) {
      if (data_[pos_ + i] != static_cast<std::uint8_t>(tag[i])) {
        throw FormatError(std::string(what) + ": bad magic, expected \"" + std::string(tag) + "\"");
      }
    }
    pos_ += tag.size();
  }

  template <typename U>
  U uint(std::string_view what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::uint8_t u8(std::string_view what) { return uint<std::uint8_t>(what); }
  std::uint16_t u16(std::string_view what) { return uint<std::uint16_t>(what); }
  std::uint32_t u32(std::string_view what) { return uint<std::uint32_t>(what); }
  std::uint64_t u64(std::string_view what) { return uint<std::uint64_t>(what); }
  std::int8_t i8(std::string_view what) { return static_cast<std::int8_t>(u8(what)); }
  std::int16_t i16(std::string_view what) { return static_cast<std::int16_t>(u16(what)); }
  std::int32_t i32(std::string_view what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }
  double f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  // Throws LengthError unless every byte has been consumed.
  void expect_end(std::string_view what) const {
    if (remaining() != 0) {
      throw LengthError(std::string(what) + ": " + std::to_string(remaining()) +
                        " trailing bytes after payload");
    }
  }

  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw LengthError(std::string(what) + ": truncated at byte " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + ", have " + std::to_string(remaining()) +
                        ")");
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace tinyradar::bytes
