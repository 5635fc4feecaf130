#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ramk {

/// Appends little-endian fixed-width values to an in-memory buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void magic(std::string_view four_cc);
  /// u16 length prefix followed by raw bytes.
  void str(std::string_view s);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader. Every read names the field it is
/// decoding so that truncation errors point at the offending field.
/// Throws the error type selected at construction (FormatError by default).
class ByteReader {
 public:
  enum class OnError { kFormat, kCorruptIndex };

  explicit ByteReader(std::span<const std::uint8_t> data, std::string context,
                      OnError on_error = OnError::kFormat)
      : data_(data), context_(std::move(context)), on_error_(on_error) {}

  std::uint8_t u8(std::string_view field);
  std::uint16_t u16(std::string_view field);
  std::uint32_t u32(std::string_view field);
  std::uint64_t u64(std::string_view field);
  float f32(std::string_view field);
  double f64(std::string_view field);
  std::string str(std::string_view field);
  void expect_magic(std::string_view four_cc);
  std::span<const std::uint8_t> bytes(std::size_t n, std::string_view field);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  /// Fails if any byte is left unread.
  void expect_end();

  [[noreturn]] void fail(std::string_view message) const;

 private:
  std::uint64_t get_le(int width, std::string_view field);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
  OnError on_error_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never observe a partial file.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_text(const std::filesystem::path& path, std::string_view text);
std::string read_file_text(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> data) noexcept;

}  // namespace ramk
