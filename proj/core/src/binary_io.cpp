#include "ramk/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "ramk/error.hpp"

namespace ramk {

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::magic(std::string_view four_cc) {
  for (char c : four_cc) buf_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::str(std::string_view s) {
  if (s.size() > 0xFFFF) throw ValidationError("string too long for u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  for (char c : s) buf_.push_back(static_cast<std::uint8_t>(c));
}

void ByteReader::fail(std::string_view message) const {
  std::string what = context_ + ": " + std::string(message);
  if (on_error_ == OnError::kCorruptIndex) throw CorruptIndexError(what);
  throw FormatError(what);
}

std::uint64_t ByteReader::get_le(int width, std::string_view field) {
  if (remaining() < static_cast<std::size_t>(width)) {
    fail("truncated while reading field '" + std::string(field) + "' at byte " +
         std::to_string(pos_));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += width;
  return v;
}

std::uint8_t ByteReader::u8(std::string_view field) { return static_cast<std::uint8_t>(get_le(1, field)); }
std::uint16_t ByteReader::u16(std::string_view field) { return static_cast<std::uint16_t>(get_le(2, field)); }
std::uint32_t ByteReader::u32(std::string_view field) { return static_cast<std::uint32_t>(get_le(4, field)); }
std::uint64_t ByteReader::u64(std::string_view field) { return get_le(8, field); }
float ByteReader::f32(std::string_view field) { return std::bit_cast<float>(u32(field)); }
double ByteReader::f64(std::string_view field) { return std::bit_cast<double>(u64(field)); }

std::string ByteReader::str(std::string_view field) {
  const auto n = u16(field);
  auto raw = bytes(n, field);
  return std::string(raw.begin(), raw.end());
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n, std::string_view field) {
  if (remaining() < n) {
    fail("truncated while reading field '" + std::string(field) + "' at byte " +
         std::to_string(pos_));
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_magic(std::string_view four_cc) {
  auto raw = bytes(four_cc.size(), "magic");
  if (!std::equal(raw.begin(), raw.end(), four_cc.begin(),
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    fail("bad magic, expected '" + std::string(four_cc) + "'");
  }
}

void ByteReader::expect_end() {
  if (remaining() != 0) {
    fail(std::to_string(remaining()) + " trailing bytes after declared records");
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return data;
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

namespace {

void write_atomically(const std::filesystem::path& path, const char* data, std::size_t size) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(data, static_cast<std::streamsize>(size));
    out.flush();
    if (!out) throw IoError("write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  write_atomically(path, reinterpret_cast<const char*>(data.data()), data.size());
}

void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_atomically(path, text.data(), text.size());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> data) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace ramk
