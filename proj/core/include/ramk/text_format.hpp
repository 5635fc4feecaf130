#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ramk {

/// One record of a line-oriented text file: whitespace-separated `key:value`
/// tokens. The value is everything after the first ':' of the token.
struct TextRecord {
  std::size_t line = 0;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* find(std::string_view key) const noexcept;
  /// Throws FormatError naming the key, the line and `context`.
  const std::string& require(std::string_view key, std::string_view context) const;
  const std::string& first_key() const { return fields.front().first; }
};

/// Splits text into records. Blank lines and lines starting with '#' are skipped.
std::vector<TextRecord> parse_records(std::string_view text, std::string_view context);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

/// Shortest decimal string that parses back to the same value.
std::string format_number(double v);
std::string format_number(float v);

std::optional<double> parse_double(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);

/// Identifiers appear in comma-separated lists and `key:value` tokens, so
/// they must be non-empty and free of whitespace, ',' and '='.
bool is_valid_identifier(std::string_view id) noexcept;

}  // namespace ramk
