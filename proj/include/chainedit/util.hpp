#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainedit {

/// Base class for every domain error raised by the toolkit. The CLI maps
/// these to exit status 1; anything else is treated as a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line (or entry index) at fault.
class FormatError : public Error {
 public:
  FormatError(std::string what, std::size_t location)
      : Error(std::move(what)), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

namespace text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::string capitalize(std::string_view s);

}  // namespace text

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Seconds since the epoch honouring SOURCE_DATE_EPOCH, rendered ISO-8601 UTC.
std::string timestamp_now();

/// Deterministic generator. Bounded draws use rejection sampling on the raw
/// 64-bit stream so results do not depend on the standard library's
/// distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

}  // namespace chainedit
