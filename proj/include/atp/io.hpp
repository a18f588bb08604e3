#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace atp {

using json = nlohmann::json;

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Parses a JSON file. Syntax errors are reported as ParseError with the
/// offending line and column.
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Little-endian binary encoder for the versioned containers.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void raw(std::string_view bytes) { buf_.append(bytes); }

  /// Writes a magic tag followed by a format version.
  void header(std::string_view magic, std::uint32_t version);

  const std::string& bytes() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes, std::string name = "<memory>");
  static BinaryReader open(const std::filesystem::path& path);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();

  /// Checks the magic tag and returns the stored version; throws ParseError
  /// when the tag differs or the version exceeds `max_version`.
  std::uint32_t header(std::string_view magic, std::uint32_t max_version);

  bool at_end() const { return pos_ == buf_.size(); }
  /// Throws ParseError unless the whole buffer was consumed.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace atp
