#include "atp/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "atp/error.hpp"

namespace atp {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::size_t begin = text.rfind('\n', limit == 0 ? 0 : limit - 1);
    begin = (begin == std::string::npos || limit == 0) ? 0 : begin + 1;
    std::size_t end = text.find('\n', limit);
    if (end == std::string::npos) end = text.size();
    std::string context = text.substr(begin, std::min<std::size_t>(end - begin, 120));
    throw ParseError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": malformed JSON near `" + context + "`");
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

void BinaryWriter::u32(std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  buf_.append(b, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void BinaryWriter::header(std::string_view magic, std::uint32_t version) {
  str(magic);
  u32(version);
}

void BinaryWriter::save(const std::filesystem::path& path) const { write_text_file(path, buf_); }

BinaryReader::BinaryReader(std::string bytes, std::string name)
    : buf_(std::move(bytes)), name_(std::move(name)) {}

BinaryReader BinaryReader::open(const std::filesystem::path& path) {
  return BinaryReader(read_text_file(path), path.string());
}

void BinaryReader::need(std::size_t n) const {
  if (buf_.size() - pos_ < n) throw ParseError(name_ + ": truncated binary container");
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::uint32_t BinaryReader::header(std::string_view magic, std::uint32_t max_version) {
  std::string tag;
  try {
    tag = str();
  } catch (const ParseError&) {
    throw ParseError(name_ + ": not a " + std::string(magic) + " container");
  }
  if (tag != magic) throw ParseError(name_ + ": expected format tag " + std::string(magic) + ", found " + tag);
  const std::uint32_t version = u32();
  if (version == 0 || version > max_version)
    throw ParseError(name_ + ": unsupported " + std::string(magic) + " version " + std::to_string(version));
  return version;
}

void BinaryReader::expect_end() const {
  if (!at_end()) throw ParseError(name_ + ": trailing bytes after container payload");
}

}  // namespace atp
