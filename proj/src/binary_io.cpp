#include "lrptext/binary_io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include "lrptext/error.hpp"

namespace lrptext::io {

namespace {

template <typename U>
void write_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(U));
}

template <typename U>
U read_le(std::istream& in, std::string_view what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw DataError("unexpected end of data while reading " + std::string(what));
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }

void write_f64s(std::ostream& out, std::span<const double> values) {
  for (double v : values) write_f64(out, v);
}

std::uint32_t read_u32(std::istream& in, std::string_view what) {
  return read_le<std::uint32_t>(in, what);
}
std::uint64_t read_u64(std::istream& in, std::string_view what) {
  return read_le<std::uint64_t>(in, what);
}
double read_f64(std::istream& in, std::string_view what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}
float read_f32(std::istream& in, std::string_view what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

void read_f64s(std::istream& in, std::span<double> values, std::string_view what) {
  for (double& v : values) v = read_f64(in, what);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed ^ (values.size() * 0x9e3779b97f4a7c15ULL);
  for (double v : values) {
    std::uint64_t x = std::bit_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    h ^= x ^ (x >> 31);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("failed to format double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw DataError("invalid number '" + std::string(text) + "'");
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lrptext::io
