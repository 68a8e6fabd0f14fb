#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lrptext::io {

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_f64s(std::ostream& out, std::span<const double> values);
void write_f32(std::ostream& out, float v);

// Readers throw DataError on short reads; `what` names the field.
std::uint32_t read_u32(std::istream& in, std::string_view what);
std::uint64_t read_u64(std::istream& in, std::string_view what);
double read_f64(std::istream& in, std::string_view what);
void read_f64s(std::istream& in, std::span<double> values, std::string_view what);
float read_f32(std::istream& in, std::string_view what);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
// Word-at-a-time hash of a double array's bit patterns.
std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t seed);
std::string hex64(std::uint64_t v);

// Shortest decimal that parses back to the same double; locale-independent.
std::string format_double(double v);
double parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see partial files.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace lrptext::io
