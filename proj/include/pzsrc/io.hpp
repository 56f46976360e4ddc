#ifndef PZSRC_IO_HPP
#define PZSRC_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pzsrc/errors.hpp"

namespace pzsrc::io {

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts need byte swaps");

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open for reading: " + path.string());
    return in;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
    out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw data_error("bad magic, expected " + std::string(magic) + " in " + what);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw data_error("truncated stream while reading u32");
    return v;
}

inline void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw data_error("truncated stream while reading f64");
    return v;
}

inline void write_f32(std::ostream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline float read_f32(std::istream& in) {
    float v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw data_error("truncated stream while reading f32");
    return v;
}

inline void write_f64_block(std::ostream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

inline void read_f64_block(std::istream& in, double* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw data_error("truncated stream while reading f64 block");
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw data_error("truncated stream while reading string");
    return s;
}

} // namespace pzsrc::io

#endif
