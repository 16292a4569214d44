#ifndef GBMOPT_ARCHIVE_HPP
#define GBMOPT_ARCHIVE_HPP

// PFLD field archives, little-endian:
//   "PFLD" | u32 version = 1 | u32 nx | u32 ny | u32 nt | f64 hx | f64 hy | f64 tau
//   | nt * nx * ny f64 values, slice-major then row-major.
// nt counts stored slices (1 for a single field).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "gbmopt/core.hpp"

namespace gbm {

struct FieldArchive {
    Grid2D grid;
    double tau = 0.0;
    FieldSeries slices;
};

namespace archive_detail {

inline constexpr char kMagic[4] = {'P', 'F', 'L', 'D'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 4 * 4 + 3 * 8;

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}
inline void put_f64(std::vector<unsigned char>& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return v;
}
inline double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(v);
}

}  // namespace archive_detail

inline std::vector<unsigned char> encode_archive(const FieldSeries& slices, double tau = 0.0) {
    using namespace archive_detail;
    if (slices.empty()) throw Error(ErrorKind::shape, "cannot archive an empty series");
    const Grid2D& g = slices.front().grid();
    for (const auto& s : slices) require_same_grid(s.grid(), g, "archive slices");
    constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
    if (g.nx > u32max || g.ny > u32max || slices.size() > u32max)
        throw Error(ErrorKind::shape, "archive dimensions exceed 32 bits");
    std::vector<unsigned char> out;
    out.reserve(kHeaderBytes + slices.size() * g.size() * 8);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(g.nx));
    put_u32(out, static_cast<std::uint32_t>(g.ny));
    put_u32(out, static_cast<std::uint32_t>(slices.size()));
    put_f64(out, g.hx);
    put_f64(out, g.hy);
    put_f64(out, tau);
    for (const auto& s : slices)
        for (double v : s.values()) put_f64(out, v);
    return out;
}

inline FieldArchive decode_archive(const std::vector<unsigned char>& bytes) {
    using namespace archive_detail;
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error(ErrorKind::io, "not a PFLD archive");
    const unsigned char* p = bytes.data() + 4;
    if (get_u32(p) != kVersion) throw Error(ErrorKind::io, "unsupported PFLD version");
    FieldArchive a;
    a.grid.nx = get_u32(p + 4);
    a.grid.ny = get_u32(p + 8);
    const std::size_t nt = get_u32(p + 12);
    a.grid.hx = get_f64(p + 16);
    a.grid.hy = get_f64(p + 24);
    a.tau = get_f64(p + 32);
    const std::size_t n = a.grid.size();
    if (bytes.size() != kHeaderBytes + nt * n * 8) throw Error(ErrorKind::io, "PFLD payload size mismatch");
    const unsigned char* v = bytes.data() + kHeaderBytes;
    a.slices.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        std::vector<double> values(n);
        for (std::size_t k = 0; k < n; ++k, v += 8) values[k] = get_f64(v);
        a.slices.emplace_back(a.grid, std::move(values));
    }
    return a;
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

inline void write_archive(const std::string& path, const FieldSeries& slices, double tau = 0.0) {
    write_bytes(path, encode_archive(slices, tau));
}

inline void write_archive(const std::string& path, const ScalarField& field) {
    write_archive(path, FieldSeries{field}, 0.0);
}

inline FieldArchive read_archive(const std::string& path) { return decode_archive(read_bytes(path)); }

}  // namespace gbm

#endif
