#pragma once

// Little-endian byte packing and CRC-32 for the binary container formats
// (model artifacts and dataset files).

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "swacdem/common.hpp"

namespace swacdem::binio {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

inline std::uint32_t crc32(const void* data, size_t len, std::uint32_t crc = 0) {
    const auto* p = static_cast<const unsigned char*>(data);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = crc32_table()[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct Writer {
    std::vector<unsigned char> bytes;

    void raw(const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        bytes.insert(bytes.end(), p, p + len);
    }
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64_span(const double* data, size_t n) {
        for (size_t i = 0; i < n; ++i) f64(data[i]);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct Reader {
    const unsigned char* p = nullptr;
    size_t len = 0;
    size_t pos = 0;
    std::string context;

    Reader(const void* data, size_t n, std::string ctx)
        : p(static_cast<const unsigned char*>(data)), len(n), context(std::move(ctx)) {}

    void need(size_t n) const {
        if (pos + n > len) throw io_error(context + ": truncated file (needed " + std::to_string(n) +
                                          " bytes at offset " + std::to_string(pos) + ")");
    }
    void raw(void* out, size_t n) {
        need(n);
        std::memcpy(out, p + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void f64_span(double* out, size_t n) {
        for (size_t i = 0; i < n; ++i) out[i] = f64();
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
    size_t remaining() const { return len - pos; }
};

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed for '" + path + "'");
}

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw io_error("cannot open '" + path + "' for reading");
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> bytes(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!in) throw io_error("read failed for '" + path + "'");
    return bytes;
}

inline void mat_write(Writer& w, const Mat& m) {
    w.i32(m.rows);
    w.i32(m.cols);
    w.f64_span(m.a.data(), m.a.size());
}

inline Mat mat_read(Reader& r) {
    const std::int32_t rows = r.i32();
    const std::int32_t cols = r.i32();
    if (rows < 0 || cols < 0 || (rows > 0 && static_cast<std::uint64_t>(rows) * cols > (1ull << 32)))
        throw io_error(r.context + ": implausible matrix dimensions");
    Mat m(rows, cols);
    r.f64_span(m.a.data(), m.a.size());
    return m;
}

inline void vec_write(Writer& w, const std::vector<double>& v) {
    w.u64(v.size());
    w.f64_span(v.data(), v.size());
}

inline std::vector<double> vec_read(Reader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1ull << 32)) throw io_error(r.context + ": implausible vector length");
    r.need(n * 8);
    std::vector<double> v(n);
    r.f64_span(v.data(), n);
    return v;
}

inline void ivec_write(Writer& w, const std::vector<int>& v) {
    w.u64(v.size());
    for (int x : v) w.i32(x);
}

inline std::vector<int> ivec_read(Reader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1ull << 32)) throw io_error(r.context + ": implausible vector length");
    r.need(n * 4);
    std::vector<int> v(n);
    for (auto& x : v) x = r.i32();
    return v;
}

}  // namespace swacdem::binio
