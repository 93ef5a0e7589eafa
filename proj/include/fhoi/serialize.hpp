#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fhoi/common.hpp"

namespace fhoi {

// Little-endian primitive IO shared by the FHEB / FHDS / FHCK formats.
class BinWriter {
public:
    explicit BinWriter(const std::string& path) : os_(path, std::ios::binary) {
        if (!os_) throw DataError("cannot open for write: " + path);
        path_ = path;
    }

    void magic(const char m[4]) { os_.write(m, 4); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw_le(v); }
    void u32(std::uint32_t v) { raw_le(v); }
    void f32(float v) {
        std::uint32_t b;
        std::memcpy(&b, &v, 4);
        raw_le(b);
    }
    void f64(double v) {
        std::uint64_t b;
        std::memcpy(&b, &v, 8);
        raw_le(b);
    }
    void str(const std::string& s) {
        if (s.size() > 0xffff) throw DataError("string too long for u16 length");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    void close() {
        os_.close();
        if (!os_) throw DataError("write failed: " + path_);
    }

private:
    template <typename T>
    void raw_le(T v) {
        if constexpr (std::endian::native == std::endian::big) {
            auto* p = reinterpret_cast<std::uint8_t*>(&v);
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
                std::swap(p[i], p[sizeof(T) - 1 - i]);
        }
        raw(&v, sizeof(T));
    }
    void raw(const void* p, std::size_t n) {
        os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    std::ofstream os_;
    std::string path_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : is_(path, std::ios::binary) {
        if (!is_) throw DataError("cannot open for read: " + path);
        path_ = path;
    }

    void expect_magic(const char m[4]) {
        char b[4];
        raw(b, 4);
        if (std::memcmp(b, m, 4) != 0)
            throw FormatError("bad magic in " + path_ + ": expected " + std::string(m, 4));
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint16_t u16() { return raw_le<std::uint16_t>(); }
    std::uint32_t u32() { return raw_le<std::uint32_t>(); }
    float f32() {
        const std::uint32_t b = raw_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64() {
        const std::uint64_t b = raw_le<std::uint64_t>();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    std::string str() {
        const std::uint16_t n = u16();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

private:
    template <typename T>
    T raw_le() {
        T v;
        raw(&v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            auto* p = reinterpret_cast<std::uint8_t*>(&v);
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
                std::swap(p[i], p[sizeof(T) - 1 - i]);
        }
        return v;
    }
    void raw(void* p, std::size_t n) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (is_.gcount() != static_cast<std::streamsize>(n))
            throw FormatError("truncated file: " + path_);
    }
    std::ifstream is_;
    std::string path_;
};

}  // namespace fhoi
