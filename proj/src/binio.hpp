#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "diffplan/errors.hpp"

// Little-endian binary file helpers shared by the dataset and checkpoint
// containers.

namespace diffplan::binio {

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
        put_bytes(os, buf, sizeof(T));
    } else {
        put_bytes(os, &v, sizeof(T));
    }
}

inline void put_string(std::ostream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}

inline void put_f64s(std::ostream& os, std::span<const double> v) {
    put<uint64_t>(os, v.size());
    for (double x : v) put<double>(os, x);
}

template <typename T>
T get(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw IoError("unexpected end of file");
    if constexpr (std::endian::native == std::endian::big)
        for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline std::string get_string(std::istream& is) {
    const uint32_t n = get<uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw IoError("unexpected end of file");
    return s;
}

inline std::vector<double> get_f64s(std::istream& is) {
    const uint64_t n = get<uint64_t>(is);
    std::vector<double> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = get<double>(is);
    return v;
}

inline void expect_magic(std::istream& is, const char* magic, const std::string& what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw IoError(what + ": bad magic (expected " + magic + ")");
}

}  // namespace diffplan::binio
