#pragma once

// Little helpers for the columnar little-endian cache files.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "tn/error.hpp"

namespace tn::bin {

static_assert(std::endian::native == std::endian::little, "cache files assume a little-endian host");

using Magic = std::array<char, 16>;

constexpr Magic make_magic(std::string_view tag) {
    Magic m{};
    for (std::size_t i = 0; i < tag.size() && i < m.size(); ++i) m[i] = tag[i];
    return m;
}

template <typename T>
void put(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_span(std::ostream& os, std::span<const T> v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated binary file");
    return v;
}

template <typename T>
std::vector<T> get_vector(std::istream& is, std::size_t count) {
    // Refuse absurd counts before allocating.
    if (count > (std::size_t{1} << 34) / sizeof(T)) throw DataError("corrupt binary file: column too large");
    std::vector<T> v(count);
    if (count && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T))))
        throw DataError("truncated binary file");
    return v;
}

inline void put_header(std::ostream& os, const Magic& magic, std::uint8_t version) {
    os.write(magic.data(), magic.size());
    put(os, version);
}

/// Reads the magic and version; throws DataError on mismatch.
inline void expect_header(std::istream& is, const Magic& magic, std::uint8_t version) {
    Magic got{};
    if (!is.read(got.data(), got.size()) || got != magic) throw DataError("bad magic header");
    if (get<std::uint8_t>(is) != version) throw DataError("unsupported file version");
}

}  // namespace tn::bin
