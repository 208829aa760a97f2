#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace fundbasket {

/// 64-bit FNV-1a. Used for provenance and fitted-state hashes, which must be
/// stable across processes and platforms (std::hash is not).
class Fnv1a {
public:
    void add_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < n; ++k) {
            state_ ^= p[k];
            state_ *= 0x100000001b3ULL;
        }
    }
    void add(std::string_view s) {
        add(static_cast<std::uint64_t>(s.size()));
        add_bytes(s.data(), s.size());
    }
    void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
    void add(std::int64_t v) { add(static_cast<std::uint64_t>(v)); }
    void add(std::int32_t v) { add(static_cast<std::int64_t>(v)); }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }

    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace fundbasket
