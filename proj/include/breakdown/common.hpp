#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace breakdown {

// Raised for validated bad input (missing files, schema violations, config
// errors). The CLI maps it to exit code 1; anything else is exit code 2.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG helpers. All randomness in the library flows through
// std::mt19937_64 engines seeded explicitly; raw draws are converted with the
// helpers below rather than std distributions so sequences are identical
// across standard library implementations.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable seed derivation for named sub-streams.
inline uint64_t derive_seed(uint64_t base, uint64_t salt) {
    return splitmix64(base ^ splitmix64(salt));
}

// Uniform double in [0, 1) with 53 random bits.
inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Uniform integer in [0, n). Modulo bias is negligible for the ranges used
// here (vocab ids, shuffle indices) and keeps the draw portable.
inline uint64_t next_below(Rng& rng, uint64_t n) {
    return rng() % n;
}

template <typename T>
void shuffle_indices(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(next_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content hash, used for manifest input fingerprints.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Small file helpers.
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw input_error("write failed: " + path);
}

inline bool file_exists(const std::string& path) {
    std::ifstream in(path);
    return in.good();
}

inline uint64_t hash_file(const std::string& path) { return fnv1a64(read_file(path)); }

// Shortest round-trip decimal rendering, used everywhere floats are written
// to CSV so logs are byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace breakdown
