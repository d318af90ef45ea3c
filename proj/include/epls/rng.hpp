#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace epls {

// Seeded random stream. The engine is std::mt19937_64 (fully specified by the
// standard) and the uniform/normal transforms are implemented here rather than
// taken from <random> distributions, so a given seed produces the same value
// stream everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    float normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        float u1 = uniform();
        float u2 = uniform();
        // avoid log(0)
        if (u1 < 1e-12f) u1 = 1e-12f;
        float r = std::sqrt(-2.0f * std::log(u1));
        float a = 6.2831853071795864769f * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return next_u64() % n; }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

// Stable stream derivation: each consumer of randomness gets its own stream
// derived from (master seed, tag, index). Tags are FNV-1a hashed and the
// result is finalized with splitmix64, so streams do not collide for
// distinct tags/indices.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return splitmix64(master ^ splitmix64(fnv1a(tag) + 0x632be59bd9b4e019ull * index));
}

inline Rng derive_rng(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(master, tag, index));
}

} // namespace epls
