#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tricl {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives an independent stream seed from (seed, tag, extra). Used everywhere a
// reproducible sub-stream is needed: per-epoch shuffles, per-document noise, etc.
inline uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t extra = 0) {
    uint64_t s = seed ^ fnv1a64(tag);
    s ^= 0x9e3779b97f4a7c15ULL + (extra << 1);
    uint64_t t = s;
    return splitmix64(t);
}

// Deterministic RNG with hand-rolled distributions so results do not depend on
// the standard library's implementation-defined distribution algorithms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with cached spare.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    int index(size_t n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Shared per-token randomness. Both the procedural glyph rendered for a token
// and the initial token-embedding rows are drawn from this one basis, which is
// what stands in for pretrained token/visual grounding at this scale: the two
// text towers start from the same word vectors, and a glyph is an affine image
// of its word vector, so alignment learned on one set of words carries over to
// words never touched by training.
inline double token_basis_normal(uint32_t token_id, int component) {
    uint64_t s = 0x70c3b45a11d4f0e7ULL ^ (static_cast<uint64_t>(token_id) << 20) ^
                 static_cast<uint64_t>(component);
    double u1 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace tricl
