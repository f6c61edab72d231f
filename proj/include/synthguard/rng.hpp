#ifndef SYNTHGUARD_RNG_HPP
#define SYNTHGUARD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace synthguard {

// Splittable counter-based generator. The stream is a pure function of
// (key, counter), so a value never depends on how many threads consumed
// sibling streams. split() derives an independent child stream; the child
// does not advance the parent.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ull)) {}

    Rng split(std::uint64_t salt) const {
        Rng child(0);
        child.key_ = mix(key_ ^ mix(salt + 0x9e3779b97f4a7c15ull));
        child.ctr_ = 0;
        return child;
    }

    Rng split(std::string_view label) const { return split(fnv1a(label)); }

    std::uint64_t next_u64() {
        ++ctr_;
        return mix(key_ + ctr_ * 0x9e3779b97f4a7c15ull);
    }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per value, no cached spare.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Unbiased integer in [0, n) by rejection.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return static_cast<std::size_t>(v % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(xs[i - 1], xs[j]);
        }
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace synthguard

#endif
