#pragma once

// Seeded streams. The engine is std::mt19937_64 (output fixed by the standard);
// the distributions below are written out so results do not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <random>

namespace sadic {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// independent stream for item i of a run seeded with `master`
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i) { return splitmix64(splitmix64(master) ^ splitmix64(i + 1)); }

class Rng {
public:
    using result_type = std::uint64_t;
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }
    result_type operator()() { return eng_(); }

    // uniform in [0, n)
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t lim = max() - max() % n;
        std::uint64_t x;
        do x = eng_();
        while (x >= lim);
        return x % n;
    }
    long range(long lo, long hi) { return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
    // uniform in [0, 1)
    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2 * uniform() - 1;
            v = 2 * uniform() - 1;
            s = u * u + v * v;
        } while (s >= 1 || s == 0);
        double f = std::sqrt(-2 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool has_spare_ = false;
};

}  // namespace sadic
