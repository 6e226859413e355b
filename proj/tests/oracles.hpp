#pragma once

// Brute-force reference computations shared by the unit and acceptance tests.
// Deliberately naive: no shared code paths with the library beyond Int/Rat.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "sadic/integer.hpp"

namespace oracle {

using sadic::Int;
using sadic::Rat;

inline long det_mod(const std::vector<long>& m, int d, long q) {
    // Laplace expansion; d <= 3 here
    if (d == 1) return ((m[0] % q) + q) % q;
    long s = 0;
    for (int c = 0; c < d; ++c) {
        std::vector<long> minor;
        for (int i = 1; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (j != c) minor.push_back(m[i * d + j]);
        long sub = det_mod(minor, d - 1, q);
        long term = (m[c] * sub) % q;
        s += (c % 2 == 0) ? term : q - term;
    }
    return ((s % q) + q) % q;
}

// visit every d x d matrix over Z/q
inline void for_each_matrix(int d, long q, const std::function<void(const std::vector<long>&)>& f) {
    std::vector<long> m(d * d, 0);
    while (true) {
        f(m);
        int i = 0;
        while (i < d * d && ++m[i] == q) m[i++] = 0;
        if (i == d * d) return;
    }
}

inline std::uint64_t sl_count(int d, long q) {
    std::uint64_t n = 0;
    for_each_matrix(d, q, [&](const std::vector<long>& m) { n += det_mod(m, d, q) == 1 % q; });
    return n;
}

// matrices in SL_d(Z/q) whose last row is e_d
inline std::uint64_t stabilizer_count(int d, long q) {
    std::uint64_t n = 0;
    for_each_matrix(d, q, [&](const std::vector<long>& m) {
        for (int j = 0; j < d; ++j)
            if (m[(d - 1) * d + j] != (j == d - 1 ? 1 : 0)) return;
        n += det_mod(m, d, q) == 1 % q;
    });
    return n;
}

inline long gcd_l(long a, long b) {
    a = std::labs(a);
    b = std::labs(b);
    while (b) {
        long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// solubility of z^2 = a x^2 + b y^2 with (x,y,z) primitive mod p^m
inline bool hilbert_soluble_mod(long a, long b, long p, int m) {
    long pm = 1;
    for (int i = 0; i < m; ++i) pm *= p;
    auto md = [&](long v) { return ((v % pm) + pm) % pm; };
    for (long x = 0; x < pm; ++x)
        for (long y = 0; y < pm; ++y)
            for (long z = 0; z < pm; ++z) {
                if (x % p == 0 && y % p == 0 && z % p == 0) continue;
                __int128 lhs = (__int128)z * z - (__int128)a * x * x - (__int128)b * y * y;
                if (md((long)(lhs % pm)) == 0) return true;
            }
    return false;
}

// primitive zero of a diagonal form mod p^m (isotropy oracle for small cases)
inline bool diag_has_primitive_zero(const std::vector<long>& coeffs, long p, int m) {
    long pm = 1;
    for (int i = 0; i < m; ++i) pm *= p;
    const int d = static_cast<int>(coeffs.size());
    std::vector<long> x(d, 0);
    while (true) {
        bool prim = false;
        for (auto v : x) prim |= (v % p != 0);
        if (prim) {
            __int128 s = 0;
            for (int i = 0; i < d; ++i) s += (__int128)coeffs[i] * x[i] * x[i];
            if (((long)(s % pm) + pm) % pm == 0) return true;
        }
        int i = 0;
        while (i < d && ++x[i] == pm) x[i++] = 0;
        if (i == d) return false;
    }
}

}  // namespace oracle

namespace oracle {

// #{x mod p^k : sum a_i x_i^2 = 0 mod p^k} via convolution of value histograms
inline std::vector<std::uint64_t> zero_histogram(const std::vector<long>& a, long p, int k) {
    long pk = 1;
    for (int i = 0; i < k; ++i) pk *= p;
    std::vector<std::uint64_t> acc(pk, 0);
    acc[0] = 1;
    for (long c : a) {
        std::vector<std::uint64_t> h(pk, 0);
        for (long x = 0; x < pk; ++x) {
            long v = static_cast<long>(((__int128)c * x % pk * x % pk + pk) % pk);
            ++h[(v % pk + pk) % pk];
        }
        std::vector<std::uint64_t> nxt(pk, 0);
        for (long u = 0; u < pk; ++u) {
            if (!acc[u]) continue;
            for (long v = 0; v < pk; ++v)
                if (h[v]) nxt[(u + v) % pk] += acc[u] * h[v];
        }
        acc.swap(nxt);
    }
    return acc;
}

inline std::uint64_t zero_count(const std::vector<long>& a, long p, int k) {
    if (k <= 0) return 1;
    return zero_histogram(a, p, k)[0];
}

// primitive zeros mod p^k: all zeros minus those of the form p*y
inline std::int64_t primitive_zero_count(const std::vector<long>& a, long p, int k) {
    std::int64_t pd = 1;
    for (std::size_t i = 0; i < a.size(); ++i) pd *= p;
    std::int64_t all = static_cast<std::int64_t>(zero_count(a, p, k));
    std::int64_t imprim = k >= 2 ? pd * static_cast<std::int64_t>(zero_count(a, p, k - 2)) : 1;
    return all - imprim;
}

// drop p^2 factors: same square class
inline long strip_squares(long a, long p) {
    while (a % (p * p) == 0) a /= p * p;
    return a;
}

}  // namespace oracle

namespace oracle {

// shortest-vector length of a random unimodular planar lattice by rejection
// from the strip |x| <= 1/2, y >= sqrt(3)/2 of the upper half plane
template <class Gen>
inline double sl2_shortest_by_rejection(Gen& uniform01) {
    for (;;) {
        double x = uniform01() - 0.5;
        double u = uniform01();
        if (u == 0) continue;
        double y = (std::sqrt(3.0) / 2) / u;  // density proportional to 1/y^2
        if (x * x + y * y >= 1) return 1 / std::sqrt(y);
    }
}

// shortest nonzero vector of the lattice spanned by two rows (Gauss reduction)
inline double shortest_2d(double a0, double a1, double b0, double b1) {
    auto n2 = [](double x, double y) { return x * x + y * y; };
    for (int it = 0; it < 200; ++it) {
        if (n2(a0, a1) > n2(b0, b1)) {
            std::swap(a0, b0);
            std::swap(a1, b1);
        }
        double m = std::round((a0 * b0 + a1 * b1) / n2(a0, a1));
        if (m == 0) break;
        b0 -= m * a0;
        b1 -= m * a1;
    }
    return std::sqrt(std::min(n2(a0, a1), n2(b0, b1)));
}

// two-sample Kolmogorov-Smirnov statistic
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double best = 0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return best;
}

// Term-by-term sum over t <= J and a = n/P, P | prod p^K, |a| <= J, straight
// from the definition with rational a. f is the box prod [lo_i, hi_i] at the
// real place times prod_p p^{-t_p} Z_p^d.
struct BoxS {
    std::vector<double> lo, hi;
    std::vector<long> t_p;
};

inline double second_moment_brute(const BoxS& f, long q, const std::vector<unsigned long>& primes, long J, long K,
                                  bool gcd_filter = true) {
    const std::size_t d = f.lo.size();
    double vinf = 1, vf = 1;
    for (std::size_t i = 0; i < d; ++i) vinf *= f.hi[i] - f.lo[i];
    for (std::size_t i = 0; i < primes.size(); ++i) vf *= std::pow(double(primes[i]), double(d) * f.t_p[i]);
    auto s_free = [&](long n) {
        n = std::labs(n);
        for (auto p : primes)
            while (n % long(p) == 0) n /= long(p);
        return n;
    };
    std::vector<long> dens{1};
    for (auto p : primes) {
        std::vector<long> nx;
        for (long P : dens)
            for (long e = 0, pe = 1; e <= K; ++e, pe *= long(p)) nx.push_back(P * pe);
        dens = nx;
    }
    long double sum = 0;
    std::vector<Rat> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = Rat(f.lo[i]);
        hi[i] = Rat(f.hi[i]);
    }
    for (long t = 1; t <= J; ++t) {
        if (s_free(t) != t || gcd_l(t, q) != 1) continue;
        for (long P : dens) {
            for (long n = -J * P; n <= J * P; ++n) {
                if (n == 0 || ((n - t * P) % q + q) % q != 0) continue;
                Rat a(n, P);
                a.canonicalize();
                if (a.get_den() != P) continue;  // counted at its exact denominator
                // a = t mod q in Z_S: (a - t)/q has S-unit denominator
                Rat diff = (a - t) / q;
                diff.canonicalize();
                if (s_free(diff.get_den().get_si()) != 1) continue;
                if (gcd_filter && gcd_l(t, s_free(a.get_num().get_si())) != 1) continue;
                Rat vol = 1;
                for (std::size_t i = 0; i < d; ++i) {
                    Rat a1 = lo[i] / t, b1 = hi[i] / t;
                    Rat a2 = lo[i] / a, b2 = hi[i] / a;
                    if (a2 > b2) std::swap(a2, b2);
                    Rat len = (b1 < b2 ? b1 : b2) - (a1 > a2 ? a1 : a2);
                    if (len <= 0) {
                        vol = 0;
                        break;
                    }
                    vol *= len;
                }
                if (vol == 0) continue;
                // |a|_p^{-d} restricted to the finite balls
                Rat fin = Rat(vf);
                for (std::size_t i = 0; i < d; ++i) fin /= P;
                sum += static_cast<long double>(Rat(vol * fin).get_d());
            }
        }
    }
    return static_cast<double>(static_cast<long double>(vinf * vf) * (vinf * vf) + sum);
}

}  // namespace oracle
