#pragma once

// Big integers/rationals (GMP) and small number-theoretic helpers.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadic/error.hpp"

namespace sadic {

using Int = mpz_class;
using Rat = mpq_class;
using IntVec = std::vector<Int>;
using RatVec = std::vector<Rat>;

// place label: 0 is the real place, anything else a prime
using place_t = unsigned long;
inline constexpr place_t kInf = 0;

inline Rat make_rat(const Int& n, const Int& d) {
    require(d != 0, "zero denominator");
    Rat r(n, d);
    r.canonicalize();
    return r;
}

inline Int ipow(unsigned long base, unsigned long e) {
    Int r;
    mpz_ui_pow_ui(r.get_mpz_t(), base, e);
    return r;
}

inline Rat rpow(unsigned long p, long e) {
    if (e >= 0) return Rat(ipow(p, static_cast<unsigned long>(e)));
    return Rat(Int(1), ipow(p, static_cast<unsigned long>(-e)));
}

// v_p(n) for n != 0
inline long valuation(const Int& n, unsigned long p) {
    require(n != 0, "valuation of zero");
    Int m = n;
    long v = 0;
    while (mpz_divisible_ui_p(m.get_mpz_t(), p)) {
        mpz_divexact_ui(m.get_mpz_t(), m.get_mpz_t(), p);
        ++v;
    }
    return v;
}

// v_p(x); nullopt for x == 0
inline std::optional<long> valuation(const Rat& x, unsigned long p) {
    if (x == 0) return std::nullopt;
    return valuation(x.get_num(), p) - valuation(x.get_den(), p);
}

// x = p^v * u with v = v_p(x); returns u
inline Rat unit_part(const Rat& x, unsigned long p) {
    auto v = valuation(x, p);
    require(v.has_value(), "unit part of zero");
    return x / rpow(p, *v);
}

inline bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t f = 2; f * f <= n; ++f)
        if (n % f == 0) return false;
    return true;
}

// trial division; fine for the moduli used here
inline std::vector<std::pair<std::uint64_t, int>> factorize(std::uint64_t n) {
    std::vector<std::pair<std::uint64_t, int>> out;
    for (std::uint64_t f = 2; f * f <= n; ++f) {
        if (n % f) continue;
        int e = 0;
        while (n % f == 0) {
            n /= f;
            ++e;
        }
        out.emplace_back(f, e);
    }
    if (n > 1) out.emplace_back(n, 1);
    return out;
}

inline std::vector<std::uint64_t> prime_divisors(std::uint64_t n) {
    std::vector<std::uint64_t> ps;
    for (auto& [p, e] : factorize(n)) ps.push_back(p);
    return ps;
}

inline int mobius(std::uint64_t n) {
    int s = 1;
    for (auto& [p, e] : factorize(n)) {
        if (e > 1) return 0;
        s = -s;
    }
    return s;
}

inline std::vector<std::uint64_t> divisors(std::uint64_t n) {
    std::vector<std::uint64_t> ds{1};
    for (auto& [p, e] : factorize(n)) {
        std::size_t k = ds.size();
        std::uint64_t pk = 1;
        for (int i = 1; i <= e; ++i) {
            pk *= p;
            for (std::size_t j = 0; j < k; ++j) ds.push_back(ds[j] * pk);
        }
    }
    std::sort(ds.begin(), ds.end());
    return ds;
}

inline Int gcd(const Int& a, const Int& b) {
    Int g;
    mpz_gcd(g.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return g;
}

inline Int lcm(const Int& a, const Int& b) {
    Int g;
    mpz_lcm(g.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return g;
}

// nonnegative residue
inline Int mod(const Int& a, const Int& m) {
    Int r;
    mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
    return r;
}

inline std::optional<Int> inverse_mod(const Int& a, const Int& m) {
    Int r;
    if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) return std::nullopt;
    return mod(r, m);
}

// reduce a rational whose denominator is invertible mod m
inline std::optional<Int> rat_mod(const Rat& x, const Int& m) {
    auto inv = inverse_mod(x.get_den(), m);
    if (!inv) return std::nullopt;
    return mod(x.get_num() * *inv, m);
}

inline std::int64_t to_i64(const Int& x) {
    require(x.fits_slong_p(), "integer out of 64-bit range");
    return x.get_si();
}

inline std::string to_string(const Rat& x) {
    if (x.get_den() == 1) return x.get_num().get_str();
    return x.get_num().get_str() + "/" + x.get_den().get_str();
}

// "a", "a/b" or a decimal literal (read exactly, e.g. "0.25" -> 1/4)
inline Rat parse_rational(const std::string& s) {
    auto bad = [&] { fail(errc::precondition, "cannot parse rational '" + s + "'"); };
    if (s.empty()) bad();
    try {
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            Int n(s.substr(0, slash), 10), d(s.substr(slash + 1), 10);
            return make_rat(n, d);
        }
        auto dot = s.find_first_of(".eE");
        if (dot == std::string::npos) return Rat(Int(s, 10));
        // decimal: scale the digits
        std::string mant = s, expo;
        auto e = s.find_first_of("eE");
        if (e != std::string::npos) {
            mant = s.substr(0, e);
            expo = s.substr(e + 1);
        }
        long ex = expo.empty() ? 0 : std::stol(expo);
        auto p = mant.find('.');
        std::string digits = mant;
        if (p != std::string::npos) {
            digits = mant.substr(0, p) + mant.substr(p + 1);
            ex -= static_cast<long>(mant.size() - p - 1);
        }
        if (digits == "-" || digits == "+" || digits.empty()) bad();
        if (digits[0] == '+') digits = digits.substr(1);
        Rat v{Int(digits, 10)};
        if (ex >= 0) return Rat(v * rpow(10, ex));
        return Rat(v / rpow(10, -ex));
    } catch (const std::invalid_argument&) {
        bad();
    }
    return {};
}

}  // namespace sadic
