#pragma once

// S-arithmetic scalars: S-integers, p-adic norms, N_S / P_S, gcd against a
// modulus, zeta_S, #SL_d(Z/q) and the closed-form normalization identities.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "sadic/integer.hpp"
#include "sadic/matrix.hpp"

namespace sadic {

class SConfig {
public:
    SConfig() : primes_(std::make_shared<const std::vector<unsigned long>>()) {}
    explicit SConfig(std::vector<unsigned long> ps) {
        std::sort(ps.begin(), ps.end());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            require(is_prime(ps[i]), "S contains a non-prime " + std::to_string(ps[i]));
            require(i == 0 || ps[i] != ps[i - 1], "S contains a repeated prime");
        }
        primes_ = std::make_shared<const std::vector<unsigned long>>(std::move(ps));
    }

    const std::vector<unsigned long>& primes() const { return *primes_; }
    std::size_t size() const { return primes_->size(); }
    bool contains(unsigned long p) const {
        return std::binary_search(primes_->begin(), primes_->end(), p);
    }
    Int product() const {
        Int r = 1;
        for (auto p : *primes_) r *= p;
        return r;
    }
    // n with all S primes divided out
    Int s_free_part(Int n) const {
        if (n < 0) n = -n;
        for (auto p : *primes_)
            while (n != 0 && mpz_divisible_ui_p(n.get_mpz_t(), p)) mpz_divexact_ui(n.get_mpz_t(), n.get_mpz_t(), p);
        return n;
    }
    bool is_s_unit_integer(const Int& n) const { return n != 0 && s_free_part(n) == 1; }
    bool in_ZS(const Rat& x) const { return s_free_part(x.get_den()) == 1; }

    friend bool operator==(const SConfig& a, const SConfig& b) { return a.primes() == b.primes(); }

private:
    std::shared_ptr<const std::vector<unsigned long>> primes_;
};

// element of Z_S in the diagonal model
class SRational {
public:
    SRational() = default;
    SRational(const Rat& v, const SConfig& ctx) : v_(v), ctx_(ctx) {
        v_.canonicalize();
        if (!ctx_.in_ZS(v_))
            fail(errc::non_s_unit_denominator, "denominator of " + to_string(v_) + " is not an S-unit");
    }
    static SRational make(const Int& num, const Int& den, const SConfig& ctx) {
        require(den != 0, "zero denominator");
        return SRational(make_rat(num, den), ctx);
    }

    const Rat& value() const { return v_; }
    const SConfig& context() const { return ctx_; }

    friend SRational operator+(const SRational& a, const SRational& b) { return {a.v_ + b.v_, a.ctx_}; }
    friend SRational operator-(const SRational& a, const SRational& b) { return {a.v_ - b.v_, a.ctx_}; }
    friend SRational operator*(const SRational& a, const SRational& b) { return {a.v_ * b.v_, a.ctx_}; }
    friend bool operator==(const SRational& a, const SRational& b) { return a.v_ == b.v_; }

private:
    Rat v_ = 0;
    SConfig ctx_;
};

// vector with S-integral coordinates
class SVector {
public:
    SVector() = default;
    SVector(RatVec coords, const SConfig& ctx) : c_(std::move(coords)), ctx_(ctx) {
        for (auto& x : c_) {
            x.canonicalize();
            if (!ctx_.in_ZS(x))
                fail(errc::non_s_unit_denominator, "coordinate " + to_string(x) + " not in Z_S");
        }
    }
    std::size_t dim() const { return c_.size(); }
    const RatVec& coords() const { return c_; }
    const Rat& operator[](std::size_t i) const { return c_[i]; }
    const SConfig& context() const { return ctx_; }
    bool is_zero() const {
        return std::all_of(c_.begin(), c_.end(), [](const Rat& x) { return x == 0; });
    }

private:
    RatVec c_;
    SConfig ctx_;
};

// T = (T_inf, p^{t_p}); exponent list ordered as the SConfig primes
struct TVector {
    double t_inf = 1.0;
    std::vector<long> t_p;

    bool dominates(const TVector& o) const {
        if (t_inf < o.t_inf) return false;
        for (std::size_t i = 0; i < t_p.size(); ++i)
            if (t_p[i] < o.t_p[i]) return false;
        return true;
    }
};

// |T| = T_inf * prod p^{t_p}
inline double tvector_abs(const TVector& t, const SConfig& ctx) {
    double v = t.t_inf;
    for (std::size_t i = 0; i < ctx.size(); ++i) v *= std::pow(double(ctx.primes()[i]), double(t.t_p.at(i)));
    return v;
}

// |x|_p (p = kInf: absolute value); exact
inline Rat padic_norm(const Rat& x, place_t p) {
    if (x == 0) return 0;
    if (p == kInf) return abs(x);
    return rpow(p, -*valuation(x, p));
}

inline bool is_in_NS(const Int& n, const SConfig& ctx) {
    if (n <= 0) return false;
    for (auto p : ctx.primes())
        if (mpz_divisible_ui_p(n.get_mpz_t(), p)) return false;
    return true;
}

// positive S-unit monomial, exponents of any sign
inline bool is_in_PS(const Rat& x, const SConfig& ctx) {
    return x > 0 && ctx.is_s_unit_integer(x.get_num()) && ctx.is_s_unit_integer(x.get_den());
}

// k = scale * prim with prim a primitive integer vector (scale > 0)
struct Content {
    Rat scale;
    IntVec prim;
};

inline Content content(const RatVec& k) {
    Int den = 1, g = 0;
    for (auto& x : k) den = lcm(den, x.get_den());
    IntVec n(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        n[i] = Rat(k[i] * den).get_num();
        g = gcd(g, n[i]);
    }
    if (g == 0) fail(errc::zero_vector, "content of the zero vector");
    for (auto& x : n) x /= g;
    return {make_rat(g, den), n};
}

// gcd(q, k') with k' in (P_S k) ∩ Z^d
inline Int gcd_S(const Int& q, const RatVec& k, const SConfig& ctx) {
    require(is_in_NS(q, ctx), "gcd_S: q must lie in N_S");
    for (auto& x : k) require(ctx.in_ZS(x), "gcd_S: entries must lie in Z_S");
    Content c = content(k);
    Int g = c.scale.get_num();  // k = g/den * prim; the den part is an S-unit
    return gcd(q, g);
}

inline bool is_primitive(const RatVec& k, const SConfig& ctx) {
    Content c = content(k);
    return is_in_PS(c.scale, ctx);
}

inline double unit_ball_volume(std::size_t d) {
    return std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1);
}

// ---------------------------------------------------------------- zeta_S

struct SeriesEstimate {
    double value = 0;
    double error_bound = 0;
    std::uint64_t terms = 0;
};

namespace detail {

inline std::uint64_t prod_u64(const std::vector<std::uint64_t>& ps) {
    std::uint64_t P = 1;
    for (auto p : ps) P *= p;
    return P;
}

inline bool coprime_to(std::uint64_t t, const std::vector<std::uint64_t>& ps) {
    for (auto p : ps)
        if (t % p == 0) return false;
    return true;
}

}  // namespace detail

// sum_{t >= 1, t coprime to every prime in `excluded`} t^{-d}.
// Direct summation up to N, then an Euler-Maclaurin tail per residue class
// mod P = prod(excluded); the remainder bound uses complete monotonicity.
inline SeriesEstimate coprime_zeta(int d, std::vector<std::uint64_t> excluded, double tol,
                                   std::uint64_t cap = 100'000'000ULL) {
    require(d >= 2, "zeta needs d >= 2");
    std::sort(excluded.begin(), excluded.end());
    excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
    const std::uint64_t P = detail::prod_u64(excluded);
    std::vector<std::uint64_t> residues;
    for (std::uint64_t r = 1; r <= P; ++r)
        if (detail::coprime_to(r, excluded)) residues.push_back(r);

    const long double dd = d;
    const long double eps = 1.1e-19L;
    for (std::uint64_t blocks = 64;; blocks *= 2) {
        const std::uint64_t N = blocks * P;
        if (N > cap) fail(errc::tolerance_unreachable, "zeta_S truncation cap reached");
        // tail first (small terms) then head from the far end
        long double tail = 0, rem = 0;
        for (auto r : residues) {
            long double a = static_cast<long double>(N + r);
            long double lp = static_cast<long double>(P);
            tail += std::pow(a, 1 - dd) / (lp * (dd - 1)) + std::pow(a, -dd) / 2 + dd * lp * std::pow(a, -dd - 1) / 12;
            rem += dd * (dd + 1) * (dd + 2) * lp * lp * lp * std::pow(a, -dd - 3) / 720;
        }
        long double head = 0;
        std::uint64_t terms = 0;
        for (std::uint64_t t = N; t >= 1; --t) {
            if (!detail::coprime_to(t, excluded)) continue;
            head += std::pow(static_cast<long double>(t), -dd);
            ++terms;
        }
        long double value = head + tail;
        long double bound = rem + eps * static_cast<long double>(terms + 4 * residues.size()) * value;
        if (bound <= tol)
            return {static_cast<double>(value), static_cast<double>(bound) + 1e-17, terms};
    }
}

inline std::vector<std::uint64_t> primes_u64(const SConfig& ctx) {
    return {ctx.primes().begin(), ctx.primes().end()};
}

inline SeriesEstimate zeta_S(int d, const SConfig& ctx, double tol) {
    return coprime_zeta(d, primes_u64(ctx), tol);
}

// Riemann zeta(2..16), 20 significant digits
inline long double riemann_zeta_table(int d) {
    static const long double z[] = {
        1.6449340668482264365L, 1.2020569031595942854L, 1.0823232337111381915L,
        1.0369277551433699263L, 1.0173430619844491397L, 1.0083492773819228268L,
        1.0040773561979443394L, 1.0020083928260822144L, 1.0009945751278180853L,
        1.0004941886041194646L, 1.0002460865533080483L, 1.0001227133475784891L,
        1.0000612481350587048L, 1.0000305882363070205L, 1.0000152822594086519L};
    require(d >= 2, "zeta table needs d >= 2");
    if (d <= 16) return z[d - 2];
    long double s = 0;  // tail below 2^{-16}·(small) beyond this range
    for (int n = 40; n >= 1; --n) s += std::pow(static_cast<long double>(n), -d);
    return s;
}

// independent path: zeta(d) * prod_{p in S}(1 - p^{-d})
inline double zeta_S_euler(int d, const SConfig& ctx) {
    long double v = riemann_zeta_table(d);
    for (auto p : ctx.primes()) v *= 1 - std::pow(static_cast<long double>(p), -static_cast<long double>(d));
    return static_cast<double>(v);
}

// ------------------------------------------------------- finite group orders

// #SL_d(Z/q)
inline Int sl_group_order(int d, std::uint64_t q) {
    require(d >= 1 && q >= 1, "sl_group_order needs d >= 1, q >= 1");
    if (d == 1 || q == 1) return 1;
    Int out = 1;
    for (auto& [p, e] : factorize(q)) {
        // |SL_d(F_p)| = p^{d(d-1)/2} prod_{i=2}^d (p^i - 1), times p^{(e-1)(d^2-1)}
        Int f = ipow(p, static_cast<unsigned long>(d) * (d - 1) / 2);
        for (int i = 2; i <= d; ++i) f *= ipow(p, i) - 1;
        f *= ipow(p, static_cast<unsigned long>(e - 1) * (d * d - 1));
        out *= f;
    }
    return out;
}

struct NormalizationResult {
    double residual = 0;     // numeric, from the truncated series
    double error_bound = 0;  // propagated truncation error
    Rat closed_form_ratio;   // the same quantity with both series replaced by closed forms
};

// |q^{2d-1} #SL_{d-1}(q) / (#SL_d(q) zeta_S(d)) * sum_{t in N_S, (t,q)=1} t^{-d} - 1|
inline NormalizationResult normalization_identity_residual(int d, std::uint64_t q, const SConfig& ctx, double tol) {
    require(d >= 2 && q >= 1, "normalization identity needs d >= 2, q >= 1");
    require(is_in_NS(Int(static_cast<unsigned long>(q)), ctx), "q must be coprime to the primes of S");
    Rat group_ratio = Rat(ipow(q, 2 * d - 1) * sl_group_order(d - 1, q)) / Rat(sl_group_order(d, q));
    group_ratio.canonicalize();

    auto excluded = primes_u64(ctx);
    for (auto p : prime_divisors(q)) excluded.push_back(p);
    SeriesEstimate z = zeta_S(d, ctx, tol / 8);
    SeriesEstimate c = coprime_zeta(d, excluded, tol / 8);

    NormalizationResult out;
    double ratio = group_ratio.get_d() * c.value / z.value;
    out.residual = std::abs(ratio - 1);
    out.error_bound = ratio * (c.error_bound / c.value + z.error_bound / z.value) + 4e-16;

    // closed form: the coprime sum equals zeta_S(d) * prod_{p | q} (1 - p^{-d})
    Rat euler = 1;
    for (auto p : prime_divisors(q)) euler *= 1 - rpow(p, -d);
    out.closed_form_ratio = group_ratio * euler;
    return out;
}

enum class CovolumeVariant { UL, SL };

inline SeriesEstimate covolume_product(int d, const SConfig& ctx, CovolumeVariant variant, double tol) {
    require(d >= 2, "covolume needs d >= 2");
    double v = 1, rel = 0;
    if (variant == CovolumeVariant::UL)
        for (auto p : ctx.primes()) v *= 1 - 1.0 / double(p);
    std::uint64_t terms = 0;
    for (int k = 2; k <= d; ++k) {
        SeriesEstimate z = zeta_S(k, ctx, tol / (2 * d));
        v *= z.value;
        rel += z.error_bound / z.value;
        terms += z.terms;
    }
    return {v, v * rel + 1e-16, terms};
}

}  // namespace sadic
