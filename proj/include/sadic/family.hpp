#pragma once

// Target sets I = (lo, hi) x prod_p (a_p + p^{c_p} Z_p) and their T-indexed
// shrinking families.

#include <cmath>
#include <vector>

#include "sadic/qspace.hpp"
#include "sadic/sarith.hpp"

namespace sadic {

struct PadicTarget {
    Rat center;
    long exponent = 0;  // a + p^exponent Z_p

    bool contains(const Rat& x, unsigned long p) const {
        auto v = valuation(Rat(x - center), p);
        return !v || *v >= exponent;
    }
    // smallest b with the target inside p^b Z_p
    long base_valuation(unsigned long p) const {
        auto v = valuation(center, p);
        return v ? std::min(*v, exponent) : exponent;
    }
};

struct SInterval {
    Rat lo, hi;                       // open real interval
    std::vector<PadicTarget> finite;  // ordered as the SConfig

    bool contains_real(const Rat& x) const { return lo < x && x < hi; }
    bool contains_real(double x) const { return lo.get_d() < x && x < hi.get_d(); }
    bool contains(const FormValue& v, const SConfig& ctx) const {
        bool in = v.inf_exact ? contains_real(*v.inf_exact) : contains_real(v.inf);
        for (std::size_t i = 0; in && i < ctx.size(); ++i) in = finite[i].contains(v.finite.at(ctx.primes()[i]), ctx.primes()[i]);
        return in;
    }
    double real_length() const { return Rat(hi - lo).get_d(); }
    Rat finite_volume(const SConfig& ctx) const {
        Rat v = 1;
        for (std::size_t i = 0; i < ctx.size(); ++i) v *= rpow(ctx.primes()[i], -finite[i].exponent);
        return v;
    }
    double volume(const SConfig& ctx) const { return real_length() * finite_volume(ctx).get_d(); }
};

struct ShrinkingFamily {
    double c_inf = 1;
    double kappa_inf = 0;
    Rat a_inf = 0;
    std::vector<Rat> a_p;
    std::vector<long> c_p;
    std::vector<int> kappa_p;

    static ShrinkingFamily constant(const SConfig& ctx, double length = 1, Rat center = 0) {
        ShrinkingFamily f;
        f.c_inf = length;
        f.a_inf = center;
        f.a_p.assign(ctx.size(), Rat(0));
        f.c_p.assign(ctx.size(), 0);
        f.kappa_p.assign(ctx.size(), 0);
        return f;
    }

    void validate(std::size_t d, const SConfig& ctx) const {
        if (!(c_inf > 0)) fail(errc::family_out_of_range, "c_inf must be positive");
        if (!(kappa_inf >= 0 && kappa_inf < double(d) - 2))
            fail(errc::family_out_of_range,
                 "kappa_inf must lie in [0, d-2) = [0, " + std::to_string(d - 2) + "), got " + std::to_string(kappa_inf));
        if (a_p.size() != ctx.size() || c_p.size() != ctx.size() || kappa_p.size() != ctx.size())
            fail(errc::family_out_of_range, "family needs one (a_p, c_p, kappa_p) per finite place");
        for (int k : kappa_p) {
            if (k != 0 && k != 1) fail(errc::family_out_of_range, "kappa_p must be 0 or 1");
            if (d == 3 && k != 0) fail(errc::family_out_of_range, "kappa_p must be 0 when d = 3");
        }
    }
};

inline SInterval interval_at(const ShrinkingFamily& f, const TVector& T) {
    SInterval I;
    double half = f.kappa_inf == 0 ? f.c_inf / 2 : f.c_inf * std::pow(T.t_inf, -f.kappa_inf) / 2;
    I.lo = f.a_inf - Rat(half);
    I.hi = f.a_inf + Rat(half);
    for (std::size_t i = 0; i < f.a_p.size(); ++i) I.finite.push_back({f.a_p[i], f.c_p[i] + f.kappa_p[i] * T.t_p.at(i)});
    return I;
}

}  // namespace sadic
