#pragma once

// Reduction mod q, SL_d(Z/q) sampling and lifting, primitive completion and
// the orbit invariant t(k) = gcd(q k) on Z_S^d + w/q.

#include <algorithm>

#include "sadic/matrix.hpp"
#include "sadic/rng.hpp"
#include "sadic/sarith.hpp"

namespace sadic {

struct CongruenceContext {
    std::size_t d;
    Int q;
    RatVec w;
    SConfig ctx;

    CongruenceContext(std::size_t dim, Int modulus, RatVec shift, SConfig s)
        : d(dim), q(std::move(modulus)), w(std::move(shift)), ctx(std::move(s)) {
        require(d >= 2, "congruence context needs d >= 2");
        require(q > 1, "congruence modulus must exceed 1");
        require(is_in_NS(q, ctx), "modulus must be coprime to the finite places");
        if (w.size() != d) fail(errc::dimension_mismatch, "shift vector dimension");
        for (auto& x : w) require(ctx.in_ZS(x), "shift vector must lie in Z_S^d");
        require(gcd_S(q, w, ctx) == 1, "shift vector must satisfy gcd_S(q, w) = 1");
    }
};

// ---------------------------------------------------------------- reduction

inline IntMatrix reduce_mod_q(const RatMatrix& g, const Int& q) {
    if (det(g) != 1) fail(errc::not_in_slq, "reduce_mod_q expects determinant 1");
    IntMatrix out(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
            auto r = rat_mod(g(i, j), q);
            if (!r) fail(errc::denominator_not_invertible_mod_q, "entry " + to_string(g(i, j)) + " has a denominator not invertible mod q");
            out(i, j) = *r;
        }
    return out;
}

inline IntMatrix mul_mod(const IntMatrix& a, const IntMatrix& b, const Int& q) {
    IntMatrix c = a * b;
    for (auto& x : c.data()) x = mod(x, q);
    return c;
}

inline Int det_mod(const IntMatrix& m, const Int& q) { return mod(det(m), q); }

// ---------------------------------------------------------------- unimodular helpers

// V in SL_d(Z) with u V = e_1, for a primitive integer row vector u
inline IntMatrix unimodular_to_e1(IntVec u) {
    const std::size_t d = u.size();
    IntMatrix V = IntMatrix::identity(d);
    for (std::size_t j = 1; j < d; ++j) {
        if (u[j] == 0) continue;
        // columns (0, j) <- (0, j) * [[x, -b/g], [y, a/g]], which sends (a, b) to (g, 0)
        Int a = u[0], b = u[j], g, x, y;
        mpz_gcdext(g.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
        Int bg = b / g, ag = a / g;
        for (std::size_t i = 0; i < d; ++i) {
            Int c0 = V(i, 0), cj = V(i, j);
            V(i, 0) = c0 * x + cj * y;
            V(i, j) = -c0 * bg + cj * ag;
        }
        u[0] = g;
        u[j] = 0;
    }
    if (u[0] == -1) {
        require(d >= 2, "cannot fix sign in dimension 1");
        for (std::size_t i = 0; i < d; ++i) {
            V(i, 0) = -V(i, 0);
            V(i, 1) = -V(i, 1);
        }
        u[0] = 1;
    }
    if (u[0] != 1) fail(errc::not_primitive, "vector is not primitive");
    return V;
}

inline IntMatrix integer_inverse(const IntMatrix& m) {
    RatMatrix inv = inverse(to_rat(m));
    IntMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            require(inv(i, j).get_den() == 1, "matrix is not unimodular");
            out(i, j) = inv(i, j).get_num();
        }
    return out;
}

// g in SL_d(Z_S) with first row v, for v in Prim(Z_S^d)
inline RatMatrix complete_primitive(const RatVec& v, const SConfig& ctx) {
    const std::size_t d = v.size();
    require(d >= 2, "completion needs d >= 2");
    for (auto& x : v)
        if (!ctx.in_ZS(x)) fail(errc::not_primitive, "entries must lie in Z_S");
    bool zero = std::all_of(v.begin(), v.end(), [](const Rat& x) { return x == 0; });
    if (zero) fail(errc::not_primitive, "zero vector");
    Content c = content(v);
    if (!is_in_PS(c.scale, ctx)) fail(errc::not_primitive, "vector is not an S-unit multiple of a primitive vector");
    IntMatrix U = integer_inverse(unimodular_to_e1(c.prim));  // first row = prim
    RatMatrix g = to_rat(U);
    for (std::size_t j = 0; j < d; ++j) {
        g(0, j) *= c.scale;
        g(1, j) /= c.scale;
    }
    return g;
}

// gamma in SL_d(Z_S) with w gamma^{-1} a multiple of e_d
inline RatMatrix gamma_w(const CongruenceContext& cc) {
    const std::size_t d = cc.d;
    Content c = content(cc.w);
    bool along_last = c.prim[d - 1] == 1;
    for (std::size_t j = 0; j + 1 < d; ++j) along_last = along_last && c.prim[j] == 0;
    if (along_last) return RatMatrix::identity(d);
    RatVec prim(d);
    for (std::size_t j = 0; j < d; ++j) prim[j] = c.prim[j];
    RatMatrix g = complete_primitive(prim, cc.ctx);
    // move row 0 to the bottom; the cyclic shift has sign (-1)^{d-1}
    RatMatrix out(d, d);
    for (std::size_t i = 0; i + 1 < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = g(i + 1, j);
    for (std::size_t j = 0; j < d; ++j) out(d - 1, j) = g(0, j);
    if (d % 2 == 0)
        for (std::size_t j = 0; j < d; ++j) out(0, j) = -out(0, j);
    return out;
}

// ---------------------------------------------------------------- SL_d(Z/q)

inline IntMatrix sample_slq_uniform(std::size_t d, const Int& q, Rng& rng) {
    require(q >= 2, "q must be at least 2");
    std::uint64_t qq = q.get_ui();
    require(Int(qq) == q, "q too large for sampling");
    IntMatrix m(d, d);
    while (true) {
        for (auto& x : m.data()) x = Int(static_cast<unsigned long>(rng.below(qq)));
        Int dt = det_mod(m, q);
        auto inv = inverse_mod(dt, q);
        if (!inv) continue;
        // uniform on GL, then the fibre of det is a coset of the units
        for (std::size_t j = 0; j < d; ++j) m(0, j) = mod(m(0, j) * *inv, q);
        return m;
    }
}

// M in SL_d(Z) with M = m mod q
inline IntMatrix lift_slq_to_slz(const IntMatrix& m, const Int& q) {
    const std::size_t d = m.rows();
    require(m.square() && d >= 1, "lift expects a square matrix");
    if (det_mod(m, q) != mod(Int(1), q)) fail(errc::not_in_slq, "determinant is not 1 mod q");
    IntMatrix A = m;
    for (auto& x : A.data()) x = mod(x, q);
    if (d == 1) return IntMatrix::identity(1);
    if (det(A) == 1) return A;
    // make the first column's integer gcd 1 by moving entries within their classes
    Int g = 0;
    for (std::size_t i = 1; i < d; ++i) g = gcd(g, A(i, 0));
    if (g == 0) {
        A(1, 0) += q;
        g = q;
    }
    while (gcd(A(0, 0), g) != 1) A(0, 0) += q;
    IntVec col(d);
    for (std::size_t i = 0; i < d; ++i) col[i] = A(i, 0);
    IntMatrix U = unimodular_to_e1(col).transpose();  // U col = e_1
    IntMatrix UA = U * A;
    IntMatrix sub(d - 1, d - 1);
    for (std::size_t i = 1; i < d; ++i)
        for (std::size_t j = 1; j < d; ++j) sub(i - 1, j - 1) = UA(i, j);
    IntMatrix L = lift_slq_to_slz(sub, q);
    IntMatrix Mp(d, d);
    Mp(0, 0) = 1;
    for (std::size_t j = 1; j < d; ++j) Mp(0, j) = UA(0, j);
    for (std::size_t i = 1; i < d; ++i)
        for (std::size_t j = 1; j < d; ++j) Mp(i, j) = L(i - 1, j - 1);
    return integer_inverse(U) * Mp;
}

inline Int stabilizer_order(int d, std::uint64_t q) {
    Int qd = 1;
    for (int i = 0; i < d - 1; ++i) qd *= q;
    return d == 1 ? Int(1) : qd * (d - 1 == 1 ? Int(1) : sl_group_order(d - 1, q));
}

inline Int index_gamma1(int d, std::uint64_t q) { return sl_group_order(d, q) / stabilizer_order(d, q); }

// ---------------------------------------------------------------- orbit invariant

inline Int orbit_invariant(const CongruenceContext& cc, const RatVec& k) {
    if (k.size() != cc.d) fail(errc::dimension_mismatch, "vector dimension");
    RatVec qk(cc.d);
    for (std::size_t j = 0; j < cc.d; ++j) {
        Rat diff = k[j] - cc.w[j] / cc.q;
        if (!cc.ctx.in_ZS(diff)) fail(errc::shift_mismatch, "k - w/q is not in Z_S^d");
        qk[j] = cc.q * k[j];
    }
    Content c = content(qk);
    Int t = cc.ctx.s_free_part(c.scale.get_num());
    if (gcd(t, cc.q) != 1) fail(errc::invariant_violation, "gcd(q k) shares a factor with q");
    return t;
}

struct RepresentativeOptions {
    long max_radius = 64;
};

inline RatVec representative_for_t(const CongruenceContext& cc, const Int& t, RepresentativeOptions opt = {}) {
    require(is_in_NS(t, cc.ctx), "t must lie in N_S");
    require(gcd(t, cc.q) == 1, "t must be coprime to q");
    const std::size_t d = cc.d;
    // w = scale * prim; split scale = c / P with c in N_S and P in P_S
    Content c = content(cc.w);
    Int cfree = cc.ctx.s_free_part(c.scale.get_num());
    Rat P = Rat(cfree) / c.scale;  // P w = cfree * prim, an integer vector
    Int tstar = *inverse_mod(t, cc.q);
    IntVec base(d);
    for (std::size_t j = 0; j < d; ++j) base[j] = tstar * cfree * c.prim[j];
    // shells of growing sup-radius around the base residue, lexicographic within a shell
    for (long r = 0; r <= opt.max_radius; ++r) {
        std::vector<long> z(d, -r);
        while (true) {
            long sup = 0;
            for (long v : z) sup = std::max(sup, std::labs(v));
            if (sup == r) {
                Int g = 0;
                IntVec m(d);
                for (std::size_t j = 0; j < d; ++j) {
                    m[j] = base[j] + cc.q * z[j];
                    g = gcd(g, m[j]);
                }
                if (g == 1) {
                    RatVec k(d);
                    for (std::size_t j = 0; j < d; ++j) k[j] = Rat(t * m[j]) / (cc.q * P);
                    return k;
                }
            }
            std::size_t i = 0;
            while (i < d && z[i] == r) z[i++] = -r;
            if (i == d) break;
            ++z[i];
        }
    }
    fail(errc::search_budget_exceeded, "no primitive vector found within the search radius");
}

}  // namespace sadic
