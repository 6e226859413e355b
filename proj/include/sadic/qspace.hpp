#pragma once

// Quadratic forms over Q_S: per-place Gram matrices, inhomogeneous shift,
// local invariants (Hilbert symbol, Hasse invariant) and the split-off of a
// hyperbolic plane at a finite place.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include "sadic/matrix.hpp"
#include "sadic/sarith.hpp"

namespace sadic {

class QuadraticFormS {
public:
    QuadraticFormS() = default;

    // one rational Gram matrix shared by every place (exact everywhere)
    static QuadraticFormS rational(const RatMatrix& gram, const SConfig& ctx) {
        QuadraticFormS q;
        q.init(gram.rows(), ctx);
        q.inf_exact_ = gram;
        q.inf_ = to_double(gram);
        for (auto p : ctx.primes()) q.finite_[p] = gram;
        q.validate();
        return q;
    }

    // real Gram in double precision, rational Gram per finite place
    static QuadraticFormS split(const Matrix<double>& inf, const std::map<place_t, RatMatrix>& finite,
                                const SConfig& ctx) {
        QuadraticFormS q;
        q.init(inf.rows(), ctx);
        q.inf_ = inf;
        for (auto p : ctx.primes()) {
            auto it = finite.find(p);
            require(it != finite.end(), "missing Gram matrix at p=" + std::to_string(p));
            q.finite_[p] = it->second;
        }
        q.validate();
        return q;
    }

    // same shift at every place
    QuadraticFormS with_shift(const RatVec& xi) const {
        if (xi.size() != d_) fail(errc::dimension_mismatch, "shift dimension");
        QuadraticFormS q = *this;
        q.shift_exact_ = xi;
        q.shift_inf_.assign(d_, 0.0);
        for (std::size_t i = 0; i < d_; ++i) q.shift_inf_[i] = xi[i].get_d();
        for (auto p : ctx_.primes()) q.shift_p_[p] = xi;
        return q;
    }

    // independent shifts per place
    QuadraticFormS with_shift(const std::vector<double>& xi_inf, const std::map<place_t, RatVec>& xi_p) const {
        QuadraticFormS q = *this;
        if (xi_inf.size() != d_) fail(errc::dimension_mismatch, "shift dimension");
        q.shift_exact_.reset();
        q.shift_inf_ = xi_inf;
        for (auto p : ctx_.primes()) {
            auto it = xi_p.find(p);
            RatVec v = it == xi_p.end() ? RatVec(d_, Rat(0)) : it->second;
            if (v.size() != d_) fail(errc::dimension_mismatch, "shift dimension");
            q.shift_p_[p] = v;
        }
        return q;
    }

    std::size_t dim() const { return d_; }
    const SConfig& context() const { return ctx_; }
    const Matrix<double>& gram_inf() const { return inf_; }
    const std::optional<RatMatrix>& gram_inf_exact() const { return inf_exact_; }
    const RatMatrix& gram_p(place_t p) const {
        auto it = finite_.find(p);
        require(it != finite_.end(), "no Gram matrix at p=" + std::to_string(p));
        return it->second;
    }
    bool has_shift() const { return !shift_inf_.empty(); }
    const std::optional<RatVec>& shift_exact() const { return shift_exact_; }
    const std::vector<double>& shift_inf() const { return shift_inf_; }
    RatVec shift_p(place_t p) const {
        auto it = shift_p_.find(p);
        return it == shift_p_.end() ? RatVec(d_, Rat(0)) : it->second;
    }
    bool exact_at_inf() const { return inf_exact_.has_value() && (!has_shift() || shift_exact_.has_value()); }

    bool nondegenerate() const {
        if (inf_exact_) {
            if (det(*inf_exact_) == 0) return false;
        } else if (!real_det_certified_nonzero()) {
            return false;
        }
        for (auto& [p, g] : finite_)
            if (det(g) == 0) return false;
        return true;
    }

    // |det| minus a floating error bound (Hadamard-scaled)
    bool real_det_certified_nonzero() const {
        Eigen::MatrixXd m(d_, d_);
        double had = 1;
        for (std::size_t i = 0; i < d_; ++i) {
            double rn = 0;
            for (std::size_t j = 0; j < d_; ++j) {
                m(i, j) = inf_(i, j);
                rn += inf_(i, j) * inf_(i, j);
            }
            had *= std::sqrt(rn);
        }
        double dv = m.fullPivLu().determinant();
        double err = 64.0 * double(d_ * d_) * 2.3e-16 * had;
        return std::abs(dv) > err;
    }

private:
    void init(std::size_t d, const SConfig& ctx) {
        if (d < 2) fail(errc::dimension_mismatch, "forms need d >= 2");
        d_ = d;
        ctx_ = ctx;
    }
    void validate() const {
        require(inf_.rows() == d_ && inf_.cols() == d_, "real Gram shape");
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < i; ++j) require(inf_(i, j) == inf_(j, i), "real Gram not symmetric");
        for (auto& [p, g] : finite_) {
            require(g.rows() == d_ && g.cols() == d_, "p-adic Gram shape");
            require(g.symmetric(), "p-adic Gram not symmetric");
        }
    }

    std::size_t d_ = 0;
    SConfig ctx_;
    Matrix<double> inf_;
    std::optional<RatMatrix> inf_exact_;
    std::map<place_t, RatMatrix> finite_;
    std::optional<RatVec> shift_exact_;
    std::vector<double> shift_inf_;
    std::map<place_t, RatVec> shift_p_;
};

struct FormValue {
    double inf = 0;
    std::optional<Rat> inf_exact;
    std::map<place_t, Rat> finite;
};

// (v + xi)^T G (v + xi) at every place
inline FormValue eval_form(const QuadraticFormS& q, const RatVec& v) {
    if (v.size() != q.dim()) fail(errc::dimension_mismatch, "vector dimension does not match the form");
    FormValue out;
    for (auto p : q.context().primes()) {
        RatVec x = v;
        if (q.has_shift()) {
            RatVec s = q.shift_p(p);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
        }
        out.finite[p] = quad_eval(q.gram_p(p), x);
    }
    if (q.exact_at_inf()) {
        RatVec x = v;
        if (q.has_shift())
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += (*q.shift_exact())[i];
        out.inf_exact = quad_eval(*q.gram_inf_exact(), x);
        out.inf = out.inf_exact->get_d();
    } else {
        std::vector<double> x(v.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = v[i].get_d() + (q.has_shift() ? q.shift_inf()[i] : 0.0);
        out.inf = quad_eval(q.gram_inf(), x);
    }
    return out;
}

// ------------------------------------------------------------- local theory

// integer in the square class of a nonzero rational
inline Int square_class_rep(const Rat& a) {
    require(a != 0, "zero has no square class");
    return a.get_num() * a.get_den();
}

inline int legendre(const Int& a, unsigned long p) {
    Int pp(p);
    return mpz_legendre(a.get_mpz_t(), pp.get_mpz_t());
}

inline int hilbert_symbol(const Rat& a_in, const Rat& b_in, place_t p) {
    require(a_in != 0 && b_in != 0, "Hilbert symbol of zero");
    if (p == kInf) return (a_in < 0 && b_in < 0) ? -1 : 1;
    Int a = square_class_rep(a_in), b = square_class_rep(b_in);
    long al = valuation(a, p), be = valuation(b, p);
    Int u = a / ipow(p, al), v = b / ipow(p, be);
    if (p != 2) {
        int s = 1;
        if ((al * be) % 2 != 0 && ((p - 1) / 2) % 2 != 0) s = -s;
        if (be % 2 != 0) s *= legendre(u, p);
        if (al % 2 != 0) s *= legendre(v, p);
        return s;
    }
    auto m8 = [](const Int& x) { return static_cast<long>(mod(x, 8).get_si()); };
    long u8 = m8(u), v8 = m8(v);
    auto eps = [](long x) { return ((x - 1) / 2) % 2; };
    auto omega = [](long x) { return ((x * x - 1) / 8) % 2; };
    long e = eps(u8) * eps(v8) + al * omega(v8) + be * omega(u8);
    return (e % 2 == 0) ? 1 : -1;
}

inline bool is_square_at(const Rat& x, place_t p) {
    require(x != 0, "square test of zero");
    if (p == kInf) return x > 0;
    Int a = square_class_rep(x);
    long v = valuation(a, p);
    if (v % 2 != 0) return false;
    Int u = a / ipow(p, v);
    if (p == 2) return mod(u, 8) == 1;
    return legendre(u, p) == 1;
}

struct Diagonalization {
    RatMatrix basis;  // U with U^T G U diagonal (columns are the new basis)
    RatVec diag;
};

inline Diagonalization diagonalize_gram(const RatMatrix& g, place_t p) {
    const std::size_t d = g.rows();
    RatMatrix b = RatMatrix::identity(d);  // rows: basis vectors
    auto form_at = [&](std::size_t i, std::size_t j) { return bilinear(g, b.row(i), b.row(j)); };
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t piv = d;
        for (std::size_t j = i; j < d && piv == d; ++j)
            if (form_at(j, j) != 0) piv = j;
        if (piv == d) {
            // all remaining diagonal entries vanish: combine two rows with a nonzero pairing
            for (std::size_t j = i; j < d && piv == d; ++j)
                for (std::size_t k = j + 1; k < d && piv == d; ++k)
                    if (form_at(j, k) != 0) {
                        auto rj = b.row(j), rk = b.row(k);
                        for (std::size_t c = 0; c < d; ++c) rj[c] += rk[c];
                        b.set_row(j, rj);
                        piv = j;
                    }
            if (piv == d) fail(errc::degenerate_form, "form is degenerate");
        }
        b.swap_rows(i, piv);
        Rat aii = form_at(i, i);
        auto ri = b.row(i);
        for (std::size_t r = i + 1; r < d; ++r) {
            Rat f = form_at(r, i) / aii;
            if (f == 0) continue;
            auto rr = b.row(r);
            for (std::size_t c = 0; c < d; ++c) rr[c] -= f * ri[c];
            b.set_row(r, rr);
        }
    }
    Diagonalization out;
    out.diag.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        Rat a = form_at(i, i);
        if (p != kInf) {
            // pull squares of p out so that v_p(a) is 0 or 1
            long v = *valuation(a, p);
            long h = (v >= 0) ? v / 2 : -((-v + 1) / 2);
            if (h != 0) {
                Rat s = rpow(p, -h);
                auto ri = b.row(i);
                for (auto& x : ri) x *= s;
                b.set_row(i, ri);
                a *= s * s;
            }
        }
        out.diag[i] = a;
    }
    out.basis = b.transpose();
    return out;
}

inline Diagonalization diagonalize(const QuadraticFormS& q, place_t p) {
    if (p == kInf) {
        require(q.gram_inf_exact().has_value(), "exact diagonalization at infinity needs a rational Gram matrix");
        return diagonalize_gram(*q.gram_inf_exact(), p);
    }
    return diagonalize_gram(q.gram_p(p), p);
}

inline int hasse_invariant(const RatVec& diag, place_t p) {
    int e = 1;
    for (std::size_t i = 0; i < diag.size(); ++i)
        for (std::size_t j = i + 1; j < diag.size(); ++j) e *= hilbert_symbol(diag[i], diag[j], p);
    return e;
}

// isotropy of a nondegenerate diagonal form over Q_p (d >= 2)
inline bool diagonal_isotropic(const RatVec& a, place_t p) {
    const std::size_t d = a.size();
    if (p == kInf) {
        bool pos = false, neg = false;
        for (auto& x : a) (x > 0 ? pos : neg) = true;
        return pos && neg;
    }
    Rat disc = 1;
    for (auto& x : a) disc *= x;
    if (d == 2) return is_square_at(-disc, p);
    int eps = hasse_invariant(a, p);
    if (d == 3) return eps == hilbert_symbol(Rat(-1), -disc, p);
    if (d == 4) return !is_square_at(disc, p) || eps == hilbert_symbol(Rat(-1), Rat(-1), p);
    return true;
}

inline bool is_isotropic(const QuadraticFormS& q, place_t p) {
    if (p == kInf && !q.gram_inf_exact()) {
        if (!q.real_det_certified_nonzero()) fail(errc::degenerate_form, "real Gram matrix is singular");
        Eigen::MatrixXd m(q.dim(), q.dim());
        for (std::size_t i = 0; i < q.dim(); ++i)
            for (std::size_t j = 0; j < q.dim(); ++j) m(i, j) = q.gram_inf()(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        auto ev = es.eigenvalues();
        return ev.minCoeff() < 0 && ev.maxCoeff() > 0;
    }
    return diagonal_isotropic(diagonalize(q, p).diag, p);
}

inline bool is_isotropic_everywhere(const QuadraticFormS& q) {
    if (!is_isotropic(q, kInf)) return false;
    for (auto p : q.context().primes())
        if (!is_isotropic(q, p)) return false;
    return true;
}

// p-adic elementary divisor exponents of a nonsingular rational matrix, ascending
inline std::vector<long> smith_exponents(RatMatrix m, unsigned long p) {
    require(m.square(), "Smith form of non-square matrix");
    const std::size_t n = m.rows();
    std::vector<long> out;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pi = n, pj = n;
        long best = 0;
        for (std::size_t i = k; i < n; ++i)
            for (std::size_t j = k; j < n; ++j) {
                auto v = valuation(m(i, j), p);
                if (v && (pi == n || *v < best)) {
                    best = *v;
                    pi = i;
                    pj = j;
                }
            }
        require(pi != n, "Smith form of singular matrix");
        m.swap_rows(k, pi);
        for (std::size_t i = 0; i < n; ++i) std::swap(m(i, k), m(i, pj));
        out.push_back(best);
        // pivot has minimal valuation so the multipliers are p-integral
        for (std::size_t i = k + 1; i < n; ++i) {
            Rat f = m(i, k) / m(k, k);
            if (f == 0) continue;
            for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
        }
        for (std::size_t j = k + 1; j < n; ++j) {
            Rat f = m(k, j) / m(k, k);
            if (f == 0) continue;
            for (std::size_t i = k; i < n; ++i) m(i, j) -= f * m(i, k);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct StandardizationResult {
    RatMatrix transform;  // g: columns are the new basis, g^T G g = standard shape
    RatMatrix residual;   // q' on the middle d-2 coordinates
    long k0 = 0;
    long z = 0;
    bool exact = true;    // false when the identity holds only modulo p^precision
    long precision = 0;
};

namespace detail {

inline bool is_standard_shape(const RatMatrix& g, unsigned long p) {
    const std::size_t d = g.rows();
    if (g(0, 0) != 0 || g(d - 1, d - 1) != 0 || g(0, d - 1) != 1) return false;
    for (std::size_t j = 1; j + 1 < d; ++j)
        if (g(0, j) != 0 || g(d - 1, j) != 0) return false;
    for (std::size_t i = 1; i + 1 < d; ++i)
        for (std::size_t j = 1; j + 1 < d; ++j) {
            auto v = valuation(g(i, j), p);
            if (v && *v < 0) return false;
            if (p == 2 && i == j && v && *v < 1) return false;
        }
    return true;
}

// integral primitive multiple of a rational Gram matrix
inline IntMatrix integral_gram(const RatMatrix& g) {
    Int den = 1, num = 0;
    for (auto& x : g.data()) den = lcm(den, x.get_den());
    IntMatrix out(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
            out(i, j) = Rat(g(i, j) * den).get_num();
            num = gcd(num, out(i, j));
        }
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) out(i, j) /= num;
    return out;
}

inline Int int_quad(const IntMatrix& g, const IntVec& x) {
    Int s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) s += x[i] * g(i, j) * x[j];
    return s;
}

inline long val_or(const Int& x, unsigned long p, long cap) {
    if (x == 0) return cap;
    return std::min(cap, valuation(x, p));
}

// depth-first search for x mod p^k, primitive, Q(x) = 0 mod p^k, that
// satisfies Hensel's condition v(Q(x)) >= 2 v(dQ/dx_j) + 1 for some j
inline std::optional<std::pair<IntVec, std::size_t>> hensel_seed(const IntMatrix& g, unsigned long p, long max_depth,
                                                                 bool& tree_alive) {
    const std::size_t d = g.rows();
    tree_alive = false;
    std::optional<std::pair<IntVec, std::size_t>> found;
    std::function<void(IntVec&, long)> dfs = [&](IntVec& x, long k) {
        if (found) return;
        Int pk = ipow(p, k);
        Int qx = int_quad(g, x);
        if (mod(qx, pk) != 0) return;
        if (k == max_depth) tree_alive = true;
        // derivative 2 (G x)_j
        long lam = k, jbest = -1;
        for (std::size_t j = 0; j < d; ++j) {
            Int dj = 0;
            for (std::size_t i = 0; i < d; ++i) dj += g(j, i) * x[i];
            dj *= 2;
            long v = val_or(mod(dj, pk), p, k);
            if (v < lam) {
                lam = v;
                jbest = static_cast<long>(j);
            }
        }
        if (jbest >= 0 && k >= 2 * lam + 1) {
            found = std::make_pair(x, static_cast<std::size_t>(jbest));
            return;
        }
        if (k >= max_depth) return;
        // children x + p^k y
        IntVec y(d, 0);
        while (!found) {
            IntVec c = x;
            for (std::size_t i = 0; i < d; ++i) c[i] += pk * y[i];
            dfs(c, k + 1);
            std::size_t i = 0;
            while (i < d && ++y[i] == Int(static_cast<unsigned long>(p))) y[i++] = 0;
            if (i == d) break;
        }
    };
    // level 1: primitive residues mod p
    IntVec x(d, 0);
    while (!found) {
        bool prim = std::any_of(x.begin(), x.end(), [](const Int& v) { return v != 0; });
        if (prim) {
            IntVec c = x;
            dfs(c, 1);
        }
        std::size_t i = 0;
        while (i < d && ++x[i] == Int(static_cast<unsigned long>(p))) x[i++] = 0;
        if (i == d) break;
    }
    return found;
}

// Newton in one coordinate until Q(x) = 0 mod p^target
inline IntVec hensel_lift(const IntMatrix& g, IntVec x, std::size_t j, unsigned long p, long target) {
    const std::size_t d = g.rows();
    Int mod_big = ipow(p, target + 64);
    for (int it = 0; it < 200; ++it) {
        Int qx = int_quad(g, x);
        if (qx == 0 || valuation(qx, p) >= target) return x;
        Int dj = 0;
        for (std::size_t i = 0; i < d; ++i) dj += g(j, i) * x[i];
        dj *= 2;
        long lam = valuation(dj, p);
        Int plam = ipow(p, lam);
        Int num = qx / plam;  // exact: v(Q) > lam
        auto inv = inverse_mod(Int(dj / plam), mod_big);
        require(inv.has_value(), "Hensel step: derivative unit part not invertible");
        x[j] = mod(x[j] - num * *inv, mod_big);
    }
    fail(errc::precision_exhausted, "Hensel iteration did not converge");
}

}  // namespace detail

// split a hyperbolic plane off the form at p: g^T G g = [[0,0,1],[0,q',0],[1,0,0]]
inline StandardizationResult standardize(const QuadraticFormS& q, unsigned long p, long precision = 40) {
    const std::size_t d = q.dim();
    require(d >= 3, "standardize needs d >= 3");
    const RatMatrix& G = q.gram_p(p);
    if (det(G) == 0) fail(errc::degenerate_form, "form is degenerate at p");
    if (!is_isotropic(q, p)) fail(errc::anisotropic_form, "form is anisotropic at p=" + std::to_string(p));

    StandardizationResult res;
    res.precision = precision;
    if (detail::is_standard_shape(G, p)) {
        res.transform = RatMatrix::identity(d);
    } else {
        // isotropic vector: small exact search first, then residues + Hensel
        RatVec e;
        bool exact = false;
        {
            IntVec x(d, -2);
            while (!exact) {
                bool nz = std::any_of(x.begin(), x.end(), [](const Int& v) { return v != 0; });
                if (nz) {
                    RatVec xr(x.begin(), x.end());
                    if (quad_eval(G, xr) == 0) {
                        e = xr;
                        exact = true;
                        break;
                    }
                }
                std::size_t i = 0;
                while (i < d && ++x[i] == 3) x[i++] = -2;
                if (i == d) break;
            }
        }
        if (!exact) {
            IntMatrix gi = detail::integral_gram(G);
            long m0 = 2 * valuation(Int(Int(2) * det(gi)), p) + 1;
            bool alive = false;
            auto seed = detail::hensel_seed(gi, p, m0, alive);
            if (!seed) {
                if (alive) fail(errc::precision_exhausted, "no Hensel-liftable residue within depth " + std::to_string(m0));
                fail(errc::anisotropic_form, "no primitive residue solution");
            }
            IntVec x = detail::hensel_lift(gi, seed->first, seed->second, p, precision + m0 + 4);
            e.assign(x.begin(), x.end());
        }
        res.exact = exact;

        // hyperbolic partner
        RatVec ge(d, Rat(0));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) ge[i] += G(i, j) * e[j];
        std::size_t jb = d;
        long vb = 0;
        for (std::size_t j = 0; j < d; ++j) {
            auto v = valuation(ge[j], p);
            if (v && (jb == d || *v < vb)) {
                jb = j;
                vb = *v;
            }
        }
        require(jb < d, "isotropic vector in the radical");
        RatVec f(d, Rat(0));
        f[jb] = 1 / ge[jb];
        Rat qf = quad_eval(G, f);
        for (std::size_t i = 0; i < d; ++i) f[i] -= qf / 2 * e[i];

        // orthogonal complement of span(e, f)
        std::vector<RatVec> cols{e};
        for (std::size_t k = 0; k < d && cols.size() < d - 1; ++k) {
            RatVec u(d, Rat(0));
            u[k] = 1;
            Rat be = bilinear(G, u, e), bf = bilinear(G, u, f);
            for (std::size_t i = 0; i < d; ++i) u[i] -= bf * e[i] + be * f[i];
            // keep u if independent of what we have so far (together with f)
            std::vector<RatVec> trial = cols;
            trial.push_back(u);
            trial.push_back(f);
            RatMatrix t(trial.size(), d);
            for (std::size_t r = 0; r < trial.size(); ++r) t.set_row(r, trial[r]);
            // rank test via determinant of t t^T
            if (det(t * t.transpose()) != 0) cols.push_back(u);
        }
        require(cols.size() == d - 1, "could not complete the hyperbolic basis");
        // make q' p-integral (and even on the diagonal at p = 2)
        long need = 0;
        for (std::size_t a = 1; a < cols.size(); ++a)
            for (std::size_t b = 1; b < cols.size(); ++b) {
                auto v = valuation(bilinear(G, cols[a], cols[b]), p);
                if (v) need = std::max(need, -*v);
            }
        long c = (need + 1) / 2 + (p == 2 ? 1 : 0);
        if (c > 0)
            for (std::size_t a = 1; a < cols.size(); ++a)
                for (auto& x : cols[a]) x *= rpow(p, c);
        cols.push_back(f);
        RatMatrix g(d, d);
        for (std::size_t cidx = 0; cidx < d; ++cidx)
            for (std::size_t r = 0; r < d; ++r) g(r, cidx) = cols[cidx][r];
        res.transform = g;
    }
    RatMatrix std_gram = res.transform.transpose() * G * res.transform;
    res.residual = RatMatrix(d - 2, d - 2);
    for (std::size_t i = 1; i + 1 < d; ++i)
        for (std::size_t j = 1; j + 1 < d; ++j) res.residual(i - 1, j - 1) = std_gram(i, j);
    auto s = smith_exponents(res.transform, p);
    res.z = s.back();
    res.k0 = s.back() + 1;
    return res;
}

}  // namespace sadic
