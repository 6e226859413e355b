#pragma once

// Haar samplers for the spaces of affine, congruence and plain S-lattices,
// Monte-Carlo Siegel-transform moments, and the exact (t, a) series on the
// right-hand side of the congruence second-moment formula.
//
// A random S-lattice is Z_S^d (g_inf, g_p): g_inf uniform on SL_d(Z)\SL_d(R)
// and g_p uniform on GL_d(Z_p), the latter known mod p^k.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "sadic/congruence.hpp"
#include "sadic/rng.hpp"
#include "sadic/slattice.hpp"

namespace sadic {

enum class SpaceKind { affine, congruence, base };

inline const char* space_kind_name(SpaceKind k) {
    switch (k) {
        case SpaceKind::affine: return "affine";
        case SpaceKind::congruence: return "congruence";
        case SpaceKind::base: return "base";
    }
    return "?";
}

struct SpaceSpec {
    SpaceKind kind = SpaceKind::affine;
    std::size_t d = 2;
    SConfig ctx;
    std::optional<CongruenceContext> congruence;
    long padic_depth = 8;
    bool require_exact = false;
    std::size_t burn_in = 1000;
    std::size_t thin = 10;
    double step = 0.25;
    unsigned chains = 8;  // fixed so results do not depend on the thread count

    bool exact_real() const { return d == 2; }

    void validate() const {
        require(d >= 2, "lattice spaces need d >= 2");
        require(padic_depth >= 1, "p-adic depth must be positive");
        if (kind == SpaceKind::congruence) {
            require(congruence.has_value(), "congruence space needs (q, w)");
            require(congruence->d == d, "congruence context dimension");
            require(congruence->ctx == ctx, "congruence context places");
        }
        if (require_exact && !exact_real())
            fail(errc::unsupported_exact_sampler, "no exact Haar sampler on SL_d(Z)\\SL_d(R) for d >= 3");
        require(chains >= 1 && thin >= 1, "MCMC needs at least one chain and thinning >= 1");
    }
};

// ------------------------------------------------------------- real factor

// exact Haar on SL_2(Z)\SL_2(R): z = x + iy in the standard domain with
// density 3/pi dx dy / y^2, then a uniform rotation. The x marginal is
// proportional to 1/sqrt(1 - x^2), so x = sin(u) with u uniform.
inline Matrix<double> sample_sl2_haar(Rng& rng) {
    const double u = rng.uniform(-M_PI / 6, M_PI / 6);
    const double x = std::sin(u);
    double U;
    do U = rng.uniform();
    while (U == 0);
    const double y = std::sqrt(1 - x * x) / U;
    const double th = rng.uniform(0, 2 * M_PI);
    const double s = 1 / std::sqrt(y), c = std::cos(th), sn = std::sin(th);
    // rows (1, 0)/sqrt(y) and (x, y)/sqrt(y), rotated
    Matrix<double> g(2, 2);
    const double r0[2] = {s, 0}, r1[2] = {x * s, y * s};
    g(0, 0) = r0[0] * c - r0[1] * sn;
    g(0, 1) = r0[0] * sn + r0[1] * c;
    g(1, 0) = r1[0] * c - r1[1] * sn;
    g(1, 1) = r1[0] * sn + r1[1] * c;
    return g;
}

namespace detail {

inline Eigen::MatrixXd to_eigen(const Matrix<double>& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline Matrix<double> from_eigen(const Eigen::MatrixXd& e) {
    Matrix<double> m(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
    return m;
}

// scaling and squaring with a Taylor core
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& X) {
    double nrm = X.cwiseAbs().rowwise().sum().maxCoeff();
    int s = nrm > 0.5 ? static_cast<int>(std::ceil(std::log2(nrm / 0.5))) : 0;
    Eigen::MatrixXd A = X / std::ldexp(1.0, s);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(X.rows(), X.cols()), sum = term;
    for (int k = 1; k <= 14; ++k) {
        term = term * A / double(k);
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

// LLL on the rows (integer row operations only, so Z^d B is unchanged)
inline void lll_rows(Eigen::MatrixXd& B, double delta = 0.75) {
    const Eigen::Index n = B.rows();
    auto gso = [&](Eigen::MatrixXd& Bs, Eigen::MatrixXd& mu) {
        Bs = B;
        mu = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                mu(i, j) = B.row(i).dot(Bs.row(j)) / Bs.row(j).squaredNorm();
                Bs.row(i) -= mu(i, j) * Bs.row(j);
            }
        }
    };
    Eigen::MatrixXd Bs, mu;
    gso(Bs, mu);
    Eigen::Index k = 1;
    int guard = 0;
    while (k < n && ++guard < 100000) {
        for (Eigen::Index j = k - 1; j >= 0; --j) {
            double r = std::round(mu(k, j));
            if (r != 0) {
                B.row(k) -= r * B.row(j);
                gso(Bs, mu);
            }
        }
        if (Bs.row(k).squaredNorm() >= (delta - mu(k, k - 1) * mu(k, k - 1)) * Bs.row(k - 1).squaredNorm()) {
            ++k;
        } else {
            B.row(k).swap(B.row(k - 1));
            gso(Bs, mu);
            k = std::max<Eigen::Index>(k - 1, 1);
        }
    }
}

}  // namespace detail

// random walk g -> g exp(eps X), X traceless Gaussian; the increment law is
// symmetric, so Haar measure on the quotient is stationary. Approximate.
class HaarWalk {
public:
    HaarWalk(std::size_t d, double step, std::uint64_t seed) : d_(d), step_(step), rng_(seed), g_(Eigen::MatrixXd::Identity(d, d)) {}

    void advance(std::size_t steps) {
        for (std::size_t s = 0; s < steps; ++s) {
            Eigen::MatrixXd X(d_, d_);
            for (std::size_t i = 0; i < d_; ++i)
                for (std::size_t j = 0; j < d_; ++j) X(i, j) = rng_.normal();
            X -= (X.trace() / double(d_)) * Eigen::MatrixXd::Identity(d_, d_);
            g_ = g_ * detail::expm(step_ * X);
            detail::lll_rows(g_);
            double dt = g_.determinant();
            if (dt < 0) {
                g_.row(0) *= -1;
                dt = -dt;
            }
            g_ /= std::pow(dt, 1.0 / double(d_));
        }
    }
    Matrix<double> state() const { return detail::from_eigen(g_); }

private:
    std::size_t d_;
    double step_;
    Rng rng_;
    Eigen::MatrixXd g_;
};

// real bases for samples 0..n-1; exact samples use one stream per index,
// walks use spec.chains chains and take every thin-th state after burn-in
inline std::vector<Matrix<double>> real_bases(const SpaceSpec& spec, std::uint64_t seed, std::size_t n,
                                              unsigned threads = 1) {
    std::vector<Matrix<double>> out(n);
    if (spec.exact_real()) {
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(derive_seed(seed, i), 0));
            out[i] = sample_sl2_haar(rng);
        }
        return out;
    }
    const unsigned C = spec.chains;
    auto run_chain = [&](unsigned c) {
        HaarWalk w(spec.d, spec.step, derive_seed(seed, (std::uint64_t(1) << 40) + c));
        w.advance(spec.burn_in);
        for (std::size_t i = c; i < n; i += C) {
            w.advance(spec.thin);
            out[i] = w.state();
        }
    };
    threads = std::max(1u, std::min(threads, C));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (unsigned c = t; c < C; c += threads) run_chain(c);
        });
    for (auto& th : pool) th.join();
    return out;
}

// uniform element of GL_d(Z/m)
inline IntMatrix sample_gl_uniform(std::size_t d, const Int& m, Rng& rng, unsigned long p) {
    IntMatrix g(d, d);
    const std::uint64_t mm = m.get_ui();
    for (;;) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) g(i, j) = Int(static_cast<unsigned long>(rng.below(mm)));
        if (mpz_divisible_ui_p(Int(det(g)).get_mpz_t(), p) == 0) return g;
    }
}

// the lattice for one sample: finite factors, shifts and the congruence
// coset come from `rng`, the real basis from the caller
inline AffineSLattice assemble_lattice(const SpaceSpec& spec, const Matrix<double>& g_inf, Rng& rng) {
    const std::size_t d = spec.d;
    std::map<place_t, IntMatrix> gp;
    std::map<place_t, RatVec> shift_p;
    for (auto p : spec.ctx.primes()) {
        Int pk = ipow(p, static_cast<unsigned long>(spec.padic_depth));
        gp[p] = sample_gl_uniform(d, pk, rng, p);
    }
    std::vector<double> shift_inf(d, 0.0);
    RatVec eta(d, Rat(0));
    if (spec.kind == SpaceKind::affine) {
        // xi = w g with w uniform on [0,1)^d x prod Z_p^d
        std::vector<double> w(d);
        for (auto& x : w) x = rng.uniform();
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = 0; l < d; ++l) shift_inf[j] += w[l] * g_inf(l, j);
        for (auto p : spec.ctx.primes()) {
            Int pk = ipow(p, static_cast<unsigned long>(spec.padic_depth));
            IntVec wp(d);
            for (auto& x : wp) x = Int(static_cast<unsigned long>(rng.below(pk.get_ui())));
            RatVec s(d);
            for (std::size_t j = 0; j < d; ++j) {
                Int acc = 0;
                for (std::size_t l = 0; l < d; ++l) acc += wp[l] * gp[p](l, j);
                s[j] = Rat(mod(acc, pk));
            }
            shift_p[p] = s;
        }
    } else if (spec.kind == SpaceKind::congruence) {
        // (Z_S^d + w/q) gamma g = (Z_S^d + (w gamma mod q)/q) g
        const auto& cc = *spec.congruence;
        IntMatrix gamma = sample_slq_uniform(d, cc.q, rng);
        IntVec wq(d);
        for (std::size_t j = 0; j < d; ++j) {
            auto r = rat_mod(cc.w[j], cc.q);
            require(r.has_value(), "shift not invertible mod q");
            wq[j] = *r;
        }
        for (std::size_t j = 0; j < d; ++j) {
            Int acc = 0;
            for (std::size_t l = 0; l < d; ++l) acc += wq[l] * gamma(l, j);
            eta[j] = Rat(mod(acc, cc.q)) / cc.q;
        }
    }
    return AffineSLattice::split(spec.ctx, g_inf, gp, spec.padic_depth, eta, shift_inf, shift_p);
}

// one lattice; walks start fresh from the identity and run the burn-in
inline AffineSLattice sample_lattice(const SpaceSpec& spec, Rng& rng) {
    spec.validate();
    Matrix<double> g;
    if (spec.exact_real()) {
        g = sample_sl2_haar(rng);
    } else {
        HaarWalk w(spec.d, spec.step, rng());
        w.advance(spec.burn_in);
        g = w.state();
    }
    return assemble_lattice(spec, g, rng);
}

// ------------------------------------------------------------- estimators

struct MCEstimate {
    double mean = 0;
    double stderr_ = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    bool exact = true;  // false: the real factor came from a random walk
};

inline MCEstimate summarize(const std::vector<double>& xs, std::uint64_t seed, bool exact) {
    MCEstimate e;
    e.n = xs.size();
    e.seed = seed;
    e.exact = exact;
    if (xs.empty()) return e;
    long double s = 0;
    for (double x : xs) s += x;
    long double m = s / xs.size();
    long double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    e.mean = static_cast<double>(m);
    e.stderr_ = xs.size() > 1 ? static_cast<double>(std::sqrt(v / (xs.size() - 1) / xs.size())) : 0.0;
    return e;
}

// Siegel transform of f on n sampled lattices; sample i depends only on
// (seed, i), so the output is independent of the thread count
inline std::vector<std::uint64_t> siegel_samples(const SpaceSpec& spec, const TestFunction& f, std::size_t n,
                                                 std::uint64_t seed, unsigned threads = 1,
                                                 std::uint64_t max_candidates = kDefaultMaxCandidates) {
    spec.validate();
    require(f.t_p.size() == spec.ctx.size(), "test function needs one exponent per finite place");
    auto bases = real_bases(spec, seed, n, threads);
    std::vector<std::uint64_t> out(n);
    const SiegelMode mode = spec.kind == SpaceKind::base ? SiegelMode::homogeneous : SiegelMode::affine;
    threads = std::max(1u, threads);
    std::vector<std::exception_ptr> errs(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) {
                    Rng rng(derive_seed(derive_seed(seed, i), 1));
                    auto lat = assemble_lattice(spec, bases[i], rng);
                    out[i] = siegel_transform(f, lat, mode, max_candidates);
                }
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

inline MCEstimate estimate_moment(const SpaceSpec& spec, const TestFunction& f, int order, std::size_t n,
                                  std::uint64_t seed, unsigned threads = 1,
                                  std::uint64_t max_candidates = kDefaultMaxCandidates) {
    require(order == 1 || order == 2, "moment order must be 1 or 2");
    auto s = siegel_samples(spec, f, n, seed, threads, max_candidates);
    std::vector<double> xs(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) xs[i] = order == 1 ? double(s[i]) : double(s[i]) * double(s[i]);
    return summarize(xs, seed, spec.exact_real());
}

struct VarianceResult {
    double empirical = 0;  // P(|#(Lambda ∩ A) - vol(A)| > M)
    double stderr_ = 0;    // binomial
    double bound = 0;      // vol(A) / M^2
    double observed_constant = 0;  // empirical / bound
    std::size_t n = 0;
};

inline VarianceResult variance_check(const SpaceSpec& spec, const TestFunction& f, double M, std::size_t n,
                                     std::uint64_t seed, unsigned threads = 1,
                                     std::uint64_t max_candidates = kDefaultMaxCandidates) {
    require(M > 0, "deviation threshold must be positive");
    const double vol = f.volume(spec.d, spec.ctx);
    auto s = siegel_samples(spec, f, n, seed, threads, max_candidates);
    std::size_t hits = 0;
    for (auto c : s)
        if (std::abs(double(c) - vol) > M) ++hits;
    VarianceResult r;
    r.n = n;
    r.empirical = n ? double(hits) / double(n) : 0.0;
    r.stderr_ = n ? std::sqrt(r.empirical * (1 - r.empirical) / double(n)) : 0.0;
    r.bound = vol / (M * M);
    r.observed_constant = r.empirical / r.bound;
    return r;
}

// ------------------------------------------------------------- (t, a) series

struct SeriesParams {
    long t_max = 60;
    double a_max = 60;           // real bound on |a|
    std::vector<long> depth;     // per finite place: |a|_p <= p^depth; empty = 12 everywhere
    bool gcd_filter = true;      // off only for negative controls
};

struct SeriesValue {
    double value = 0;
    double tail_bound = 0;
    std::uint64_t terms = 0;
    SeriesParams params;
};

namespace detail {

inline void require_product_indicator(const TestFunction& f) {
    if (f.kind == TestFunction::Kind::ball && !f.real_center.empty())
        for (double c : f.real_center)
            if (c != 0) fail(errc::non_indicator_unsupported, "series needs a box or an origin-centred ball");
}

// vol((1/s1) A ∩ (1/s2) A) at the real place, s1, s2 nonzero
inline double real_overlap(const TestFunction& f, std::size_t d, double s1, double s2) {
    if (f.kind == TestFunction::Kind::ball) {
        double m = std::max(std::abs(s1), std::abs(s2));
        return unit_ball_volume(d) * std::pow(f.radius / m, double(d));
    }
    double v = 1;
    for (std::size_t i = 0; i < d; ++i) {
        double a1 = f.lo[i] / s1, b1 = f.hi[i] / s1;
        if (a1 > b1) std::swap(a1, b1);
        double a2 = f.lo[i] / s2, b2 = f.hi[i] / s2;
        if (a2 > b2) std::swap(a2, b2);
        double len = std::min(b1, b2) - std::max(a1, a2);
        if (len <= 0) return 0;
        v *= len;
    }
    return v;
}

inline double finite_volume(const TestFunction& f, std::size_t d, const SConfig& ctx) {
    double v = 1;
    for (std::size_t i = 0; i < ctx.size(); ++i) v *= std::pow(double(ctx.primes()[i]), double(d) * f.t_p.at(i));
    return v;
}

// all depth vectors m with 0 <= m_i <= K_i, as (P, m)
inline std::vector<std::pair<Int, std::vector<long>>> depth_grid(const SConfig& ctx, const std::vector<long>& K) {
    std::vector<std::pair<Int, std::vector<long>>> out{{Int(1), std::vector<long>(ctx.size(), 0)}};
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        std::vector<std::pair<Int, std::vector<long>>> next;
        for (auto& [P, m] : out)
            for (long e = 0; e <= K[i]; ++e) {
                auto mm = m;
                mm[i] = e;
                next.push_back({P * ipow(ctx.primes()[i], static_cast<unsigned long>(e)), mm});
            }
        out = std::move(next);
    }
    return out;
}

// prod_p sum_{m <= K_p} p^{-s m}; K < 0 means the full geometric series
inline double depth_sum(const SConfig& ctx, const std::vector<long>& K, double s) {
    double v = 1;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        double r = std::pow(double(ctx.primes()[i]), -s);
        v *= K.empty() || K[i] < 0 ? 1 / (1 - r) : (1 - std::pow(r, double(K[i] + 1))) / (1 - r);
    }
    return v;
}

inline std::vector<long> resolve_depth(const SeriesParams& p, const SConfig& ctx) {
    if (p.depth.empty()) return std::vector<long>(ctx.size(), 12);
    require(p.depth.size() == ctx.size(), "one depth per finite place");
    for (long k : p.depth) require(k >= 0, "depth must be non-negative");
    return p.depth;
}

}  // namespace detail

// (∫f)^2 + sum over t in N_S, gcd(t,q)=1, a in qZ_S + t, gcd(a,t)=1 of
// ∫ f(tv) f(av) dv, truncated to t <= t_max, |a| <= a_max and p-adic depth
// of a at most K_p. Each omitted term is at most vol(A) max(t,|a|)^{-d}
// P^{-d}, P the S-part of the denominator of a; summing that over the
// omitted (t, a) gives the tail bound.
inline SeriesValue second_moment_rhs(const TestFunction& f, const CongruenceContext& cc, SeriesParams params = {}) {
    const std::size_t d = cc.d;
    const SConfig& ctx = cc.ctx;
    require(d >= 3, "the second-moment series converges only for d >= 3");
    require(f.t_p.size() == ctx.size(), "test function needs one exponent per finite place");
    detail::require_product_indicator(f);
    require(params.t_max >= 1 && params.a_max >= 1, "truncation bounds must be at least 1");
    const auto K = detail::resolve_depth(params, ctx);
    params.depth = K;
    const double Vinf = f.real_volume(d), Vf = detail::finite_volume(f, d, ctx);
    const double vol = Vinf * Vf;
    const Int& q = cc.q;
    const auto grid = detail::depth_grid(ctx, K);

    const long ql = q.get_si();
    require(Int(ql) == q, "modulus too large");
    long double sum = 0;
    std::uint64_t terms = 0;
    for (long t = 1; t <= params.t_max; ++t) {
        if (!is_in_NS(Int(t), ctx) || std::gcd(t, ql) != 1) continue;
        for (auto& [P, m] : grid) {
            const double Pd = P.get_d();
            require(Pd * params.a_max < 4e18, "depth too large for 64-bit enumeration");
            const long Pl = P.get_si();
            const double fin = Vf * std::pow(Pd, -double(d));
            // a = n / P, n = t P mod q, p not dividing n where m_p > 0
            const long r = static_cast<long>((static_cast<__int128>(t) * Pl) % ql);
            const long nmax = static_cast<long>(std::floor(params.a_max * Pd));
            const long start = -nmax + (((r + nmax) % ql) + ql) % ql;
            for (long n = start; n <= nmax; n += ql) {
                if (n == 0) continue;
                bool ok = true;
                for (std::size_t i = 0; i < ctx.size() && ok; ++i)
                    if (m[i] > 0 && n % long(ctx.primes()[i]) == 0) ok = false;
                if (!ok) continue;
                if (params.gcd_filter && std::gcd(n, t) != 1) continue;
                double rv = detail::real_overlap(f, d, double(t), double(n) / Pd);
                if (rv == 0) continue;
                sum += static_cast<long double>(rv * fin);
                ++terms;
            }
        }
    }

    // tail. For fixed t and P the admissible a form a progression of spacing
    // q/P, so a sum of |a|^{-d} over |a| > X is at most 2(X^{-d} + (P/q)
    // X^{1-d}/(d-1)) and #{|a| <= X} <= 2(X P/q + 1).
    const double dd = double(d);
    const double T = double(params.t_max), A = params.a_max;
    const double qd = q.get_d();
    // t > T, all a
    const double lead_T = (dd / (dd - 1)) * std::pow(T, 2 - dd) / (dd - 2), flat_T = 2 * std::pow(T, 1 - dd) / (dd - 1);
    // t <= T, |a| > A
    const double lead_A = T * std::pow(A, 1 - dd) / (dd - 1), flat_A = T * std::pow(A, -dd);
    const double z1 = static_cast<double>(riemann_zeta_table(int(d) - 1)), z0 = static_cast<double>(riemann_zeta_table(int(d)));
    const double in1 = detail::depth_sum(ctx, K, dd - 1), in0 = detail::depth_sum(ctx, K, dd);
    const double all1 = detail::depth_sum(ctx, {}, dd - 1), all0 = detail::depth_sum(ctx, {}, dd);
    const double inside = (in1 / qd) * (lead_T + lead_A) + in0 * (flat_T + flat_A);
    const double outside = std::max(0.0, all1 - in1) / qd * (dd / (dd - 1)) * z1 + std::max(0.0, all0 - in0) * 2 * z0;
    SeriesValue out;
    out.value = static_cast<double>(static_cast<long double>(vol) * vol + sum);
    out.tail_bound = 2 * vol * (inside + outside);
    // relative slack for the floating sum
    out.tail_bound += 1e-12 * out.value * double(terms + 1);
    out.terms = terms;
    out.params = params;
    return out;
}

// a point of Q_S^d: real coordinates and one rational vector per finite place
struct SPoint {
    std::vector<double> inf;
    std::map<place_t, RatVec> finite;
};

// ∫f + sum_t t^{-d} sum_a f((a/t) y) over the same admissible (t, a); for
// fixed t only finitely many a survive, so only t is truncated
inline SeriesValue inhom_series(const TestFunction& f, const SPoint& y, const CongruenceContext& cc,
                                SeriesParams params = {}) {
    const std::size_t d = cc.d;
    const SConfig& ctx = cc.ctx;
    require(d >= 3, "the series converges only for d >= 3");
    require(f.t_p.size() == ctx.size(), "test function needs one exponent per finite place");
    detail::require_product_indicator(f);
    if (y.inf.size() != d) fail(errc::dimension_mismatch, "real part of y");
    double ynorm = 0;
    for (double v : y.inf) ynorm += v * v;
    ynorm = std::sqrt(ynorm);
    if (ynorm == 0) fail(errc::zero_vector, "y must be nonzero at the real place");

    // s with s y in A: an interval for boxes and centred balls
    double slo = -std::numeric_limits<double>::infinity(), shi = std::numeric_limits<double>::infinity();
    if (f.kind == TestFunction::Kind::ball) {
        slo = -f.radius / ynorm;
        shi = f.radius / ynorm;
    } else {
        for (std::size_t i = 0; i < d; ++i) {
            if (y.inf[i] == 0) {
                if (!(f.lo[i] <= 0 && 0 <= f.hi[i])) slo = shi = 0;
                continue;
            }
            double a = f.lo[i] / y.inf[i], b = f.hi[i] / y.inf[i];
            if (a > b) std::swap(a, b);
            slo = std::max(slo, a);
            shi = std::min(shi, b);
        }
    }
    const bool ball = f.kind == TestFunction::Kind::ball;
    auto real_in = [&](double s) { return ball ? std::abs(s) * ynorm < f.radius : (s >= slo && s <= shi); };
    // v_p(a) >= -M_p
    std::vector<long> M(ctx.size());
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        auto it = y.finite.find(ctx.primes()[i]);
        if (it == y.finite.end() || it->second.size() != d) fail(errc::dimension_mismatch, "p-adic part of y");
        std::optional<long> v;
        for (auto& x : it->second) {
            auto vx = valuation(x, ctx.primes()[i]);
            if (vx) v = v ? std::min(*v, *vx) : *vx;
        }
        if (!v) fail(errc::zero_vector, "y must be nonzero at every place");
        M[i] = f.t_p[i] + *v;
    }
    std::vector<long> K(ctx.size());
    for (std::size_t i = 0; i < ctx.size(); ++i) K[i] = std::max(0L, M[i]);
    const auto grid = detail::depth_grid(ctx, K);
    const double smax = std::max(std::abs(slo), std::abs(shi));
    const Int& q = cc.q;

    const long ql = q.get_si();
    require(Int(ql) == q, "modulus too large");
    auto vp = [](long n, long p) {
        long v = 0;
        while (n % p == 0) {
            n /= p;
            ++v;
        }
        return v;
    };
    long double sum = 0;
    std::uint64_t terms = 0;
    for (long t = 1; t <= params.t_max && slo <= shi; ++t) {
        if (!is_in_NS(Int(t), ctx) || std::gcd(t, ql) != 1) continue;
        long double inner = 0;
        for (auto& [P, m] : grid) {
            const double Pd = P.get_d();
            require(Pd * smax * double(t) < 4e18, "depth too large for 64-bit enumeration");
            const long Pl = P.get_si();
            const long r = static_cast<long>((static_cast<__int128>(t) * Pl) % ql);
            const long nlo = static_cast<long>(std::floor(slo * double(t) * Pd)) - 1;
            const long nhi = static_cast<long>(std::ceil(shi * double(t) * Pd)) + 1;
            const long start = nlo + (((r - nlo) % ql) + ql) % ql;
            for (long n = start; n <= nhi; n += ql) {
                if (n == 0) continue;
                bool ok = true;
                for (std::size_t i = 0; i < ctx.size() && ok; ++i) {
                    const long p = long(ctx.primes()[i]);
                    const long vn = vp(n, p);
                    if (m[i] > 0 && vn > 0) ok = false;
                    if (vn - m[i] < -M[i]) ok = false;
                }
                if (!ok) continue;
                if (params.gcd_filter && std::gcd(n, t) != 1) continue;
                if (!real_in(double(n) / Pd / double(t))) continue;
                inner += 1;
                ++terms;
            }
        }
        sum += inner / std::pow(static_cast<long double>(t), static_cast<long double>(d));
    }
    // #{a : |a| <= t smax} <= 2 t smax P/q + 1 per depth
    double lead = 0, flat = 0;
    for (auto& [P, m] : grid) {
        lead += 2 * smax * P.get_d() / q.get_d();
        flat += 1;
    }
    const double dd = double(d), T = double(params.t_max);
    SeriesValue out;
    out.value = f.volume(d, ctx) + static_cast<double>(sum);
    out.tail_bound = slo <= shi ? lead * std::pow(T, 2 - dd) / (dd - 2) + flat * std::pow(T, 1 - dd) / (dd - 1) : 0.0;
    out.terms = terms;
    params.depth = K;
    out.params = params;
    return out;
}

}  // namespace sadic
