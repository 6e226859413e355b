#pragma once

// Volumes of {x : Q(x) in I} inside S-balls.
//
// Finite places: exact residue counting after a Z_p-Jordan splitting, so the
// count is a convolution of per-block value histograms mod p^M.
// Real place: polar coordinates in the eigenbasis. With the positive and
// negative eigen-directions written as w = (cos(phi) u, sin(phi) v), the
// radial integral is explicit and the phi integral becomes an integral over
// the value s = Q(w); u and v range over spheres handled by product rules.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "sadic/family.hpp"
#include "sadic/qspace.hpp"
#include "sadic/rng.hpp"

namespace sadic {

// ---------------------------------------------------------------- p-adic

struct JordanBlock {
    // 1x1: {a}; 2x2: {a, b, c} for [[a, b], [b, c]]
    std::vector<Rat> entries;
};

// Z_p-equivalent splitting of G into 1x1 blocks (and 2x2 blocks at p = 2)
inline std::vector<JordanBlock> jordan_split(RatMatrix G, unsigned long p) {
    const std::size_t d = G.rows();
    std::vector<bool> alive(d, true);
    std::vector<JordanBlock> out;
    auto vol = [&](const Rat& x) { return valuation(x, p); };
    auto add_multiple = [&](std::size_t target, std::size_t src, const Rat& x) {
        // e_target <- e_target + x e_src
        for (std::size_t k = 0; k < d; ++k) G(target, k) += x * G(src, k);
        for (std::size_t k = 0; k < d; ++k) G(k, target) += x * G(k, src);
    };
    std::size_t remaining = d;
    while (remaining > 0) {
        std::optional<long> best;
        std::size_t bi = 0, bj = 0;
        bool diag = false;
        for (std::size_t i = 0; i < d; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i; j < d; ++j) {
                if (!alive[j]) continue;
                auto v = vol(G(i, j));
                if (!v) continue;
                // prefer diagonal pivots on ties
                if (!best || *v < *best || (*v == *best && i == j && !diag)) {
                    best = *v;
                    bi = i;
                    bj = j;
                    diag = i == j;
                }
            }
        }
        if (!best) fail(errc::degenerate_form, "form is degenerate over Q_p");
        if (diag) {
            Rat piv = G(bi, bi);
            for (std::size_t j = 0; j < d; ++j)
                if (alive[j] && j != bi && G(bi, j) != 0) add_multiple(j, bi, Rat(-G(bi, j) / piv));
            out.push_back({{piv}});
            alive[bi] = false;
            --remaining;
        } else if (p != 2) {
            add_multiple(bi, bj, 1);  // new diagonal has the minimal valuation
        } else {
            Rat a = G(bi, bi), b = G(bi, bj), c = G(bj, bj);
            Rat det2 = a * c - b * b;
            for (std::size_t k = 0; k < d; ++k) {
                if (!alive[k] || k == bi || k == bj) continue;
                Rat gi = G(k, bi), gj = G(k, bj);
                // (x, y) = (gi, gj) B^{-1}
                Rat x = (gi * c - gj * b) / det2, y = (gj * a - gi * b) / det2;
                if (x != 0) add_multiple(k, bi, Rat(-x));
                if (y != 0) add_multiple(k, bj, Rat(-y));
            }
            out.push_back({{a, b, c}});
            alive[bi] = alive[bj] = false;
            remaining -= 2;
        }
    }
    return out;
}

struct PadicVolumeRequest {
    RatMatrix gram;
    unsigned long p = 2;
    long t = 0;            // ball p^{-t} Z_p^d
    PadicTarget target;    // a + p^c Z_p
    long m_start = 1;      // first counting exponent
    long m_max = 40;       // give up beyond this
    std::uint64_t max_modulus = 8192;
};

struct PadicVolumeResult {
    Rat value;
    long certified_m = 0;  // the exponent at which two successive values agreed
    long required_m = 0;   // depth at which the congruence is decided
    std::vector<Rat> ladder;
};

namespace detail {

// #{y mod p^m : Qint(y) = r mod p^m} for the split integral form
inline std::uint64_t count_congruence_solutions(const std::vector<std::vector<Rat>>& blocks, unsigned long p, long m,
                                                const Int& r) {
    const Int PP = ipow(p, static_cast<unsigned long>(m));
    const std::uint64_t P = PP.get_ui();
    auto red = [&](const Rat& x) { return rat_mod(x, PP)->get_ui(); };
    std::vector<std::uint64_t> acc(P, 0);
    acc[0] = 1;
    std::vector<std::uint64_t> h(P), next(P);
    for (auto& blk : blocks) {
        std::fill(h.begin(), h.end(), 0);
        if (blk.size() == 1) {
            std::uint64_t a = red(blk[0]);
            for (std::uint64_t y = 0; y < P; ++y) {
                unsigned __int128 v = (unsigned __int128)a * y % P * y % P;
                h[(std::uint64_t)v]++;
            }
        } else {
            std::uint64_t a = red(blk[0]), b2 = red(blk[1]), c = red(blk[2]);
            for (std::uint64_t y1 = 0; y1 < P; ++y1)
                for (std::uint64_t y2 = 0; y2 < P; ++y2) {
                    unsigned __int128 v = ((unsigned __int128)a * y1 % P * y1 + (unsigned __int128)b2 * y1 % P * y2 +
                                           (unsigned __int128)c * y2 % P * y2) %
                                          P;
                    h[(std::uint64_t)v]++;
                }
        }
        std::fill(next.begin(), next.end(), 0);
        std::vector<std::uint64_t> support;
        for (std::uint64_t y = 0; y < P; ++y)
            if (h[y]) support.push_back(y);
        for (std::uint64_t x = 0; x < P; ++x) {
            if (!acc[x]) continue;
            for (std::uint64_t y : support) {
                std::uint64_t z = x + y;
                next[z >= P ? z - P : z] += acc[x] * h[y];
            }
        }
        acc.swap(next);
    }
    return acc[mod(r, PP).get_ui()];
}

// p^s Q with Z_p polynomial coefficients, split into blocks {a} or {a, 2b, c}
struct IntegralSplit {
    std::vector<std::vector<Rat>> blocks;
    long s = 0;
};

inline IntegralSplit integral_split(const RatMatrix& gram, unsigned long p) {
    auto blocks = jordan_split(gram, p);
    long s = std::numeric_limits<long>::max();
    for (auto& b : blocks) {
        if (b.entries.size() == 1) {
            s = std::min(s, *valuation(b.entries[0], p));
        } else {
            for (const Rat& coef : {b.entries[0], Rat(2 * b.entries[1]), b.entries[2]})
                if (coef != 0) s = std::min(s, *valuation(coef, p));
        }
    }
    IntegralSplit out;
    out.s = -s;
    Rat f = rpow(p, out.s);
    for (auto& b : blocks) {
        if (b.entries.size() == 1)
            out.blocks.push_back({Rat(f * b.entries[0])});
        else
            out.blocks.push_back({Rat(f * b.entries[0]), Rat(2 * f * b.entries[1]), Rat(f * b.entries[2])});
    }
    return out;
}

inline std::uint64_t checked_count(const IntegralSplit& sp, unsigned long p, long m, const Int& r,
                                   std::uint64_t max_modulus, std::size_t d) {
    if (m <= 0) return 1;
    Int P = ipow(p, static_cast<unsigned long>(m));
    if (P > max_modulus) fail(errc::budget_exceeded, "residue counting modulus " + P.get_str() + " exceeds budget");
    require(ipow(p, static_cast<unsigned long>(m * long(d))).fits_ulong_p(), "residue count overflow");
    return count_congruence_solutions(sp.blocks, p, m, r);
}

}  // namespace detail

// vol_p{x in p^{-t} Z_p^d : Q(x) in a + p^c Z_p}, Haar measure with vol(Z_p^d) = 1
inline PadicVolumeResult padic_quadric_volume(const PadicVolumeRequest& req) {
    const std::size_t d = req.gram.rows();
    const unsigned long p = req.p;
    require(is_prime(p), "padic_quadric_volume: p must be prime");
    auto split = detail::integral_split(req.gram, p);
    const long s = split.s;
    // x = p^{-t} y: Q(x) in a + p^c  <=>  Qint(y) in p^{s+2t} a + p^{c+s+2t}
    const long M = req.target.exponent + s + 2 * req.t;
    const Rat b = rpow(p, s + 2 * req.t) * req.target.center;
    const Rat scale = rpow(p, long(d) * req.t);
    PadicVolumeResult res;
    res.required_m = std::max(M, 0L);
    if (M <= 0) {
        // Qint(y) in Z_p, so only b's membership in p^M Z_p matters
        auto vb = valuation(b, p);
        res.value = (!vb || *vb >= M) ? scale : Rat(0);
        res.certified_m = std::max(req.m_start, 0L);
        res.ladder = {res.value, res.value};
        return res;
    }
    auto vb = valuation(b, p);
    if (vb && *vb < 0) {
        res.value = 0;
        res.certified_m = std::max(req.m_start, M);
        res.ladder = {0, 0};
        return res;
    }
    Int r = *rat_mod(b, ipow(p, static_cast<unsigned long>(M)));
    // V(m) decides the congruence mod p^{min(m, M)}; exact from m = M on
    std::map<long, Rat> cache;
    auto V = [&](long m) -> Rat {
        long mm = std::min(m, M);
        auto it = cache.find(mm);
        if (it != cache.end()) return it->second;
        std::uint64_t N = detail::checked_count(split, p, mm, r, req.max_modulus, d);
        Rat v = scale * Rat(Int(static_cast<unsigned long>(N))) / Rat(ipow(p, static_cast<unsigned long>(mm * long(d))));
        cache[mm] = v;
        return v;
    };
    Rat prev = V(req.m_start);
    res.ladder.push_back(prev);
    for (long m = req.m_start; m < req.m_max; ++m) {
        Rat cur = V(m + 1);
        res.ladder.push_back(cur);
        if (cur == prev && m >= M) {
            res.value = cur;
            res.certified_m = m;
            return res;
        }
        prev = cur;
    }
    fail(errc::not_stabilized, "p-adic volume did not stabilize by m = " + std::to_string(req.m_max) +
                                   " (congruence depth " + std::to_string(M) + ")");
}

struct PrimitiveDensity {
    Rat density;        // lim p^K vol{y primitive : Q(y) in p^K Z_p}
    long certified_k = 0;
    Rat leading_factor;  // density / (1 - p^{2-d})
};

// Hensel: for primitive y, v(grad) <= v(det 2G), so counts lift uniformly past 2 v(det 2G)
inline PrimitiveDensity primitive_zero_density(const RatMatrix& gram, unsigned long p,
                                               std::uint64_t max_modulus = 1 << 15) {
    const std::size_t d = gram.rows();
    require(d >= 3, "primitive density needs d >= 3");
    auto split = detail::integral_split(gram, p);
    Rat dt = det(gram);
    if (dt == 0) fail(errc::degenerate_form, "degenerate form");
    long vdet = *valuation(Rat(dt * rpow(p, split.s * long(d)) * rpow(2, long(d))), p);
    long K = 2 * vdet + 1;
    auto dens = [&](long k) {
        Int N = Int(static_cast<unsigned long>(detail::checked_count(split, p, k, 0, max_modulus, d)));
        // y = p z is a zero mod p^k iff z is a zero mod p^{k-2}
        Int nonprim = k <= 2 ? ipow(p, static_cast<unsigned long>(long(d) * (k - 1)))
                             : ipow(p, static_cast<unsigned long>(d)) *
                                   Int(static_cast<unsigned long>(detail::checked_count(split, p, k - 2, 0, max_modulus, d)));
        Int prim = N - nonprim;
        return Rat(rpow(p, k) * Rat(prim) / Rat(ipow(p, static_cast<unsigned long>(k * long(d)))));
    };
    Rat a = dens(K), b = dens(K + 1);
    if (a != b) fail(errc::not_stabilized, "primitive density did not stabilize at the Hensel depth");
    PrimitiveDensity out;
    out.density = rpow(p, -split.s) * a;
    out.certified_k = K;
    out.leading_factor = out.density / (1 - rpow(p, 2 - long(d)));
    return out;
}

// smallest t_p with 2 t_p >= max{1 + k0 + z - b, 1 + k1 + 2z - 2b} (+1, +2 at p = 2)
inline long local_property_threshold(const QuadraticFormS& q, unsigned long p, const PadicTarget& target) {
    auto st = standardize(q, p);
    long b = target.base_valuation(p);
    long k1 = target.exponent;
    long extra0 = p == 2 ? 1 : 0, extra1 = p == 2 ? 2 : 0;
    long rhs = std::max(1 + st.k0 + st.z - b + extra0, 1 + k1 + 2 * st.z - 2 * b + extra1);
    return rhs <= 0 ? -((-rhs) / 2) : (rhs + 1) / 2;
}

// ---------------------------------------------------------------- real

enum class RealVolumeMethod { quadrature, montecarlo, cross_checked };

struct RealVolume {
    double value = 0;
    double error = 0;
};

inline double sphere_area(std::size_t d) { return 2 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0); }

namespace detail {

struct SphereRule {
    std::vector<std::vector<double>> nodes;
    std::vector<double> weights;
};

template <std::size_t N>
inline void gauss_nodes(double a, double b, std::vector<double>& x, std::vector<double>& w) {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    double mid = (a + b) / 2, half = (b - a) / 2;
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] == 0) {
            x.push_back(mid);
            w.push_back(wt[i] * half);
            continue;
        }
        x.push_back(mid - half * ab[i]);
        w.push_back(wt[i] * half);
        x.push_back(mid + half * ab[i]);
        w.push_back(wt[i] * half);
    }
}

// product rule on S^k (k = dimension of the sphere) with total weight = area
inline SphereRule sphere_rule(std::size_t k, int level) {
    SphereRule r;
    if (k == 0) {
        r.nodes = {{1.0}, {-1.0}};
        r.weights = {1.0, 1.0};
        return r;
    }
    if (k == 1) {
        int n = level == 0 ? 48 : 96;
        for (int i = 0; i < n; ++i) {
            double a = 2 * M_PI * (i + 0.5) / n;
            r.nodes.push_back({std::cos(a), std::sin(a)});
            r.weights.push_back(2 * M_PI / n);
        }
        return r;
    }
    SphereRule inner = sphere_rule(k - 1, level);
    std::vector<double> psi, wpsi;
    if (level == 0)
        gauss_nodes<20>(0, M_PI, psi, wpsi);
    else
        gauss_nodes<40>(0, M_PI, psi, wpsi);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        double c = std::cos(psi[i]), s = std::sin(psi[i]);
        double jac = std::pow(s, double(k - 1));
        for (std::size_t j = 0; j < inner.nodes.size(); ++j) {
            std::vector<double> x{c};
            for (double y : inner.nodes[j]) x.push_back(s * y);
            r.nodes.push_back(std::move(x));
            r.weights.push_back(wpsi[i] * jac * inner.weights[j]);
        }
    }
    return r;
}

struct Spectrum {
    std::vector<double> pos, neg;  // positive eigenvalues, |negative eigenvalues|
    Eigen::MatrixXd vectors;       // columns, matching the order pos then neg
};

inline Spectrum spectrum(const Matrix<double>& g) {
    const std::size_t d = g.rows();
    Eigen::MatrixXd m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = g(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Spectrum s;
    s.vectors.resize(d, d);
    std::size_t col = 0;
    double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < d; ++i) {
            double ev = es.eigenvalues()(i);
            if (std::abs(ev) <= 1e-13 * scale) fail(errc::degenerate_form, "real form is numerically degenerate");
            if ((pass == 0) != (ev > 0)) continue;
            (pass == 0 ? s.pos : s.neg).push_back(std::abs(ev));
            s.vectors.col(col++) = es.eigenvectors().col(i);
        }
    return s;
}

// radial measure (R_hi^d - R_lo^d)/d of {0 <= r < T : lo < r^2 s < hi}
inline double radial_measure(double s, double T, double lo, double hi, std::size_t d) {
    double T2 = T * T, a, b;
    if (s > 0) {
        a = lo / s;
        b = hi / s;
    } else if (s < 0) {
        a = hi / s;
        b = lo / s;
    } else {
        return (lo < 0 && 0 < hi) ? std::pow(T, double(d)) / d : 0.0;
    }
    a = std::max(a, 0.0);
    b = std::min(b, T2);
    if (!(b > a)) return 0.0;
    return (std::pow(b, d / 2.0) - std::pow(a, d / 2.0)) / d;
}

// integral over s in (-N, P) of radial_measure(s) * h(s), with
// h(s) = (s+N)^{(a-2)/2} (P-s)^{(b-2)/2} / (2 (P+N)^{(a+b-2)/2})
inline double fibre_integral(double P, double N, std::size_t a, std::size_t b, double T, double lo, double hi,
                             double tol) {
    const std::size_t d = a + b;
    std::vector<double> cuts{-N, P};
    for (double c : {0.0, lo / (T * T), hi / (T * T)})
        if (c > -N && c < P) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const double norm = 2 * std::pow(P + N, (double(a) + double(b) - 2) / 2);
    boost::math::quadrature::tanh_sinh<double> ts;
    double total = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double s0 = cuts[k], s1 = cuts[k + 1];
        const bool left_end = k == 0, right_end = k + 2 == cuts.size();
        auto f = [&](double s, double sc) {
            // sc is the signed distance to the nearer end of [s0, s1]
            double left = (left_end && sc < 0) ? -sc : s + N;
            double right = (right_end && sc > 0) ? sc : P - s;
            if (left <= 0 || right <= 0) return 0.0;
            double h = std::pow(left, (double(a) - 2) / 2) * std::pow(right, (double(b) - 2) / 2) / norm;
            return radial_measure(s, T, lo, hi, d) * h;
        };
        total += ts.integrate(f, s0, s1, tol);
    }
    return total;
}

inline double quadrature_volume(const Spectrum& sp, double T, double lo, double hi, int level) {
    const std::size_t a = sp.pos.size(), b = sp.neg.size();
    auto U = sphere_rule(a - 1, level), Vr = sphere_rule(b - 1, level);
    double total = 0;
    for (std::size_t i = 0; i < U.nodes.size(); ++i) {
        double P = 0;
        for (std::size_t j = 0; j < a; ++j) P += sp.pos[j] * U.nodes[i][j] * U.nodes[i][j];
        for (std::size_t k = 0; k < Vr.nodes.size(); ++k) {
            double N = 0;
            for (std::size_t j = 0; j < b; ++j) N += sp.neg[j] * Vr.nodes[k][j] * Vr.nodes[k][j];
            total += U.weights[i] * Vr.weights[k] * fibre_integral(P, N, a, b, T, lo, hi, 1e-11);
        }
    }
    return total;
}

}  // namespace detail

// vol{ ||x|| < T : lo < Q(x) < hi } for an indefinite nondegenerate real form
inline RealVolume real_quadric_volume(const Matrix<double>& gram, double T, double lo, double hi,
                                      RealVolumeMethod method = RealVolumeMethod::quadrature, std::uint64_t seed = 1,
                                      std::uint64_t samples = 200000) {
    require(T > 0, "radius must be positive");
    if (!(hi > lo)) return {0.0, 0.0};
    const std::size_t d = gram.rows();
    auto sp = detail::spectrum(gram);
    require(!sp.pos.empty() && !sp.neg.empty(), "real form must be indefinite");
    RealVolume quad, mc;
    if (method != RealVolumeMethod::montecarlo) {
        double v0 = detail::quadrature_volume(sp, T, lo, hi, 0);
        double v1 = detail::quadrature_volume(sp, T, lo, hi, 1);
        quad = {v1, std::abs(v1 - v0) + 1e-10 * std::abs(v1)};
        if (method == RealVolumeMethod::quadrature) return quad;
    }
    {
        Rng rng(seed);
        double sum = 0, sum2 = 0;
        const double area = sphere_area(d);
        std::vector<double> w(d);
        for (std::uint64_t i = 0; i < samples; ++i) {
            double n2 = 0;
            for (auto& x : w) {
                x = rng.normal();
                n2 += x * x;
            }
            double s = 0;
            for (std::size_t j = 0; j < sp.pos.size(); ++j) s += sp.pos[j] * w[j] * w[j];
            for (std::size_t j = 0; j < sp.neg.size(); ++j) s -= sp.neg[j] * w[sp.pos.size() + j] * w[sp.pos.size() + j];
            double v = area * detail::radial_measure(s / n2, T, lo, hi, d);
            sum += v;
            sum2 += v * v;
        }
        double mean = sum / samples;
        double var = std::max(0.0, sum2 / samples - mean * mean);
        mc = {mean, std::sqrt(var / samples)};
    }
    if (method == RealVolumeMethod::montecarlo) return mc;
    if (std::abs(quad.value - mc.value) > 5 * mc.error + 10 * quad.error)
        fail(errc::method_disagreement, "quadrature " + std::to_string(quad.value) + " vs Monte Carlo " +
                                            std::to_string(mc.value) + " +- " + std::to_string(mc.error));
    return quad;
}

// lim vol / (|I| T^{d-2}) = (density of Q(w) at 0 on the unit sphere) / (d - 2)
inline double light_cone_constant(const Matrix<double>& gram, int level = 1) {
    const std::size_t d = gram.rows();
    require(d >= 3, "light-cone constant needs d >= 3");
    auto sp = detail::spectrum(gram);
    require(!sp.pos.empty() && !sp.neg.empty(), "real form must be indefinite");
    const std::size_t a = sp.pos.size(), b = sp.neg.size();
    auto U = detail::sphere_rule(a - 1, level), Vr = detail::sphere_rule(b - 1, level);
    double total = 0;
    for (std::size_t i = 0; i < U.nodes.size(); ++i) {
        double P = 0;
        for (std::size_t j = 0; j < a; ++j) P += sp.pos[j] * U.nodes[i][j] * U.nodes[i][j];
        for (std::size_t k = 0; k < Vr.nodes.size(); ++k) {
            double N = 0;
            for (std::size_t j = 0; j < b; ++j) N += sp.neg[j] * Vr.nodes[k][j] * Vr.nodes[k][j];
            double h = std::pow(N, (double(a) - 2) / 2) * std::pow(P, (double(b) - 2) / 2) /
                       (2 * std::pow(P + N, (double(d) - 2) / 2));
            total += U.weights[i] * Vr.weights[k] * h;
        }
    }
    return total / (double(d) - 2);
}

// ---------------------------------------------------------------- asymptotics

struct VolumeRung {
    TVector T;
    double vol_inf = 0, vol_inf_error = 0;
    Rat vol_finite = 1;
    double vol = 0;    // full S-adic volume
    double vol_I = 0;  // volume of the target set
    double ratio = 0;  // vol / (vol_I |T|^{d-2})
    double real_ratio = 0;
};

struct VolumeAsymptotics {
    double c_Q = 0;
    double c_Q_error = 0;
    double c_inf = 0;           // Richardson extrapolation of the real ratios
    double c_inf_light_cone = 0;
    std::map<place_t, Rat> c_p;
    std::vector<VolumeRung> table;
};

inline Rat finite_volume_at(const QuadraticFormS& q, const SInterval& I, const TVector& T) {
    const auto& ctx = q.context();
    Rat v = 1;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        PadicVolumeRequest req;
        req.p = ctx.primes()[i];
        req.gram = q.gram_p(req.p);
        req.t = T.t_p.at(i);
        req.target = I.finite.at(i);
        req.m_start = 1;
        req.m_max = 64;
        v *= padic_quadric_volume(req).value;
    }
    return v;
}

inline VolumeAsymptotics leading_constant(const QuadraticFormS& q, const ShrinkingFamily& fam,
                                          const std::vector<TVector>& ladder) {
    const std::size_t d = q.dim();
    const auto& ctx = q.context();
    require(d >= 3, "leading constant needs d >= 3");
    fam.validate(d, ctx);
    require(ladder.size() >= 2, "ladder needs at least two rungs");
    for (std::size_t i = 1; i < ladder.size(); ++i) require(ladder[i].t_inf > ladder[i - 1].t_inf, "ladder must increase");
    if (!is_isotropic_everywhere(q)) fail(errc::anisotropic_form, "form must be isotropic at every place");
    VolumeAsymptotics out;
    for (auto& T : ladder) {
        SInterval I = interval_at(fam, T);
        VolumeRung r;
        r.T = T;
        auto rv = real_quadric_volume(q.gram_inf(), T.t_inf, I.lo.get_d(), I.hi.get_d());
        r.vol_inf = rv.value;
        r.vol_inf_error = rv.error;
        r.vol_finite = finite_volume_at(q, I, T);
        r.vol = r.vol_inf * r.vol_finite.get_d();
        r.vol_I = I.volume(ctx);
        double absT = tvector_abs(T, ctx);
        r.ratio = r.vol / (r.vol_I * std::pow(absT, double(d) - 2));
        r.real_ratio = r.vol_inf / (I.real_length() * std::pow(T.t_inf, double(d) - 2));
        out.table.push_back(r);
    }
    // finite factors: the limit of the p-adic ratio is the primitive zero density over (1 - p^{2-d})
    SInterval Itop = interval_at(fam, out.table.back().T);
    double cfin = 1;
    for (auto p : ctx.primes()) {
        Rat cp = primitive_zero_density(q.gram_p(p), p).leading_factor;
        out.c_p[p] = cp;
        cfin *= cp.get_d();
    }
    const auto& r1 = out.table[out.table.size() - 2];
    const auto& r2 = out.table.back();
    double rho = std::pow(r2.T.t_inf / r1.T.t_inf, double(d) - 2);
    out.c_inf = (rho * r2.real_ratio - r1.real_ratio) / (rho - 1);
    out.c_inf_light_cone = light_cone_constant(q.gram_inf());
    out.c_Q = out.c_inf * cfin;
    out.c_Q_error = (std::abs(out.c_inf - r2.real_ratio) + r2.vol_inf_error / (Itop.real_length() * std::pow(r2.T.t_inf, double(d) - 2))) * cfin;
    return out;
}

}  // namespace sadic
