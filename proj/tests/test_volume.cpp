#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sadic/volume.hpp"

using namespace sadic;

namespace {

RatMatrix diag(std::initializer_list<Rat> v) {
    RatMatrix m(v.size(), v.size());
    std::size_t i = 0;
    for (auto& x : v) {
        m(i, i) = x;
        ++i;
    }
    return m;
}

Matrix<double> to_d(const RatMatrix& g) { return to_double(g); }

// p^{dt} #{y mod p^K : v_p(Q(p^{-t} y) - a) >= c} / p^{dK}, straight from the Gram matrix
Rat brute_padic_volume(const RatMatrix& G, unsigned long p, long t, const Rat& a, long c) {
    const std::size_t d = G.rows();
    long s = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            Rat coef = i == j ? G(i, i) : Rat(2 * G(i, j));
            if (coef != 0) s = std::min(s, *valuation(coef, p));
        }
    long K = std::max(1L, c + 2 * t - s);
    long P = ipow(p, K).get_si();
    std::vector<long> y(d, 0);
    Int count = 0;
    Rat pt = rpow(p, -t);
    while (true) {
        RatVec x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = pt * y[j];
        Rat diff = quad_eval(G, x) - a;
        auto v = valuation(diff, p);
        if (!v || *v >= c) ++count;
        std::size_t i = 0;
        while (i < d && ++y[i] == P) y[i++] = 0;
        if (i == d) break;
    }
    return rpow(p, long(d) * t) * Rat(count) / Rat(ipow(p, K * long(d)));
}

Rat vol(const RatMatrix& G, unsigned long p, long t, Rat a, long c) {
    PadicVolumeRequest r;
    r.gram = G;
    r.p = p;
    r.t = t;
    r.target = {a, c};
    return padic_quadric_volume(r).value;
}

// hit-or-miss in the ball
std::pair<double, double> naive_mc(const Matrix<double>& g, double T, double lo, double hi, std::uint64_t n,
                                   std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t d = g.rows();
    std::uint64_t hits = 0;
    std::vector<double> x(d);
    for (std::uint64_t i = 0; i < n;) {
        double r2 = 0;
        for (auto& v : x) {
            v = rng.uniform(-T, T);
            r2 += v * v;
        }
        if (r2 >= T * T) continue;
        ++i;
        double q = quad_eval(g, x);
        if (q > lo && q < hi) ++hits;
    }
    double ball = unit_ball_volume(d) * std::pow(T, double(d));
    double f = double(hits) / n;
    return {ball * f, ball * std::sqrt(f * (1 - f) / n)};
}

}  // namespace

TEST(PadicVolume, Examples) {
    auto G = diag({1, 1, -1});
    EXPECT_EQ(vol(G, 3, 0, 0, 1), Rat(1, 3));
    EXPECT_EQ(vol(G, 3, 0, 0, 0), 1);
    EXPECT_EQ(vol(diag({5, Rat(1, 7), 3, 2}), 5, 0, 0, 0), 1);
    EXPECT_EQ(vol(G, 3, 1, 0, 1), brute_padic_volume(G, 3, 1, 0, 1));
}

TEST(PadicVolume, JordanSplitPreservesDeterminantValuation) {
    Rng rng(4);
    for (unsigned long p : {2ul, 3ul, 5ul})
        for (int rep = 0; rep < 30; ++rep) {
            RatMatrix G(4, 4);
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = i; j < 4; ++j) G(i, j) = G(j, i) = make_rat(rng.range(-12, 12), p == 2 && i != j ? 2 : 1);
            if (det(G) == 0) continue;
            auto blocks = jordan_split(G, p);
            Rat dd = 1;
            for (auto& b : blocks) dd *= b.entries.size() == 1 ? b.entries[0] : Rat(b.entries[0] * b.entries[2] - b.entries[1] * b.entries[1]);
            EXPECT_EQ(*valuation(dd, p), *valuation(det(G), p));
        }
}

TEST(PadicVolume, AgreesWithBruteForce) {
    Rng rng(12);
    int checked = 0;
    for (unsigned long p : {2ul, 3ul, 5ul})
        for (std::size_t d : {3u, 4u})
            for (int rep = 0; rep < 6; ++rep) {
                RatMatrix G(d, d);
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = i; j < d; ++j)
                        G(i, j) = G(j, i) = i == j ? Rat(rng.range(-6, 6)) : make_rat(rng.range(-3, 3), p == 2 ? 2 : 1);
                if (det(G) == 0) continue;
                long t = rng.range(-1, 1);
                long c = rng.range(0, 2);
                Rat a = rng.range(-3, 3);
                // keep the brute-force grid small
                long s = 0;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = i; j < d; ++j) {
                        Rat coef = i == j ? G(i, i) : Rat(2 * G(i, j));
                        if (coef != 0) s = std::min(s, *valuation(coef, p));
                    }
                long K = std::max(1L, c + 2 * t - s);
                if (std::pow(double(p), double(K * d)) > 3e5) continue;
                EXPECT_EQ(vol(G, p, t, a, c), brute_padic_volume(G, p, t, a, c)) << p << " d=" << d << " rep=" << rep;
                ++checked;
            }
    EXPECT_GE(checked, 20);
}

TEST(PadicVolume, ModulusLadderStabilizes) {
    PadicVolumeRequest r;
    r.gram = diag({1, 1, -1});
    r.p = 3;
    r.t = 1;
    r.target = {0, 1};
    r.m_start = 1;
    auto res = padic_quadric_volume(r);
    EXPECT_EQ(res.required_m, 3);
    EXPECT_GE(res.certified_m, 3);
    EXPECT_EQ(res.ladder.back(), res.value);
    r.m_max = 2;
    try {
        padic_quadric_volume(r);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::not_stabilized);
    }
}

TEST(PadicVolume, ScalingInvariance) {
    auto G = diag({1, 2, -3, 5});
    for (unsigned long p : {2ul, 3ul, 5ul})
        for (long t : {0L, 1L}) {
            // a unit of another place leaves the p-adic volume unchanged
            Rat u = p == 2 ? 3 : 2;
            RatMatrix Gu = G;
            for (auto& x : Gu.data()) x *= u * u;
            EXPECT_EQ(vol(Gu, p, t, 0, 1), vol(G, p, t, 0, 1));
            // x -> p x: |p|^{-d} times the volume over the smaller ball
            RatMatrix Gp = G;
            for (auto& x : Gp.data()) x *= p * p;
            EXPECT_EQ(vol(Gp, p, t, 0, 1), rpow(p, 4) * vol(G, p, t - 1, 0, 1));
        }
}

TEST(PadicVolume, PrimitiveDensityAgainstOracle) {
    // x^2 + y^2 - z^2 at 2: the ratio tends to 2
    EXPECT_EQ(primitive_zero_density(diag({1, 1, -1}), 2).leading_factor, 2);
    for (auto G : {diag({1, 1, -1}), diag({1, -2, 3}), diag({1, 1, -1, -1}), diag({2, 3, -5, 1}), diag({1, 3, -7})})
        for (unsigned long p : {2ul, 3ul, 5ul, 7ul}) {
            auto pd = primitive_zero_density(G, p);
            long K = pd.certified_k + 1;
            if (std::pow(double(p), double(K * G.rows())) > 2e6) continue;
            std::vector<long> a;
            for (std::size_t i = 0; i < G.rows(); ++i) a.push_back(G(i, i).get_num().get_si());
            Int prim = oracle::primitive_zero_count(a, p, K);
            EXPECT_EQ(pd.density, Rat(rpow(p, K) * Rat(prim) / Rat(ipow(p, K * long(G.rows())))));
        }
}

TEST(PadicVolume, RatioConvergesGeometricallyToLeadingFactor) {
    SConfig ctx({2, 3, 5});
    std::vector<RatMatrix> forms{diag({1, 1, -1}), diag({1, -2, 3}), diag({1, 1, -1, -1}), diag({2, 3, -5, 1}),
                                 diag({1, 3, -7})};
    int exact_steps = 0;
    for (auto& G : forms) {
        auto q = QuadraticFormS::rational(G, ctx);
        const long d = long(G.rows());
        for (unsigned long p : ctx.primes()) {
            if (!is_isotropic(q, p)) continue;
            Rat cp = primitive_zero_density(G, p).leading_factor;
            for (PadicTarget tgt : {PadicTarget{0, 1}, PadicTarget{1, 2}, PadicTarget{0, 0}}) {
                long t0 = std::max(0L, local_property_threshold(q, p, tgt));
                std::vector<Rat> gaps;
                for (long t = t0; t <= t0 + 2; ++t) {
                    PadicVolumeRequest r;
                    r.gram = G;
                    r.p = p;
                    r.t = t;
                    r.target = tgt;
                    r.max_modulus = 1 << 15;
                    Rat v;
                    try {
                        v = padic_quadric_volume(r).value;
                    } catch (const error& e) {
                        if (e.code() == errc::budget_exceeded) break;
                        throw;
                    }
                    gaps.push_back(v / (rpow(p, -tgt.exponent) * rpow(p, (d - 2) * t)) - cp);
                }
                for (std::size_t i = 1; i < gaps.size(); ++i) {
                    EXPECT_EQ(gaps[i], gaps[i - 1] * rpow(p, 2 - d)) << "p=" << p << " d=" << d;
                    ++exact_steps;
                }
            }
        }
    }
    EXPECT_GE(exact_steps, 20);
}

TEST(RealVolume, EmptyInterval) {
    auto g = to_d(diag({1, 1, -1}));
    EXPECT_EQ(real_quadric_volume(g, 10, 0.3, 0.3).value, 0.0);
}

TEST(RealVolume, HyperbolaBandAgainstMonteCarlo) {
    Matrix<double> g(2, 2);
    g(0, 1) = g(1, 0) = 1;  // 2 x1 x2
    for (double delta : {0.05, 0.2}) {
        auto qv = real_quadric_volume(g, 1, -delta, delta);
        auto [mc, se] = naive_mc(g, 1, -delta, delta, 2'000'000, 5);
        EXPECT_NEAR(qv.value, mc, 4 * se + 1e-6) << delta;
        EXPECT_LT(qv.error, 1e-6);
    }
}

TEST(RealVolume, TernaryCrossMethod) {
    auto g = to_d(diag({1, 1, -1}));
    auto qv = real_quadric_volume(g, 10, -0.5, 0.5);
    auto mc = real_quadric_volume(g, 10, -0.5, 0.5, RealVolumeMethod::montecarlo, 3, 400000);
    EXPECT_LT(qv.error / qv.value, 1e-6);
    EXPECT_LT(mc.error / mc.value, 0.02);
    EXPECT_NEAR(qv.value, mc.value, 4 * mc.error);
    auto [hm, se] = naive_mc(g, 10, -0.5, 0.5, 1'000'000, 8);
    EXPECT_NEAR(qv.value, hm, 4 * se);
    EXPECT_NO_THROW(real_quadric_volume(g, 10, -0.5, 0.5, RealVolumeMethod::cross_checked));
}

TEST(RealVolume, GeneralFormsAgainstMonteCarlo) {
    Rng rng(21);
    for (std::size_t d : {3u, 4u})
        for (int rep = 0; rep < 2; ++rep) {
            Matrix<double> g(d, d);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i; j < d; ++j) g(i, j) = g(j, i) = rng.uniform(-1, 1) + (i == j ? (i % 2 ? -1.5 : 1.5) : 0);
            double lo = rng.uniform(-1, 0.5), hi = lo + rng.uniform(0.2, 1.5);
            auto qv = real_quadric_volume(g, 3, lo, hi);
            auto [hm, se] = naive_mc(g, 3, lo, hi, 400'000, 100 + rep);
            EXPECT_NEAR(qv.value, hm, 4 * se + 1e-3 * hm) << "d=" << d;
        }
}

TEST(RealVolume, Errors) {
    auto def = to_d(diag({1, 1, 1}));
    EXPECT_THROW(real_quadric_volume(def, 2, -1, 1), error);
    auto sing = to_d(diag({1, 0, -1}));
    try {
        real_quadric_volume(sing, 2, -1, 1);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::degenerate_form);
    }
}

TEST(LeadingConstant, FlatTableAndScaling) {
    SConfig none;
    auto q = QuadraticFormS::rational(diag({1, 1, -1}), none);
    auto fam = ShrinkingFamily::constant(none);
    std::vector<TVector> ladder;
    for (double T : {20.0, 40.0, 80.0, 160.0}) ladder.push_back({T, {}});
    auto res = leading_constant(q, fam, ladder);
    double lo = 1e9, hi = 0;
    for (auto& r : res.table) {
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    EXPECT_LT((hi - lo) / res.c_Q, 0.02);
    EXPECT_NEAR(res.c_inf, res.c_inf_light_cone, 1e-3 * res.c_inf_light_cone);
    for (std::size_t i = 1; i < res.table.size(); ++i)
        EXPECT_LT(std::abs(res.table[i].ratio - res.c_Q), std::abs(res.table[i - 1].ratio - res.c_Q));
    // doubling T multiplies the volume by about 2^{d-2}
    double growth = res.table[3].vol / res.table[2].vol;
    EXPECT_NEAR(growth, 2.0, 0.02);
    // doubling the interval doubles the leading term
    auto fam2 = ShrinkingFamily::constant(none, 2);
    auto res2 = leading_constant(q, fam2, ladder);
    EXPECT_NEAR(res2.table.back().vol / res.table.back().vol, 2.0, 0.02);
}

TEST(LeadingConstant, ProductStructureAndFamilies) {
    SConfig ctx({3});
    auto q = QuadraticFormS::rational(diag({1, 2, -3, -1}), ctx);
    ShrinkingFamily fam = ShrinkingFamily::constant(ctx);
    fam.kappa_inf = 0.4;
    fam.kappa_p = {1};
    fam.c_p = {0};
    std::vector<TVector> ladder{{10.0, {0}}, {20.0, {1}}, {40.0, {2}}};
    auto res = leading_constant(q, fam, ladder);
    for (auto& r : res.table) {
        EXPECT_NEAR(r.vol, r.vol_inf * r.vol_finite.get_d(), 1e-12 * r.vol);
        EXPECT_NEAR(r.ratio, r.real_ratio * res.c_p.at(3).get_d(), 1e-9 * r.ratio);
    }
    EXPECT_GT(res.c_Q, 0);
    ShrinkingFamily bad = fam;
    bad.kappa_inf = 2;
    try {
        leading_constant(q, bad, ladder);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::family_out_of_range);
    }
    SConfig none;
    auto q3 = QuadraticFormS::rational(diag({1, 1, -1}), ctx);
    ShrinkingFamily f3 = ShrinkingFamily::constant(ctx);
    f3.kappa_p = {1};
    EXPECT_THROW(leading_constant(q3, f3, ladder), error);
}

TEST(Family, IntervalAt) {
    SConfig ctx({3});
    auto f = ShrinkingFamily::constant(ctx);
    auto I = interval_at(f, {123.0, {0}});
    EXPECT_EQ(I.lo, Rat(-1, 2));
    EXPECT_EQ(I.hi, Rat(1, 2));
    f.kappa_inf = 0.5;
    I = interval_at(f, {4.0, {0}});
    EXPECT_DOUBLE_EQ(I.real_length(), 0.5);
    f.kappa_p = {1};
    I = interval_at(f, {4.0, {2}});
    EXPECT_EQ(I.finite[0].exponent, 2);
    EXPECT_EQ(I.finite[0].center, 0);
}
