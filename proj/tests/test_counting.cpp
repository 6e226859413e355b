#include <gtest/gtest.h>

#include "sadic/counting.hpp"

using namespace sadic;

namespace {

RatMatrix diag(std::initializer_list<long> v) {
    RatMatrix m(v.size(), v.size());
    std::size_t i = 0;
    for (long x : v) {
        m(i, i) = x;
        ++i;
    }
    return m;
}

SInterval real_interval(Rat lo, Rat hi, const SConfig& ctx) {
    SInterval I{lo, hi, {}};
    for (std::size_t i = 0; i < ctx.size(); ++i) I.finite.push_back({Rat(0), -1000});
    return I;
}

TVector tv(double t, std::vector<long> tp = {}) { return {t, std::move(tp)}; }

}  // namespace

TEST(CountCongruence, SmallExamples) {
    SConfig none;
    auto Q = QuadraticFormS::rational(diag({1, 1, -1}), none);
    CongruenceContext cc(3, 2, {1, 1, 0}, none);
    auto fam = ShrinkingFamily::constant(none, 1, Rat(2));
    EXPECT_EQ(count_congruence(cc, Q, fam, tv(3)).N, 4u);
    auto fam0 = ShrinkingFamily::constant(none, 1, Rat(0));
    EXPECT_EQ(count_congruence(cc, Q, fam0, tv(3)).N, 0u);
    EXPECT_THROW(CongruenceContext(3, 2, {0, 0, 0}, none), error);
}

TEST(CountInhom, LiteralTripleLoop) {
    SConfig none;
    auto Q = QuadraticFormS::rational(diag({1, 1, -1}), none);
    RatVec xi{make_rat(1, 5), 0, 0};
    for (double T : {2.5, 4.0, 6.3})
        for (auto [lo, hi] : {std::pair<long, long>{-1, 1}, {0, 3}, {-4, -1}}) {
            std::uint64_t brute = 0;
            for (long a = -7; a <= 7; ++a)
                for (long b = -7; b <= 7; ++b)
                    for (long c = -7; c <= 7; ++c) {
                        if (!(double(a * a + b * b + c * c) < T * T)) continue;
                        Rat x = Rat(a) + xi[0];
                        Rat v = x * x + b * b - c * c;
                        if (v > lo && v < hi) ++brute;
                    }
            auto I = real_interval(lo, hi, none);
            EXPECT_EQ(count_inhom_at(Q, xi, I, tv(T)).N, brute) << T << " " << lo;
        }
}

TEST(CountInhom, ZeroShiftIncludesOriginIffTargetContainsZero) {
    SConfig none;
    auto Q = QuadraticFormS::rational(diag({1, 1, -1}), none);
    RatVec zero(3, Rat(0));
    auto with0 = count_inhom_at(Q, zero, real_interval(make_rat(-1, 2), make_rat(1, 2), none), tv(5)).N;
    auto without0 = count_inhom_at(Q, zero, real_interval(make_rat(1, 10), make_rat(1, 2), none), tv(5)).N;
    // form values are integers, so the only difference is the zero level set
    auto zeros = count_inhom_at(Q, zero, real_interval(make_rat(-1, 10), make_rat(1, 10), none), tv(5)).N;
    EXPECT_EQ(with0, zeros);
    EXPECT_EQ(without0, 0u);
    EXPECT_GT(zeros, 1u);
}

TEST(CountSlices, AgreesWithEnumerationOracle) {
    Rng rng(5);
    std::vector<SConfig> ctxs{SConfig{}, SConfig({2}), SConfig({3}), SConfig({2, 3})};
    int checked = 0;
    for (int rep = 0; rep < 160; ++rep) {
        const SConfig& ctx = ctxs[rep % ctxs.size()];
        std::size_t d = rep % 5 == 0 ? 4 : 3;
        RatMatrix g(d, d);
        do {
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i; j < d; ++j) g(i, j) = g(j, i) = make_rat(rng.range(-4, 4), rng.range(1, 3));
        } while (det(g) == 0);
        QuadraticFormS Q = rep % 3 == 2 ? generic_perturbation(g, ctx, 100 + rep) : QuadraticFormS::rational(g, ctx);
        CountProblem pb;
        pb.scale = rep % 4 == 1 ? Rat(rng.range(2, 5)) : Rat(1);
        if (!is_in_NS(pb.scale.get_num(), ctx)) pb.scale = 1;
        pb.shift.resize(d);
        pb.center.resize(d);
        RatVec xi(d);
        for (std::size_t j = 0; j < d; ++j) {
            pb.shift[j] = rng.range(-2, 2);
            pb.center[j] = rep % 2 ? make_rat(rng.range(-3, 3), 5) : Rat(0);
            xi[j] = make_rat(rng.range(-4, 4), 7);
        }
        pb.form = rep % 4 == 3 ? Q.with_shift(xi) : Q;
        pb.T.t_inf = rng.uniform(1.5, d == 3 ? 5.0 : 3.0);
        for (std::size_t i = 0; i < ctx.size(); ++i) pb.T.t_p.push_back(rng.range(-1, 1));
        long a = rng.range(-6, 4);
        pb.target.lo = make_rat(a, 2);
        pb.target.hi = pb.target.lo + make_rat(rng.range(1, 6), 2);
        for (std::size_t i = 0; i < ctx.size(); ++i) pb.target.finite.push_back({Rat(rng.range(0, 3)), rng.range(-2, 1)});
        std::uint64_t fast = count_slices(pb);
        std::uint64_t slow = count_naive(pb);
        EXPECT_EQ(fast, slow) << "rep=" << rep;
        CountOptions par;
        par.threads = 3;
        EXPECT_EQ(count_slices(pb, par), fast);
        ++checked;
    }
    EXPECT_EQ(checked, 160);
}

TEST(CountSlices, Monotone) {
    SConfig ctx({3});
    auto Q = QuadraticFormS::rational(RatMatrix{{1, 1, 0}, {1, -2, 0}, {0, 0, 3}}, ctx);
    RatVec xi{make_rat(1, 4), 0, make_rat(-1, 2)};
    std::uint64_t prev = 0;
    for (double T : {2.0, 3.0, 4.5, 6.0}) {
        SInterval I{-2, 2, {{Rat(0), 0}}};
        auto n = count_inhom_at(Q, xi, I, tv(T, {1})).N;
        EXPECT_GE(n, prev);
        prev = n;
        SInterval wider{-3, 2, {{Rat(0), -1}}};
        EXPECT_GE(count_inhom_at(Q, xi, wider, tv(T, {1})).N, n);
        EXPECT_GE(count_inhom_at(Q, xi, I, tv(T, {2})).N, n);
    }
}

TEST(Rescale, RandomInstancesHold) {
    Rng rng(17);
    int holds = 0;
    std::uint64_t total = 0;
    for (int rep = 0; rep < 50; ++rep) {
        SConfig ctx = rep % 2 ? SConfig({2}) : SConfig({3});
        long qs[] = {5, 7, 11, ctx.primes()[0] == 2 ? 3L : 2L};
        Int q = qs[rep % 4];
        RatVec w(3);
        do {
            for (auto& x : w) x = Rat(rng.range(-6, 6)) / rpow(ctx.primes()[0], rng.range(0, 1));
        } while (gcd_S(q, w, ctx) != 1);
        RatMatrix g(3, 3);
        do {
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = i; j < 3; ++j) g(i, j) = g(j, i) = make_rat(rng.range(-5, 5), rng.range(1, 2));
        } while (det(g) == 0);
        auto Q = QuadraticFormS::rational(g, ctx);
        SInterval I{make_rat(rng.range(-20, 10), 3), 0, {{Rat(rng.range(0, 2)), rng.range(-1, 1)}}};
        I.hi = I.lo + rng.range(4, 40);
        TVector T = tv(rng.uniform(10, 20) * q.get_d(), {rng.range(0, 1)});
        auto r = rescale_identity_check(q, w, Q, I, T);
        holds += r.holds;
        total += r.congruence_count;
        EXPECT_TRUE(r.holds) << rep << ": " << r.congruence_count << " vs " << r.inhom_count;
    }
    EXPECT_EQ(holds, 50);
    EXPECT_GT(total, 500u);
}

TEST(Rescale, TrivialModulusAndNegativeControl) {
    SConfig ctx({2});
    auto Q = QuadraticFormS::rational(diag({1, 1, -1}), ctx);
    SInterval I{1, 9, {{Rat(0), 0}}};
    EXPECT_TRUE(rescale_identity_check(Int(1), RatVec{0, 0, 0}, Q, I, tv(9, {1})).holds);
    auto good = rescale_identity_check(Int(5), RatVec{1, 2, 0}, Q, I, tv(20, {1}));
    auto bad = rescale_identity_check(Int(5), RatVec{1, 2, 0}, Q, I, tv(20, {1}), {}, RescaleVariant::forget_q_squared);
    EXPECT_TRUE(good.holds);
    EXPECT_GT(good.congruence_count, 0u);
    EXPECT_FALSE(bad.holds);
}

TEST(Sweep, EdgeCases) {
    SConfig ctx({3});
    auto Q = QuadraticFormS::rational(diag({1, 1, -1}), ctx);
    auto fam = ShrinkingFamily::constant(ctx);
    SweepTarget tgt;
    tgt.xi = RatVec(3, Rat(0));
    EXPECT_TRUE(sweep(Q, tgt, fam, {}).rows.empty());
    auto bad = fam;
    bad.kappa_inf = 1;
    try {
        sweep(Q, tgt, bad, {tv(10, {0})});
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::family_out_of_range);
    }
    SweepOptions tiny;
    tiny.predict = false;
    tiny.count.max_candidates = 2000;
    auto r = sweep(Q, tgt, fam, {tv(5, {0}), tv(400, {0})}, tiny);
    EXPECT_TRUE(r.partial);
    EXPECT_EQ(r.rows.size(), 1u);
}

TEST(Sweep, GenericFormRatiosNearOne) {
    SConfig ctx({3});
    auto Q = generic_perturbation(RatMatrix{{1, 0, 0}, {0, 2, 1}, {0, 1, -3}}, ctx, 3);
    auto fam = ShrinkingFamily::constant(ctx, 1, Rat(1, 2));
    SweepTarget tgt;
    tgt.xi = {make_rat(1, 3), make_rat(1, 7), 0};
    std::vector<TVector> ladder{tv(10, {0}), tv(20, {1}), tv(40, {1})};
    auto r = sweep(Q, tgt, fam, ladder);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_NEAR(r.rows.back().ratio, 1.0, 0.15);
    EXPECT_TRUE(std::isfinite(r.c_Q));
}

TEST(Sweep, CongruencePredictionCarriesModulusFactor) {
    SConfig ctx({3});
    auto Q = generic_perturbation(RatMatrix{{1, 0, 0}, {0, 1, 0}, {0, 0, -2}}, ctx, 9);
    auto fam = ShrinkingFamily::constant(ctx, 2);
    SweepTarget tgt;
    tgt.q = Int(2);
    tgt.w = {1, 0, 0};
    auto r = sweep(Q, tgt, fam, {tv(40, {0}), tv(80, {1})});
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_NEAR(r.rows.back().ratio, 1.0, 0.15);
}

TEST(Sweep, ErrorExponentFit) {
    SConfig ctx;
    std::vector<CountResult> rows;
    for (double T : {10.0, 20.0, 40.0, 80.0}) {
        CountResult r;
        r.T = tv(T);
        r.prediction = 5 * T;
        r.N = static_cast<std::uint64_t>(std::llround(5 * T + std::sqrt(T) * 4));
        rows.push_back(r);
    }
    EXPECT_NEAR(fit_error_exponent(rows, 3, 0, ctx), 0.5, 0.05);
}

TEST(Family, SpecExamples) {
    SConfig ctx({3});
    ShrinkingFamily f = ShrinkingFamily::constant(ctx);
    f.kappa_inf = 0.5;
    auto I = interval_at(f, tv(4, {0}));
    EXPECT_DOUBLE_EQ(I.real_length(), 0.5);
    f.kappa_p = {1};
    auto J = interval_at(f, tv(4, {2}));
    EXPECT_EQ(J.finite[0].exponent, 2);
    EXPECT_THROW(f.validate(3, ctx), error);
    EXPECT_NO_THROW(f.validate(4, ctx));
}
