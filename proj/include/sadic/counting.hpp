#pragma once

// Counting k in s*Z_S^d + zeta with ||k - c||_S inside the S-box and the form
// value in a target set, plus sweeps against c_Q vol(I_T) |T|^{d-2}.
//
// The counter slices the real ball along one coordinate: for fixed other
// coordinates the form is a quadratic in the remaining one, so only the few
// integers near its preimage of I need an exact check.

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "sadic/congruence.hpp"
#include "sadic/family.hpp"
#include "sadic/slattice.hpp"
#include "sadic/volume.hpp"

namespace sadic {

struct CountOptions {
    std::uint64_t max_candidates = kDefaultMaxCandidates;
    unsigned threads = 1;
};

// points x = scale * k + shift, k in Z_S^d; real ball ||x - center|| < T_inf,
// |x - center|_p <= p^{t_p}; accepted when form(x) lies in target (the form
// applies its own inhomogeneous shift)
struct CountProblem {
    QuadraticFormS form;
    Rat scale = 1;
    RatVec shift;
    RatVec center;
    TVector T;
    SInterval target;
    std::optional<Rat> radius;  // exact real radius when T_inf is not a double
};

namespace detail {

inline Rat radius_squared(const CountProblem& pb) {
    Rat r = pb.radius ? *pb.radius : Rat(pb.T.t_inf);
    return r * r;
}

inline void check_problem(const CountProblem& pb) {
    const std::size_t d = pb.form.dim();
    const auto& ctx = pb.form.context();
    if (pb.shift.size() != d || pb.center.size() != d) fail(errc::dimension_mismatch, "count shift/center dimension");
    if (pb.T.t_p.size() != ctx.size()) fail(errc::dimension_mismatch, "T needs one exponent per finite place");
    if (pb.target.finite.size() != ctx.size()) fail(errc::dimension_mismatch, "target needs one set per finite place");
    require(pb.T.t_inf > 0, "T_inf must be positive");
    if (!pb.form.nondegenerate()) fail(errc::degenerate_form, "counting needs a non-degenerate form");
}

inline bool accept_point(const CountProblem& pb, const RatVec& x, const Rat& R2) {
    Rat s2 = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        Rat v = x[j] - pb.center[j];
        s2 += v * v;
    }
    if (!(s2 < R2)) return false;
    return pb.target.contains(eval_form(pb.form, x), pb.form.context());
}

// smallest z in [a, b] with pred(z), or b + 1; pred monotone false -> true
template <class P>
long first_true(long a, long b, P&& pred) {
    long lo = a, hi = b + 1;
    while (lo < hi) {
        long mid = lo + (hi - lo) / 2;
        if (pred(mid)) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

}  // namespace detail

// x = x0 + h m over m in Z^d, from the congruence plan of the box
struct SliceParam {
    RatVec x0;
    Rat h;
};

inline SliceParam slice_param(const CountProblem& pb) {
    const std::size_t d = pb.form.dim();
    const auto& primes = pb.form.context().primes();
    require(pb.scale > 0, "lattice scale must be positive");
    std::vector<long> tau(primes.size());
    std::vector<RatVec> rho(primes.size(), RatVec(d));
    for (std::size_t i = 0; i < primes.size(); ++i) {
        tau[i] = pb.T.t_p[i] + *valuation(pb.scale, primes[i]);
        for (std::size_t j = 0; j < d; ++j) rho[i][j] = -(pb.shift[j] - pb.center[j]) / pb.scale;
    }
    auto plan = detail::plan_congruences(d, primes, tau, rho);
    SliceParam sp;
    sp.h = pb.scale * plan.L / plan.D;
    sp.x0.resize(d);
    for (std::size_t j = 0; j < d; ++j) sp.x0[j] = pb.scale * plan.r[j] / plan.D + pb.shift[j];
    return sp;
}

inline std::uint64_t count_slices(const CountProblem& pb, const CountOptions& opt = {}) {
    detail::check_problem(pb);
    const std::size_t d = pb.form.dim();
    const SliceParam sp = slice_param(pb);
    const double h = sp.h.get_d();
    const Matrix<double>& G = pb.form.gram_inf();
    const double T = pb.T.t_inf;
    const Rat R2 = detail::radius_squared(pb);
    const double lo = pb.target.lo.get_d(), hi = pb.target.hi.get_d();

    // slice along the coordinate with the largest diagonal entry
    std::size_t js = 0;
    for (std::size_t j = 1; j < d; ++j)
        if (std::abs(G(j, j)) > std::abs(G(js, js))) js = j;
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < d; ++j)
        if (j != js) others.push_back(j);

    // ball in m-space: center y, radius rho
    std::vector<double> x0(d), xi(d, 0.0), y(d);
    for (std::size_t j = 0; j < d; ++j) {
        x0[j] = sp.x0[j].get_d();
        y[j] = (pb.center[j].get_d() - x0[j]) / h;
    }
    if (pb.form.has_shift()) xi = pb.form.shift_inf();
    const double rho = T / h;
    double slices = unit_ball_volume(d - 1) * std::pow(rho + 1, double(d - 1));
    if (slices > double(opt.max_candidates))
        fail(errc::region_too_large,
             "projected slice count " + std::to_string(slices) + " exceeds budget " + std::to_string(opt.max_candidates));

    std::atomic<std::uint64_t> work{0};
    const double rho2 = rho * rho;

    auto run = [&](long outer_lo, long outer_hi) -> std::uint64_t {
        std::uint64_t count = 0, local_work = 0;
        std::vector<long> m(d, 0);
        std::vector<double> b(d);
        RatVec x(d);
        auto flush = [&] {
            if (work.fetch_add(local_work) + local_work > opt.max_candidates)
                fail(errc::region_too_large, "candidate budget exhausted");
            local_work = 0;
        };
        auto slice = [&](double partial) {
            if (++local_work >= 4096) flush();
            double rz = std::sqrt(std::max(0.0, rho2 - partial));
            long za = static_cast<long>(std::ceil(y[js] - rz)) - 1, zb = static_cast<long>(std::floor(y[js] + rz)) + 1;
            // base point with m_js = 0
            for (std::size_t j = 0; j < d; ++j) b[j] = x0[j] + h * double(j == js ? 0 : m[j]) + xi[j];
            double gb = 0, qb = 0;
            for (std::size_t j = 0; j < d; ++j) {
                double row = 0;
                for (std::size_t l = 0; l < d; ++l) row += G(j, l) * b[l];
                qb += b[j] * row;
                if (j == js) gb = row;
            }
            const double A2 = h * h * G(js, js), A1 = 2 * h * gb, A0 = qb;
            const double Z = std::max(std::abs(double(za)), std::abs(double(zb)));
            double scale = std::abs(A0) + std::abs(A1) * Z + std::abs(A2) * Z * Z + std::abs(lo) + std::abs(hi) + 1;
            for (std::size_t j = 0; j < d; ++j) scale += std::abs(G(js, j)) * (std::abs(b[j]) + h * Z) * (std::abs(b[j]) + h * Z);
            const double mg = 1e-9 * scale;
            auto f = [&](long z) { return (A2 * double(z) + A1) * double(z) + A0; };

            auto scan = [&](long a, long c) {
                if (a > c) return;
                // monotone on [a, c]: direction from the derivative at the midpoint
                double mid = 0.5 * (double(a) + double(c));
                bool inc = 2 * A2 * mid + A1 >= 0;
                long s, e;
                if (inc) {
                    s = detail::first_true(a, c, [&](long z) { return f(z) > lo - mg; });
                    e = detail::first_true(a, c, [&](long z) { return f(z) >= hi + mg; }) - 1;
                } else {
                    s = detail::first_true(a, c, [&](long z) { return f(z) < hi + mg; });
                    e = detail::first_true(a, c, [&](long z) { return f(z) <= lo - mg; }) - 1;
                }
                s = std::max(a, s - 1);
                e = std::min(c, e + 1);
                for (long z = s; z <= e; ++z) {
                    ++local_work;
                    double fz = f(z);
                    if (fz < lo - mg || fz > hi + mg) continue;
                    double dz = double(z) - y[js];
                    if ((dz * dz + partial) * h * h > T * T * (1 + 1e-9)) continue;
                    m[js] = z;
                    for (std::size_t j = 0; j < d; ++j) x[j] = sp.x0[j] + sp.h * m[j];
                    if (detail::accept_point(pb, x, R2)) ++count;
                }
                m[js] = 0;
            };
            if (A2 != 0) {
                double zv = -A1 / (2 * A2);
                long split = static_cast<long>(std::floor(std::clamp(zv, double(za) - 1, double(zb) + 1)));
                scan(za, std::min(zb, split));
                scan(std::max(za, split + 1), zb);
            } else {
                scan(za, zb);
            }
        };
        std::function<void(std::size_t, double)> rec = [&](std::size_t lvl, double partial) {
            if (lvl == others.size()) {
                slice(partial);
                return;
            }
            std::size_t j = others[lvl];
            double r = std::sqrt(std::max(0.0, rho2 - partial));
            long a = static_cast<long>(std::ceil(y[j] - r)) - 1, c = static_cast<long>(std::floor(y[j] + r)) + 1;
            if (lvl == 0) {
                a = std::max(a, outer_lo);
                c = std::min(c, outer_hi);
            }
            for (long v = a; v <= c; ++v) {
                double t = double(v) - y[j];
                double np = partial + t * t;
                if (np > rho2 * (1 + 1e-9) + 1e-9) continue;
                m[j] = v;
                rec(lvl + 1, np);
            }
            m[j] = 0;
        };
        rec(0, 0.0);
        flush();
        return count;
    };

    const std::size_t j0 = others[0];
    long olo = static_cast<long>(std::ceil(y[j0] - rho)) - 1, ohi = static_cast<long>(std::floor(y[j0] + rho)) + 1;
    unsigned threads = std::max(1u, opt.threads);
    if (threads == 1 || ohi - olo < 8) return run(olo, ohi);
    std::vector<std::uint64_t> part(threads, 0);
    std::vector<std::exception_ptr> errs(threads);
    std::vector<std::thread> pool;
    long span = ohi - olo + 1;
    for (unsigned t = 0; t < threads; ++t) {
        long a = olo + span * t / threads, c = olo + span * (t + 1) / threads - 1;
        pool.emplace_back([&, t, a, c] {
            try {
                part[t] = run(a, c);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    std::uint64_t total = 0;
    for (auto c : part) total += c;
    return total;
}

// oracle: every lattice point of the box, filtered one by one
inline std::uint64_t count_naive(const CountProblem& pb, std::uint64_t max_candidates = kDefaultMaxCandidates) {
    detail::check_problem(pb);
    auto lat = AffineSLattice::exact(pb.form.context(), pb.form.dim(), pb.shift, pb.scale);
    auto pts = enumerate_points(lat, SBox{pb.T, pb.center}, max_candidates);
    std::uint64_t n = 0;
    for (auto& pt : pts)
        if (pb.target.contains(eval_form(pb.form, pt.x), pb.form.context())) ++n;
    return n;
}

// ------------------------------------------------------------------ counters

struct CountResult {
    std::uint64_t N = 0;
    double vol_I = 0;
    double prediction = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    TVector T;
    double wall_ms = 0;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void fill_prediction(CountResult& r, std::optional<double> constant, double q_factor, std::size_t d,
                            const SConfig& ctx) {
    if (!constant) return;
    r.prediction = *constant * q_factor * r.vol_I * std::pow(tvector_abs(r.T, ctx), double(d) - 2);
    r.ratio = r.prediction > 0 ? double(r.N) / r.prediction : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

// #{k in q Z_S^d + w : ||k||_S in the box, Q(k) in I}. q = 1 is allowed here
// so the rescaling identity can be probed at its edge.
inline CountResult count_congruence_raw(const Int& q, const RatVec& w, const QuadraticFormS& Q, const SInterval& I,
                                        const TVector& T, const CountOptions& opt = {},
                                        std::optional<double> constant = std::nullopt) {
    const auto& ctx = Q.context();
    require(q >= 1, "modulus must be positive");
    require(is_in_NS(q, ctx), "modulus must be coprime to the finite places");
    require(!Q.has_shift(), "congruence counting takes a homogeneous form");
    if (w.size() != Q.dim()) fail(errc::dimension_mismatch, "shift vector dimension");
    require(q == 1 || gcd_S(q, w, ctx) == 1, "shift vector must satisfy gcd_S(q, w) = 1");
    auto t0 = std::chrono::steady_clock::now();
    CountProblem pb{Q, Rat(q), w, RatVec(Q.dim(), Rat(0)), T, I, std::nullopt};
    CountResult r;
    r.T = T;
    r.N = count_slices(pb, opt);
    r.vol_I = I.volume(ctx);
    detail::fill_prediction(r, constant, std::pow(q.get_d(), -double(Q.dim())), Q.dim(), ctx);
    r.wall_ms = detail::elapsed_ms(t0);
    return r;
}

inline CountResult count_congruence(const CongruenceContext& cc, const QuadraticFormS& Q, const ShrinkingFamily& fam,
                                    const TVector& T, const CountOptions& opt = {},
                                    std::optional<double> constant = std::nullopt) {
    if (Q.dim() != cc.d) fail(errc::dimension_mismatch, "form and congruence context dimensions differ");
    require(Q.context() == cc.ctx, "form and congruence context use different places");
    fam.validate(Q.dim(), Q.context());
    return count_congruence_raw(cc.q, cc.w, Q, interval_at(fam, T), T, opt, constant);
}

// #{k in Z_S^d : ||k - c||_S in the box, Q(k + xi) in I}; the box is centered
// at the origin unless a center is given
inline CountResult count_inhom_at(const QuadraticFormS& Q, const RatVec& xi, const SInterval& I, const TVector& T,
                                  const CountOptions& opt = {}, std::optional<double> constant = std::nullopt,
                                  const std::optional<RatVec>& center = std::nullopt) {
    const auto& ctx = Q.context();
    require(!Q.has_shift(), "pass the shift separately");
    auto t0 = std::chrono::steady_clock::now();
    CountProblem pb{Q.with_shift(xi), Rat(1), RatVec(Q.dim(), Rat(0)), center ? *center : RatVec(Q.dim(), Rat(0)), T, I,
                    std::nullopt};
    CountResult r;
    r.T = T;
    r.N = count_slices(pb, opt);
    r.vol_I = I.volume(ctx);
    detail::fill_prediction(r, constant, 1.0, Q.dim(), ctx);
    r.wall_ms = detail::elapsed_ms(t0);
    return r;
}

inline CountResult count_inhom(const QuadraticFormS& Q, const RatVec& xi, const ShrinkingFamily& fam, const TVector& T,
                               const CountOptions& opt = {}, std::optional<double> constant = std::nullopt) {
    fam.validate(Q.dim(), Q.context());
    return count_inhom_at(Q, xi, interval_at(fam, T), T, opt, constant);
}

// --------------------------------------------------------- rescaling identity

enum class RescaleVariant { correct, forget_q_squared };

struct RescaleCheck {
    std::uint64_t congruence_count = 0;
    std::uint64_t inhom_count = 0;
    bool holds = false;
};

// k1 = k / q maps q Z_S^d + w onto Z_S^d + w/q, the real radius to T/q and the
// target to I / q^2. The inhomogeneous side measures the box around the
// point k1 itself, i.e. centered at -w/q in the Z_S^d coordinate.
inline RescaleCheck rescale_identity_check(const Int& q, const RatVec& w, const QuadraticFormS& Q, const SInterval& I,
                                           const TVector& T, const CountOptions& opt = {},
                                           RescaleVariant variant = RescaleVariant::correct) {
    const auto& ctx = Q.context();
    RescaleCheck out;
    out.congruence_count = count_congruence_raw(q, w, Q, I, T, opt).N;
    const Rat q2 = variant == RescaleVariant::correct ? Rat(q * q) : Rat(1);
    SInterval I2;
    I2.lo = I.lo / q2;
    I2.hi = I.hi / q2;
    for (std::size_t i = 0; i < ctx.size(); ++i) I2.finite.push_back({I.finite[i].center / q2, I.finite[i].exponent});
    TVector T2 = T;
    T2.t_inf = T.t_inf / q.get_d();
    RatVec xi(w.size()), c(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        xi[j] = w[j] / q;
        c[j] = -xi[j];
    }
    // T / q rounds in double; the exact radius keeps boundary points consistent
    CountProblem pb{Q.with_shift(xi), Rat(1), RatVec(w.size(), Rat(0)), c, T2, I2, Rat(T.t_inf) / q};
    out.inhom_count = count_slices(pb, opt);
    out.holds = out.congruence_count == out.inhom_count;
    return out;
}

inline RescaleCheck rescale_identity_check(const CongruenceContext& cc, const QuadraticFormS& Q,
                                           const ShrinkingFamily& fam, const TVector& T, const CountOptions& opt = {},
                                           RescaleVariant variant = RescaleVariant::correct) {
    fam.validate(Q.dim(), Q.context());
    return rescale_identity_check(cc.q, cc.w, Q, interval_at(fam, T), T, opt, variant);
}

// ------------------------------------------------------------------ forms

// random integral Gram matrix, non-degenerate and isotropic at every place
inline QuadraticFormS sample_isotropic_rational(std::size_t d, const SConfig& ctx, Rng& rng, long max_entry = 3) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        RatMatrix g(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) g(i, j) = g(j, i) = Rat(rng.range(-max_entry, max_entry));
        if (det(g) == 0) continue;
        auto q = QuadraticFormS::rational(g, ctx);
        if (is_isotropic_everywhere(q)) return q;
    }
    fail(errc::budget_exceeded, "no isotropic form found");
}

// base + eps * R at the real place only; eps is scaled by the golden ratio so
// the real Gram matrix is irrational-looking while finite places stay exact.
// Small eps leaves the values on congruence classes visibly biased at moderate
// T (the base form is constant mod q on each class), hence the default of 1.
// Perturbations that make the real form definite are redrawn.
inline QuadraticFormS generic_perturbation(const RatMatrix& base, const SConfig& ctx, std::uint64_t seed,
                                           double eps = 1.0) {
    const std::size_t d = base.rows();
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    std::map<place_t, RatMatrix> fin;
    for (auto p : ctx.primes()) fin[p] = base;
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        Matrix<double> g = to_double(base);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) {
                double r = eps * phi * rng.uniform(-1, 1);
                g(i, j) += r;
                if (i != j) g(j, i) += r;
            }
        auto q = QuadraticFormS::split(g, fin, ctx);
        if (q.nondegenerate() && is_isotropic(q, kInf)) return q;
    }
    fail(errc::anisotropic_form, "perturbation keeps producing a definite real form");
}

// ------------------------------------------------------------------ sweeps

struct SweepTarget {
    // congruence case when q is set (q Z_S^d + w); inhomogeneous shift xi otherwise
    std::optional<Int> q;
    RatVec w;
    RatVec xi;
};

struct SweepOptions {
    CountOptions count;
    bool predict = true;
};

struct SweepResult {
    std::vector<CountResult> rows;
    double constant = std::numeric_limits<double>::quiet_NaN();  // volume ratio at the largest rung
    double c_Q = std::numeric_limits<double>::quiet_NaN();       // asymptotic leading constant
    double delta_hat = std::numeric_limits<double>::quiet_NaN();
    bool partial = false;
    std::string stop_reason;
};

// slope fit of log|N - prediction| against log|T|; the excess over
// d - 2 - kappa is reported as the error exponent
inline double fit_error_exponent(const std::vector<CountResult>& rows, std::size_t d, double kappa, const SConfig& ctx) {
    std::vector<double> xs, ys;
    for (auto& r : rows) {
        if (!std::isfinite(r.prediction)) continue;
        double e = std::abs(double(r.N) - r.prediction);
        if (e <= 0) continue;
        xs.push_back(std::log(tvector_abs(r.T, ctx)));
        ys.push_back(std::log(e));
    }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(xs.size());
    my /= double(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0) return std::numeric_limits<double>::quiet_NaN();
    return (double(d) - 2 - kappa) - sxy / sxx;
}

inline SweepResult sweep(const QuadraticFormS& Q, const SweepTarget& target, const ShrinkingFamily& fam,
                         const std::vector<TVector>& ladder, const SweepOptions& opt = {}) {
    const std::size_t d = Q.dim();
    const auto& ctx = Q.context();
    fam.validate(d, ctx);
    SweepResult out;
    if (ladder.empty()) return out;
    for (std::size_t i = 1; i < ladder.size(); ++i)
        require(ladder[i].dominates(ladder[i - 1]), "ladder must be increasing");
    std::optional<double> constant;
    if (opt.predict) {
        const TVector& top = ladder.back();
        TVector half = top;
        half.t_inf = top.t_inf / 2;
        auto va = leading_constant(Q, fam, {half, top});
        out.constant = va.table.back().ratio;
        out.c_Q = va.c_Q;
        constant = out.constant;
    }
    for (auto& T : ladder) {
        try {
            if (target.q)
                out.rows.push_back(count_congruence_raw(*target.q, target.w, Q, interval_at(fam, T), T, opt.count, constant));
            else
                out.rows.push_back(count_inhom_at(Q, target.xi, interval_at(fam, T), T, opt.count, constant));
        } catch (const error& e) {
            if (!e.is_budget()) throw;
            out.partial = true;
            out.stop_reason = e.what();
            break;
        }
    }
    out.delta_hat = fit_error_exponent(out.rows, d, fam.kappa_inf, ctx);
    return out;
}

}  // namespace sadic
