#pragma once

// Affine S-lattices and their points inside S-boxes.
//
// A point is k*g + xi with k in Z_S^d. The finite-place box conditions turn
// into congruences on an integer representative n = D*k; the real ball is
// then an ellipsoid in a sublattice of Z^d, walked Fincke-Pohst style.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <thread>

#include "sadic/matrix.hpp"
#include "sadic/qspace.hpp"
#include "sadic/sarith.hpp"

namespace sadic {

inline constexpr std::uint64_t kDefaultMaxCandidates = 50'000'000ULL;

// real place: open Euclidean ball of radius T.t_inf; place p: |v - c|_p <= p^{t_p}
struct SBox {
    TVector T;
    std::optional<RatVec> center;
};

inline double sbox_volume(const SBox& b, std::size_t d, const SConfig& ctx) {
    double v = unit_ball_volume(d) * std::pow(b.T.t_inf, double(d));
    for (std::size_t i = 0; i < ctx.size(); ++i) v *= std::pow(double(ctx.primes()[i]), double(d) * b.T.t_p.at(i));
    return v;
}

class AffineSLattice {
public:
    // exact (diagonal) mode: scale * Z_S^d * U + shift with U in GL_d(Z_S); as a set
    // this is scale * Z_S^d + shift
    static AffineSLattice exact(const SConfig& ctx, std::size_t d, const RatVec& shift = {}, const Rat& scale = 1,
                                const std::optional<RatMatrix>& basis = std::nullopt) {
        AffineSLattice l;
        l.ctx_ = ctx;
        l.d_ = d;
        l.exact_ = true;
        require(scale > 0, "lattice scale must be positive");
        l.scale_ = scale;
        l.shift_ = shift.empty() ? RatVec(d, Rat(0)) : shift;
        if (l.shift_.size() != d) fail(errc::dimension_mismatch, "shift dimension");
        if (basis) {
            require(basis->rows() == d && basis->cols() == d, "basis shape");
            for (auto& x : basis->data()) require(ctx.in_ZS(x), "basis entries must lie in Z_S");
            Rat dt = det(*basis);
            require(dt == 1 || dt == -1, "exact-mode basis must be unimodular at every place");
            l.basis_exact_ = *basis;
        }
        return l;
    }

    // split mode: real basis (det 1), p-adic bases known mod p^{k_p}, a rational
    // pre-shift eta (points are (k + eta) g + xi) and per-place post-shifts
    static AffineSLattice split(const SConfig& ctx, const Matrix<double>& basis_inf,
                                const std::map<place_t, IntMatrix>& basis_p, long k_p, const RatVec& pre_shift = {},
                                const std::vector<double>& shift_inf = {},
                                const std::map<place_t, RatVec>& shift_p = {}) {
        AffineSLattice l;
        l.ctx_ = ctx;
        l.d_ = basis_inf.rows();
        l.exact_ = false;
        l.basis_inf_ = basis_inf;
        l.k_p_ = k_p;
        l.pre_shift_ = pre_shift.empty() ? RatVec(l.d_, Rat(0)) : pre_shift;
        l.shift_inf_ = shift_inf.empty() ? std::vector<double>(l.d_, 0.0) : shift_inf;
        for (auto p : ctx.primes()) {
            auto it = basis_p.find(p);
            IntMatrix g = it == basis_p.end() ? IntMatrix(to_identity_int(l.d_)) : it->second;
            require(mpz_divisible_ui_p(Int(det(g)).get_mpz_t(), p) == 0, "p-adic basis must have unit determinant");
            l.basis_p_[p] = g;
            auto sit = shift_p.find(p);
            l.shift_p_[p] = sit == shift_p.end() ? RatVec(l.d_, Rat(0)) : sit->second;
        }
        return l;
    }

    const SConfig& context() const { return ctx_; }
    std::size_t dim() const { return d_; }
    bool exact_mode() const { return exact_; }
    const Rat& scale() const { return scale_; }
    const RatVec& shift() const { return shift_; }
    const Matrix<double>& basis_inf() const { return basis_inf_; }
    const IntMatrix& basis_p(place_t p) const { return basis_p_.at(p); }
    long padic_depth() const { return k_p_; }
    const RatVec& pre_shift() const { return pre_shift_; }
    const std::vector<double>& shift_inf() const { return shift_inf_; }
    const RatVec& shift_p(place_t p) const { return shift_p_.at(p); }

    AffineSLattice negated() const {
        AffineSLattice l = *this;
        for (auto& x : l.shift_) x = -x;
        for (auto& x : l.pre_shift_) x = -x;
        for (auto& x : l.shift_inf_) x = -x;
        for (auto& [p, v] : l.shift_p_)
            for (auto& x : v) x = -x;
        return l;
    }

private:
    static IntMatrix to_identity_int(std::size_t d) {
        IntMatrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) m(i, i) = 1;
        return m;
    }

    SConfig ctx_;
    std::size_t d_ = 0;
    bool exact_ = true;
    Rat scale_ = 1;
    RatVec shift_;
    std::optional<RatMatrix> basis_exact_;
    Matrix<double> basis_inf_;
    std::map<place_t, IntMatrix> basis_p_;
    long k_p_ = 0;
    RatVec pre_shift_;
    std::vector<double> shift_inf_;
    std::map<place_t, RatVec> shift_p_;
};

struct LatticePoint {
    IntVec n;                   // integer representative, n = D * k
    RatVec k;                   // lattice coordinate in Z_S^d (plus pre-shift in split mode)
    RatVec x;                   // exact mode: the point itself
    std::vector<double> x_inf;  // real embedding
};

namespace detail {

// integer points m with ||m M + y|| < R, visited in Fincke-Pohst order.
// Returns false from the visitor to stop early.
class EllipsoidWalker {
public:
    EllipsoidWalker(const Matrix<double>& M, const std::vector<double>& y, double R) : d_(M.rows()), R2_(R * R) {
        Eigen::MatrixXd mm(d_, d_);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = 0; j < d_; ++j) mm(i, j) = M(i, j);
        Eigen::VectorXd yy(d_);
        for (std::size_t i = 0; i < d_; ++i) yy(i) = y[i];
        // ||m M + y||^2 = (m - c) A (m - c)^T with A = M M^T, c = -y M^{-1}
        Eigen::MatrixXd A = mm * mm.transpose();
        center_ = -(mm.transpose().fullPivLu().solve(yy));
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        require(llt.info() == Eigen::Success, "lattice basis is singular");
        Eigen::MatrixXd U = llt.matrixU();  // A = U^T U
        q_.assign(d_ * d_, 0.0);
        for (std::size_t i = 0; i < d_; ++i) {
            q_[i * d_ + i] = U(i, i) * U(i, i);
            for (std::size_t j = i + 1; j < d_; ++j) q_[i * d_ + j] = U(i, j) / U(i, i);
        }
        // loose bound for rounding in the recursion; the caller filters exactly
        bound_ = R2_ * (1 + 1e-9) + 1e-9;
        det_ = std::abs(mm.fullPivLu().determinant());
    }

    double expected_count() const { return unit_ball_volume(d_) * std::pow(std::sqrt(R2_), double(d_)) / det_; }

    // values of the last coordinate (the outermost loop)
    std::pair<long, long> outer_range() const {
        std::size_t i = d_ - 1;
        double r = std::sqrt(bound_ / q_[i * d_ + i]);
        return {static_cast<long>(std::ceil(center_(i) - r)), static_cast<long>(std::floor(center_(i) + r))};
    }

    template <class Visit>
    std::uint64_t walk(Visit&& visit, long outer_lo, long outer_hi) const {
        std::vector<long> m(d_, 0);
        std::vector<double> partial(d_ + 1, 0.0);
        std::uint64_t visited = 0;
        bool stop = false;
        std::function<void(long)> rec = [&](long i) {
            if (stop) return;
            double shift = center_(i);
            for (std::size_t j = i + 1; j < d_; ++j) shift -= q_[i * d_ + j] * (m[j] - center_(j));
            double rem = bound_ - partial[i + 1];
            if (rem < 0) return;
            double r = std::sqrt(rem / q_[i * d_ + i]);
            long lo = static_cast<long>(std::ceil(shift - r)), hi = static_cast<long>(std::floor(shift + r));
            if (i == static_cast<long>(d_) - 1) {
                lo = std::max(lo, outer_lo);
                hi = std::min(hi, outer_hi);
            }
            for (long v = lo; v <= hi && !stop; ++v) {
                m[i] = v;
                double t = v - shift;
                partial[i] = partial[i + 1] + q_[i * d_ + i] * t * t;
                if (i == 0) {
                    ++visited;
                    if (!visit(m)) stop = true;
                } else {
                    rec(i - 1);
                }
            }
        };
        rec(static_cast<long>(d_) - 1);
        return visited;
    }

private:
    std::size_t d_;
    double R2_, bound_, det_ = 1;
    Eigen::VectorXd center_;
    std::vector<double> q_;
};

// k in Z_S^d with k = rho_p mod p^{-tau_p} Z_p^d for each p, and a real map
// k -> k B + y0. Produces the parametrization n = r + L m, k = n / D.
struct CongruencePlan {
    Rat D;
    Int L;
    IntVec r;
};

inline CongruencePlan plan_congruences(std::size_t d, const std::vector<unsigned long>& primes,
                                       const std::vector<long>& tau, const std::vector<RatVec>& rho) {
    CongruencePlan plan;
    plan.D = 1;
    plan.L = 1;
    std::vector<long> e(primes.size());
    for (std::size_t i = 0; i < primes.size(); ++i) {
        unsigned long p = primes[i];
        long ei = tau[i];
        for (auto& x : rho[i]) {
            auto v = valuation(x, p);
            if (v) ei = std::max(ei, -*v);
        }
        e[i] = ei;
        plan.D *= rpow(p, ei);
        plan.L *= ipow(p, static_cast<unsigned long>(ei - tau[i]));
    }
    plan.r.assign(d, Int(0));
    Int modulus = 1;
    for (std::size_t i = 0; i < primes.size(); ++i) {
        unsigned long p = primes[i];
        Int pm = ipow(p, static_cast<unsigned long>(e[i] - tau[i]));
        if (pm == 1) continue;
        for (std::size_t j = 0; j < d; ++j) {
            auto ri = rat_mod(Rat(plan.D * rho[i][j]), pm);
            require(ri.has_value(), "congruence residue not p-integral");
            // CRT merge r_j (mod modulus) with ri (mod pm)
            Int inv = *inverse_mod(modulus, pm);
            Int t = mod((*ri - plan.r[j]) * inv, pm);
            plan.r[j] += modulus * t;
        }
        modulus *= pm;
    }
    for (auto& x : plan.r) x = mod(x, modulus);
    return plan;
}

struct WalkSetup {
    CongruencePlan plan;
    Matrix<double> M;       // basis for m
    std::vector<double> y;  // offset for m
    double R;
};

}  // namespace detail

// The enumeration problem for (lattice, box) in normalized form.
class PointEnumerator {
public:
    PointEnumerator(const AffineSLattice& lat, const SBox& box, std::uint64_t max_candidates = kDefaultMaxCandidates)
        : lat_(lat), box_(box), budget_(max_candidates) {
        const std::size_t d = lat.dim();
        const auto& primes = lat.context().primes();
        require(box.T.t_p.size() == primes.size(), "box needs one exponent per finite place");
        require(box.T.t_inf > 0, "box radius must be positive");
        if (box.center) require(box.center->size() == d, "box center dimension");
        RatVec c = box.center ? *box.center : RatVec(d, Rat(0));
        std::vector<long> tau(primes.size());
        std::vector<RatVec> rho(primes.size());

        if (lat.exact_mode()) {
            // x - c = s k + zeta, zeta = shift - c
            RatVec zeta(d);
            for (std::size_t j = 0; j < d; ++j) zeta[j] = lat.shift()[j] - c[j];
            for (std::size_t i = 0; i < primes.size(); ++i) {
                tau[i] = box.T.t_p[i] + *valuation(lat.scale(), primes[i]);
                rho[i].resize(d);
                for (std::size_t j = 0; j < d; ++j) rho[i][j] = -zeta[j] / lat.scale();
            }
            zeta_exact_ = zeta;
        } else {
            for (std::size_t i = 0; i < primes.size(); ++i) {
                unsigned long p = primes[i];
                tau[i] = box.T.t_p[i];
                // zeta = (xi_p - c) g_p^{-1}, needed mod p^{-t}
                RatVec z(d);
                for (std::size_t j = 0; j < d; ++j) z[j] = lat.shift_p(p)[j] - c[j];
                std::optional<long> vz;
                for (auto& x : z) {
                    auto v = valuation(x, p);
                    if (v) vz = vz ? std::min(*vz, *v) : *v;
                }
                rho[i].resize(d);
                for (std::size_t j = 0; j < d; ++j) rho[i][j] = -lat.pre_shift()[j];
                if (vz) {
                    if (lat.padic_depth() + *vz < -tau[i])
                        fail(errc::insufficient_padic_precision,
                             "p-adic data known mod p^" + std::to_string(lat.padic_depth()) + " cannot decide the box at p=" +
                                 std::to_string(p));
                    Int pk = ipow(p, static_cast<unsigned long>(lat.padic_depth()));
                    IntMatrix ginv = inverse_mod_matrix(lat.basis_p(p), pk);
                    IntVec zi(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        auto r = rat_mod(Rat(z[j] / rpow(p, *vz)), pk);
                        require(r.has_value(), "p-adic shift not p-integral after scaling");
                        zi[j] = *r;
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        Int acc = 0;
                        for (std::size_t l = 0; l < d; ++l) acc += zi[l] * ginv(l, j);
                        rho[i][j] -= rpow(p, *vz) * Rat(mod(acc, pk));
                    }
                }
            }
        }
        plan_ = detail::plan_congruences(d, primes, tau, rho);

        // real place: x - c = k B + y0 with k = (r + L m)/D
        Matrix<double> B(d, d);
        std::vector<double> y0(d);
        if (lat.exact_mode()) {
            for (std::size_t j = 0; j < d; ++j) {
                B(j, j) = lat.scale().get_d();
                y0[j] = zeta_exact_[j].get_d();
            }
        } else {
            B = lat.basis_inf();
            for (std::size_t j = 0; j < d; ++j) y0[j] = lat.shift_inf()[j] - c[j].get_d();
            // pre-shift enters through k + eta
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t l = 0; l < d; ++l) y0[j] += lat.pre_shift()[l].get_d() * B(l, j);
        }
        B_ = B;
        const double LD = Rat(Rat(plan_.L) / plan_.D).get_d();
        Matrix<double> M(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) M(i, j) = LD * B(i, j);
        std::vector<double> y = y0;
        for (std::size_t l = 0; l < d; ++l) {
            double rl = Rat(Rat(plan_.r[l]) / plan_.D).get_d();
            for (std::size_t j = 0; j < d; ++j) y[j] += rl * B(l, j);
        }
        y0_ = y0;
        walker_.emplace(M, y, box.T.t_inf);
        if (walker_->expected_count() > static_cast<double>(budget_))
            fail(errc::region_too_large, "projected candidate count " + std::to_string(walker_->expected_count()) +
                                             " exceeds budget " + std::to_string(budget_));
        R2_exact_ = Rat(box.T.t_inf) * Rat(box.T.t_inf);
    }

    // visit accepted points in walk order; visitor gets (n, x_inf) and returns false to stop
    template <class Visit>
    std::uint64_t walk_raw(Visit&& visit, long outer_lo, long outer_hi) const {
        const std::size_t d = lat_.dim();
        IntVec n(d);
        std::vector<double> x(d);
        std::uint64_t seen = 0;
        const bool exact = lat_.exact_mode();
        const double invD = Rat(1 / plan_.D).get_d();
        walker_->walk(
            [&](const std::vector<long>& m) {
                if (++seen > 4 * budget_ + 1000) fail(errc::region_too_large, "candidate budget exhausted");
                for (std::size_t j = 0; j < d; ++j) n[j] = plan_.r[j] + plan_.L * m[j];
                if (exact) {
                    // exact: || s n / D + zeta ||^2 < T^2
                    Rat s2 = 0;
                    Rat sD = lat_.scale() / plan_.D;
                    for (std::size_t j = 0; j < d; ++j) {
                        Rat v = sD * n[j] + zeta_exact_[j];
                        s2 += v * v;
                        x[j] = v.get_d();
                    }
                    if (!(s2 < R2_exact_)) return true;
                } else {
                    double s2 = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        double v = y0_[j];
                        for (std::size_t l = 0; l < d; ++l) v += n[l].get_d() * invD * B_(l, j);
                        x[j] = v;
                        s2 += v * v;
                    }
                    if (!(s2 < box_.T.t_inf * box_.T.t_inf)) return true;
                }
                return visit(n, x);
            },
            outer_lo, outer_hi);
        return seen;
    }

    std::pair<long, long> outer_range() const { return walker_->outer_range(); }
    const detail::CongruencePlan& plan() const { return plan_; }
    const AffineSLattice& lattice() const { return lat_; }
    const SBox& box() const { return box_; }

    LatticePoint make_point(const IntVec& n, const std::vector<double>& x_inf_rel) const {
        LatticePoint pt;
        const std::size_t d = lat_.dim();
        pt.n = n;
        pt.k.resize(d);
        for (std::size_t j = 0; j < d; ++j) pt.k[j] = Rat(n[j]) / plan_.D;
        pt.x_inf = x_inf_rel;
        RatVec c = box_.center ? *box_.center : RatVec(d, Rat(0));
        if (box_.center)
            for (std::size_t j = 0; j < d; ++j) pt.x_inf[j] += c[j].get_d();
        if (lat_.exact_mode()) {
            pt.x.resize(d);
            for (std::size_t j = 0; j < d; ++j) pt.x[j] = lat_.scale() * pt.k[j] + lat_.shift()[j];
        } else {
            for (std::size_t j = 0; j < d; ++j) pt.k[j] += lat_.pre_shift()[j];
        }
        return pt;
    }

    static IntMatrix inverse_mod_matrix(const IntMatrix& g, const Int& m) {
        const std::size_t d = g.rows();
        RatMatrix inv = inverse(to_rat(g));
        IntMatrix out(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                auto r = rat_mod(inv(i, j), m);
                require(r.has_value(), "p-adic basis not invertible mod p^k");
                out(i, j) = *r;
            }
        return out;
    }

private:
    const AffineSLattice& lat_;
    SBox box_;
    std::uint64_t budget_;
    detail::CongruencePlan plan_;
    std::optional<detail::EllipsoidWalker> walker_;
    RatVec zeta_exact_;
    Rat R2_exact_;
    Matrix<double> B_;
    std::vector<double> y0_;
};

// Lambda ∩ B in lexicographic order of the integer representative. With
// threads > 1 the outermost coordinate range is split into shards.
inline std::vector<LatticePoint> enumerate_points(const AffineSLattice& lat, const SBox& box,
                                                  std::uint64_t max_candidates = kDefaultMaxCandidates,
                                                  unsigned threads = 1) {
    PointEnumerator en(lat, box, max_candidates);
    auto [lo, hi] = en.outer_range();
    std::vector<std::pair<IntVec, std::vector<double>>> raw;
    auto collect = [&](long a, long b, std::vector<std::pair<IntVec, std::vector<double>>>& out) {
        en.walk_raw(
            [&](const IntVec& n, const std::vector<double>& x) {
                out.emplace_back(n, x);
                return true;
            },
            a, b);
    };
    if (threads <= 1 || hi - lo < 4) {
        collect(lo, hi, raw);
    } else {
        std::vector<std::vector<std::pair<IntVec, std::vector<double>>>> parts(threads);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(threads);
        long span = hi - lo + 1;
        for (unsigned t = 0; t < threads; ++t) {
            long a = lo + span * t / threads, b = lo + span * (t + 1) / threads - 1;
            pool.emplace_back([&, t, a, b] {
                try {
                    collect(a, b, parts[t]);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
        for (auto& p : parts)
            for (auto& x : p) raw.push_back(std::move(x));
    }
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<LatticePoint> pts;
    pts.reserve(raw.size());
    for (auto& [n, x] : raw) pts.push_back(en.make_point(n, x));
    return pts;
}

inline std::uint64_t count_points(const AffineSLattice& lat, const SBox& box,
                                  std::uint64_t max_candidates = kDefaultMaxCandidates) {
    PointEnumerator en(lat, box, max_candidates);
    auto [lo, hi] = en.outer_range();
    std::uint64_t c = 0;
    en.walk_raw(
        [&](const IntVec&, const std::vector<double>&) {
            ++c;
            return true;
        },
        lo, hi);
    return c;
}

// ---------------------------------------------------------------- test functions

// Indicator of a product set: real part a Euclidean ball or an axis box,
// finite part balls p^{-t_p} Z_p^d around 0.
struct TestFunction {
    enum class Kind { ball, box };
    Kind kind = Kind::ball;
    double radius = 1;
    std::vector<double> real_center;  // ball only; empty = origin
    std::vector<double> lo, hi;       // box only
    std::vector<long> t_p;            // per finite place, ordered as the SConfig

    static TestFunction ball(double r, std::vector<long> tp) {
        TestFunction f;
        f.kind = Kind::ball;
        f.radius = r;
        f.t_p = std::move(tp);
        return f;
    }
    static TestFunction box(std::vector<double> lo, std::vector<double> hi, std::vector<long> tp) {
        require(lo.size() == hi.size(), "box bounds");
        for (std::size_t i = 0; i < lo.size(); ++i) require(lo[i] < hi[i], "box sides must be positive");
        TestFunction f;
        f.kind = Kind::box;
        f.lo = std::move(lo);
        f.hi = std::move(hi);
        f.t_p = std::move(tp);
        return f;
    }

    // S-box containing the support
    SBox support(std::size_t d) const {
        SBox b;
        b.T.t_p = t_p;
        if (kind == Kind::ball) {
            b.T.t_inf = radius;
            if (!real_center.empty()) {
                RatVec c;
                for (double v : real_center) c.push_back(Rat(v));
                b.center = c;
            }
        } else {
            double r2 = 0;
            for (std::size_t i = 0; i < d; ++i) {
                double m = std::max(std::abs(lo[i]), std::abs(hi[i]));
                r2 += m * m;
            }
            b.T.t_inf = std::sqrt(r2) * (1 + 1e-12) + 1e-12;
        }
        return b;
    }

    bool contains_real(const std::vector<double>& x) const {
        if (kind == Kind::ball) {
            double s = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double v = x[i] - (real_center.empty() ? 0.0 : real_center[i]);
                s += v * v;
            }
            return s < radius * radius;
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
        return true;
    }

    double real_volume(std::size_t d) const {
        if (kind == Kind::ball) return unit_ball_volume(d) * std::pow(radius, double(d));
        double v = 1;
        for (std::size_t i = 0; i < d; ++i) v *= hi[i] - lo[i];
        return v;
    }

    double volume(std::size_t d, const SConfig& ctx) const {
        double v = real_volume(d);
        for (std::size_t i = 0; i < ctx.size(); ++i) v *= std::pow(double(ctx.primes()[i]), double(d) * t_p.at(i));
        return v;
    }
};

// whether a point of Lambda (given by n and its real embedding) is the origin at every place
inline bool is_origin_point(const PointEnumerator& en, const IntVec& n, const std::vector<double>& x_inf) {
    const auto& lat = en.lattice();
    const std::size_t d = lat.dim();
    const Rat& D = en.plan().D;
    if (lat.exact_mode()) {
        for (std::size_t j = 0; j < d; ++j)
            if (lat.scale() * n[j] / D + lat.shift()[j] != 0) return false;
        return true;
    }
    for (double v : x_inf)
        if (std::abs(v) > 1e-9) return false;
    for (auto p : lat.context().primes()) {
        Int pk = ipow(p, static_cast<unsigned long>(lat.padic_depth()));
        const auto& g = lat.basis_p(p);
        for (std::size_t j = 0; j < d; ++j) {
            Rat acc = lat.shift_p(p)[j];
            for (std::size_t l = 0; l < d; ++l) acc += (Rat(n[l]) / D + lat.pre_shift()[l]) * Rat(g(l, j));
            auto r = rat_mod(acc, pk);
            if (!r || *r != 0) return false;
        }
    }
    return true;
}

enum class SiegelMode { affine, homogeneous };

// sum of the indicator over Lambda (homogeneous: over Lambda minus the origin)
inline std::uint64_t siegel_transform(const TestFunction& f, const AffineSLattice& lat, SiegelMode mode,
                                      std::uint64_t max_candidates = kDefaultMaxCandidates) {
    const std::size_t d = lat.dim();
    SBox sup = f.support(d);
    PointEnumerator en(lat, sup, max_candidates);
    auto [lo, hi] = en.outer_range();
    std::uint64_t c = 0;
    std::vector<double> xa(d);
    const bool centered = sup.center.has_value();
    en.walk_raw(
        [&](const IntVec& n, const std::vector<double>& x) {
            if (f.kind == TestFunction::Kind::box && !f.contains_real(x)) return true;
            if (mode == SiegelMode::homogeneous) {
                for (std::size_t j = 0; j < d; ++j) xa[j] = x[j] + (centered ? f.real_center[j] : 0.0);
                if (is_origin_point(en, n, xa)) return true;
            }
            ++c;
            return true;
        },
        lo, hi);
    return c;
}

inline double discrepancy(double count, double volume) { return std::abs(count - volume); }

struct CountAndDiscrepancy {
    std::uint64_t count = 0;
    double volume = 0;
    double discrepancy = 0;
};

inline CountAndDiscrepancy count_in_set(const AffineSLattice& lat, const TestFunction& f,
                                        std::uint64_t max_candidates = kDefaultMaxCandidates) {
    CountAndDiscrepancy r;
    r.count = siegel_transform(f, lat, SiegelMode::affine, max_candidates);
    r.volume = f.volume(lat.dim(), lat.context());
    r.discrepancy = discrepancy(double(r.count), r.volume);
    return r;
}

// D(A) <= max(D(A1), D(A2)) + vol(A2 - A1) for A1 ⊆ A ⊆ A2
inline bool discrepancy_sandwich_holds(double dA, double dA1, double dA2, double vol_gap) {
    return dA <= std::max(dA1, dA2) + vol_gap + 1e-9;
}

}  // namespace sadic
