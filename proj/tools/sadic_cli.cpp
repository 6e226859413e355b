// Batch front end: one subcommand per experiment, CSV on the data path and a
// JSON manifest recording every resolved input, so a run can be replayed with
// `sadic --config manifest.json`.

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/version.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "sadic/counting.hpp"
#include "sadic/moments.hpp"

using json = nlohmann::ordered_json;
using namespace sadic;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ parsing

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\n");
    auto e = s.find_last_not_of(" \t\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

// "3", "-7/4" or an exact decimal "0.25"
Rat parse_rat(const std::string& s0) {
    std::string s = trim(s0);
    if (s.empty()) throw ConfigError("empty rational");
    try {
        auto dot = s.find('.');
        if (dot != std::string::npos && s.find('/') == std::string::npos) {
            std::string digits = s.substr(0, dot) + s.substr(dot + 1);
            std::size_t frac = s.size() - dot - 1;
            Rat r(Int(digits), ipow(10, frac));
            r.canonicalize();
            return r;
        }
        Rat r(s);
        if (r.get_den() == 0) throw ConfigError("zero denominator in '" + s + "'");
        r.canonicalize();
        return r;
    } catch (const std::invalid_argument&) {
        throw ConfigError("not a rational number: '" + s + "'");
    }
}

double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (trim(s.substr(pos)).size()) throw ConfigError("not a number: '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        // fall back to a rational spelling
        return parse_rat(s).get_d();
    }
}

long parse_long(const std::string& s) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (trim(s.substr(pos)).size()) throw ConfigError("not an integer: '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("not an integer: '" + s + "'");
    }
}

std::uint64_t parse_u64(const std::string& s) {
    long v = parse_long(s);
    if (v < 0) throw ConfigError("expected a non-negative integer, got '" + s + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<long> parse_longs(const std::string& s) {
    std::vector<long> out;
    for (auto& x : split(s, ',')) out.push_back(parse_long(x));
    return out;
}

RatVec parse_ratvec(const std::string& s) {
    RatVec out;
    for (auto& x : split(s, ',')) out.push_back(parse_rat(x));
    return out;
}

std::string rat_str(const Rat& r) { return r.get_den() == 1 ? r.get_num().get_str() : r.get_str(); }

std::string vec_str(const RatVec& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + rat_str(v[i]);
    return s;
}

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

SConfig parse_primes(const std::string& s) {
    std::vector<unsigned long> ps;
    for (long p : parse_longs(s)) {
        if (p < 2) throw ConfigError("primes must be at least 2");
        ps.push_back(static_cast<unsigned long>(p));
    }
    try {
        return SConfig(ps);
    } catch (const error& e) {
        throw ConfigError(e.what());
    }
}

std::string primes_str(const SConfig& ctx) {
    std::string s;
    for (std::size_t i = 0; i < ctx.size(); ++i) s += (i ? " " : "") + std::to_string(ctx.primes()[i]);
    return s;
}

// JSON scalar (number or "num/den" string) as a rational
Rat json_rat(const json& v) {
    if (v.is_string()) return parse_rat(v.get<std::string>());
    if (v.is_number_integer()) return Rat(Int(v.dump()));
    if (v.is_number()) return Rat(v.get<double>());
    throw ConfigError("matrix entries must be numbers or \"num/den\" strings");
}

RatMatrix json_ratmatrix(const json& m, std::size_t d) {
    if (!m.is_array() || m.size() != d) throw ConfigError("Gram matrix must have dim rows");
    RatMatrix g(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (!m[i].is_array() || m[i].size() != d) throw ConfigError("Gram matrix must be square");
        for (std::size_t j = 0; j < d; ++j) g(i, j) = json_rat(m[i][j]);
    }
    return g;
}

bool all_exact(const json& m) {
    for (auto& row : m)
        for (auto& x : row)
            if (!(x.is_string() || x.is_number_integer())) return false;
    return true;
}

// {dim, places: {"inf": [[...]], "2": [[...]]}, shift}; places missing from
// the map reuse the real Gram matrix, which must then be rational. The shift
// is returned separately because the counters take it as an argument.
QuadraticFormS parse_form(const json& j, const SConfig& ctx, std::optional<RatVec>& shift) {
    if (!j.contains("dim") || !j.contains("places")) throw ConfigError("form needs 'dim' and 'places'");
    const std::size_t d = j["dim"].get<std::size_t>();
    const json& pl = j["places"];
    if (!pl.contains("inf")) throw ConfigError("form needs a real Gram matrix under places.inf");
    for (auto it = pl.begin(); it != pl.end(); ++it) {
        if (it.key() == "inf") continue;
        long p = parse_long(it.key());
        if (p < 2 || !ctx.contains(static_cast<unsigned long>(p)))
            throw ConfigError("form has a Gram matrix at p=" + it.key() + " which is not in --primes");
    }
    std::map<place_t, RatMatrix> fin;
    const bool inf_exact = all_exact(pl["inf"]);
    std::optional<RatMatrix> ginf;
    if (inf_exact) ginf = json_ratmatrix(pl["inf"], d);
    for (auto p : ctx.primes()) {
        auto key = std::to_string(p);
        if (pl.contains(key)) {
            fin[p] = json_ratmatrix(pl[key], d);
        } else {
            if (!ginf) throw ConfigError("no Gram matrix at p=" + key + " and the real one is not rational");
            fin[p] = *ginf;
        }
    }
    QuadraticFormS q;
    bool same = ginf.has_value();
    for (auto& [p, g] : fin) same = same && g == *ginf;
    if (same) {
        q = QuadraticFormS::rational(*ginf, ctx);
    } else {
        Matrix<double> m(d, d);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) m(r, c) = json_rat(pl["inf"][r][c]).get_d();
        q = QuadraticFormS::split(m, fin, ctx);
    }
    if (j.contains("shift") && !j["shift"].is_null()) {
        RatVec xi;
        for (auto& x : j["shift"]) xi.push_back(json_rat(x));
        if (xi.size() != d) throw ConfigError("form shift must have dim entries");
        shift = xi;
    }
    return q;
}

// "T_inf:t1,t2;T_inf:t1,t2;..."
std::vector<TVector> parse_ladder(const std::string& s, const SConfig& ctx) {
    std::vector<TVector> out;
    for (auto& rung : split(s, ';')) {
        auto parts = split(rung, ':');
        if (parts.empty() || parts.size() > 2) throw ConfigError("ladder rung must be T_inf[:t_p,...]");
        TVector T;
        T.t_inf = parse_double(parts[0]);
        if (parts.size() == 2) T.t_p = parse_longs(parts[1]);
        if (T.t_p.size() != ctx.size()) throw ConfigError("each ladder rung needs one t_p per prime");
        out.push_back(T);
    }
    return out;
}

// disk:r | ball:r | box:lo1,lo2,...:hi1,hi2,...
TestFunction parse_test_function(const std::string& s, const std::string& tp, std::size_t d, const SConfig& ctx) {
    auto parts = split(s, ':');
    std::vector<long> t = tp.empty() ? std::vector<long>(ctx.size(), 0) : parse_longs(tp);
    if (t.size() != ctx.size()) throw ConfigError("--f-tp needs one exponent per prime");
    if (parts.size() == 2 && (parts[0] == "disk" || parts[0] == "ball")) {
        double r = parse_double(parts[1]);
        if (!(r > 0)) throw ConfigError("radius must be positive");
        return TestFunction::ball(r, t);
    }
    if (parts.size() == 3 && parts[0] == "box") {
        std::vector<double> lo, hi;
        for (auto& x : split(parts[1], ',')) lo.push_back(parse_double(x));
        for (auto& x : split(parts[2], ',')) hi.push_back(parse_double(x));
        if (lo.size() != d || hi.size() != d) throw ConfigError("box needs d lower and d upper bounds");
        for (std::size_t i = 0; i < d; ++i)
            if (!(lo[i] < hi[i])) throw ConfigError("box sides must be positive");
        return TestFunction::box(lo, hi, t);
    }
    throw ConfigError("test function must be disk:r, ball:r or box:lo,...:hi,...");
}

// ------------------------------------------------------------------ commands

struct Opt {
    std::string name, value, help;
    bool flag = false;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string str() const {
        std::string s;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += "\n";
        };
        line(header);
        for (auto& r : rows) line(r);
        return s;
    }
};

struct Run {
    std::map<std::string, Opt*> opt;
    Table table;
    json results = json::object();
    std::optional<RatVec> form_shift;
    int exit_code = 0;
    std::string message;

    const std::string& get(const std::string& k) const { return opt.at(k)->value; }
    bool has(const std::string& k) const { return !trim(get(k)).empty(); }
    bool flag(const std::string& k) const {
        auto v = get(k);
        return v == "true" || v == "1";
    }
    double dbl(const std::string& k) const { return parse_double(get(k)); }
    long lng(const std::string& k) const { return parse_long(get(k)); }
    std::uint64_t u64(const std::string& k) const { return parse_u64(get(k)); }
    unsigned threads() const {
        long t = lng("threads");
        if (t < 1) throw ConfigError("--threads must be at least 1");
        return static_cast<unsigned>(t);
    }
    std::uint64_t seed() const {
        if (!has("seed")) throw ConfigError("--seed is required for this command");
        return u64("seed");
    }
    CountOptions count_options() const { return {u64("max-candidates"), threads()}; }
    SConfig primes() const { return parse_primes(get("primes")); }
};

struct Command {
    std::string name, help;
    bool stochastic = false;
    std::vector<Opt> opts;
    std::function<void(Run&)> body;
};

std::vector<Opt> common_opts() {
    const char* env = std::getenv("SADIC_THREADS");
    return {{"out", "-", "CSV output path (- for stdout)"},
            {"manifest", "", "manifest path (default: <out>.json, or stderr when writing CSV to stdout)"},
            {"threads", env && *env ? env : "1", "worker threads (default from SADIC_THREADS)"},
            {"max-candidates", std::to_string(kDefaultMaxCandidates), "enumeration budget per call"},
            {"seed", "", "master seed (required by stochastic commands)"},
            {"no-timing", "false", "write 0 in timing columns so the CSV is byte-reproducible", true}};
}

std::vector<Opt> form_opts() {
    return {{"form", "", "form JSON (inline or a file path) or random:<d>"},
            {"primes", "", "finite places, comma separated"}};
}

std::vector<Opt> family_opts() {
    return {{"c-inf", "1", "real target length c_inf"},
            {"kappa", "0", "real shrinking exponent kappa_inf in [0, d-2)"},
            {"a-inf", "0", "real target centre"},
            {"a-p", "", "p-adic target centres, one per prime (default 0)"},
            {"c-p", "", "p-adic target exponents: a_p + p^{c_p} Z_p (default 0)"},
            {"kappa-p", "", "p-adic shrinking flags 0/1 (default 0)"}};
}

std::vector<Opt> space_opts() {
    return {{"space", "affine", "affine | congruence | base"},
            {"d", "2", "dimension"},
            {"primes", "", "finite places"},
            {"q", "", "congruence modulus"},
            {"w", "", "congruence shift vector (rationals)"},
            {"f", "disk:1", "test function: disk:r, ball:r or box:lo,...:hi,..."},
            {"f-tp", "", "p-adic exponents of the test function (ball p^{-t} Z_p^d)"},
            {"n", "10000", "number of samples"},
            {"padic-depth", "8", "p-adic precision of sampled bases"},
            {"burn-in", "1000", "random-walk burn-in (d >= 3)"},
            {"thin", "10", "random-walk thinning (d >= 3)"},
            {"exact", "false", "refuse approximate samplers", true}};
}

QuadraticFormS load_form(Run& r, const SConfig& ctx, std::optional<std::size_t>* dim_out = nullptr) {
    std::string s = trim(r.get("form"));
    if (s.empty()) throw ConfigError("--form is required");
    if (s.rfind("random:", 0) == 0) {
        long d = parse_long(s.substr(7));
        if (d < 3) throw ConfigError("random forms need d >= 3");
        std::uint64_t seed = r.seed();
        Rng rng(seed);
        auto base = sample_isotropic_rational(static_cast<std::size_t>(d), ctx, rng);
        auto q = generic_perturbation(*base.gram_inf_exact(), ctx, derive_seed(seed, 1));
        json g = json::array();
        for (std::size_t i = 0; i < q.dim(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < q.dim(); ++j) row.push_back(q.gram_inf()(i, j));
            g.push_back(row);
        }
        r.results["form_real_gram"] = g;
        if (dim_out) *dim_out = q.dim();
        return q;
    }
    json j;
    try {
        if (s.front() == '{') {
            j = json::parse(s);
        } else {
            std::ifstream in(s);
            if (!in) throw ConfigError("cannot open form file '" + s + "'");
            j = json::parse(in);
            // keep the manifest self-contained
            r.opt.at("form")->value = j.dump();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("form JSON: ") + e.what());
    }
    auto q = parse_form(j, ctx, r.form_shift);
    if (dim_out) *dim_out = q.dim();
    return q;
}

// inhomogeneous shift: --xi or the form's own shift, not both
RatVec load_shift(const Run& r, std::size_t d) {
    if (r.has("xi") && r.form_shift) throw ConfigError("give the shift either in the form or with --xi");
    if (r.has("xi")) return parse_ratvec(r.get("xi"));
    return r.form_shift ? *r.form_shift : RatVec(d, Rat(0));
}

void reject_shift(const Run& r, const std::string& why) {
    if (r.form_shift) throw ConfigError("a shifted form is not accepted " + why);
}

ShrinkingFamily load_family(const Run& r, const SConfig& ctx) {
    ShrinkingFamily f = ShrinkingFamily::constant(ctx, r.dbl("c-inf"), parse_rat(r.get("a-inf")));
    f.kappa_inf = r.dbl("kappa");
    if (r.has("a-p")) f.a_p = parse_ratvec(r.get("a-p"));
    if (r.has("c-p")) f.c_p = parse_longs(r.get("c-p"));
    if (r.has("kappa-p")) {
        f.kappa_p.clear();
        for (long k : parse_longs(r.get("kappa-p"))) f.kappa_p.push_back(int(k));
    }
    return f;
}

TVector load_T(const Run& r, const SConfig& ctx) {
    TVector T;
    T.t_inf = r.dbl("T-inf");
    T.t_p = r.has("t-p") ? parse_longs(r.get("t-p")) : std::vector<long>(ctx.size(), 0);
    if (T.t_p.size() != ctx.size()) throw ConfigError("--t-p needs one exponent per prime");
    if (!(T.t_inf > 0)) throw ConfigError("--T-inf must be positive");
    return T;
}

std::vector<std::string> count_header(const SConfig& ctx) {
    std::vector<std::string> h{"T_inf"};
    for (auto p : ctx.primes()) h.push_back("t_" + std::to_string(p));
    for (auto c : {"N", "vol_I", "prediction", "ratio", "wall_ms"}) h.push_back(c);
    return h;
}

std::vector<std::string> count_row(const CountResult& c, bool timing) {
    std::vector<std::string> row{num(c.T.t_inf)};
    for (long t : c.T.t_p) row.push_back(std::to_string(t));
    row.push_back(std::to_string(c.N));
    row.push_back(num(c.vol_I));
    row.push_back(num(c.prediction));
    row.push_back(num(c.ratio));
    row.push_back(timing ? num(std::round(c.wall_ms * 1000) / 1000) : "0");
    return row;
}

SpaceSpec load_space(const Run& r) {
    SpaceSpec s;
    auto k = r.get("space");
    if (k == "affine") s.kind = SpaceKind::affine;
    else if (k == "congruence") s.kind = SpaceKind::congruence;
    else if (k == "base") s.kind = SpaceKind::base;
    else throw ConfigError("--space must be affine, congruence or base");
    long d = r.lng("d");
    if (d < 2) throw ConfigError("--d must be at least 2");
    s.d = static_cast<std::size_t>(d);
    s.ctx = r.primes();
    s.padic_depth = r.lng("padic-depth");
    s.burn_in = r.u64("burn-in");
    s.thin = r.u64("thin");
    s.require_exact = r.flag("exact");
    if (s.kind == SpaceKind::congruence) {
        if (!r.has("q") || !r.has("w")) throw ConfigError("congruence space needs --q and --w");
        s.congruence = CongruenceContext(s.d, Int(r.get("q")), parse_ratvec(r.get("w")), s.ctx);
    }
    return s;
}

std::vector<Command> commands() {
    std::vector<Command> cs;

    cs.push_back({"zeta", "zeta_S(d): truncated series with an Euler-product cross-check", false,
                  {{"d", "2", "argument d >= 2"}, {"primes", "", "finite places"}, {"tol", "1e-9", "series tolerance"}},
                  [](Run& r) {
                      int d = int(r.lng("d"));
                      if (d < 2 || d > 16) throw ConfigError("--d must lie in [2, 16]");
                      auto ctx = r.primes();
                      double tol = r.dbl("tol");
                      auto z = zeta_S(d, ctx, tol);
                      double e = zeta_S_euler(d, ctx);
                      double delta = std::abs(z.value - e);
                      r.table.header = {"d", "primes", "series", "error_bound", "terms", "euler", "delta"};
                      r.table.rows.push_back({std::to_string(d), primes_str(ctx), num(z.value), num(z.error_bound),
                                              std::to_string(z.terms), num(e), num(delta)});
                      if (delta > z.error_bound + tol + 1e-15) {
                          r.exit_code = 3;
                          r.message = "series and Euler product disagree beyond the tolerance";
                      }
                  }});

    cs.push_back({"group-order", "#SL_d(Z/q), the stabilizer of e_d and the index of Gamma_1(q)", false,
                  {{"d", "2", "dimension"}, {"q", "5", "modulus"}},
                  [](Run& r) {
                      long d = r.lng("d");
                      auto q = r.u64("q");
                      if (d < 1 || q < 1) throw ConfigError("--d and --q must be positive");
                      r.table.header = {"d", "q", "sl_order", "stabilizer_order", "index"};
                      r.table.rows.push_back({std::to_string(d), std::to_string(q), sl_group_order(int(d), q).get_str(),
                                              stabilizer_order(int(d), q).get_str(), index_gamma1(int(d), q).get_str()});
                  }});

    cs.push_back({"identity-check", "residual of the congruence normalization identity", false,
                  {{"d", "3", "dimension"}, {"q", "5", "modulus"}, {"primes", "", "finite places"}, {"tol", "1e-9", "series tolerance"}},
                  [](Run& r) {
                      auto ctx = r.primes();
                      double tol = r.dbl("tol");
                      auto res = normalization_identity_residual(int(r.lng("d")), r.u64("q"), ctx, tol);
                      r.table.header = {"d", "q", "primes", "residual", "error_bound", "closed_form_ratio"};
                      r.table.rows.push_back({r.get("d"), r.get("q"), primes_str(ctx), num(res.residual),
                                              num(res.error_bound), rat_str(res.closed_form_ratio)});
                      if (res.residual > tol + res.error_bound) {
                          r.exit_code = 3;
                          r.message = "normalization residual exceeds the tolerance";
                      }
                  }});

    cs.push_back({"covolume", "covolume constant of Z_S^d as a product of S-zeta values", false,
                  {{"d", "3", "dimension"}, {"primes", "", "finite places"}, {"variant", "UL", "UL or SL"},
                   {"tol", "1e-9", "series tolerance"}},
                  [](Run& r) {
                      auto ctx = r.primes();
                      auto v = r.get("variant");
                      if (v != "UL" && v != "SL") throw ConfigError("--variant must be UL or SL");
                      auto res = covolume_product(int(r.lng("d")), ctx, v == "UL" ? CovolumeVariant::UL : CovolumeVariant::SL,
                                                  r.dbl("tol"));
                      r.table.header = {"d", "primes", "variant", "value", "error_bound"};
                      r.table.rows.push_back({r.get("d"), primes_str(ctx), v, num(res.value), num(res.error_bound)});
                  }});

    auto count_like = form_opts();
    for (auto& o : family_opts()) count_like.push_back(o);
    count_like.push_back({"q", "", "congruence modulus (congruence case)"});
    count_like.push_back({"w", "", "congruence shift (congruence case)"});
    count_like.push_back({"xi", "", "inhomogeneous shift (default 0)"});

    {
        auto opts = count_like;
        opts.push_back({"T-inf", "10", "real radius"});
        opts.push_back({"t-p", "", "p-adic radii exponents"});
        opts.push_back({"predict", "false", "attach the volume prediction", true});
        cs.push_back({"count", "count solutions at one radius", false, opts, [](Run& r) {
                          auto ctx = r.primes();
                          auto Q = load_form(r, ctx);
                          auto fam = load_family(r, ctx);
                          fam.validate(Q.dim(), ctx);
                          auto T = load_T(r, ctx);
                          std::optional<double> constant;
                          if (r.flag("predict")) {
                              TVector half = T;
                              half.t_inf /= 2;
                              constant = leading_constant(Q, fam, {half, T}).table.back().ratio;
                          }
                          CountResult c;
                          if (r.has("q")) {
                              reject_shift(r, "in the congruence case");
                              c = count_congruence_raw(Int(r.get("q")), parse_ratvec(r.get("w")), Q, interval_at(fam, T),
                                                       T, r.count_options(), constant);
                          } else {
                              RatVec xi = load_shift(r, Q.dim());
                              c = count_inhom_at(Q, xi, interval_at(fam, T), T, r.count_options(), constant);
                          }
                          r.table.header = count_header(ctx);
                          r.table.rows.push_back(count_row(c, !r.flag("no-timing")));
                      }});
    }

    {
        auto opts = count_like;
        opts.push_back({"ladder", "10:;20:;40:", "rungs T_inf:t_p,...; separated by ';'"});
        opts.push_back({"no-predict", "false", "skip the volume prediction", true});
        cs.push_back({"sweep", "counts along a ladder of radii against the volume prediction", false, opts, [](Run& r) {
                          auto ctx = r.primes();
                          auto Q = load_form(r, ctx);
                          auto fam = load_family(r, ctx);
                          fam.validate(Q.dim(), ctx);
                          std::string lad = r.get("ladder");
                          auto ladder = parse_ladder(lad, ctx);
                          SweepTarget tg;
                          if (r.has("q")) {
                              reject_shift(r, "in the congruence case");
                              tg.q = Int(r.get("q"));
                              tg.w = parse_ratvec(r.get("w"));
                          } else {
                              tg.xi = load_shift(r, Q.dim());
                          }
                          SweepOptions so;
                          so.count = r.count_options();
                          so.predict = !r.flag("no-predict");
                          auto res = sweep(Q, tg, fam, ladder, so);
                          r.table.header = count_header(ctx);
                          for (auto& c : res.rows) r.table.rows.push_back(count_row(c, !r.flag("no-timing")));
                          r.results["constant"] = res.constant;
                          r.results["c_Q"] = res.c_Q;
                          r.results["delta_hat"] = res.delta_hat;
                          r.results["partial"] = res.partial;
                          if (res.partial) {
                              r.results["stop_reason"] = res.stop_reason;
                              r.exit_code = 3;
                              r.message = "budget exhausted: " + res.stop_reason;
                          }
                      }});
    }

    {
        auto opts = form_opts();
        for (auto& o : family_opts()) opts.push_back(o);
        opts.push_back({"ladder", "10:;20:", "rungs for the leading constant"});
        opts.push_back({"mode", "leading", "leading (S-adic volumes along a ladder) or padic (one p-adic volume)"});
        opts.push_back({"p", "", "prime for padic mode"});
        opts.push_back({"t", "0", "padic mode: ball p^{-t} Z_p^d"});
        opts.push_back({"target-center", "0", "padic mode: target centre a"});
        opts.push_back({"target-exp", "0", "padic mode: target a + p^c Z_p"});
        cs.push_back({"volume", "volumes of the target regions and the leading constant", false, opts, [](Run& r) {
                          auto mode = r.get("mode");
                          if (mode == "padic") {
                              if (!r.has("p")) throw ConfigError("padic mode needs --p");
                              auto p = r.u64("p");
                              SConfig ctx({static_cast<unsigned long>(p)});
                              auto Q = load_form(r, ctx);
                              reject_shift(r, "by volume");
                              PadicVolumeRequest req;
                              req.p = p;
                              req.gram = Q.gram_p(p);
                              req.t = r.lng("t");
                              req.target = {parse_rat(r.get("target-center")), r.lng("target-exp")};
                              auto v = padic_quadric_volume(req);
                              r.table.header = {"p", "t", "target_center", "target_exp", "value", "value_approx", "certified_m"};
                              r.table.rows.push_back({std::to_string(p), r.get("t"), rat_str(req.target.center),
                                                      r.get("target-exp"), rat_str(v.value), num(v.value.get_d()),
                                                      std::to_string(v.certified_m)});
                              return;
                          }
                          if (mode != "leading") throw ConfigError("--mode must be leading or padic");
                          auto ctx = r.primes();
                          auto Q = load_form(r, ctx);
                          reject_shift(r, "by volume");
                          auto fam = load_family(r, ctx);
                          auto ladder = parse_ladder(r.get("ladder"), ctx);
                          auto va = leading_constant(Q, fam, ladder);
                          r.table.header = {"T_inf"};
                          for (auto p : ctx.primes()) r.table.header.push_back("t_" + std::to_string(p));
                          for (auto c : {"vol_inf", "vol_inf_error", "vol_finite", "vol", "vol_I", "ratio"})
                              r.table.header.push_back(c);
                          for (auto& row : va.table) {
                              std::vector<std::string> x{num(row.T.t_inf)};
                              for (long t : row.T.t_p) x.push_back(std::to_string(t));
                              for (auto& v : {num(row.vol_inf), num(row.vol_inf_error), rat_str(row.vol_finite),
                                              num(row.vol), num(row.vol_I), num(row.ratio)})
                                  x.push_back(v);
                              r.table.rows.push_back(x);
                          }
                          r.results["c_Q"] = va.c_Q;
                          r.results["c_Q_error"] = va.c_Q_error;
                          r.results["c_inf"] = va.c_inf;
                          r.results["c_inf_light_cone"] = va.c_inf_light_cone;
                          json cp = json::object();
                          for (auto& [p, c] : va.c_p) cp[std::to_string(p)] = rat_str(c);
                          r.results["c_p"] = cp;
                      }});
    }

    {
        auto opts = space_opts();
        opts.push_back({"order", "1", "moment order (1 or 2)"});
        opts.push_back({"check-sigma", "0", "exit 3 when |mean - target| exceeds this many standard errors (0: off)"});
        cs.push_back({"moment-mc", "Monte-Carlo Siegel-transform moments", true, opts, [](Run& r) {
                          auto sp = load_space(r);
                          auto f = parse_test_function(r.get("f"), r.get("f-tp"), sp.d, sp.ctx);
                          int order = int(r.lng("order"));
                          if (order != 1 && order != 2) throw ConfigError("--order must be 1 or 2");
                          auto seed = r.seed();
                          auto est = estimate_moment(sp, f, order, r.u64("n"), seed, r.threads(), r.u64("max-candidates"));
                          const double vol = f.volume(sp.d, sp.ctx);
                          double target = std::numeric_limits<double>::quiet_NaN();
                          if (order == 1) target = vol;
                          else if (sp.kind == SpaceKind::affine) target = vol * vol + vol;
                          else if (sp.kind == SpaceKind::congruence && sp.d >= 3)
                              target = second_moment_rhs(f, *sp.congruence).value;
                          double z = est.stderr_ > 0 ? (est.mean - target) / est.stderr_ : std::numeric_limits<double>::quiet_NaN();
                          r.table.header = {"space", "d", "order", "n", "seed", "mean", "stderr", "target", "z", "sampler"};
                          r.table.rows.push_back({r.get("space"), std::to_string(sp.d), std::to_string(order),
                                                  std::to_string(est.n), std::to_string(seed), num(est.mean),
                                                  num(est.stderr_), num(target), num(z),
                                                  est.exact ? "exact" : "mcmc-approximate"});
                          double k = r.dbl("check-sigma");
                          if (k > 0 && std::isfinite(z) && std::abs(z) > k) {
                              r.exit_code = 3;
                              r.message = "moment estimate outside the requested band";
                          }
                      }});
    }

    cs.push_back({"moment-rhs", "truncated (t, a) series of the congruence second moment", false,
                  {{"d", "3", "dimension (>= 3)"},
                   {"primes", "", "finite places"},
                   {"q", "5", "modulus"},
                   {"w", "1,0,0", "shift vector"},
                   {"f", "box:-1,-1,-1:1,1,1", "test function: box or origin-centred ball"},
                   {"f-tp", "", "p-adic exponents of the test function"},
                   {"t-max", "60", "largest t"},
                   {"a-max", "60", "largest |a| at the real place"},
                   {"depth", "", "per-prime denominator depth K_p (default 12)"},
                   {"no-gcd-filter", "false", "keep pairs with gcd(a, t) > 1 (negative control)", true}},
                  [](Run& r) {
                      auto ctx = r.primes();
                      long d = r.lng("d");
                      if (d < 2) throw ConfigError("--d must be at least 2");
                      CongruenceContext cc(std::size_t(d), Int(r.get("q")), parse_ratvec(r.get("w")), ctx);
                      auto f = parse_test_function(r.get("f"), r.get("f-tp"), cc.d, ctx);
                      SeriesParams p;
                      p.t_max = r.lng("t-max");
                      p.a_max = r.dbl("a-max");
                      if (r.has("depth")) p.depth = parse_longs(r.get("depth"));
                      p.gcd_filter = !r.flag("no-gcd-filter");
                      auto v = second_moment_rhs(f, cc, p);
                      std::string depth;
                      for (std::size_t i = 0; i < v.params.depth.size(); ++i)
                          depth += (i ? " " : "") + std::to_string(v.params.depth[i]);
                      r.table.header = {"value", "tail_bound", "terms", "t_max", "a_max", "depth", "vol"};
                      r.table.rows.push_back({num(v.value), num(v.tail_bound), std::to_string(v.terms),
                                              std::to_string(p.t_max), num(p.a_max), depth, num(f.volume(cc.d, ctx))});
                  }});

    {
        auto opts = space_opts();
        opts.push_back({"M", "20", "deviation thresholds, comma separated"});
        opts.push_back({"check", "false", "exit 3 when an affine exceedance beats the bound by 3 stderr", true});
        cs.push_back({"variance", "exceedance probabilities against the Chebyshev bound", true, opts, [](Run& r) {
                          auto sp = load_space(r);
                          auto f = parse_test_function(r.get("f"), r.get("f-tp"), sp.d, sp.ctx);
                          auto seed = r.seed();
                          r.table.header = {"space", "M", "vol", "empirical", "stderr", "bound", "observed_constant", "n"};
                          for (auto& m : split(r.get("M"), ',')) {
                              double M = parse_double(m);
                              auto v = variance_check(sp, f, M, r.u64("n"), seed, r.threads(), r.u64("max-candidates"));
                              r.table.rows.push_back({r.get("space"), num(M), num(f.volume(sp.d, sp.ctx)), num(v.empirical),
                                                      num(v.stderr_), num(v.bound), num(v.observed_constant),
                                                      std::to_string(v.n)});
                              if (r.flag("check") && sp.kind == SpaceKind::affine && v.empirical > v.bound + 3 * v.stderr_) {
                                  r.exit_code = 3;
                                  r.message = "exceedance above the bound";
                              }
                          }
                      }});
    }

    cs.push_back({"orbit", "orbit invariant gcd(q k) and representatives per invariant", false,
                  {{"d", "2", "dimension"},
                   {"primes", "", "finite places"},
                   {"q", "5", "modulus"},
                   {"w", "1,0", "shift vector"},
                   {"k", "", "vectors k in Z_S^d + w/q, separated by ';'"},
                   {"t", "1", "invariants to realize, comma separated"}},
                  [](Run& r) {
                      auto ctx = r.primes();
                      CongruenceContext cc(std::size_t(r.lng("d")), Int(r.get("q")), parse_ratvec(r.get("w")), ctx);
                      r.table.header = {"kind", "t", "vector", "invariant"};
                      for (auto& ks : split(r.get("k"), ';')) {
                          auto k = parse_ratvec(ks);
                          r.table.rows.push_back({"given", "", vec_str(k), orbit_invariant(cc, k).get_str()});
                      }
                      for (long t : parse_longs(r.get("t"))) {
                          auto k = representative_for_t(cc, Int(t));
                          r.table.rows.push_back({"representative", std::to_string(t), vec_str(k),
                                                  orbit_invariant(cc, k).get_str()});
                      }
                  }});

    {
        auto opts = form_opts();
        for (auto& o : family_opts()) opts.push_back(o);
        opts.push_back({"q", "2", "modulus"});
        opts.push_back({"w", "", "shift vector"});
        opts.push_back({"T-inf", "10", "real radius"});
        opts.push_back({"t-p", "", "p-adic radii exponents"});
        opts.push_back({"variant", "correct", "correct or forget-q-squared (negative control)"});
        cs.push_back({"rescale-check", "congruence count against the rescaled inhomogeneous count", false, opts,
                      [](Run& r) {
                          auto ctx = r.primes();
                          auto Q = load_form(r, ctx);
                          auto fam = load_family(r, ctx);
                          fam.validate(Q.dim(), ctx);
                          auto T = load_T(r, ctx);
                          reject_shift(r, "by rescale-check (the shift is w/q)");
                          auto v = r.get("variant");
                          if (v != "correct" && v != "forget-q-squared")
                              throw ConfigError("--variant must be correct or forget-q-squared");
                          Int q(r.get("q"));
                          auto w = parse_ratvec(r.get("w"));
                          auto res = rescale_identity_check(q, w, Q, interval_at(fam, T), T, r.count_options(),
                                                            v == "correct" ? RescaleVariant::correct
                                                                           : RescaleVariant::forget_q_squared);
                          r.table.header = {"q", "w", "T_inf", "variant", "congruence_count", "inhom_count", "holds"};
                          r.table.rows.push_back({q.get_str(), vec_str(w), num(T.t_inf), v, std::to_string(res.congruence_count),
                                                  std::to_string(res.inhom_count), res.holds ? "true" : "false"});
                          if (v == "correct" && !res.holds) {
                              r.exit_code = 3;
                              r.message = "rescaling identity failed";
                          }
                      }});
    }
    return cs;
}

bool is_tolerance(errc c) {
    switch (c) {
        case errc::tolerance_unreachable:
        case errc::precision_exhausted:
        case errc::insufficient_padic_precision:
        case errc::region_too_large:
        case errc::search_budget_exceeded:
        case errc::not_stabilized:
        case errc::method_disagreement:
        case errc::budget_exceeded:
        case errc::invariant_violation:
            return true;
        default:
            return false;
    }
}

json versions() {
    return {{"sadic", kVersion},
            {"gmp", gmp_version},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"cli11", CLI11_VERSION},
            {"compiler", __VERSION__}};
}

std::string replace_ext(const std::string& path, const std::string& ext) {
    auto slash = path.find_last_of('/');
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
    return path.substr(0, dot) + ext;
}

}  // namespace

int main(int argc, char** argv) {
    auto cmds = commands();
    std::vector<std::string> args(argv + 1, argv + argc);

    // --config FILE: a flat {option: value} object or a manifest; explicit
    // flags on the command line win over it
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    json config = json::object();
    std::string config_cmd;
    if (!config_path.empty()) {
        try {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config '" + config_path + "'");
            json j = json::parse(in);
            if (!j.is_object()) throw ConfigError("config must be a JSON object");
            if (j.contains("inputs")) {
                config_cmd = j.value("command", "");
                config = j["inputs"];
            } else {
                config_cmd = j.value("command", "");
                config = j;
                config.erase("command");
            }
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }
    std::string cmd_name;
    if (!args.empty() && args[0].rfind("-", 0) != 0) {
        cmd_name = args[0];
        args.erase(args.begin());
    } else if (!config_cmd.empty()) {
        cmd_name = config_cmd;
    }

    auto usage = [&](std::ostream& os) {
        os << "usage: sadic <command> [options]   (sadic <command> --help for options)\ncommands:\n";
        for (auto& c : cmds) os << "  " << c.name << std::string(16 - std::min<std::size_t>(15, c.name.size()), ' ') << c.help << "\n";
    };
    if (cmd_name.empty() || cmd_name == "help" || cmd_name == "--help") {
        usage(cmd_name.empty() ? std::cerr : std::cout);
        return cmd_name.empty() ? 2 : 0;
    }
    auto it = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == cmd_name; });
    if (it == cmds.end()) {
        std::cerr << "unknown command '" << cmd_name << "'\n";
        usage(std::cerr);
        return 2;
    }
    Command& cmd = *it;
    for (auto& o : common_opts()) cmd.opts.push_back(o);

    CLI::App app{cmd.help, "sadic " + cmd.name};
    std::map<std::string, Opt*> by_name;
    for (auto& o : cmd.opts) {
        by_name[o.name] = &o;
        if (o.flag) {
            app.add_option("--" + o.name, o.value, o.help)->expected(0, 1)->multi_option_policy(
                CLI::MultiOptionPolicy::TakeLast);
        } else {
            app.add_option("--" + o.name, o.value, o.help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->capture_default_str();
        }
    }

    std::vector<std::string> full;
    for (auto& [k, v] : config.items()) {
        if (!by_name.count(k)) {
            std::cerr << "config error: unknown option '" << k << "' for " << cmd.name << "\n";
            return 2;
        }
        std::string s = v.is_string() ? v.get<std::string>() : v.dump();
        if (v.is_boolean()) s = v.get<bool>() ? "true" : "false";
        if (trim(s).empty()) continue;  // unset; the default applies
        full.push_back("--" + k + "=" + s);
    }
    for (auto& a : args) full.push_back(a);
    try {
        std::vector<std::string> rev(full.rbegin(), full.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    // a bare flag leaves an empty string
    for (auto& o : cmd.opts)
        if (o.flag) {
            auto* op = app.get_option("--" + o.name);
            if (op->count() > 0) {
                auto res = op->results();
                o.value = res.empty() || trim(res.back()).empty() ? "true" : trim(res.back());
            }
            if (o.value != "true" && o.value != "false" && o.value != "1" && o.value != "0") {
                std::cerr << "config error: --" << o.name << " takes true or false\n";
                return 2;
            }
            if (o.value == "1") o.value = "true";
            if (o.value == "0") o.value = "false";
        }

    Run run;
    run.opt = by_name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (cmd.stochastic) run.seed();
        cmd.body(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        bool tol = is_tolerance(e.code());
        std::cerr << (tol ? "budget/tolerance failure: " : "config error: ") << e.what() << "\n";
        if (!tol) return 2;
        run.exit_code = 3;
        run.message = e.what();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    // outputs, single-threaded
    const std::string out = run.get("out");
    const std::string csv = run.table.header.empty() ? "" : run.table.str();
    if (out == "-") {
        std::cout << csv;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) {
            std::cerr << "config error: cannot write '" << out << "'\n";
            return 2;
        }
        f << csv;
    }
    json inputs = json::object();
    for (auto& o : cmd.opts)
        if (o.name != "out" && o.name != "manifest") inputs[o.name] = o.value;
    json manifest = {{"command", cmd.name},
                     {"inputs", inputs},
                     {"seed", run.has("seed") ? json(run.u64("seed")) : json(nullptr)},
                     {"versions", versions()},
                     {"wall_ms", wall},
                     {"exit_code", run.exit_code},
                     {"results", run.results}};
    if (!run.message.empty()) manifest["message"] = run.message;
    if (out != "-") manifest["csv"] = out;
    std::string mpath = run.get("manifest");
    if (mpath.empty() && out != "-") mpath = replace_ext(out, ".json");
    if (mpath.empty()) {
        std::cerr << manifest.dump(2) << "\n";
    } else {
        std::ofstream f(mpath);
        if (!f) {
            std::cerr << "config error: cannot write '" << mpath << "'\n";
            return 2;
        }
        f << manifest.dump(2) << "\n";
    }
    if (!run.message.empty() && run.exit_code != 0) std::cerr << run.message << "\n";
    return run.exit_code;
}
