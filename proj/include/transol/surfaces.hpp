#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mesh.hpp"
#include "solver.hpp"
#include "translator.hpp"

namespace transol {

enum class SurfaceType { grim_reaper, tilted_grim_reaper, pitchfork, helicoid, scherk, scherkenoid, trident };

inline const char* to_string(SurfaceType t) {
    switch (t) {
        case SurfaceType::grim_reaper: return "grim-reaper";
        case SurfaceType::tilted_grim_reaper: return "tilted-grim-reaper";
        case SurfaceType::pitchfork: return "pitchfork";
        case SurfaceType::helicoid: return "helicoid";
        case SurfaceType::scherk: return "scherk";
        case SurfaceType::scherkenoid: return "scherkenoid";
        case SurfaceType::trident: return "trident";
    }
    return "?";
}

inline SurfaceType surface_type_from_string(const std::string& s) {
    for (auto t : {SurfaceType::grim_reaper, SurfaceType::tilted_grim_reaper, SurfaceType::pitchfork,
                   SurfaceType::helicoid, SurfaceType::scherk, SurfaceType::scherkenoid, SurfaceType::trident})
        if (s == to_string(t)) return t;
    throw InvalidArgument("unknown surface '" + s + "'");
}

struct SurfaceKind {
    SurfaceType type = SurfaceType::pitchfork;
    double w = pi;
    double x_hat = 0;  // helicoid axis abscissa; 0 asks for calibration
    double alpha = pi / 2;
    double L = 0;
    double a = 1;  // trident neck size
    double b = 0;  // trident strip width

    static SurfaceKind grim_reaper(double w) { return {SurfaceType::grim_reaper, w}; }
    static SurfaceKind tilted_grim_reaper(double w) { return {SurfaceType::tilted_grim_reaper, w}; }
    static SurfaceKind pitchfork(double w) { return {SurfaceType::pitchfork, w}; }
    static SurfaceKind helicoid(double w, double x_hat = 0) {
        SurfaceKind k{SurfaceType::helicoid, w};
        k.x_hat = x_hat;
        return k;
    }
    static SurfaceKind scherk(double alpha, double w, double L) {
        SurfaceKind k{SurfaceType::scherk, w};
        k.alpha = alpha;
        k.L = L;
        return k;
    }
    static SurfaceKind scherkenoid(double alpha, double w) {
        SurfaceKind k{SurfaceType::scherkenoid, w};
        k.alpha = alpha;
        return k;
    }
    static SurfaceKind trident(double a, double b) {
        SurfaceKind k{SurfaceType::trident, b};
        k.a = a;
        k.b = b;
        return k;
    }

    bool on_parallelogram() const { return type == SurfaceType::scherk || type == SurfaceType::scherkenoid; }
    double cot_alpha() const { return on_parallelogram() ? std::cos(alpha) / std::sin(alpha) : 0.0; }

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"surface\": \"" << to_string(type) << "\", \"w\": " << w;
        if (type == SurfaceType::helicoid) os << ", \"x_hat\": " << x_hat;
        if (on_parallelogram()) os << ", \"alpha\": " << alpha;
        if (type == SurfaceType::scherk) os << ", \"L\": " << L;
        if (type == SurfaceType::trident) os << ", \"a\": " << a << ", \"b\": " << b;
        os << "}";
        return os.str();
    }
};

inline void validate(const SurfaceKind& k) {
    if (!(k.w > 0) || !std::isfinite(k.w)) throw InvalidWidth("width must be positive");
    switch (k.type) {
        case SurfaceType::grim_reaper:
        case SurfaceType::tilted_grim_reaper:
        case SurfaceType::pitchfork:
            if (k.w < pi * (1 - 1e-12)) throw InvalidWidth(std::string(to_string(k.type)) + " needs w >= pi");
            break;
        case SurfaceType::helicoid:
            if (!(k.w < pi)) throw InvalidWidth("helicoid needs w < pi");
            if (k.x_hat < 0) throw InvalidArgument("helicoid axis abscissa must be positive");
            break;
        case SurfaceType::scherk:
            if (!(k.alpha > 0 && k.alpha < pi) || !(k.L > 0))
                throw InvalidArgument("scherk needs 0 < alpha < pi and L > 0");
            break;
        case SurfaceType::scherkenoid:
            if (!(k.alpha > 0 && k.alpha < pi)) throw InvalidArgument("scherkenoid needs 0 < alpha < pi");
            if (k.w < pi * (1 - 1e-12)) throw InvalidWidth("scherkenoid rays end in a grim reaper; needs w >= pi");
            break;
        case SurfaceType::trident:
            if (!(k.a > 0) || !(k.b > 0)) throw InvalidArgument("trident needs a > 0 and b > 0");
            break;
    }
}

// ---------------------------------------------------------------------------
// Grim reapers.

inline double grim_reaper_tilt(double w) {
    if (w < pi * (1 - 1e-12)) throw InvalidWidth("tilted grim reaper needs w >= pi");
    return std::sqrt(std::max(0.0, (w / pi) * (w / pi) - 1));
}

// g_w(x, y) = x sqrt((w/pi)^2 - 1) + (w/pi)^2 ln sin(pi y / w).
inline double grim_reaper_value(double w, double x, double y) {
    const double r = w / pi;
    return x * grim_reaper_tilt(w) + r * r * std::log(std::sin(y / r));
}

inline ScalarField grim_reaper_field(double w, const DomainSpec& window) {
    grim_reaper_tilt(w);
    DomainSpec d = window;
    d.w = w;
    if (d.y_lo < d.h * (1 - 1e-9) || d.y_top() > w - d.h * (1 - 1e-9))
        throw InvalidDomain("grim reaper window must stay h away from y = 0 and y = w");
    return field_from(build_grid(d), [w](double x, double y) { return grim_reaper_value(w, x, y); });
}

// ---------------------------------------------------------------------------
// Boundary data.

namespace detail {

inline Segment inf_seg(double a, double b, bool plus) {
    return {a, b, plus ? SegValue::pos_inf : SegValue::neg_inf, {}};
}
inline Segment trace_seg(double a, double b, std::function<double(double, double)> f) {
    return {a, b, SegValue::finite, std::move(f)};
}
inline Segment neumann_seg(double w) { return {0, w, SegValue::neumann, {}}; }

inline void require_margin(bool ok, const std::string& what) {
    if (!ok) throw TruncationTooTight(what);
}

}  // namespace detail

// Boundary prescription of a surface on the truncation [x_min, x_max]
// (sheared coordinate s for the parallelogram pieces). Truncation edges
// carry asymptotic data: g_w traces on grim-reaper ends, homogeneous
// Neumann data on ends that approach vertical planes, periodic data for the
// trident cell.
inline BoundarySpec make_boundary_spec(const SurfaceKind& k, double x_min, double x_max) {
    validate(k);
    using detail::inf_seg;
    const double w = k.w;
    BoundarySpec bc;
    auto g = [w](double x, double y) { return grim_reaper_value(w, x, y); };
    switch (k.type) {
        case SurfaceType::grim_reaper:
        case SurfaceType::tilted_grim_reaper:
            bc.edge(Edge::bottom) = {inf_seg(x_min, x_max, false)};
            bc.edge(Edge::top) = {inf_seg(x_min, x_max, false)};
            bc.edge(Edge::left) = {detail::trace_seg(0, w, g)};
            bc.edge(Edge::right) = {detail::trace_seg(0, w, g)};
            break;
        case SurfaceType::pitchfork:
            detail::require_margin(x_min <= -w && x_max >= w, "pitchfork window needs x_min <= -w and x_max >= w");
            bc.edge(Edge::bottom) = {inf_seg(x_min, 0, true), inf_seg(0, x_max, false)};
            bc.edge(Edge::top) = {inf_seg(x_min, x_max, false)};
            bc.edge(Edge::left) = {detail::neumann_seg(w)};
            bc.edge(Edge::right) = {detail::trace_seg(0, w, g)};
            break;
        case SurfaceType::helicoid: {
            if (!(k.x_hat > 0)) throw InvalidArgument("helicoid boundary data need x_hat > 0");
            detail::require_margin(x_min <= -w && x_max >= k.x_hat + w,
                                   "helicoid window needs x_min <= -w and x_max >= x_hat + w");
            bc.edge(Edge::bottom) = {inf_seg(x_min, 0, true), inf_seg(0, x_max, false)};
            bc.edge(Edge::top) = {inf_seg(x_min, k.x_hat, false), inf_seg(k.x_hat, x_max, true)};
            bc.edge(Edge::left) = {detail::neumann_seg(w)};
            bc.edge(Edge::right) = {detail::neumann_seg(w)};
            break;
        }
        case SurfaceType::scherk: {
            const double c = k.cot_alpha();
            bc.edge(Edge::bottom) = {inf_seg(0, k.L, false)};
            bc.edge(Edge::top) = {inf_seg(c * w, k.L + c * w, false)};
            bc.edge(Edge::left) = {inf_seg(0, w, true)};
            bc.edge(Edge::right) = {inf_seg(0, w, true)};
            break;
        }
        case SurfaceType::scherkenoid: {
            detail::require_margin(x_max >= 2 * w, "scherkenoid truncation needs x_max >= 2w");
            const double c = k.cot_alpha();
            bc.edge(Edge::bottom) = {inf_seg(0, x_max, false)};
            bc.edge(Edge::top) = {inf_seg(c * w, x_max + c * w, false)};
            bc.edge(Edge::left) = {inf_seg(0, w, true)};
            bc.edge(Edge::right) = {detail::trace_seg(0, w, g)};
            break;
        }
        case SurfaceType::trident: {
            const double a = k.a;
            if (std::abs((x_max - x_min) - 2 * a) > 1e-9 * (1 + a))
                throw InvalidDomain("trident window must be exactly one period of length 2a");
            // -INF on (-a, 0) + 2na, +INF on (0, a) + 2na.
            std::vector<Segment> bottom;
            double p = x_min;
            while (p < x_max - 1e-12 * (1 + a)) {
                const double next = std::min(x_max, (std::floor(p / a + 1e-12) + 1) * a);
                const long cell = static_cast<long>(std::floor(0.5 * (p + next) / a));
                bottom.push_back(inf_seg(p, next, cell % 2 == 0));
                p = next;
            }
            // Merge equal neighbours.
            std::vector<Segment> merged;
            for (auto& s : bottom) {
                if (!merged.empty() && merged.back().value == s.value) merged.back().b = s.b;
                else merged.push_back(s);
            }
            bc.edge(Edge::bottom) = merged;
            bc.edge(Edge::top) = {inf_seg(x_min, x_max, false)};
            bc.edge(Edge::left) = {{0, k.b, SegValue::periodic, {}}};
            bc.edge(Edge::right) = {{0, k.b, SegValue::periodic, {}}};
            break;
        }
    }
    return bc;
}

// ---------------------------------------------------------------------------
// Piece construction.

enum class Seed { zero, capped_harmonic };

inline const char* to_string(Seed s) { return s == Seed::zero ? "zero" : "capped-harmonic"; }

struct PieceConfig {
    SolverConfig solver;
    double h = 0;                                       // 0: w/64 for pitchfork and helicoid, w/32 otherwise
    double x_min = std::numeric_limits<double>::quiet_NaN();  // NaN: surface default
    double x_max = std::numeric_limits<double>::quiet_NaN();
    // Caps prepended to the schedule when a cold solve fails.
    std::vector<double> warmup_caps{0.25, 0.5, 1, 2};
    Seed seed = Seed::zero;
    std::optional<ScalarField> init;
    double helicoid_half_window = 0;  // 0: 5w
    double calibration_tol = 1e-8;
    int calibration_max_solves = 24;
};

struct CalibrationReport {
    std::string parameter;
    double value = 0;
    double multiplier = 0;
    double symmetry_residual = std::numeric_limits<double>::quiet_NaN();
    int solves = 0;
    bool converged = false;
    std::vector<std::array<double, 2>> trace;  // (parameter, multiplier) per successful solve

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"parameter\": \"" << parameter << "\", \"value\": " << value
           << ", \"multiplier\": " << multiplier << ", \"solves\": " << solves
           << ", \"converged\": " << (converged ? "true" : "false");
        if (std::isfinite(symmetry_residual)) os << ", \"symmetry_residual\": " << symmetry_residual;
        os << ", \"trace\": [";
        for (std::size_t k = 0; k < trace.size(); ++k)
            os << (k ? ", " : "") << "[" << trace[k][0] << ", " << trace[k][1] << "]";
        os << "]}";
        return os.str();
    }
};

struct PieceResult {
    SurfaceKind kind;
    DomainSpec domain;
    BoundarySpec bc;
    ScalarField field;
    SolveReport report;
    std::optional<SolveReport> bootstrap;
    std::optional<CalibrationReport> calibration;
};

inline double default_h(const SurfaceKind& k) {
    const bool fine = k.type == SurfaceType::pitchfork || k.type == SurfaceType::helicoid;
    return k.w / (fine ? 64.0 : 32.0);
}

// Harmonic function with the capped boundary values at cap B (Neumann and
// periodic edges reflect). Used as a seed for Newton.
inline ScalarField capped_harmonic_lift(const DomainSpec& d, const BoundarySpec& bc, double B) {
    auto g = build_grid(d);
    const auto tr = cap_boundary(bc, B, g);
    const int nx = g->nx, ny = g->ny, N = nx * ny;
    const bool rows = nx <= ny;
    auto id = [&](int i, int j) { return rows ? j * nx + i : i * ny + j; };
    const int bw = (rows ? nx : ny);
    BandMatrix<double> A(N, bw, bw);
    std::vector<double> rhs(N, 0.0);
    const double ax = 1 / (g->hx * g->hx), ay = 1 / (g->hy * g->hy);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int k = id(i, j);
            const int gi = g->index(i, j);
            if (g->on_edge(i, j) && tr.defined[gi]) {
                A.add(k, k, 1.0);
                rhs[k] = tr.values[gi];
            } else if (g->on_edge(i, j)) {
                const int ii = std::clamp(i, 1, nx - 2), jj = std::clamp(j, 1, ny - 2);
                A.add(k, k, 1.0);
                A.add(k, id(ii, jj), -1.0);
            } else {
                A.add(k, k, -2 * (ax + ay));
                A.add(k, id(i - 1, j), ax);
                A.add(k, id(i + 1, j), ax);
                A.add(k, id(i, j - 1), ay);
                A.add(k, id(i, j + 1), ay);
            }
        }
    BandedLU<double> lu(std::move(A));
    lu.solve(rhs);
    ScalarField u(g);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) u(i, j) = rhs[id(i, j)];
    return u;
}

namespace detail {

inline SolverConfig with_warmup(const SolverConfig& c, const std::vector<double>& warm, bool cold) {
    SolverConfig out = c;
    if (!cold) return out;
    std::vector<double> caps;
    for (double b : warm)
        if (b < c.cap_schedule.front()) caps.push_back(b);
    caps.insert(caps.end(), c.cap_schedule.begin(), c.cap_schedule.end());
    out.cap_schedule = caps;
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0;
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    double r = v[m];
    if (v.size() % 2 == 0) r = 0.5 * (r + *std::max_element(v.begin(), v.begin() + m));
    return r;
}

// Solves one boundary problem, seeding from cfg.init, a harmonic lift or zero.
inline std::pair<ScalarField, SolveReport> solve_seeded(const DomainSpec& d, const BoundarySpec& bc,
                                                        const PieceConfig& cfg,
                                                        const std::optional<ScalarField>& init) {
    std::optional<ScalarField> guess = init;
    if (!guess && cfg.seed == Seed::capped_harmonic) {
        DomainSpec dv = d;
        guess = capped_harmonic_lift(dv, bc, cfg.solver.cap_schedule.front());
    }
    if (init || cfg.warmup_caps.empty()) return solve_bvp(d, bc, cfg.solver, guess);
    try {
        return solve_bvp(d, bc, cfg.solver, guess);
    } catch (const NonConvergence&) {
    } catch (const LinearSolverFailure&) {
    }
    return solve_bvp(d, bc, with_warmup(cfg.solver, cfg.warmup_caps, true), guess);
}

}  // namespace detail

// sup |u(x, y) - u(x_hat - x, w - y)| over the middle half of the window.
inline double helicoid_symmetry_residual(const ScalarField& u, double x_hat, double w) {
    const Grid& g = *u.grid;
    const double xc = 0.5 * (g.spec.x_min + g.spec.x_max), half = 0.25 * (g.spec.x_max - g.spec.x_min);
    double r = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i, j), y = g.y(j);
            if (std::abs(x - xc) > half) continue;
            auto v = u.sample_cubic(x_hat - x, w - y);
            if (v) r = std::max(r, std::abs(u(i, j) - *v));
        }
    return r;
}

namespace detail {

inline std::pair<double, double> helicoid_window(const SurfaceKind& k, const PieceConfig& cfg, double x_hat) {
    const double X = cfg.helicoid_half_window > 0 ? cfg.helicoid_half_window : 5 * k.w;
    return {0.5 * x_hat - X, 0.5 * x_hat + X};
}

// Root of the compatibility multiplier mu(p) of a one-parameter family of
// flux problems. solve(p, init) returns the field and report or throws.
template <class Solve>
PieceResult calibrate_multiplier(const std::string& name, double p0, double scale, const PieceConfig& cfg,
                                 Solve&& solve, CalibrationReport& rep) {
    rep.parameter = name;
    struct Sample {
        double p, mu;
        PieceResult piece;
    };
    struct End {
        double p, f;
    };
    std::optional<Sample> best;
    std::optional<End> lo, hi;  // latest points with mu < 0 and mu >= 0
    int last_side = 0;
    std::vector<std::array<double, 2>> hist;
    auto attempt = [&](double p, const std::optional<ScalarField>& init) -> bool {
        if (rep.solves >= cfg.calibration_max_solves) return false;
        ++rep.solves;
        std::optional<PieceResult> r;
        try {
            r = solve(p, init);
        } catch (const NonConvergence&) {
        } catch (const LinearSolverFailure&) {
        }
        if (!r) return false;
        const double mu = r->report.multiplier;
        rep.trace.push_back({p, mu});
        hist.push_back({p, mu});
        // Illinois: halve the retained end when the same side is hit twice.
        const int side = mu < 0 ? -1 : 1;
        if (side == last_side) {
            if (side < 0 && hi) hi->f *= 0.5;
            if (side > 0 && lo) lo->f *= 0.5;
        }
        last_side = side;
        (side < 0 ? lo : hi) = End{p, mu};
        if (!best || std::abs(mu) < std::abs(best->mu)) best = Sample{p, mu, std::move(*r)};
        return true;
    };

    // Cold starts near the predictor.
    for (double f : {1.0, 1.1, 0.9, 1.25, 0.8, 1.5, 0.65})
        if (attempt(p0 * f, std::nullopt)) break;
    if (!best) throw CalibrationFailed(name + " calibration: no cold start converged");

    while (std::abs(best->mu) > cfg.calibration_tol && rep.solves < cfg.calibration_max_solves) {
        double next;
        if (lo && hi) {
            if (std::abs(hi->p - lo->p) < 1e-13 * scale) break;
            next = lo->p - lo->f * (hi->p - lo->p) / (hi->f - lo->f);
        } else if (hist.size() >= 2 && hist[hist.size() - 1][1] != hist[hist.size() - 2][1]) {
            const auto& q1 = hist[hist.size() - 1];
            const auto& q0 = hist[hist.size() - 2];
            next = q1[0] - q1[1] * (q1[0] - q0[0]) / (q1[1] - q0[1]);
            next = std::clamp(next, q1[0] - 0.2 * scale, q1[0] + 0.2 * scale);
        } else {
            next = best->p * (1 - 0.02 * (best->mu > 0 ? 1 : -1));
        }
        const double anchor = best->p;
        const std::optional<ScalarField> init = best->piece.field;
        bool ok = attempt(next, init);
        double step = next - anchor;
        while (!ok && rep.solves < cfg.calibration_max_solves && std::abs(step) > 1e-9 * scale) {
            step *= 0.5;
            ok = attempt(anchor + step, init);
        }
        if (!ok) break;
    }
    rep.value = best->p;
    rep.multiplier = best->mu;
    rep.converged = std::abs(best->mu) <= cfg.calibration_tol;
    PieceResult out = std::move(best->piece);
    return out;
}

}  // namespace detail

inline PieceResult construct_piece(const SurfaceKind& kind, const PieceConfig& cfg = {});

// Calibrates the helicoid axis abscissa x_hat. With Neumann ends the data are
// solvable only when the flux balance 2 x_hat = integral of 1/W holds, so
// x_hat is the root of the compatibility multiplier. The symmetry residual
// under (x, y) -> (x_hat - x, w - y) is reported.
inline PieceResult helicoid_axis_calibrate(double w, const PieceConfig& cfg = {}) {
    SurfaceKind k = SurfaceKind::helicoid(w);
    validate(k);
    CalibrationReport rep;
    auto solve = [&](double xh, const std::optional<ScalarField>& init) {
        SurfaceKind kk = k;
        kk.x_hat = xh;
        PieceConfig c = cfg;
        c.init = init;
        auto [a, b] = detail::helicoid_window(kk, cfg, xh);
        c.x_min = a;
        c.x_max = b;
        return construct_piece(kk, c);
    };
    // Flux-balance predictor x_hat = (1/2) integral 1/W, with the integral
    // of order 1.2 w^2 over the strip.
    PieceResult r = detail::calibrate_multiplier("x_hat", 0.6 * w * w, w, cfg, solve, rep);
    rep.symmetry_residual = helicoid_symmetry_residual(r.field, rep.value, w);
    r.kind.x_hat = rep.value;
    r.calibration = rep;
    const double h = r.domain.h;
    if (!rep.converged || rep.symmetry_residual > 10 * h * h) {
        std::ostringstream os;
        os << std::setprecision(10) << "helicoid axis calibration failed; best x_hat = " << rep.value
           << ", multiplier = " << rep.multiplier << ", symmetry residual = " << rep.symmetry_residual;
        throw CalibrationFailed(os.str());
    }
    return r;
}

// Scherk length: root in L of the compatibility multiplier of the
// parallelogram problem, L = w / sin(alpha) + (1/2) integral 1/W.
inline PieceResult scherk_length_calibrate(double alpha, double w, const PieceConfig& cfg = {}) {
    SurfaceKind k = SurfaceKind::scherk(alpha, w, 1.0);
    validate(k);
    CalibrationReport rep;
    auto solve = [&](double L, const std::optional<ScalarField>& init) {
        SurfaceKind kk = k;
        kk.L = L;
        PieceConfig c = cfg;
        c.init = init;
        return construct_piece(kk, c);
    };
    const double p0 = w / std::sin(alpha) + 0.5 * w * w;
    PieceResult r = detail::calibrate_multiplier("L", p0, w, cfg, solve, rep);
    r.kind.L = rep.value;
    r.calibration = rep;
    if (!rep.converged) throw CalibrationFailed("scherk length calibration did not reach the multiplier root: " + rep.to_json());
    return r;
}

// Trident strip width: root in b of the compatibility multiplier of the
// one-period cell, integral of 1/W = 2a.
inline PieceResult trident_width_calibrate(double a, const PieceConfig& cfg = {}) {
    validate(SurfaceKind::trident(a, 1.0));
    CalibrationReport rep;
    auto solve = [&](double b, const std::optional<ScalarField>& init) {
        SurfaceKind kk = SurfaceKind::trident(a, b);
        PieceConfig c = cfg;
        c.init = init;
        return construct_piece(kk, c);
    };
    const double p0 = std::min(std::sqrt(2 * a), 0.9 * pi);
    PieceResult r = detail::calibrate_multiplier("b", p0, p0, cfg, solve, rep);
    r.kind.b = r.kind.w = rep.value;
    r.calibration = rep;
    if (!rep.converged) throw CalibrationFailed("trident width calibration did not reach the multiplier root: " + rep.to_json());
    return r;
}

namespace detail {

// Pitchfork in two passes: a window extended to the left with a Neumann far
// end, then the target window with the first pass as data.
inline PieceResult two_pass(const SurfaceKind& k, const DomainSpec& target, const PieceConfig& cfg) {
    const double len = target.x_max - target.x_min;
    const double w = k.w;
    DomainSpec d1 = target;
    d1.x_min = target.x_min - len;
    const BoundarySpec bc1 = make_boundary_spec(k, d1.x_min, d1.x_max);
    PieceResult out;
    out.kind = k;
    auto [u1, rep1] = solve_seeded(d1, bc1, cfg, cfg.init);
    out.bootstrap = rep1;

    BoundarySpec bc2 = make_boundary_spec(k, target.x_min, target.x_max);
    auto g = [w](double x, double y) { return grim_reaper_value(w, x, y); };
    const Grid& G = *u1.grid;
    // Left end: the first-pass column; right end: g_w plus the offset of
    // the first pass next to its right edge.
    auto col = std::make_shared<ScalarField>(u1);
    const double xl = target.x_min;
    bc2.edge(Edge::left) = {trace_seg(0, w, [col, xl](double, double y) {
        const Grid& gg = *col->grid;
        const double yy = std::clamp(y, gg.y(0), gg.y(gg.ny - 1));
        auto v = col->sample_cubic(xl, yy);
        return v ? *v : std::numeric_limits<double>::quiet_NaN();
    })};
    std::vector<double> off;
    const int ip = G.nx - 2;
    for (int j = 0; j < G.ny; ++j) off.push_back(u1(ip, j) - g(G.x(ip, j), G.y(j)));
    const double c = median(off);
    bc2.edge(Edge::right) = {trace_seg(0, w, [g, c](double x, double y) { return g(x, y) + c; })};
    auto [u2, rep2] = solve_bvp(target, bc2, cfg.solver, u1);
    out.domain = target;
    out.bc = bc2;
    out.field = std::move(u2);
    out.report = rep2;
    return out;
}

}  // namespace detail

// Builds the fundamental piece of a surface: boundary data, then the solve.
// Helicoids without an axis abscissa are calibrated first.
inline PieceResult construct_piece(const SurfaceKind& kind, const PieceConfig& cfg) {
    validate(kind);
    if (kind.type == SurfaceType::helicoid && !(kind.x_hat > 0)) return helicoid_axis_calibrate(kind.w, cfg);
    const double w = kind.w;
    const double h = cfg.h > 0 ? cfg.h : default_h(kind);
    auto pick = [](double v, double dflt) { return std::isnan(v) ? dflt : v; };
    DomainSpec d;
    switch (kind.type) {
        case SurfaceType::grim_reaper:
        case SurfaceType::tilted_grim_reaper:
            d = DomainSpec::strip(w, pick(cfg.x_min, -8), pick(cfg.x_max, 8), h);
            break;
        case SurfaceType::pitchfork:
            d = DomainSpec::strip(w, pick(cfg.x_min, -12), pick(cfg.x_max, 12), h);
            break;
        case SurfaceType::helicoid: {
            auto [a, b] = detail::helicoid_window(kind, cfg, kind.x_hat);
            d = DomainSpec::strip(w, pick(cfg.x_min, a), pick(cfg.x_max, b), h);
            break;
        }
        case SurfaceType::scherk:
            d = DomainSpec::parallelogram(kind.alpha, w, kind.L, h);
            break;
        case SurfaceType::scherkenoid: {
            const double L = pick(cfg.x_max, std::max(12.0, 4 * w));
            d = DomainSpec::parallelogram(kind.alpha, w, L, h);
            break;
        }
        case SurfaceType::trident:
            d = DomainSpec::strip(kind.b, pick(cfg.x_min, -kind.a), pick(cfg.x_max, kind.a), h);
            break;
    }
    if (kind.type == SurfaceType::pitchfork) return detail::two_pass(kind, d, cfg);
    PieceResult out;
    out.kind = kind;
    out.domain = d;
    out.bc = make_boundary_spec(kind, d.x_min, d.x_max);
    auto [u, rep] = detail::solve_seeded(d, out.bc, cfg, cfg.init);
    out.field = std::move(u);
    out.report = rep;
    return out;
}

// ---------------------------------------------------------------------------
// Schwarz reflection.

// 180 degree rotation about the vertical line through (px, py).
inline Vec3 reflect_about_line(const Vec3& v, double px, double py) { return {2 * px - v[0], 2 * py - v[1], v[2]}; }

inline double default_z_clip(const SolveReport& r) {
    const double B = r.stage_caps.empty() ? 12.0 : r.stage_caps.back();
    return 0.75 * B;
}

// Full surface from a converged piece. Pitchforks use one reflection about
// the z-axis. Helicoid, Scherk and Scherkenoid pieces alternate reflections
// about the lines through the origin and through their second axis point,
// adding `copies` patches. Trident cells repeat over `copies` periods.
inline SurfaceMesh schwarz_reflect(const PieceResult& piece, int copies = 1,
                                   double z_clip = std::numeric_limits<double>::quiet_NaN()) {
    if (!piece.report.converged) throw RefuseUnconverged("piece did not converge; refusing to reflect");
    if (copies < 1) throw InvalidArgument("copies must be at least 1");
    if (std::isnan(z_clip)) z_clip = default_z_clip(piece.report);
    const SurfaceKind& k = piece.kind;
    const SurfaceMesh base = graph_mesh(piece.field, z_clip);
    SurfaceMesh out;
    auto crease = [&](double x, double y) { out.crease_lines.push_back(vertical_segment(x, y, -z_clip, z_clip)); };

    switch (k.type) {
        case SurfaceType::grim_reaper:
        case SurfaceType::tilted_grim_reaper:
            out = base;
            break;
        case SurfaceType::pitchfork:
            out = base;
            out.append(base.mapped([](const Vec3& v) { return reflect_about_line(v, 0, 0); }));
            crease(0, 0);
            break;
        case SurfaceType::helicoid:
        case SurfaceType::scherk:
        case SurfaceType::scherkenoid: {
            // Second axis point: (x_hat, w), the upper-right vertex, or the
            // upper-left vertex.
            double qx = k.x_hat, qy = k.w;
            if (k.type == SurfaceType::scherk) qx = k.L + k.cot_alpha() * k.w;
            if (k.type == SurfaceType::scherkenoid) qx = k.cot_alpha() * k.w;
            // Patch over the m-th strip [m w, (m + 1) w]: even m translate the
            // piece by m (qx, qy); odd m translate its reflection about q.
            auto patch = [&](int m) {
                if (m % 2 == 0) {
                    const double tx = m * qx, ty = m * qy;
                    return base.mapped([=](const Vec3& v) { return Vec3{v[0] + tx, v[1] + ty, v[2]}; });
                }
                const double tx = (m - 1) * qx, ty = (m - 1) * qy;
                return base.mapped([=](const Vec3& v) {
                    const Vec3 r = reflect_about_line(v, qx, qy);
                    return Vec3{r[0] + tx, r[1] + ty, r[2]};
                });
            };
            int m_lo = 0, m_hi = 0;
            out = base;
            for (int c = 1; c <= copies; ++c) {
                const int m = c % 2 == 1 ? ++m_hi : --m_lo;
                out.append(patch(m));
            }
            for (int n = m_lo + 1; n <= m_hi; ++n) crease(n * qx, n * qy);
            break;
        }
        case SurfaceType::trident: {
            const SurfaceMesh cell_lo = base.mapped([](const Vec3& v) { return reflect_about_line(v, 0, 0); });
            for (int c = 0; c < copies; ++c) {
                const double tx = 2 * k.a * c;
                auto shift = [tx](const Vec3& v) { return Vec3{v[0] + tx, v[1], v[2]}; };
                out.append(base.mapped(shift));
                out.append(cell_lo.mapped(shift));
            }
            const Grid& g = *piece.field.grid;
            const double x0 = g.spec.x_min, x1 = g.spec.x_max + 2 * k.a * (copies - 1);
            for (long n = static_cast<long>(std::ceil(x0 / k.a - 1e-9)); n * k.a <= x1 + 1e-9; ++n)
                crease(n * k.a, 0);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quotient distance and uniqueness probes.

// min over c of max |d_k - c|: start at the median offset, then ternary search
// on the convex objective.
inline std::pair<double, double> quotient_distance(const std::vector<double>& diff) {
    if (diff.empty()) return {0, 0};
    auto f = [&](double c) {
        double m = 0;
        for (double d : diff) m = std::max(m, std::abs(d - c));
        return m;
    };
    const double c0 = detail::median(diff);
    double lo = *std::min_element(diff.begin(), diff.end()), hi = *std::max_element(diff.begin(), diff.end());
    lo = std::min(lo, c0);
    hi = std::max(hi, c0);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1 + std::abs(lo) + std::abs(hi)); ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (f(m1) <= f(m2)) hi = m2;
        else lo = m1;
    }
    double c = 0.5 * (lo + hi);
    if (f(c0) < f(c)) c = c0;
    return {f(c), c};
}

// Compares two fields on the core of the finer one: middle half in x and at
// least w/8 away from the y-edges. The coarser field is interpolated.
inline std::pair<double, double> quotient_distance(const ScalarField& a, const ScalarField& b, double w) {
    const bool a_fine = a.grid->hx * a.grid->hy <= b.grid->hx * b.grid->hy;
    const ScalarField& fine = a_fine ? a : b;
    const ScalarField& coarse = a_fine ? b : a;
    const Grid& g = *fine.grid;
    const double xc = 0.5 * (g.spec.x_min + g.spec.x_max), half = 0.25 * (g.spec.x_max - g.spec.x_min);
    std::vector<double> diff;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i, j), y = g.y(j);
            if (std::abs(x - g.cot * y - xc) > half || y < w / 8 || y > w - w / 8) continue;
            if (!fine.usable(i, j)) continue;
            auto v = coarse.sample_cubic(x, y);
            if (!v) continue;
            diff.push_back(a_fine ? fine(i, j) - *v : *v - fine(i, j));
        }
    return quotient_distance(diff);
}

struct ProbeRun {
    Seed seed = Seed::zero;
    double h = 0;
    double B = 12;
};

struct ProbeReport {
    struct Run {
        ProbeRun spec;
        bool converged = false;
        double final_residual = 0;
        double interior_drift = 0;
        std::string failure;
    };
    struct Pair {
        int i = 0, j = 0;
        double distance = 0;
        double offset = 0;
    };
    std::vector<Run> runs;
    std::vector<Pair> pairs;
    bool partial = false;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"runs\": [";
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const auto& r = runs[k];
            os << (k ? ", " : "") << "{\"seed\": \"" << to_string(r.spec.seed) << "\", \"h\": " << r.spec.h
               << ", \"B\": " << r.spec.B << ", \"converged\": " << (r.converged ? "true" : "false")
               << ", \"final_residual\": " << r.final_residual << ", \"interior_drift\": " << r.interior_drift;
            if (!r.failure.empty()) os << ", \"failure\": \"" << r.failure << "\"";
            os << "}";
        }
        os << "], \"pairs\": [";
        for (std::size_t k = 0; k < pairs.size(); ++k)
            os << (k ? ", " : "") << "{\"i\": " << pairs[k].i << ", \"j\": " << pairs[k].j
               << ", \"distance\": " << pairs[k].distance << ", \"offset\": " << pairs[k].offset << "}";
        os << "], \"partial\": " << (partial ? "true" : "false") << "}";
        return os.str();
    }
};

// Solves the piece once per run and reports the quotient distance of every
// pair of converged runs. Failed runs are flagged and skipped.
inline ProbeReport uniqueness_probe(const SurfaceKind& kind, const std::vector<ProbeRun>& runs,
                                    const PieceConfig& base = {}, std::vector<ScalarField>* fields_out = nullptr) {
    if (runs.size() < 2) throw InvalidArgument("a uniqueness probe needs at least two runs");
    ProbeReport rep;
    std::vector<std::optional<ScalarField>> fields;
    for (const auto& r : runs) {
        PieceConfig c = base;
        c.seed = r.seed;
        if (r.h > 0) c.h = r.h;
        std::vector<double> caps;
        for (double b : c.solver.cap_schedule)
            if (b < r.B) caps.push_back(b);
        caps.push_back(r.B);
        c.solver.cap_schedule = caps;
        ProbeReport::Run run;
        run.spec = r;
        try {
            PieceResult p = construct_piece(kind, c);
            run.converged = p.report.converged;
            run.final_residual = p.report.final_residual;
            run.interior_drift = p.report.interior_drift;
            fields.push_back(p.field);
        } catch (const Error& e) {
            run.failure = e.what();
            rep.partial = true;
            fields.push_back(std::nullopt);
        }
        rep.runs.push_back(run);
    }
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = i + 1; j < fields.size(); ++j) {
            if (!fields[i] || !fields[j]) continue;
            auto [d, c] = quotient_distance(*fields[i], *fields[j], kind.w);
            rep.pairs.push_back({static_cast<int>(i), static_cast<int>(j), d, c});
        }
    if (fields_out)
        for (auto& f : fields)
            if (f) fields_out->push_back(*f);
    return rep;
}

// ---------------------------------------------------------------------------
// Rescaled helicoid limit.

struct LimitReport {
    struct Entry {
        double w = 0;
        double x_hat = 0;
        double sup_H = 0;
        int core_vertices = 0;
    };
    std::vector<Entry> entries;
    bool strictly_decreasing = false;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"entries\": [";
        for (std::size_t k = 0; k < entries.size(); ++k)
            os << (k ? ", " : "") << "{\"w\": " << entries[k].w << ", \"x_hat\": " << entries[k].x_hat
               << ", \"sup_H\": " << entries[k].sup_H << ", \"core_vertices\": " << entries[k].core_vertices << "}";
        os << "], \"strictly_decreasing\": " << (strictly_decreasing ? "true" : "false") << "}";
        return os.str();
    }
};

// sup |H| of a mesh over vertices whose (x, y) lie in the given box.
inline std::pair<double, int> sup_mean_curvature(const SurfaceMesh& m, double x0, double x1, double y0, double y1) {
    const auto H = mean_curvature(m);
    double s = 0;
    int n = 0;
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        const auto& p = m.vertices[v];
        if (std::isnan(H[v]) || p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1) continue;
        s = std::max(s, H[v]);
        ++n;
    }
    return {s, n};
}

// For each width: calibrated helicoid piece at h = w/32 (unless set), mesh
// rescaled by 1/w, sup |H| over the core (middle half in x, rescaled y in
// [1/8, 7/8]).
inline LimitReport rescaled_helicoid_limit_check(const std::vector<double>& widths, const PieceConfig& base = {}) {
    LimitReport rep;
    for (double w : widths) {
        if (!(w < pi)) throw InvalidWidth("rescaled helicoid limit needs w < pi");
        PieceConfig c = base;
        if (!(c.h > 0)) c.h = w / 32;
        PieceResult p = helicoid_axis_calibrate(w, c);
        const SurfaceMesh m = graph_mesh(p.field, default_z_clip(p.report)).scaled(1 / w);
        const Grid& g = *p.field.grid;
        const double xc = 0.5 * (g.spec.x_min + g.spec.x_max) / w, half = 0.25 * (g.spec.x_max - g.spec.x_min) / w;
        auto [s, n] = sup_mean_curvature(m, xc - half, xc + half, 0.125, 0.875);
        rep.entries.push_back({w, p.kind.x_hat, s, n});
    }
    rep.strictly_decreasing = true;
    for (std::size_t k = 1; k < rep.entries.size(); ++k)
        rep.strictly_decreasing = rep.strictly_decreasing && rep.entries[k].sup_H < rep.entries[k - 1].sup_H;
    return rep;
}

}  // namespace transol
