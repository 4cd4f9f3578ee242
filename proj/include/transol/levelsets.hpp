#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace transol {

using Point2 = std::array<double, 2>;

// ---------------------------------------------------------------------------
// Difference fields.

struct DifferenceSpec {
    ScalarField u1, u2;
    Point2 xi{0, 0};  // u1'(p) = u1(p - xi)
    double w = pi;
};

struct DifferenceField {
    ScalarField v;
    Point2 xi{0, 0};  // after snapping
    bool snapped = false;
    std::string warning;
    double y_lo = 0, y_hi = 0;  // overlap strip
};

// v = u1(. - xi) - u2 on the nodes of u2's grid inside both strips. Nodes
// within 2h of either strip's edges are masked out.
inline DifferenceField difference_field(const DifferenceSpec& spec) {
    const Grid& g = *spec.u2.grid;
    if (std::abs(spec.xi[1]) >= spec.w) throw NoOverlap("|xi_2| >= w leaves no overlap");
    DifferenceField out;
    out.xi = {std::round(spec.xi[0] / g.hx) * g.hx, std::round(spec.xi[1] / g.hy) * g.hy};
    if (std::abs(out.xi[0] - spec.xi[0]) > 1e-9 || std::abs(out.xi[1] - spec.xi[1]) > 1e-9) {
        out.snapped = true;
        std::ostringstream os;
        os << std::setprecision(12) << "shift snapped to the grid: (" << out.xi[0] << ", " << out.xi[1] << ")";
        out.warning = os.str();
    }
    if (std::abs(out.xi[1]) >= spec.w) throw NoOverlap("snapped shift leaves no overlap");
    out.y_lo = std::max(0.0, out.xi[1]);
    out.y_hi = std::min(spec.w, spec.w + out.xi[1]);
    const double band = 2 * std::max(g.hx, g.hy) * (1 - 1e-9);
    ScalarField v(spec.u2.grid);
    int used = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.index(i, j);
            const double x = g.x(i, j), y = g.y(j);
            std::optional<double> a;
            if (y >= out.y_lo + band && y <= out.y_hi - band && spec.u2.usable(i, j))
                a = spec.u1.sample_cubic(x - out.xi[0], y - out.xi[1]);
            if (!a) {
                v.values[k] = 0;
                v.mask[k] = NodeKind::excluded;
                continue;
            }
            v.values[k] = *a - spec.u2(i, j);
            ++used;
        }
    if (used == 0) throw NoOverlap("shifted fields share no usable nodes");
    out.v = std::move(v);
    return out;
}

// ---------------------------------------------------------------------------
// Critical points.

struct CriticalPoint {
    Point2 p{0, 0};
    double grad_at_detection = 0;
    double grad_after_polish = 0;
    double isolation = std::numeric_limits<double>::infinity();
    double value = 0;
};

namespace detail {

struct GradientField {
    std::vector<double> gx, gy;
    std::vector<char> ok;
};

inline GradientField gradient_field(const ScalarField& v) {
    const Grid& g = *v.grid;
    GradientField G{std::vector<double>(g.size(), 0), std::vector<double>(g.size(), 0), std::vector<char>(g.size(), 0)};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!has_stencil(v, i, j)) continue;
            const auto d = fd_derivatives(v, i, j);
            const int k = g.index(i, j);
            G.gx[k] = d.ux;
            G.gy[k] = d.uy;
            G.ok[k] = 1;
        }
    return G;
}

inline double bilinear(double f00, double f10, double f01, double f11, double a, double b) {
    return (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + (1 - a) * b * f01 + a * b * f11;
}

}  // namespace detail

// Cells where both gradient components change sign seed a Newton iteration
// on the bilinear interpolant of the gradient; results within 2h merge.
inline std::vector<CriticalPoint> find_critical_points(const ScalarField& v, double grad_tol = 1e-8) {
    const Grid& g = *v.grid;
    const auto G = detail::gradient_field(v);
    const double h = std::max(g.hx, g.hy);
    std::vector<CriticalPoint> raw;
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            const int k00 = g.index(i, j), k10 = g.index(i + 1, j), k01 = g.index(i, j + 1),
                      k11 = g.index(i + 1, j + 1);
            if (!G.ok[k00] || !G.ok[k10] || !G.ok[k01] || !G.ok[k11]) continue;
            auto straddles = [&](const std::vector<double>& f) {
                const double lo = std::min({f[k00], f[k10], f[k01], f[k11]});
                const double hi = std::max({f[k00], f[k10], f[k01], f[k11]});
                return lo <= 0 && hi >= 0 && hi > lo;
            };
            if (!straddles(G.gx) || !straddles(G.gy)) continue;
            auto eval = [&](double a, double b) {
                return std::array<double, 2>{detail::bilinear(G.gx[k00], G.gx[k10], G.gx[k01], G.gx[k11], a, b),
                                             detail::bilinear(G.gy[k00], G.gy[k10], G.gy[k01], G.gy[k11], a, b)};
            };
            double a = 0.5, b = 0.5;
            const auto g0 = eval(a, b);
            CriticalPoint cp;
            cp.grad_at_detection = std::hypot(g0[0], g0[1]);
            bool inside = true;
            for (int it = 0; it < 60; ++it) {
                const auto f = eval(a, b);
                if (std::hypot(f[0], f[1]) <= 1e-15) break;
                const double fxa = (1 - b) * (G.gx[k10] - G.gx[k00]) + b * (G.gx[k11] - G.gx[k01]);
                const double fxb = (1 - a) * (G.gx[k01] - G.gx[k00]) + a * (G.gx[k11] - G.gx[k10]);
                const double fya = (1 - b) * (G.gy[k10] - G.gy[k00]) + b * (G.gy[k11] - G.gy[k01]);
                const double fyb = (1 - a) * (G.gy[k01] - G.gy[k00]) + a * (G.gy[k11] - G.gy[k10]);
                const double det = fxa * fyb - fxb * fya;
                if (det == 0) break;
                const double da = (f[0] * fyb - fxb * f[1]) / det, db = (fxa * f[1] - f[0] * fya) / det;
                a -= da;
                b -= db;
                if (a < -0.5 || a > 1.5 || b < -0.5 || b > 1.5) {
                    inside = false;
                    break;
                }
                if (std::abs(da) + std::abs(db) < 1e-15) break;
            }
            if (!inside || a < -1e-9 || a > 1 + 1e-9 || b < -1e-9 || b > 1 + 1e-9) continue;
            const auto f = eval(a, b);
            cp.grad_after_polish = std::hypot(f[0], f[1]);
            if (cp.grad_after_polish > std::max(grad_tol, 1e-6 * cp.grad_at_detection)) continue;
            const double t = g.y(j) + b * g.hy;
            cp.p = {g.s(i) + a * g.hx + g.cot * t, t};
            cp.value = detail::bilinear(v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1), a, b);
            raw.push_back(cp);
        }
    std::vector<CriticalPoint> out;
    for (const auto& c : raw) {
        bool merged = false;
        for (auto& o : out)
            if (std::hypot(c.p[0] - o.p[0], c.p[1] - o.p[1]) <= 2 * h) {
                if (c.grad_after_polish < o.grad_after_polish) o = c;
                merged = true;
                break;
            }
        if (!merged) out.push_back(c);
    }
    for (auto& c : out)
        for (const auto& o : out)
            if (&c != &o) c.isolation = std::min(c.isolation, std::hypot(c.p[0] - o.p[0], c.p[1] - o.p[1]));
    return out;
}

// ---------------------------------------------------------------------------
// Zero-set arcs.

enum class ArcType { type_i_plus_x, type_ii_minus_x, type_iii_through_xi, type_iv_through_axis, closed_loop, indeterminate };

inline const char* to_string(ArcType t) {
    switch (t) {
        case ArcType::type_i_plus_x: return "i";
        case ArcType::type_ii_minus_x: return "ii";
        case ArcType::type_iii_through_xi: return "iii";
        case ArcType::type_iv_through_axis: return "iv";
        case ArcType::closed_loop: return "closed";
        case ArcType::indeterminate: return "indeterminate";
    }
    return "?";
}

enum class ArcEnd { critical, plus_x, minus_x, y_edge, mask, closed };

struct Arc {
    std::vector<Point2> points;
    bool closed = false;
    std::array<int, 2> cp{-1, -1};  // critical point attached at each end
    std::array<ArcEnd, 2> end{ArcEnd::mask, ArcEnd::mask};
    ArcType type = ArcType::indeterminate;
};

struct ArcSet {
    std::vector<Arc> arcs;
    std::vector<CriticalPoint> critical_points;
    double h = 0;

    int ends_at(int c) const {
        int n = 0;
        for (const auto& a : arcs) n += (a.cp[0] == c) + (a.cp[1] == c);
        return n;
    }

    void write_csv(std::ostream& os) const {
        os << "arc_id,type,x,y\n" << std::setprecision(17);
        for (std::size_t k = 0; k < arcs.size(); ++k)
            for (const auto& p : arcs[k].points) os << k << "," << to_string(arcs[k].type) << "," << p[0] << "," << p[1] << "\n";
    }
    void write_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw InvalidArgument("cannot write " + path);
        write_csv(f);
    }
};

namespace detail {

inline double dist(const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Usable-node extents used to name where an arc leaves the field.
struct Extents {
    double s_lo, s_hi, y_lo, y_hi, hx, hy, cot;
};

inline Extents usable_extents(const ScalarField& v) {
    const Grid& g = *v.grid;
    Extents e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), g.hx, g.hy, g.cot};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (v.usable(i, j)) {
                e.s_lo = std::min(e.s_lo, g.s(i));
                e.s_hi = std::max(e.s_hi, g.s(i));
                e.y_lo = std::min(e.y_lo, g.y(j));
                e.y_hi = std::max(e.y_hi, g.y(j));
            }
    return e;
}

inline ArcEnd end_kind(const Point2& p, const Extents& e) {
    const double s = p[0] - e.cot * p[1];
    if (s >= e.s_hi - 1.01 * e.hx) return ArcEnd::plus_x;
    if (s <= e.s_lo + 1.01 * e.hx) return ArcEnd::minus_x;
    if (p[1] <= e.y_lo + 1.01 * e.hy || p[1] >= e.y_hi - 1.01 * e.hy) return ArcEnd::y_edge;
    return ArcEnd::mask;
}

}  // namespace detail

// Marching squares on v = 0 (zero counts as positive, saddle cells resolved
// by the cell mean), linked into polylines. Arcs are cut at a disk of radius
// 2h around each critical point and the cut ends attached to it.
inline ArcSet extract_zero_arcs(const ScalarField& v, const std::vector<CriticalPoint>& cps) {
    const Grid& g = *v.grid;
    ArcSet out;
    out.critical_points = cps;
    out.h = std::max(g.hx, g.hy);
    // Edge ids: 2k for (i,j)-(i+1,j), 2k+1 for (i,j)-(i,j+1).
    std::map<long, Point2> pts;
    std::map<long, std::vector<long>> adj;
    auto pos = [&](int i, int j) { return v(i, j) >= 0; };
    auto cross = [&](int i0, int j0, int i1, int j1) {
        const double a = v(i0, j0), b = v(i1, j1);
        double t = a / (a - b);
        if (!std::isfinite(t)) t = 0.5;
        t = std::clamp(t, 0.0, 1.0);
        const double y = g.y(j0) + t * (g.y(j1) - g.y(j0));
        const double s = g.s(i0) + t * (g.s(i1) - g.s(i0));
        return Point2{s + g.cot * y, y};
    };
    auto edge_point = [&](int i, int j, int e) -> long {
        // e: 0 bottom, 1 right, 2 top, 3 left of cell (i, j).
        long id;
        Point2 p;
        switch (e) {
            case 0: id = 2L * g.index(i, j); p = cross(i, j, i + 1, j); break;
            case 1: id = 2L * g.index(i + 1, j) + 1; p = cross(i + 1, j, i + 1, j + 1); break;
            case 2: id = 2L * g.index(i, j + 1); p = cross(i, j + 1, i + 1, j + 1); break;
            default: id = 2L * g.index(i, j) + 1; p = cross(i, j, i, j + 1); break;
        }
        pts.emplace(id, p);
        return id;
    };
    auto link = [&](long a, long b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            if (!v.usable(i, j) || !v.usable(i + 1, j) || !v.usable(i, j + 1) || !v.usable(i + 1, j + 1)) continue;
            const bool c0 = pos(i, j), c1 = pos(i + 1, j), c2 = pos(i + 1, j + 1), c3 = pos(i, j + 1);
            std::vector<int> ex;
            if (c0 != c1) ex.push_back(0);
            if (c1 != c2) ex.push_back(1);
            if (c2 != c3) ex.push_back(2);
            if (c3 != c0) ex.push_back(3);
            if (ex.size() == 2) {
                link(edge_point(i, j, ex[0]), edge_point(i, j, ex[1]));
            } else if (ex.size() == 4) {
                const double mean = 0.25 * (v(i, j) + v(i + 1, j) + v(i + 1, j + 1) + v(i, j + 1));
                if ((mean >= 0) == c0) {
                    link(edge_point(i, j, 0), edge_point(i, j, 1));
                    link(edge_point(i, j, 2), edge_point(i, j, 3));
                } else {
                    link(edge_point(i, j, 3), edge_point(i, j, 0));
                    link(edge_point(i, j, 1), edge_point(i, j, 2));
                }
            }
        }

    // Link into polylines: open chains from degree-1 points, then cycles.
    std::vector<Arc> lines;
    std::map<long, char> used;
    auto walk = [&](long start) {
        Arc a;
        long prev = -1, cur = start;
        while (true) {
            used[cur] = 1;
            const Point2& p = pts[cur];
            if (a.points.empty() || detail::dist(a.points.back(), p) > 1e-14) a.points.push_back(p);
            long next = -1;
            for (long n : adj[cur])
                if (n != prev && !used[n]) {
                    next = n;
                    break;
                }
            if (next < 0) {
                // Closed when the start is adjacent to the last point.
                for (long n : adj[cur])
                    if (n == start && n != prev && a.points.size() > 2) a.closed = true;
                break;
            }
            prev = cur;
            cur = next;
        }
        if (a.closed) a.points.push_back(a.points.front());
        return a;
    };
    for (auto& [id, nb] : adj)
        if (nb.size() == 1 && !used[id]) lines.push_back(walk(id));
    for (auto& [id, nb] : adj)
        if (!used[id]) lines.push_back(walk(id));

    // Cut at the critical-point disks.
    const double rc = 2 * out.h;
    auto disk_of = [&](const Point2& p) {
        for (std::size_t c = 0; c < cps.size(); ++c)
            if (detail::dist(p, cps[c].p) < rc) return static_cast<int>(c);
        return -1;
    };
    const auto ext = detail::usable_extents(v);
    for (const auto& L : lines) {
        const auto& P = L.points;
        bool any_in = false;
        for (const auto& p : P) any_in = any_in || disk_of(p) >= 0;
        if (!any_in) {
            Arc a = L;
            if (a.closed) {
                a.end = {ArcEnd::closed, ArcEnd::closed};
                a.type = ArcType::closed_loop;
            } else {
                a.end = {detail::end_kind(P.front(), ext), detail::end_kind(P.back(), ext)};
            }
            out.arcs.push_back(a);
            continue;
        }
        // Rotate closed loops so they start inside a disk.
        std::vector<Point2> Q = P;
        if (L.closed) {
            Q.pop_back();
            std::size_t s0 = 0;
            while (disk_of(Q[s0]) < 0) ++s0;
            std::rotate(Q.begin(), Q.begin() + s0, Q.end());
            Q.push_back(Q.front());
        }
        Arc cur;
        int enter = -1;
        for (std::size_t k = 0; k < Q.size(); ++k) {
            const int d = disk_of(Q[k]);
            if (d >= 0) {
                if (!cur.points.empty()) {
                    cur.cp[1] = d;
                    cur.end[1] = ArcEnd::critical;
                    out.arcs.push_back(cur);
                    cur = Arc{};
                }
                enter = d;
                continue;
            }
            if (cur.points.empty()) {
                cur.cp[0] = enter;
                cur.end[0] = enter >= 0 ? ArcEnd::critical : detail::end_kind(Q[k], ext);
            }
            cur.points.push_back(Q[k]);
        }
        if (!cur.points.empty()) {
            cur.end[1] = detail::end_kind(cur.points.back(), ext);
            out.arcs.push_back(cur);
        }
    }
    // Loops through one critical point.
    for (auto& a : out.arcs)
        if (a.cp[0] >= 0 && a.cp[0] == a.cp[1] && a.points.size() > 2) a.type = ArcType::closed_loop;
    return out;
}

struct ClassifyContext {
    Point2 xi{0, 0};
    double w = pi;
    bool helicoid = false;
    double x_hat = 0;
};

// Types from the end of each arc away from its critical point: +x or -x
// exits, or the special boundary points (xi or 0 for type iii, (x_hat, w) or
// (x_hat, w) + xi for type iv, depending on the sign of xi_2).
inline ArcSet classify_arcs(ArcSet set, const ClassifyContext& ctx) {
    const double tol = 3 * set.h;
    const Point2 p3 = ctx.xi[1] >= 0 ? ctx.xi : Point2{0, 0};
    const Point2 p4 = ctx.xi[1] >= 0 ? Point2{ctx.x_hat, ctx.w} : Point2{ctx.x_hat + ctx.xi[0], ctx.w + ctx.xi[1]};
    auto special = [&](const Point2& p) -> std::optional<ArcType> {
        if (detail::dist(p, p3) <= tol) return ArcType::type_iii_through_xi;
        if (ctx.helicoid && detail::dist(p, p4) <= tol) return ArcType::type_iv_through_axis;
        return std::nullopt;
    };
    auto of_end = [&](const Arc& a, int e) -> std::optional<ArcType> {
        const Point2& p = e == 0 ? a.points.front() : a.points.back();
        if (auto s = special(p)) return s;
        if (a.end[e] == ArcEnd::plus_x) return ArcType::type_i_plus_x;
        if (a.end[e] == ArcEnd::minus_x) return ArcType::type_ii_minus_x;
        return std::nullopt;
    };
    for (auto& a : set.arcs) {
        if (a.type == ArcType::closed_loop || a.points.empty()) continue;
        const bool c0 = a.end[0] == ArcEnd::critical, c1 = a.end[1] == ArcEnd::critical;
        std::optional<ArcType> t;
        if (c0 && !c1) t = of_end(a, 1);
        else if (c1 && !c0) t = of_end(a, 0);
        else if (!c0 && !c1) {
            auto t0 = of_end(a, 0), t1 = of_end(a, 1);
            if (t0 && (*t0 == ArcType::type_iii_through_xi || *t0 == ArcType::type_iv_through_axis)) t = t0;
            else if (t1 && (*t1 == ArcType::type_iii_through_xi || *t1 == ArcType::type_iv_through_axis)) t = t1;
            else if (t0 && t1 && *t0 == *t1) t = t0;
        }
        a.type = t ? *t : ArcType::indeterminate;
    }
    return set;
}

enum class Verdict { consistent_with_uniqueness, critical_points_present, uniqueness_violation };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::consistent_with_uniqueness: return "CONSISTENT_WITH_UNIQUENESS";
        case Verdict::critical_points_present: return "CRITICAL_POINTS_PRESENT";
        case Verdict::uniqueness_violation: return "UNIQUENESS_VIOLATION";
    }
    return "?";
}

struct ArcCountReport {
    struct Entry {
        Point2 p{0, 0};
        int ends = 0;
        std::array<int, 6> per_type{};  // indexed by ArcType
        bool even = true;
        bool violation = false;
    };
    std::vector<Entry> entries;
    int closed_loops = 0;
    bool maximum_principle_flag = false;  // any closed zero loop
    Verdict verdict = Verdict::consistent_with_uniqueness;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"verdict\": \"" << to_string(verdict) << "\", \"closed_loops\": " << closed_loops
           << ", \"critical_points\": [";
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            os << (k ? ", " : "") << "{\"x\": " << e.p[0] << ", \"y\": " << e.p[1] << ", \"ends\": " << e.ends
               << ", \"types\": {\"i\": " << e.per_type[0] << ", \"ii\": " << e.per_type[1] << ", \"iii\": "
               << e.per_type[2] << ", \"iv\": " << e.per_type[3] << ", \"closed\": " << e.per_type[4]
               << ", \"indeterminate\": " << e.per_type[5] << "}, \"violation\": " << (e.violation ? "true" : "false")
               << "}";
        }
        os << "]}";
        return os.str();
    }
};

// Per critical point: incident arc ends (even and >= 4 when nonzero) and at
// most one arc of each type i-iv; anything else is a uniqueness violation.
inline ArcCountReport arc_count_report(const ArcSet& set) {
    ArcCountReport rep;
    for (const auto& a : set.arcs) rep.closed_loops += a.type == ArcType::closed_loop;
    rep.maximum_principle_flag = rep.closed_loops > 0;
    bool violation = false;
    for (std::size_t c = 0; c < set.critical_points.size(); ++c) {
        ArcCountReport::Entry e;
        e.p = set.critical_points[c].p;
        for (const auto& a : set.arcs) {
            const int n = (a.cp[0] == static_cast<int>(c)) + (a.cp[1] == static_cast<int>(c));
            e.ends += n;
            if (n) e.per_type[static_cast<int>(a.type)] += 1;
        }
        e.even = e.ends % 2 == 0;
        e.violation = !e.even || (e.ends > 0 && e.ends < 4) || e.per_type[4] > 0;
        for (int t = 0; t < 4; ++t) e.violation = e.violation || e.per_type[t] > 1;
        violation = violation || e.violation;
        rep.entries.push_back(e);
    }
    if (violation) rep.verdict = Verdict::uniqueness_violation;
    else if (!rep.entries.empty()) rep.verdict = Verdict::critical_points_present;
    return rep;
}

// ---------------------------------------------------------------------------
// Level regions.

struct LevelRegionReport {
    struct Level {
        double lambda = 0;
        long nodes = 0;
        bool nested = true;  // contained in the previous region
        bool fits = false;   // nonempty and inside the window
    };
    std::vector<Level> levels;
    double L1 = 0, L2 = 0;  // inf and sup of v on S0
    long s0_nodes = 0;
    std::optional<double> first_fitting_lambda;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"S0_nodes\": " << s0_nodes << ", \"L1\": " << L1 << ", \"L2\": " << L2
           << ", \"levels\": [";
        for (std::size_t k = 0; k < levels.size(); ++k)
            os << (k ? ", " : "") << "{\"lambda\": " << levels[k].lambda << ", \"nodes\": " << levels[k].nodes
               << ", \"nested\": " << (levels[k].nested ? "true" : "false") << ", \"fits\": "
               << (levels[k].fits ? "true" : "false") << "}";
        os << "], \"first_fitting_lambda\": ";
        if (first_fitting_lambda) os << *first_fitting_lambda;
        else os << "null";
        os << "}";
        return os.str();
    }
};

struct LevelRegionOptions {
    int sign = 1;  // S0 is a component of {sign * v > 0}
    std::optional<ThetaRegion> window;
    Point2 p_a{0, 0};
    std::vector<double> lambdas;  // empty: 16 geometric values in (0, L2)
    std::vector<double> critical_values;
};

namespace detail {

inline double dist_to_polyline(const Point2& p, const std::vector<Point2>& L) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < L.size(); ++k) {
        const double ax = L[k][0], ay = L[k][1], bx = L[k + 1][0], by = L[k + 1][1];
        const double dx = bx - ax, dy = by - ay, l2 = dx * dx + dy * dy;
        const double t = l2 > 0 ? std::clamp(((p[0] - ax) * dx + (p[1] - ay) * dy) / l2, 0.0, 1.0) : 0.0;
        d = std::min(d, std::hypot(p[0] - ax - t * dx, p[1] - ay - t * dy));
    }
    if (L.size() == 1) d = dist(p, L[0]);
    return d;
}

}  // namespace detail

// S0: the component of {sign v > 0} adjacent to both bounding arcs. Regions
// S_lambda = S0 cap {sign v > lambda} along a ladder of regular values.
inline LevelRegionReport level_region_trace(const ScalarField& v, const std::vector<Arc>& bounding,
                                            const LevelRegionOptions& opt = {}) {
    if (bounding.size() != 2) throw NoRegion("a level region needs exactly two bounding arcs");
    const Grid& g = *v.grid;
    const double sg = opt.sign >= 0 ? 1.0 : -1.0;
    const double near = 1.5 * std::max(g.hx, g.hy);
    std::vector<char> pos(g.size(), 0), nearA(g.size(), 0), nearB(g.size(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.index(i, j);
            if (!v.usable(i, j) || !(sg * v(i, j) > 0)) continue;
            pos[k] = 1;
            const Point2 p{g.x(i, j), g.y(j)};
            nearA[k] = detail::dist_to_polyline(p, bounding[0].points) <= near;
            nearB[k] = detail::dist_to_polyline(p, bounding[1].points) <= near;
        }
    // Components of the positive set (4-neighbours).
    std::vector<int> comp(g.size(), -1);
    int nc = 0;
    for (int k0 = 0; k0 < g.size(); ++k0) {
        if (!pos[k0] || comp[k0] >= 0) continue;
        std::vector<int> st{k0};
        comp[k0] = nc;
        while (!st.empty()) {
            const int k = st.back();
            st.pop_back();
            const int i = k % g.nx, j = k / g.nx;
            for (auto [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
                const int i2 = i + di, j2 = j + dj;
                if (i2 < 0 || j2 < 0 || i2 >= g.nx || j2 >= g.ny) continue;
                const int k2 = g.index(i2, j2);
                if (pos[k2] && comp[k2] < 0) {
                    comp[k2] = nc;
                    st.push_back(k2);
                }
            }
        }
        ++nc;
    }
    std::vector<char> touchA(nc, 0), touchB(nc, 0);
    for (int k = 0; k < g.size(); ++k)
        if (comp[k] >= 0) {
            touchA[comp[k]] |= nearA[k];
            touchB[comp[k]] |= nearB[k];
        }
    int s0 = -1;
    for (int c = 0; c < nc; ++c)
        if (touchA[c] && touchB[c]) {
            s0 = c;
            break;
        }
    if (s0 < 0) throw NoRegion("no component of the sign set is bounded by both arcs");

    LevelRegionReport rep;
    rep.L1 = std::numeric_limits<double>::infinity();
    rep.L2 = -rep.L1;
    for (int k = 0; k < g.size(); ++k)
        if (comp[k] == s0) {
            ++rep.s0_nodes;
            rep.L1 = std::min(rep.L1, sg * v.values[k]);
            rep.L2 = std::max(rep.L2, sg * v.values[k]);
        }
    std::vector<double> lam = opt.lambdas;
    if (lam.empty()) {
        for (int q = 0; q < 16; ++q) lam.push_back(rep.L2 * std::pow(10.0, -3.0 + 3.0 * q / 16.0) * 0.9);
    }
    for (double& l : lam)
        for (double cv : opt.critical_values)
            if (std::abs(l - sg * cv) <= 1e-6 * (1 + std::abs(l))) l *= 1 + 1e-3;
    std::vector<char> prev;
    for (double l : lam) {
        LevelRegionReport::Level L;
        L.lambda = l;
        std::vector<char> cur(g.size(), 0);
        bool inside = true;
        for (int k = 0; k < g.size(); ++k) {
            if (comp[k] != s0 || !(sg * v.values[k] > l)) continue;
            cur[k] = 1;
            ++L.nodes;
            if (!prev.empty() && !prev[k]) L.nested = false;
            if (opt.window) {
                const int i = k % g.nx, j = k / g.nx;
                inside = inside && opt.window->contains(g.x(i, j), g.y(j), opt.p_a[0], opt.p_a[1]);
            }
        }
        L.fits = opt.window && L.nodes > 0 && inside;
        if (L.fits && !rep.first_fitting_lambda) rep.first_fitting_lambda = l;
        rep.levels.push_back(L);
        prev = std::move(cur);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Analytic fixtures.

// Axis-aligned node grid on [x0, x1] x [y0, y1]; y may be negative.
inline std::shared_ptr<const Grid> rect_grid(double x0, double x1, double y0, double y1, double h) {
    if (!(x1 > x0) || !(y1 > y0) || !(h > 0)) throw InvalidDomain("fixture rectangle needs positive extents and h");
    auto g = std::make_shared<Grid>();
    g->spec = DomainSpec::strip(y1 - y0, x0, x1, h);
    const int mx = std::max(2, static_cast<int>(std::lround((x1 - x0) / h)));
    const int my = std::max(2, static_cast<int>(std::lround((y1 - y0) / h)));
    g->nx = mx + 1;
    g->ny = my + 1;
    g->hx = (x1 - x0) / mx;
    g->hy = (y1 - y0) / my;
    g->s0 = x0;
    g->t0 = y0;
    return g;
}

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> n{"saddle", "monkey", "line", "circle", "tail"};
    return n;
}

// saddle x^2 - y^2 and monkey Re((x + iy)^3) on [-1,1]^2, line v = y on
// [-1,1]^2, circle x^2 + y^2 - 1 on [-2,2]^2, tail y (2 - y) e^{-x} on
// [0,6] x [0,2].
inline ScalarField analytic_fixture(const std::string& name, double h) {
    if (name == "saddle")
        return field_from(rect_grid(-1, 1, -1, 1, h), [](double x, double y) { return x * x - y * y; });
    if (name == "monkey")
        return field_from(rect_grid(-1, 1, -1, 1, h), [](double x, double y) { return x * x * x - 3 * x * y * y; });
    if (name == "line") return field_from(rect_grid(-1, 1, -1, 1, h), [](double, double y) { return y; });
    if (name == "circle")
        return field_from(rect_grid(-2, 2, -2, 2, h), [](double x, double y) { return x * x + y * y - 1; });
    if (name == "tail")
        return field_from(rect_grid(0, 6, 0, 2, h), [](double x, double y) { return y * (2 - y) * std::exp(-x); });
    throw InvalidArgument("unknown fixture '" + name + "'");
}

// ---------------------------------------------------------------------------
// Rotational tangency search.

struct TangencyReport {
    double theta0 = 0;
    double sup = 0, inf = 0;
    std::vector<std::array<double, 2>> contacts;  // (rho, z) raster cells
    long interior_contacts = 0;
    long common_cells = 0;
    long W_mismatch_cells = 0;
    bool decays = false;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"theta0\": " << theta0 << ", \"sup\": " << sup << ", \"inf\": " << inf
           << ", \"contacts\": " << contacts.size() << ", \"interior_contacts\": " << interior_contacts
           << ", \"common_cells\": " << common_cells << ", \"W_mismatch_cells\": " << W_mismatch_cells
           << ", \"decays\": " << (decays ? "true" : "false") << "}";
        return os.str();
    }
};

// theta0 is the extremum of vartheta2 - vartheta1 over the common part of W
// with the larger magnitude; contacts are cells within 1e-6 of it.
inline TangencyReport tangency_search(const SurfaceMesh& m1, const SurfaceMesh& m2, Point2 p_a, int nr = 256, int nz = 256) {
    const ChartRaster R = chart_raster_for({&m1, &m2}, p_a, nr, nz);
    const CylChart c1 = cylindrical_chart(m1, p_a, R), c2 = cylindrical_chart(m2, p_a, R);
    if (!c1.theta_graphical || !c2.theta_graphical) throw NotThetaGraph("a chart is not theta-graphical");
    TangencyReport rep;
    rep.sup = -std::numeric_limits<double>::infinity();
    rep.inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(c1.vartheta.size(), NAN);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const bool a = !std::isnan(c1.vartheta[k]), b = !std::isnan(c2.vartheta[k]);
        if (a != b) ++rep.W_mismatch_cells;
        if (!a || !b) continue;
        d[k] = std::remainder(c2.vartheta[k] - c1.vartheta[k], 2 * pi);
        ++rep.common_cells;
        rep.sup = std::max(rep.sup, d[k]);
        rep.inf = std::min(rep.inf, d[k]);
    }
    if (rep.common_cells == 0) throw NoOverlap("the charts share no part of W");
    rep.theta0 = std::abs(rep.sup) >= std::abs(rep.inf) ? rep.sup : rep.inf;
    double rho_far = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < R.nz; ++b)
        for (int a = 0; a < R.nr; ++a)
            if (!std::isnan(d[c1.cell(a, b)])) rho_far = std::max(rho_far, R.rho_at(a));
    double far_sum = 0;
    long far_n = 0;
    const double band = 0.1 * (R.rho1 - R.rho0);
    for (int b = 0; b < R.nz; ++b)
        for (int a = 0; a < R.nr; ++a) {
            const int k = c1.cell(a, b);
            if (std::isnan(d[k])) continue;
            if (R.rho_at(a) >= rho_far - band) {
                far_sum += std::abs(d[k]);
                ++far_n;
            }
            if (std::abs(d[k] - rep.theta0) > 1e-6) continue;
            rep.contacts.push_back({R.rho_at(a), R.z_at(b)});
            if (!c1.on_boundary[k] && !c2.on_boundary[k]) ++rep.interior_contacts;
        }
    rep.decays = far_n > 0 && far_sum / far_n <= 0.1 * std::abs(rep.theta0);
    if (rep.interior_contacts == 0) throw BoundaryContact("the extremum is attained only on the boundary of W");
    return rep;
}

}  // namespace transol
