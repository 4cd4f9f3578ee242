#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace transol {

inline constexpr double pi = std::numbers::pi;

enum class DomainKind { strip, half_strip, parallelogram };

inline const char* to_string(DomainKind k) {
    switch (k) {
        case DomainKind::strip: return "strip";
        case DomainKind::half_strip: return "half_strip";
        case DomainKind::parallelogram: return "parallelogram";
    }
    return "?";
}

inline DomainKind domain_kind_from_string(const std::string& s) {
    if (s == "strip") return DomainKind::strip;
    if (s == "half_strip") return DomainKind::half_strip;
    if (s == "parallelogram") return DomainKind::parallelogram;
    throw InvalidDomain("unknown domain kind '" + s + "'");
}

// Truncated strip {x_min <= x <= x_max, 0 <= y <= w}, or the parallelogram
// with lower-left vertex at the origin, base L and base angle alpha.
//
// The grid may cover only a window [y_lo, y_hi] of the width (y_hi < 0 means
// w). For a parallelogram the window [x_min, x_max] is taken in the sheared
// coordinate s = x - y cot(alpha), so the full piece is [0, L].
struct DomainSpec {
    DomainKind kind = DomainKind::strip;
    double w = pi;
    double x_min = -1.0;
    double x_max = 1.0;
    double alpha = pi / 2;
    double L = 0.0;
    double h = 0.1;
    double y_lo = 0.0;
    double y_hi = -1.0;

    double y_top() const { return y_hi < 0 ? w : y_hi; }
    double cot_alpha() const {
        return kind == DomainKind::parallelogram ? std::cos(alpha) / std::sin(alpha) : 0.0;
    }

    static DomainSpec strip(double w, double x_min, double x_max, double h) {
        DomainSpec d;
        d.w = w;
        d.x_min = x_min;
        d.x_max = x_max;
        d.h = h;
        return d;
    }
    static DomainSpec parallelogram(double alpha, double w, double L, double h) {
        DomainSpec d;
        d.kind = DomainKind::parallelogram;
        d.alpha = alpha;
        d.w = w;
        d.L = L;
        d.x_min = 0.0;
        d.x_max = L;
        d.h = h;
        return d;
    }
};

inline void validate(const DomainSpec& d) {
    if (!(d.w > 0) || !(d.h > 0) || !(d.x_min < d.x_max) || !std::isfinite(d.x_min) ||
        !std::isfinite(d.x_max))
        throw InvalidDomain("need w > 0, h > 0 and x_min < x_max");
    if (d.kind == DomainKind::parallelogram) {
        if (!(d.alpha > 0 && d.alpha < pi) || !(d.L > 0))
            throw InvalidDomain("parallelogram needs 0 < alpha < pi and L > 0");
        const double tol = 1e-9 * (1 + d.L);
        if (d.x_min < -tol || d.x_max > d.L + tol)
            throw InvalidDomain("parallelogram window must lie in [0, L]");
    }
    if (!(d.y_lo >= 0) || !(d.y_top() <= d.w * (1 + 1e-12)) || !(d.y_lo < d.y_top()))
        throw InvalidDomain("width window must satisfy 0 <= y_lo < y_hi <= w");
    if (d.h > d.w / 4) throw GridTooCoarse("h exceeds w/4");
}

enum class NodeKind : std::uint8_t { interior, boundary, excluded };

// Uniform grid in sheared coordinates (s, t); x = s + t cot(alpha), y = t.
// Nodes are enumerated row-major: index = j * nx + i with i along x.
struct Grid {
    DomainSpec spec;
    int nx = 0;
    int ny = 0;
    double hx = 0;
    double hy = 0;
    double s0 = 0;
    double t0 = 0;
    double cot = 0;
    bool snapped_x = false;
    bool snapped_y = false;

    int size() const { return nx * ny; }
    int index(int i, int j) const { return j * nx + i; }
    double s(int i) const { return s0 + i * hx; }
    double y(int j) const { return t0 + j * hy; }
    double x(int i, int j) const { return s(i) + cot * y(j); }
    bool on_edge(int i, int j) const { return i == 0 || j == 0 || i == nx - 1 || j == ny - 1; }

    // Fractional node coordinates of a physical point.
    std::pair<double, double> locate(double x, double y) const {
        const double t = y;
        const double ss = x - cot * t;
        return {(ss - s0) / hx, (t - t0) / hy};
    }
};

namespace detail {
inline int snap_count(double len, double h, bool& snapped) {
    const double r = len / h;
    const int n = std::max(1, static_cast<int>(std::lround(r)));
    snapped = std::abs(r - n) > 0.005;
    return n;
}
}  // namespace detail

inline std::shared_ptr<const Grid> build_grid(const DomainSpec& spec) {
    validate(spec);
    auto g = std::make_shared<Grid>();
    g->spec = spec;
    g->cot = spec.cot_alpha();
    const int mx = detail::snap_count(spec.x_max - spec.x_min, spec.h, g->snapped_x);
    const int my = detail::snap_count(spec.y_top() - spec.y_lo, spec.h, g->snapped_y);
    g->nx = mx + 1;
    g->ny = my + 1;
    g->hx = (spec.x_max - spec.x_min) / mx;
    g->hy = (spec.y_top() - spec.y_lo) / my;
    g->s0 = spec.x_min;
    g->t0 = spec.y_lo;
    if (g->nx < 3 || g->ny < 3) throw GridTooCoarse("fewer than 3 nodes across the domain");
    return g;
}

struct ScalarField {
    std::shared_ptr<const Grid> grid;
    std::vector<double> values;
    std::vector<NodeKind> mask;

    ScalarField() = default;
    explicit ScalarField(std::shared_ptr<const Grid> g, double fill = 0.0)
        : grid(std::move(g)), values(grid->size(), fill), mask(grid->size()) {
        for (int j = 0; j < grid->ny; ++j)
            for (int i = 0; i < grid->nx; ++i)
                mask[grid->index(i, j)] = grid->on_edge(i, j) ? NodeKind::boundary : NodeKind::interior;
    }

    double& operator()(int i, int j) { return values[grid->index(i, j)]; }
    double operator()(int i, int j) const { return values[grid->index(i, j)]; }
    NodeKind kind(int i, int j) const { return mask[grid->index(i, j)]; }
    bool usable(int i, int j) const {
        return i >= 0 && j >= 0 && i < grid->nx && j < grid->ny && kind(i, j) != NodeKind::excluded;
    }
    bool is_interior(int i, int j) const { return usable(i, j) && kind(i, j) == NodeKind::interior; }

    // Bilinear interpolation in sheared coordinates; empty outside the grid
    // or when a corner of the containing cell is excluded.
    std::optional<double> sample(double x, double y) const {
        auto [fi, fj] = grid->locate(x, y);
        const double eps = 1e-9;
        if (fi < -eps || fj < -eps || fi > grid->nx - 1 + eps || fj > grid->ny - 1 + eps) return {};
        int i = std::clamp(static_cast<int>(std::floor(fi)), 0, grid->nx - 2);
        int j = std::clamp(static_cast<int>(std::floor(fj)), 0, grid->ny - 2);
        const double a = std::clamp(fi - i, 0.0, 1.0), b = std::clamp(fj - j, 0.0, 1.0);
        if (!usable(i, j) || !usable(i + 1, j) || !usable(i, j + 1) || !usable(i + 1, j + 1)) return {};
        return (1 - a) * (1 - b) * (*this)(i, j) + a * (1 - b) * (*this)(i + 1, j) +
               (1 - a) * b * (*this)(i, j + 1) + a * b * (*this)(i + 1, j + 1);
    }

    // Tensor-product cubic Lagrange interpolation on the 4x4 block around the
    // point, shifted inward at the grid edges. Falls back to bilinear when the
    // grid has fewer than 4 nodes in a direction.
    std::optional<double> sample_cubic(double x, double y) const {
        auto [fi, fj] = grid->locate(x, y);
        const double eps = 1e-9;
        if (fi < -eps || fj < -eps || fi > grid->nx - 1 + eps || fj > grid->ny - 1 + eps) return {};
        if (grid->nx < 4 || grid->ny < 4) return sample(x, y);
        const int i0 = std::clamp(static_cast<int>(std::floor(fi)) - 1, 0, grid->nx - 4);
        const int j0 = std::clamp(static_cast<int>(std::floor(fj)) - 1, 0, grid->ny - 4);
        auto weights = [](double t, std::array<double, 4>& w) {
            for (int a = 0; a < 4; ++a) {
                double v = 1;
                for (int b = 0; b < 4; ++b)
                    if (b != a) v *= (t - b) / (a - b);
                w[a] = v;
            }
        };
        std::array<double, 4> wi{}, wj{};
        weights(fi - i0, wi);
        weights(fj - j0, wj);
        double acc = 0;
        for (int b = 0; b < 4; ++b)
            for (int a = 0; a < 4; ++a) {
                if (!usable(i0 + a, j0 + b)) return {};
                acc += wi[a] * wj[b] * (*this)(i0 + a, j0 + b);
            }
        return acc;
    }
};

template <class F>
ScalarField field_from(std::shared_ptr<const Grid> g, F&& f) {
    ScalarField u(g);
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) u(i, j) = f(g->x(i, j), g->y(j));
    return u;
}

struct Derivatives {
    double ux = 0, uy = 0, uxx = 0, uxy = 0, uyy = 0;
};

// Central differences in (s, t), mapped to (x, y) by the chain rule:
// u_x = u_s, u_y = u_t - c u_s, u_xy = u_st - c u_ss, u_yy = u_tt - 2c u_st + c^2 u_ss.
inline Derivatives fd_derivatives(const ScalarField& u, int i, int j) {
    if (!u.is_interior(i, j))
        throw NotInterior("node (" + std::to_string(i) + "," + std::to_string(j) + ") is not interior");
    for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
            if (!u.usable(i + di, j + dj)) throw NotInterior("stencil touches an excluded node");
    const Grid& g = *u.grid;
    const double hs = g.hx, ht = g.hy, c = g.cot;
    const double us = (u(i + 1, j) - u(i - 1, j)) / (2 * hs);
    const double ut = (u(i, j + 1) - u(i, j - 1)) / (2 * ht);
    const double uss = (u(i + 1, j) - 2 * u(i, j) + u(i - 1, j)) / (hs * hs);
    const double utt = (u(i, j + 1) - 2 * u(i, j) + u(i, j - 1)) / (ht * ht);
    const double ust =
        (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4 * hs * ht);
    return {us, ut - c * us, uss, ust - c * uss, utt - 2 * c * ust + c * c * uss};
}

// Stencil weights (3x3, [dj+1][di+1]) of each derivative in fd_derivatives.
struct DerivativeStencils {
    std::array<std::array<std::array<double, 3>, 3>, 5> w{};
};

inline DerivativeStencils derivative_stencils(const Grid& g) {
    DerivativeStencils d;
    const double hs = g.hx, ht = g.hy, c = g.cot;
    auto& ux = d.w[0];
    auto& uy = d.w[1];
    auto& uxx = d.w[2];
    auto& uxy = d.w[3];
    auto& uyy = d.w[4];
    std::array<std::array<double, 3>, 3> us{}, ut{}, uss{}, utt{}, ust{};
    us[1][2] = 1 / (2 * hs);
    us[1][0] = -1 / (2 * hs);
    ut[2][1] = 1 / (2 * ht);
    ut[0][1] = -1 / (2 * ht);
    uss[1][0] = uss[1][2] = 1 / (hs * hs);
    uss[1][1] = -2 / (hs * hs);
    utt[0][1] = utt[2][1] = 1 / (ht * ht);
    utt[1][1] = -2 / (ht * ht);
    ust[2][2] = ust[0][0] = 1 / (4 * hs * ht);
    ust[0][2] = ust[2][0] = -1 / (4 * hs * ht);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            ux[a][b] = us[a][b];
            uy[a][b] = ut[a][b] - c * us[a][b];
            uxx[a][b] = uss[a][b];
            uxy[a][b] = ust[a][b] - c * uss[a][b];
            uyy[a][b] = utt[a][b] - 2 * c * ust[a][b] + c * c * uss[a][b];
        }
    return d;
}

// ---------------------------------------------------------------------------
// Boundary prescriptions.

enum class Edge { bottom = 0, top = 1, left = 2, right = 3 };
enum class SegValue { pos_inf, neg_inf, finite, neumann, periodic };

inline const char* to_string(Edge e) {
    switch (e) {
        case Edge::bottom: return "bottom";
        case Edge::top: return "top";
        case Edge::left: return "left";
        case Edge::right: return "right";
    }
    return "?";
}

inline const char* to_string(SegValue v) {
    switch (v) {
        case SegValue::pos_inf: return "+INF";
        case SegValue::neg_inf: return "-INF";
        case SegValue::finite: return "finite";
        case SegValue::neumann: return "neumann";
        case SegValue::periodic: return "periodic";
    }
    return "?";
}

// A segment of an edge. Bottom and top edges are parametrised by x, the
// left and right edges by y. Finite segments carry a trace u(x, y).
struct Segment {
    double a = 0;
    double b = 0;
    SegValue value = SegValue::finite;
    std::function<double(double, double)> trace;

    double sign() const {
        return value == SegValue::pos_inf ? 1.0 : value == SegValue::neg_inf ? -1.0 : 0.0;
    }
    bool infinite() const { return value == SegValue::pos_inf || value == SegValue::neg_inf; }
};

struct BoundarySpec {
    std::array<std::vector<Segment>, 4> edges;

    std::vector<Segment>& edge(Edge e) { return edges[static_cast<int>(e)]; }
    const std::vector<Segment>& edge(Edge e) const { return edges[static_cast<int>(e)]; }

    // Points of the boundary where a +INF segment meets a -INF segment.
    std::vector<std::array<double, 2>> sign_change_points(const DomainSpec& d) const {
        std::vector<std::array<double, 2>> out;
        for (int e = 0; e < 4; ++e) {
            const auto& segs = edges[e];
            for (std::size_t k = 1; k < segs.size(); ++k) {
                if (segs[k - 1].infinite() && segs[k].infinite() &&
                    segs[k - 1].sign() * segs[k].sign() < 0) {
                    const double p = segs[k].a;
                    if (e == 0) out.push_back({p, 0.0});
                    else if (e == 1) out.push_back({p, d.w});
                    else {
                        const double xs = e == 2 ? d.x_min : d.x_max;
                        out.push_back({xs + d.cot_alpha() * p, p});
                    }
                }
            }
        }
        return out;
    }

    // Segment containing parameter p on edge e (first match at a junction).
    const Segment* find(Edge e, double p) const {
        for (const auto& s : edge(e))
            if (p >= s.a - 1e-12 && p <= s.b + 1e-12) return &s;
        return nullptr;
    }
};

// Endpoints of each edge in its own parameter.
inline std::array<double, 2> edge_range(const DomainSpec& d, Edge e) {
    const double c = d.cot_alpha();
    switch (e) {
        case Edge::bottom: return {d.x_min, d.x_max};
        case Edge::top: return {d.x_min + c * d.w, d.x_max + c * d.w};
        default: return {0.0, d.w};
    }
}

inline void validate(const BoundarySpec& bc, const DomainSpec& d) {
    for (int e = 0; e < 4; ++e) {
        const auto& segs = bc.edges[e];
        if (segs.empty()) throw InvalidBoundary(std::string("edge ") + to_string(Edge(e)) + " has no segments");
        auto [lo, hi] = edge_range(d, Edge(e));
        const double tol = 1e-9 * (1 + std::abs(lo) + std::abs(hi));
        if (std::abs(segs.front().a - lo) > tol || std::abs(segs.back().b - hi) > tol)
            throw InvalidBoundary(std::string("segments do not cover edge ") + to_string(Edge(e)));
        for (std::size_t k = 0; k < segs.size(); ++k) {
            if (!(segs[k].b > segs[k].a)) throw InvalidBoundary("empty or reversed segment");
            if (k > 0 && std::abs(segs[k].a - segs[k - 1].b) > tol)
                throw InvalidBoundary("segments overlap or leave a gap");
            if (segs[k].value == SegValue::finite && !segs[k].trace)
                throw InvalidBoundary("finite segment without a trace");
        }
    }
}

// Finite boundary data at cap B: +INF -> +B, -INF -> -B, with a linear ramp of
// half-width 2h across every sign change. Neumann segments stay undefined.
struct CappedTrace {
    std::shared_ptr<const Grid> grid;
    std::vector<double> values;
    std::vector<char> defined;
};

inline double capped_edge_value(const std::vector<Segment>& segs, double p, double x, double y, double B,
                                double ramp) {
    for (std::size_t k = 1; k < segs.size(); ++k) {
        const auto& l = segs[k - 1];
        const auto& r = segs[k];
        if (l.infinite() && r.infinite() && l.sign() * r.sign() < 0 && std::abs(p - r.a) <= ramp) {
            const double t = (p - (r.a - ramp)) / (2 * ramp);
            return B * (l.sign() * (1 - t) + r.sign() * t);
        }
    }
    for (const auto& s : segs) {
        if (p >= s.a - 1e-12 && p <= s.b + 1e-12) {
            if (s.infinite()) return s.sign() * B;
            if (s.value == SegValue::finite) return s.trace(x, y);
            return std::numeric_limits<double>::quiet_NaN();
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline CappedTrace cap_boundary(const BoundarySpec& bc, double B, std::shared_ptr<const Grid> g) {
    CappedTrace out{g, std::vector<double>(g->size(), 0.0), std::vector<char>(g->size(), 0)};
    const double ramp = 2 * std::max(g->hx, g->hy);
    const DomainSpec& d = g->spec;
    auto put = [&](int i, int j, double v) {
        if (std::isnan(v)) return;
        out.values[g->index(i, j)] = v;
        out.defined[g->index(i, j)] = 1;
    };
    // x-edges first so that the bottom and top data win at the corners.
    for (int j = 0; j < g->ny; ++j) {
        const double y = g->y(j);
        put(0, j, capped_edge_value(bc.edge(Edge::left), y, g->x(0, j), y, B, ramp));
        put(g->nx - 1, j, capped_edge_value(bc.edge(Edge::right), y, g->x(g->nx - 1, j), y, B, ramp));
    }
    const bool has_bottom = std::abs(g->y(0)) < 1e-12;
    const bool has_top = std::abs(g->y(g->ny - 1) - d.w) < 1e-9 * (1 + d.w);
    for (int i = 0; i < g->nx; ++i) {
        if (has_bottom) put(i, 0, capped_edge_value(bc.edge(Edge::bottom), g->x(i, 0), g->x(i, 0), 0.0, B, ramp));
        if (has_top) {
            const int j = g->ny - 1;
            put(i, j, capped_edge_value(bc.edge(Edge::top), g->x(i, j), g->x(i, j), d.w, B, ramp));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export and import.

inline std::string domain_json(const DomainSpec& d) {
    std::ostringstream os;
    os << std::setprecision(17) << "{\"kind\": \"" << to_string(d.kind) << "\", \"w\": " << d.w
       << ", \"x_min\": " << d.x_min << ", \"x_max\": " << d.x_max << ", \"alpha\": " << d.alpha
       << ", \"L\": " << d.L << ", \"h\": " << d.h << ", \"y_lo\": " << d.y_lo << ", \"y_hi\": " << d.y_top()
       << "}";
    return os.str();
}

inline void write_csv(const ScalarField& u, std::ostream& os) {
    const Grid& g = *u.grid;
    os << "x,y,u\n" << std::setprecision(17);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (u.kind(i, j) == NodeKind::excluded) continue;
            os << g.x(i, j) << ',' << g.y(j) << ',' << u(i, j) << '\n';
        }
}

inline void write_csv(const ScalarField& u, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    write_csv(u, f);
}

// Reads a CSV written by write_csv onto the grid of spec. Nodes missing from
// the file are marked excluded.
inline ScalarField read_csv(std::istream& is, const DomainSpec& spec) {
    auto g = build_grid(spec);
    ScalarField u(g);
    std::vector<char> seen(g->size(), 0);
    std::string line;
    std::getline(is, line);
    if (line.rfind("x,y,u", 0) != 0) throw InvalidArgument("CSV header must be x,y,u");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double x, y, v;
        char c1, c2;
        if (!(ls >> x >> c1 >> y >> c2 >> v)) throw InvalidArgument("malformed CSV row: " + line);
        auto [fi, fj] = g->locate(x, y);
        const int i = static_cast<int>(std::lround(fi)), j = static_cast<int>(std::lround(fj));
        if (i < 0 || j < 0 || i >= g->nx || j >= g->ny || std::abs(fi - i) > 1e-6 || std::abs(fj - j) > 1e-6)
            throw InvalidArgument("CSV node off the grid: " + line);
        u(i, j) = v;
        seen[g->index(i, j)] = 1;
    }
    for (int k = 0; k < g->size(); ++k)
        if (!seen[k]) u.mask[k] = NodeKind::excluded;
    return u;
}

}  // namespace transol
