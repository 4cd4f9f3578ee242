#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace transol {

// True when the 3x3 difference stencil around (i, j) is available.
inline bool has_stencil(const ScalarField& u, int i, int j) {
    const Grid& g = *u.grid;
    if (i < 1 || j < 1 || i > g.nx - 2 || j > g.ny - 2) return false;
    for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
            if (!u.usable(i + di, j + dj)) return false;
    return u.is_interior(i, j);
}

// ---------------------------------------------------------------------------
// Gauss map.

struct NormalField {
    std::shared_ptr<const Grid> grid;
    std::vector<Vec3> nu;     // NaN where the stencil is missing
    std::vector<char> valid;
    std::vector<std::array<double, 2>> vertical_points;  // nodes with Du = 0, i.e. nu = e3

    bool attains_e3() const { return !vertical_points.empty(); }
    const Vec3& operator()(int i, int j) const { return nu[grid->index(i, j)]; }
};

inline Vec3 unit_normal(double ux, double uy) {
    const double W = std::sqrt(1 + ux * ux + uy * uy);
    return {-ux / W, -uy / W, 1 / W};
}

inline NormalField gauss_map(const ScalarField& u, double zero_tol = 1e-10) {
    const Grid& g = *u.grid;
    NormalField n{u.grid, std::vector<Vec3>(g.size(), Vec3{NAN, NAN, NAN}), std::vector<char>(g.size(), 0), {}};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!has_stencil(u, i, j)) continue;
            const auto d = fd_derivatives(u, i, j);
            n.nu[g.index(i, j)] = unit_normal(d.ux, d.uy);
            n.valid[g.index(i, j)] = 1;
            if (std::hypot(d.ux, d.uy) <= zero_tol) n.vertical_points.push_back({g.x(i, j), g.y(j)});
        }
    return n;
}

struct InjectivityReport {
    long pairs = 0;
    long collisions = 0;
    std::vector<std::array<double, 4>> examples;  // (x1, y1, x2, y2)

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"pairs\": " << pairs << ", \"collisions\": " << collisions
           << ", \"examples\": [";
        for (std::size_t k = 0; k < examples.size(); ++k) {
            const auto& e = examples[k];
            os << (k ? ", " : "") << "[" << e[0] << ", " << e[1] << ", " << e[2] << ", " << e[3] << "]";
        }
        os << "]}";
        return os.str();
    }
};

// Random node pairs at distance >= 4h whose normals agree to 1e-6.
inline InjectivityReport gauss_injectivity_sample(const ScalarField& u, long samples, std::uint64_t seed = 1) {
    const NormalField n = gauss_map(u);
    const Grid& g = *u.grid;
    std::vector<int> nodes;
    for (int k = 0; k < g.size(); ++k)
        if (n.valid[k]) nodes.push_back(k);
    InjectivityReport rep;
    if (nodes.size() < 2) return rep;
    const double sep = 4 * std::max(g.hx, g.hy);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    for (long s = 0; s < samples; ++s) {
        const int a = nodes[pick(rng)], b = nodes[pick(rng)];
        const int ia = a % g.nx, ja = a / g.nx, ib = b % g.nx, jb = b / g.nx;
        const double xa = g.x(ia, ja), ya = g.y(ja), xb = g.x(ib, jb), yb = g.y(jb);
        if (std::hypot(xa - xb, ya - yb) < sep) continue;
        ++rep.pairs;
        if (norm(n.nu[a] - n.nu[b]) <= 1e-6) {
            ++rep.collisions;
            if (rep.examples.size() < 16) rep.examples.push_back({xa, ya, xb, yb});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Theta-graph verification.

struct ThetaRegion {
    enum class Kind { rect, omega };
    Kind kind = Kind::rect;
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // rect
    int side = -1;                          // omega: sign of x - x_a
    double R = 0;                           // omega: |p - p_a| >= R

    static ThetaRegion rect(double x0, double x1, double y0, double y1) {
        ThetaRegion r;
        r.x0 = x0;
        r.x1 = x1;
        r.y0 = y0;
        r.y1 = y1;
        return r;
    }
    // Points of the strip with side * (x - x_a) > 0 outside the disk of radius R.
    static ThetaRegion omega(int side, double R) {
        ThetaRegion r;
        r.kind = Kind::omega;
        r.side = side >= 0 ? 1 : -1;
        r.R = R;
        return r;
    }

    bool contains(double x, double y, double xa, double ya) const {
        if (kind == Kind::rect) return x >= x0 && x <= x1 && y >= y0 && y <= y1;
        return side * (x - xa) > 0 && std::hypot(x - xa, y - ya) >= R;
    }
};

struct ThetaGraphReport {
    bool pass = false;
    int nodes_checked = 0;
    int sign = 0;  // sign of s on the region when it passes
    double min_abs_s = std::numeric_limits<double>::infinity();
    int degenerate_nodes = 0;  // Du = 0
    std::vector<std::array<double, 2>> critical;  // discrete zero set of s
    bool crosses_strip = false;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"pass\": " << (pass ? "true" : "false") << ", \"nodes_checked\": "
           << nodes_checked << ", \"sign\": " << sign << ", \"min_abs_s\": " << min_abs_s
           << ", \"degenerate_nodes\": " << degenerate_nodes << ", \"crosses_strip\": "
           << (crosses_strip ? "true" : "false") << ", \"critical_points\": " << critical.size() << "}";
        return os.str();
    }
};

// s(p) = u_x (y - y_a) - u_y (x - x_a) on the region's interior nodes. The
// region is a theta-graph when s keeps one strict sign and Du never vanishes.
inline ThetaGraphReport theta_graph_check(const ScalarField& u, std::array<double, 2> p_a, const ThetaRegion& region) {
    const Grid& g = *u.grid;
    const double xa = p_a[0], ya = p_a[1];
    if (region.kind == ThetaRegion::Kind::rect && region.contains(xa, ya, xa, ya))
        throw InvalidAxis("axis point lies inside the region");
    if (region.kind == ThetaRegion::Kind::omega && !(region.R > 0)) throw InvalidRadius("region radius must be positive");
    ThetaGraphReport rep;
    std::vector<double> s(g.size(), NAN);
    std::vector<char> in(g.size(), 0), zero(g.size(), 0);
    int pos = 0, neg = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i, j), y = g.y(j);
            if (!region.contains(x, y, xa, ya) || !has_stencil(u, i, j)) continue;
            const auto d = fd_derivatives(u, i, j);
            const int k = g.index(i, j);
            in[k] = 1;
            ++rep.nodes_checked;
            const double grad = std::hypot(d.ux, d.uy);
            const double v = d.ux * (y - ya) - d.uy * (x - xa);
            s[k] = v;
            const double tol = 1e-8 * (1 + grad) * (1 + std::hypot(x - xa, y - ya));
            rep.min_abs_s = std::min(rep.min_abs_s, std::abs(v));
            if (grad == 0) ++rep.degenerate_nodes;
            if (std::abs(v) < tol || grad == 0) {
                zero[k] = 1;
                rep.critical.push_back({x, y});
            } else {
                (v > 0 ? pos : neg)++;
            }
        }
    if (rep.nodes_checked == 0) throw InvalidArgument("region contains no interior nodes of the field");
    // Sign changes between adjacent region nodes: linearly interpolated zero.
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.index(i, j);
            if (!in[k] || zero[k]) continue;
            for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
                const int i2 = i + di, j2 = j + dj;
                if (i2 >= g.nx || j2 >= g.ny) continue;
                const int k2 = g.index(i2, j2);
                if (!in[k2] || zero[k2] || (s[k] > 0) == (s[k2] > 0)) continue;
                const double t = s[k] / (s[k] - s[k2]);
                rep.critical.push_back({g.x(i, j) + t * (g.x(i2, j2) - g.x(i, j)), g.y(j) + t * (g.y(j2) - g.y(j))});
                zero[k] = 1;
            }
        }
    rep.pass = rep.critical.empty() && (pos == 0 || neg == 0);
    if (rep.pass) rep.sign = pos > 0 ? 1 : -1;

    // A zero-set component touching the lowest and highest checked rows.
    int jlo = g.ny, jhi = -1;
    for (int k = 0; k < g.size(); ++k)
        if (in[k]) {
            jlo = std::min(jlo, k / g.nx);
            jhi = std::max(jhi, k / g.nx);
        }
    std::vector<char> seen(g.size(), 0);
    for (int k0 = 0; k0 < g.size() && !rep.crosses_strip; ++k0) {
        if (!zero[k0] || seen[k0]) continue;
        std::vector<int> stack{k0};
        seen[k0] = 1;
        bool lo = false, hi = false;
        while (!stack.empty()) {
            const int k = stack.back();
            stack.pop_back();
            const int i = k % g.nx, j = k / g.nx;
            lo = lo || j <= jlo + 1;
            hi = hi || j >= jhi - 1;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const int i2 = i + di, j2 = j + dj;
                    if (i2 < 0 || j2 < 0 || i2 >= g.nx || j2 >= g.ny) continue;
                    const int k2 = g.index(i2, j2);
                    if (zero[k2] && !seen[k2]) {
                        seen[k2] = 1;
                        stack.push_back(k2);
                    }
                }
        }
        rep.crosses_strip = lo && hi && jhi - jlo >= 2;
    }
    return rep;
}

struct SlopeBound {
    double R0 = 0;
    double eps = 0;
    int direction = -1;
    std::vector<std::array<double, 2>> profile;  // (x, min |u_y / u_x| over the column)

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17) << "{\"direction\": " << direction << ", \"R0\": " << R0 << ", \"eps\": ";
        if (std::isfinite(eps)) os << eps;
        else os << "\"inf\"";
        os << ", \"columns\": " << profile.size() << "}";
        return os.str();
    }
};

// Column minima of |u_y / u_x| (infinite where u_x = 0). Columns are scanned
// from the far edge in `direction` inward while the minimum stays >= eps_target;
// the accepted window is {direction * x > R0} with eps its smallest ratio.
inline std::optional<SlopeBound> slope_bound_scan(const ScalarField& u, int direction, double eps_target = 5) {
    const Grid& g = *u.grid;
    direction = direction >= 0 ? 1 : -1;
    std::vector<std::array<double, 2>> cols;
    for (int i = 1; i < g.nx - 1; ++i) {
        double m = std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = 1; j < g.ny - 1; ++j) {
            if (!has_stencil(u, i, j)) continue;
            const auto d = fd_derivatives(u, i, j);
            any = true;
            if (d.ux != 0) m = std::min(m, std::abs(d.uy / d.ux));
        }
        if (any) cols.push_back({g.s(i), m});
    }
    if (direction > 0) std::reverse(cols.begin(), cols.end());
    SlopeBound out;
    out.direction = direction;
    out.eps = std::numeric_limits<double>::infinity();
    std::size_t taken = 0;
    for (; taken < cols.size() && cols[taken][1] >= eps_target; ++taken) out.eps = std::min(out.eps, cols[taken][1]);
    if (taken == 0) return std::nullopt;
    // Window boundary halfway to the first rejected column.
    const double x_in = taken < cols.size() ? 0.5 * (cols[taken - 1][0] + cols[taken][0]) : cols[taken - 1][0];
    out.R0 = direction * x_in;
    out.profile = cols;
    if (direction > 0) std::reverse(out.profile.begin(), out.profile.end());
    return out;
}

// delta = (w + |y_a|) / sqrt(R^2 - (w + |y_a|)^2).
inline double delta_bound(std::array<double, 2> p_a, double R, double w) {
    const double a = w + std::abs(p_a[1]);
    if (!(R > a)) throw InvalidRadius("R must exceed w + |y_a|");
    return a / std::sqrt(R * R - a * a);
}

// ---------------------------------------------------------------------------
// Rigid motions.

inline Vec3 rotate_about(const Vec3& v, std::array<double, 2> p_a, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double dx = v[0] - p_a[0], dy = v[1] - p_a[1];
    return {p_a[0] + c * dx - s * dy, p_a[1] + s * dx + c * dy, v[2]};
}

inline SurfaceMesh rotate_about(const SurfaceMesh& m, std::array<double, 2> p_a, double theta) {
    return m.mapped([&](const Vec3& v) { return rotate_about(v, p_a, theta); });
}

// ---------------------------------------------------------------------------
// Cylindrical charts.

struct ChartRaster {
    double rho0 = 0, rho1 = 0, z0 = 0, z1 = 0;
    int nr = 256, nz = 256;
    double rho_at(int a) const { return rho0 + (a + 0.5) * (rho1 - rho0) / nr; }
    double z_at(int b) const { return z0 + (b + 0.5) * (z1 - z0) / nz; }
};

struct CylChart {
    std::array<double, 2> p_a{};
    std::vector<double> rho, theta, z;  // per vertex
    double sector_angle = 0;
    bool theta_graphical = false;
    bool orientation_consistent = false;
    long overlap_cells = 0;
    ChartRaster raster;
    std::vector<double> vartheta;  // per raster cell, NaN outside W
    std::vector<char> on_boundary;  // covered cell with an uncovered neighbour

    int cell(int a, int b) const { return b * raster.nr + a; }
    bool in_W(int a, int b) const { return !std::isnan(vartheta[cell(a, b)]); }
    long W_cells() const {
        long n = 0;
        for (double v : vartheta) n += !std::isnan(v);
        return n;
    }
    std::optional<double> theta_at(double r, double zz) const {
        const int a = static_cast<int>(std::floor((r - raster.rho0) / (raster.rho1 - raster.rho0) * raster.nr));
        const int b = static_cast<int>(std::floor((zz - raster.z0) / (raster.z1 - raster.z0) * raster.nz));
        if (a < 0 || b < 0 || a >= raster.nr || b >= raster.nz || !in_W(a, b)) return std::nullopt;
        return vartheta[cell(a, b)];
    }

    void write_csv(std::ostream& os) const {
        os << "rho,theta,z\n" << std::setprecision(17);
        for (std::size_t v = 0; v < rho.size(); ++v) os << rho[v] << "," << theta[v] << "," << z[v] << "\n";
    }
    void write_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw InvalidArgument("cannot write " + path);
        write_csv(f);
    }
};

namespace detail {

inline double orient2(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

inline bool point_in_triangle_xy(double px, double py, const Vec3& a, const Vec3& b, const Vec3& c) {
    const double d1 = orient2(a[0], a[1], b[0], b[1], px, py);
    const double d2 = orient2(b[0], b[1], c[0], c[1], px, py);
    const double d3 = orient2(c[0], c[1], a[0], a[1], px, py);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

}  // namespace detail

inline ChartRaster chart_raster_for(const std::vector<const SurfaceMesh*>& meshes, std::array<double, 2> p_a, int nr = 256,
                                    int nz = 256) {
    ChartRaster r;
    r.nr = nr;
    r.nz = nz;
    r.rho0 = r.z0 = std::numeric_limits<double>::infinity();
    r.rho1 = r.z1 = -std::numeric_limits<double>::infinity();
    for (const auto* m : meshes)
        for (const auto& v : m->vertices) {
            const double rr = std::hypot(v[0] - p_a[0], v[1] - p_a[1]);
            r.rho0 = std::min(r.rho0, rr);
            r.rho1 = std::max(r.rho1, rr);
            r.z0 = std::min(r.z0, v[2]);
            r.z1 = std::max(r.z1, v[2]);
        }
    const double pr = 1e-9 * (1 + r.rho1 - r.rho0), pz = 1e-9 * (1 + r.z1 - r.z0);
    r.rho0 -= pr;
    r.rho1 += pr;
    r.z0 -= pz;
    r.z1 += pz;
    return r;
}

// Cylindrical coordinates about the vertical line through p_a, the region W
// covered by the projected triangles on a (rho, z) raster and the azimuth
// vartheta over W. theta is measured from the +x ray and kept continuous
// around the mean direction of the mesh.
inline CylChart cylindrical_chart(const SurfaceMesh& m, std::array<double, 2> p_a,
                                  std::optional<ChartRaster> raster = std::nullopt) {
    if (m.vertices.empty()) throw InvalidArgument("empty mesh");
    for (const auto& t : m.triangles)
        if (detail::point_in_triangle_xy(p_a[0], p_a[1], m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]))
            throw InvalidAxis("axis meets the mesh");
    CylChart c;
    c.p_a = p_a;
    double mx = 0, my = 0;
    for (const auto& v : m.vertices) {
        const double dx = v[0] - p_a[0], dy = v[1] - p_a[1], r = std::hypot(dx, dy);
        if (!(r > 0)) throw InvalidAxis("axis meets the mesh");
        mx += dx / r;
        my += dy / r;
    }
    if (std::hypot(mx, my) < 1e-9 * m.vertices.size()) throw SectorTooWide("mesh surrounds the axis");
    const double mean = std::atan2(my, mx);
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (const auto& v : m.vertices) {
        const double dx = v[0] - p_a[0], dy = v[1] - p_a[1];
        double d = std::atan2(dy, dx) - mean;
        d = std::remainder(d, 2 * pi);
        c.rho.push_back(std::hypot(dx, dy));
        c.theta.push_back(mean + d);
        c.z.push_back(v[2]);
        tmin = std::min(tmin, mean + d);
        tmax = std::max(tmax, mean + d);
    }
    c.sector_angle = tmax - tmin;
    if (c.sector_angle >= pi) throw SectorTooWide("mesh spans a sector of angle >= pi about the axis");

    c.raster = raster ? *raster : chart_raster_for({&m}, p_a);
    const ChartRaster& R = c.raster;
    c.vartheta.assign(static_cast<std::size_t>(R.nr) * R.nz, NAN);
    std::vector<int> hits(c.vartheta.size(), 0);
    const double dr = (R.rho1 - R.rho0) / R.nr, dz = (R.z1 - R.z0) / R.nz;
    int pos = 0, neg = 0;
    for (const auto& t : m.triangles) {
        const double r0 = c.rho[t[0]], r1 = c.rho[t[1]], r2 = c.rho[t[2]];
        const double z0 = c.z[t[0]], z1 = c.z[t[1]], z2 = c.z[t[2]];
        const double area = detail::orient2(r0, z0, r1, z1, r2, z2);
        const double scale = std::max({std::abs(r1 - r0), std::abs(r2 - r0), std::abs(z1 - z0), std::abs(z2 - z0)});
        if (std::abs(area) <= 1e-12 * scale * scale) continue;
        (area > 0 ? pos : neg)++;
        const int a0 = std::max(0, static_cast<int>(std::floor((std::min({r0, r1, r2}) - R.rho0) / dr)));
        const int a1 = std::min(R.nr - 1, static_cast<int>(std::floor((std::max({r0, r1, r2}) - R.rho0) / dr)));
        const int b0 = std::max(0, static_cast<int>(std::floor((std::min({z0, z1, z2}) - R.z0) / dz)));
        const int b1 = std::min(R.nz - 1, static_cast<int>(std::floor((std::max({z0, z1, z2}) - R.z0) / dz)));
        for (int b = b0; b <= b1; ++b)
            for (int a = a0; a <= a1; ++a) {
                const double pr = R.rho_at(a), pz = R.z_at(b);
                const double l0 = detail::orient2(r1, z1, r2, z2, pr, pz) / area;
                const double l1 = detail::orient2(r2, z2, r0, z0, pr, pz) / area;
                const double l2 = 1 - l0 - l1;
                if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
                const double th = l0 * c.theta[t[0]] + l1 * c.theta[t[1]] + l2 * c.theta[t[2]];
                const int k = c.cell(a, b);
                if (hits[k] > 0 && std::abs(th - c.vartheta[k]) > 1e-6 * (1 + c.sector_angle)) ++c.overlap_cells;
                if (hits[k] == 0) c.vartheta[k] = th;
                ++hits[k];
            }
    }
    c.orientation_consistent = pos == 0 || neg == 0;
    c.theta_graphical = c.orientation_consistent && c.overlap_cells == 0;
    c.on_boundary.assign(c.vartheta.size(), 0);
    for (int b = 0; b < R.nz; ++b)
        for (int a = 0; a < R.nr; ++a) {
            if (!c.in_W(a, b)) continue;
            bool edge = a == 0 || b == 0 || a == R.nr - 1 || b == R.nz - 1;
            for (auto [da, db] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}})
                if (!edge && !c.in_W(a + da, b + db)) edge = true;
            c.on_boundary[c.cell(a, b)] = edge;
        }
    return c;
}

}  // namespace transol
