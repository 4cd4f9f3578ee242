#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "grid.hpp"

namespace transol {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::vector<Vec3>> crease_lines;
    // Patch id per triangle; patches are the graph pieces before reflection.
    std::vector<int> patch;

    int patch_count() const { return patch.empty() ? 0 : *std::max_element(patch.begin(), patch.end()) + 1; }

    // Appends another mesh, offsetting indices and patch ids.
    void append(const SurfaceMesh& m) {
        const int off = static_cast<int>(vertices.size());
        const int poff = patch_count();
        vertices.insert(vertices.end(), m.vertices.begin(), m.vertices.end());
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            const auto& tr = m.triangles[t];
            triangles.push_back({tr[0] + off, tr[1] + off, tr[2] + off});
            patch.push_back(poff + (m.patch.empty() ? 0 : m.patch[t]));
        }
        crease_lines.insert(crease_lines.end(), m.crease_lines.begin(), m.crease_lines.end());
    }

    template <class F>
    SurfaceMesh mapped(F&& f) const {
        SurfaceMesh out = *this;
        for (auto& v : out.vertices) v = f(v);
        for (auto& l : out.crease_lines)
            for (auto& v : l) v = f(v);
        return out;
    }

    SurfaceMesh scaled(double s) const {
        return mapped([s](const Vec3& v) { return s * v; });
    }
};

// Graph of a field as a triangle mesh. Cells with an excluded corner or a
// corner above z_clip in absolute value are dropped; each cell is split along
// its (i,j)-(i+1,j+1) diagonal.
inline SurfaceMesh graph_mesh(const ScalarField& u, double z_clip = std::numeric_limits<double>::infinity()) {
    const Grid& g = *u.grid;
    SurfaceMesh m;
    std::vector<int> vid(g.size(), -1);
    auto vertex = [&](int i, int j) {
        int& k = vid[g.index(i, j)];
        if (k < 0) {
            k = static_cast<int>(m.vertices.size());
            m.vertices.push_back({g.x(i, j), g.y(j), u(i, j)});
        }
        return k;
    };
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            bool ok = true;
            for (int dj = 0; dj < 2 && ok; ++dj)
                for (int di = 0; di < 2 && ok; ++di)
                    ok = u.usable(i + di, j + dj) && std::abs(u(i + di, j + dj)) <= z_clip;
            if (!ok) continue;
            const int a = vertex(i, j), b = vertex(i + 1, j), c = vertex(i + 1, j + 1), d = vertex(i, j + 1);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
            m.patch.push_back(0);
            m.patch.push_back(0);
        }
    return m;
}

inline std::vector<Vec3> vertical_segment(double x, double y, double z0, double z1, int pieces = 8) {
    std::vector<Vec3> l;
    for (int k = 0; k <= pieces; ++k) l.push_back({x, y, z0 + (z1 - z0) * k / pieces});
    return l;
}

inline void write_obj(const SurfaceMesh& m, std::ostream& os) {
    os << std::setprecision(12);
    for (const auto& v : m.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    std::size_t base = m.vertices.size();
    for (const auto& l : m.crease_lines)
        for (const auto& v : l) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& t : m.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    for (const auto& l : m.crease_lines) {
        os << 'l';
        for (std::size_t k = 0; k < l.size(); ++k) os << ' ' << base + k + 1;
        os << '\n';
        base += l.size();
    }
}

inline void write_obj(const SurfaceMesh& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    write_obj(m, f);
}

// Per-vertex flag: true when the vertex has a closed one-ring (every
// incident edge is shared by exactly two triangles).
inline std::vector<char> interior_vertices(const SurfaceMesh& m) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edges[{a, b}];
        }
    std::vector<char> inner(m.vertices.size(), 0);
    for (const auto& t : m.triangles)
        for (int v : t) inner[v] = 1;
    for (const auto& [e, n] : edges)
        if (n != 2) inner[e.first] = inner[e.second] = 0;
    return inner;
}

// Discrete mean curvature |H|, H = k1 + k2 (the convention of the translator
// equation, H = div(Du/W) on graphs), from the cotangent Laplacian with
// barycentric areas: |H| = |Σ (cot a + cot b)(x_j - x_i)| / (2 A_i).
// Boundary vertices read NaN.
inline std::vector<double> mean_curvature(const SurfaceMesh& m) {
    const std::size_t n = m.vertices.size();
    std::vector<Vec3> lap(n, {0, 0, 0});
    std::vector<double> area(n, 0.0);
    for (const auto& t : m.triangles) {
        const Vec3 p[3] = {m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]};
        const double A = 0.5 * norm(cross(p[1] - p[0], p[2] - p[0]));
        if (!(A > 0)) continue;
        for (int k = 0; k < 3; ++k) {
            // Angle at p[k] weighs the opposite edge.
            const int a = (k + 1) % 3, b = (k + 2) % 3;
            const Vec3 e1 = p[a] - p[k], e2 = p[b] - p[k];
            const double cot = dot(e1, e2) / norm(cross(e1, e2));
            const Vec3 d = p[b] - p[a];
            lap[t[a]] = lap[t[a]] + cot * d;
            lap[t[b]] = lap[t[b]] + cot * (-1.0 * d);
            area[t[k]] += A / 3;
        }
    }
    const auto inner = interior_vertices(m);
    std::vector<double> H(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t v = 0; v < n; ++v)
        if (inner[v] && area[v] > 0) H[v] = norm(lap[v]) / (2 * area[v]);
    return H;
}

namespace detail {

// Segment [p, q] against triangle (a, b, c), Moller-Trumbore with the
// parameter restricted to the open segment.
inline bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 d = q - p, e1 = b - a, e2 = c - a;
    const Vec3 s = cross(d, e2);
    const double det = dot(e1, s);
    const double scale = norm(d) * norm(e1) * norm(e2);
    if (std::abs(det) <= 1e-14 * scale) return false;
    const double inv = 1 / det;
    const Vec3 r = p - a;
    const double u = dot(r, s) * inv;
    if (u < 1e-9 || u > 1 - 1e-9) return false;
    const Vec3 qv = cross(r, e1);
    const double v = dot(d, qv) * inv;
    if (v < 1e-9 || u + v > 1 - 1e-9) return false;
    const double t = dot(e2, qv) * inv;
    return t > 1e-9 && t < 1 - 1e-9;
}

}  // namespace detail

struct IntersectionSample {
    int triangles_sampled = 0;
    int pairs_tested = 0;
    int intersections = 0;
};

// Sampled embeddedness check: random triangles are tested against every
// non-adjacent triangle in nearby buckets of a uniform spatial hash.
inline IntersectionSample sample_self_intersections(const SurfaceMesh& m, int samples, std::uint64_t seed) {
    IntersectionSample out;
    if (m.triangles.empty()) return out;
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    double mean_edge = 0;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            const auto& v = m.vertices[t[k]];
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], v[a]);
                hi[a] = std::max(hi[a], v[a]);
            }
        }
        mean_edge += norm(m.vertices[t[1]] - m.vertices[t[0]]);
    }
    mean_edge /= static_cast<double>(m.triangles.size());
    const double cell = std::max(4 * mean_edge, 1e-12);
    auto key = [&](const Vec3& v) {
        std::array<long long, 3> k;
        for (int a = 0; a < 3; ++a) k[a] = static_cast<long long>(std::floor((v[a] - lo[a]) / cell));
        return k;
    };
    std::map<std::array<long long, 3>, std::vector<int>> buckets;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        Vec3 c = (1.0 / 3) * (m.vertices[m.triangles[t][0]] + m.vertices[m.triangles[t][1]] +
                              m.vertices[m.triangles[t][2]]);
        buckets[key(c)].push_back(static_cast<int>(t));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, m.triangles.size() - 1);
    for (int s = 0; s < samples; ++s) {
        const auto& T = m.triangles[pick(rng)];
        ++out.triangles_sampled;
        Vec3 c = (1.0 / 3) * (m.vertices[T[0]] + m.vertices[T[1]] + m.vertices[T[2]]);
        const auto k0 = key(c);
        bool hit = false;
        for (long long dx = -1; dx <= 1 && !hit; ++dx)
            for (long long dy = -1; dy <= 1 && !hit; ++dy)
                for (long long dz = -1; dz <= 1 && !hit; ++dz) {
                    auto it = buckets.find({k0[0] + dx, k0[1] + dy, k0[2] + dz});
                    if (it == buckets.end()) continue;
                    for (int o : it->second) {
                        const auto& U = m.triangles[o];
                        bool shared = false;
                        for (int a : T)
                            for (int b : U) shared = shared || a == b;
                        if (shared) continue;
                        ++out.pairs_tested;
                        const Vec3 &a = m.vertices[U[0]], &b = m.vertices[U[1]], &cc = m.vertices[U[2]];
                        for (int e = 0; e < 3 && !hit; ++e)
                            hit = detail::segment_hits_triangle(m.vertices[T[e]], m.vertices[T[(e + 1) % 3]], a, b, cc);
                        const Vec3 &p0 = m.vertices[T[0]], &p1 = m.vertices[T[1]], &p2 = m.vertices[T[2]];
                        for (int e = 0; e < 3 && !hit; ++e)
                            hit = detail::segment_hits_triangle(m.vertices[U[e]], m.vertices[U[(e + 1) % 3]], p0, p1, p2);
                        if (hit) break;
                    }
                }
        if (hit) ++out.intersections;
    }
    return out;
}

}  // namespace transol
