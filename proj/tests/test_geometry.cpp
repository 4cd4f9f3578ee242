#include <catch_amalgamated.hpp>
#include <transol/geometry.hpp>
#include <transol/surfaces.hpp>

using namespace transol;
using Catch::Approx;

namespace {

std::shared_ptr<const Grid> box(double x0, double x1, double w, double h) {
    return build_grid(DomainSpec::strip(w, x0, x1, h));
}

SurfaceMesh cylinder(std::array<double, 2> c, double r, int n) {
    SurfaceMesh m;
    for (int k = 0; k < n; ++k) {
        const double t = 2 * pi * k / n;
        m.vertices.push_back({c[0] + r * std::cos(t), c[1] + r * std::sin(t), 0});
        m.vertices.push_back({c[0] + r * std::cos(t), c[1] + r * std::sin(t), 1});
    }
    for (int k = 0; k < n; ++k) {
        const int a = 2 * k, b = 2 * ((k + 1) % n);
        m.triangles.push_back({a, b, a + 1});
        m.triangles.push_back({b, b + 1, a + 1});
        m.patch.push_back(0);
        m.patch.push_back(0);
    }
    return m;
}

}  // namespace

TEST_CASE("gauss map of simple graphs", "[geometry]") {
    auto g = box(-1, 1, 1, 0.1);
    auto n = gauss_map(ScalarField(g, 2.0));
    CHECK(n.attains_e3());
    CHECK(n(5, 5)[2] == 1);
    auto m = gauss_map(field_from(g, [](double x, double) { return x; }));
    CHECK(m(5, 5)[0] == Approx(-1 / std::sqrt(2.0)));
    CHECK(m(5, 5)[1] == Approx(0).margin(1e-15));
    CHECK(m(5, 5)[2] == Approx(1 / std::sqrt(2.0)));
    CHECK_FALSE(m.attains_e3());
    CHECK(std::isnan(m(0, 0)[0]));
}

TEST_CASE("grim reaper normal is vertical on the centre line", "[geometry]") {
    const double h = pi / 16;
    DomainSpec d = DomainSpec::strip(pi, -2, 2, h);
    d.y_lo = h;
    d.y_hi = pi - h;
    auto n = gauss_map(grim_reaper_field(pi, d));
    REQUIRE(n.attains_e3());
    for (const auto& p : n.vertical_points) CHECK(p[1] == Approx(pi / 2));
}

TEST_CASE("gauss map collisions", "[geometry]") {
    auto g = box(0, 4 * pi, 1, pi / 32);
    auto rep = gauss_injectivity_sample(field_from(g, [](double x, double) { return std::sin(x); }), 20000, 11);
    CHECK(rep.collisions > 0);
    // cos x repeats at x + 2k pi and at -x + 2k pi.
    for (const auto& e : rep.examples) {
        const double same = std::abs(std::remainder(e[0] - e[2], 2 * pi));
        const double mirror = std::abs(std::remainder(e[0] + e[2], 2 * pi));
        CHECK(std::min(same, mirror) <= 1e-3);
    }
    auto c = gauss_injectivity_sample(ScalarField(g, 1.0), 1000, 2);
    CHECK(c.collisions == c.pairs);
    CHECK(c.pairs > 0);
}

TEST_CASE("grim reaper fails the theta-graph test", "[geometry]") {
    const double h = pi / 32;
    DomainSpec d = DomainSpec::strip(pi, -8, 8, h);
    d.y_lo = h;
    d.y_hi = pi - h;
    auto rep = theta_graph_check(grim_reaper_field(pi, d), {0, -5}, ThetaRegion::rect(-8, 8, 0, pi));
    CHECK_FALSE(rep.pass);
    CHECK(rep.crosses_strip);
    // The zero set is {x = 0} together with {y = pi/2}.
    for (const auto& p : rep.critical) CHECK((std::abs(p[0]) <= h || std::abs(p[1] - pi / 2) <= h));
}

TEST_CASE("tilted plane passes the theta-graph test", "[geometry]") {
    auto u = field_from(box(0, 3, 1, 0.05), [](double x, double) { return x; });
    auto rep = theta_graph_check(u, {0, -1}, ThetaRegion::rect(1, 2, 0, 1));
    CHECK(rep.pass);
    CHECK(rep.sign == 1);
    CHECK_THROWS_AS(theta_graph_check(u, {1.5, 0.5}, ThetaRegion::rect(1, 2, 0, 1)), InvalidAxis);
}

TEST_CASE("slope bound scan", "[geometry]") {
    auto g = box(-10, 10, 1, 0.1);
    auto sb = slope_bound_scan(field_from(g, [](double, double y) { return y; }), -1);
    REQUIRE(sb.has_value());
    CHECK(std::isinf(sb->eps));
    auto flat = slope_bound_scan(field_from(g, [](double x, double) { return x; }), -1);
    CHECK_FALSE(flat.has_value());
    // Column minimum of |u_y / u_x| = 4|x| / |1 - 4y| over interior rows
    // y <= 0.9 is 4|x| / 2.6, at least 5 for x <= -3.25.
    auto q = slope_bound_scan(field_from(g, [](double x, double y) { return x - 4 * x * y; }), -1, 5);
    REQUIRE(q.has_value());
    CHECK(q->eps >= 5);
    CHECK(q->R0 == Approx(3.25).margin(0.1));
}

TEST_CASE("delta bound", "[geometry]") {
    CHECK(delta_bound({0, 0}, 2 * pi, pi) == Approx(1 / std::sqrt(3.0)));
    CHECK(delta_bound({0, 0.5}, std::sqrt(2.0) * (pi + 0.5), pi) == Approx(1));
    double prev = 1e300;
    for (double R : {4.0, 8.0, 16.0, 64.0, 1e6}) {
        const double d = delta_bound({1, 0}, R, pi);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev < 1e-5);
    CHECK_THROWS_AS(delta_bound({0, 1}, pi + 1, pi), InvalidRadius);
}

TEST_CASE("rotation about a vertical axis", "[geometry]") {
    auto v = rotate_about(Vec3{1, 0, 5}, {0, 0}, pi / 2);
    CHECK(v[0] == Approx(0).margin(1e-15));
    CHECK(v[1] == Approx(1));
    CHECK(v[2] == 5);
    auto id = rotate_about(Vec3{0.3, -2, 1}, {4, 4}, 0);
    CHECK(norm(id - Vec3{0.3, -2, 1}) <= 1e-15);
}

TEST_CASE("cylindrical chart of a one-sided patch", "[geometry]") {
    DomainSpec d = DomainSpec::strip(3, -6, -2, 0.1);
    d.y_lo = 0.2;
    d.y_hi = 2.8;
    auto m = graph_mesh(field_from(build_grid(d), [](double x, double y) { return 0.2 * x + y; }));
    auto c = cylindrical_chart(m, {20, 0});
    CHECK(c.theta_graphical);
    CHECK(c.overlap_cells == 0);
    CHECK(c.sector_angle < pi);
    CHECK(c.W_cells() > 0);
    auto t = c.theta_at(c.rho[0], c.z[0]);
    if (t) CHECK(*t == Approx(c.theta[0]).margin(0.05));
}

TEST_CASE("charts around the axis are rejected", "[geometry]") {
    CHECK_THROWS_AS(cylindrical_chart(cylinder({0, 0}, 1, 32), {0, 0}), SectorTooWide);
    DomainSpec d = DomainSpec::strip(2, -1, 1, 0.1);
    auto m = graph_mesh(ScalarField(build_grid(d), 0.0));
    CHECK_THROWS_AS(cylindrical_chart(m, {0, 1}), InvalidAxis);
}

TEST_CASE("pitchfork certification chain", "[geometry][slow]") {
    PieceConfig c;
    c.h = pi / 32;
    auto p = construct_piece(SurfaceKind::pitchfork(pi), c);
    auto sb = slope_bound_scan(p.field, -1, 5);
    REQUIRE(sb.has_value());
    const std::array<double, 2> p_a{20, 0};
    const double R = std::hypot(p_a[0] + sb->R0, pi);
    CHECK(delta_bound(p_a, R, pi) < sb->eps);
    auto rep = theta_graph_check(p.field, p_a, ThetaRegion::omega(-1, R));
    CHECK(rep.pass);
    auto inj = gauss_injectivity_sample(p.field, 100000, 7);
    CHECK(inj.pairs > 50000);
    CHECK(inj.collisions == 0);
}
