#include <catch_amalgamated.hpp>
#include <transol/banded_lu.hpp>
#include <transol/grid.hpp>
#include <transol/surfaces.hpp>

#include <random>
#include <sstream>

using namespace transol;
using Catch::Approx;

TEST_CASE("strip grid node counts", "[grid]") {
    auto g = build_grid(DomainSpec::strip(pi, -10, 10, pi / 64));
    // 20 / (pi/64) = 407.4 intervals, snapped to 407.
    CHECK(g->nx == 408);
    CHECK(g->ny == 65);
    CHECK(g->snapped_x);
    CHECK_FALSE(g->snapped_y);
    int interior = 0;
    ScalarField u(g);
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) interior += u.is_interior(i, j);
    CHECK(interior == 406 * 63);
}

TEST_CASE("coarse grids are rejected", "[grid]") {
    CHECK_THROWS_AS(build_grid(DomainSpec::strip(1, 0, 1, 0.5)), GridTooCoarse);
    CHECK_THROWS_AS(build_grid(DomainSpec::strip(-1, 0, 1, 0.1)), InvalidDomain);
    CHECK_THROWS_AS(build_grid(DomainSpec::strip(1, 1, 0, 0.1)), InvalidDomain);
    CHECK_THROWS_AS(build_grid(DomainSpec::parallelogram(0, 1, 1, 0.1)), InvalidDomain);
}

TEST_CASE("right-angle parallelogram is a square grid", "[grid]") {
    auto g = build_grid(DomainSpec::parallelogram(pi / 2, 1, 1, 0.25));
    CHECK(g->nx == 5);
    CHECK(g->ny == 5);
    CHECK(g->x(4, 4) == Approx(1).margin(1e-15));
}

TEST_CASE("sheared grid coordinates", "[grid]") {
    auto g = build_grid(DomainSpec::parallelogram(pi / 3, 1, 2, 0.125));
    const double c = std::cos(pi / 3) / std::sin(pi / 3);
    CHECK(g->x(0, g->ny - 1) == Approx(c));
    auto [fi, fj] = g->locate(g->x(3, 5), g->y(5));
    CHECK(fi == Approx(3));
    CHECK(fj == Approx(5));
}

TEST_CASE("central differences on quadratics and constants", "[grid]") {
    auto g = build_grid(DomainSpec::strip(2, -1, 1, 0.1));
    auto u = field_from(g, [](double x, double y) { return x * x + y * y; });
    for (auto [i, j] : {std::pair{3, 4}, std::pair{10, 10}, std::pair{17, 2}}) {
        auto d = fd_derivatives(u, i, j);
        CHECK(d.ux == Approx(2 * g->x(i, j)).margin(1e-12));
        CHECK(d.uy == Approx(2 * g->y(j)).margin(1e-12));
        CHECK(d.uxx == Approx(2).margin(1e-9));
        CHECK(d.uxy == Approx(0).margin(1e-9));
        CHECK(d.uyy == Approx(2).margin(1e-9));
    }
    ScalarField c(g, 4.5);
    auto d = fd_derivatives(c, 5, 5);
    CHECK(d.ux == 0);
    CHECK(d.uy == 0);
    CHECK(d.uxx == 0);
    CHECK(d.uxy == 0);
    CHECK(d.uyy == 0);
}

TEST_CASE("mixed derivative of sin x sin y", "[grid]") {
    auto g = build_grid(DomainSpec::strip(2, 0, 2, 0.01));
    auto u = field_from(g, [](double x, double y) { return std::sin(x) * std::sin(y); });
    auto d = fd_derivatives(u, 100, 100);
    CHECK(std::abs(d.uxy - std::cos(1.0) * std::cos(1.0)) <= 1e-4);
}

TEST_CASE("boundary nodes have no derivatives", "[grid]") {
    auto g = build_grid(DomainSpec::strip(1, 0, 1, 0.1));
    ScalarField u(g);
    CHECK_THROWS_AS(fd_derivatives(u, 0, 3), NotInterior);
    CHECK_THROWS_AS(fd_derivatives(u, 4, g->ny - 1), NotInterior);
}

TEST_CASE("finite differences converge at second order", "[grid]") {
    auto f = [](double x, double y) { return std::exp(0.3 * x) * std::sin(y + 0.2 * x); };
    double err[2];
    for (int k = 0; k < 2; ++k) {
        const double h = k == 0 ? 0.05 : 0.025;
        auto g = build_grid(DomainSpec::strip(1, 0, 1, h));
        auto u = field_from(g, f);
        auto [i, j] = g->locate(0.5, 0.5);
        auto d = fd_derivatives(u, static_cast<int>(std::lround(i)), static_cast<int>(std::lround(j)));
        const double x = 0.5, y = 0.5, e = std::exp(0.3 * x), s = std::sin(y + 0.2 * x), c = std::cos(y + 0.2 * x);
        const double uxy = e * (0.3 * c - 0.2 * s);
        const double uxx = e * (0.09 * s + 0.12 * c - 0.04 * s);
        err[k] = std::max(std::abs(d.uxy - uxy), std::abs(d.uxx - uxx));
    }
    CHECK(std::log2(err[0] / err[1]) >= 1.9);
}

TEST_CASE("capped pitchfork trace", "[grid][boundary]") {
    DomainSpec d = DomainSpec::strip(pi, -12, 12, pi / 8);
    auto g = build_grid(d);
    auto bc = make_boundary_spec(SurfaceKind::pitchfork(pi), -12, 12);
    auto t = cap_boundary(bc, 10, g);
    const double ramp = 2 * std::max(g->hx, g->hy);
    for (int i = 0; i < g->nx; ++i) {
        const double x = g->x(i, 0);
        if (x < -ramp) CHECK(t.values[g->index(i, 0)] == 10);
        if (x > ramp) CHECK(t.values[g->index(i, 0)] == -10);
        CHECK(t.values[g->index(i, g->ny - 1)] == -10);
    }
    auto t0 = cap_boundary(bc, 0, g);
    for (int i = 0; i < g->nx; ++i) {
        CHECK(t0.values[g->index(i, 0)] == 0);
        CHECK(t0.values[g->index(i, g->ny - 1)] == 0);
    }
    // Neumann left edge stays undefined away from the corners.
    CHECK_FALSE(t.defined[g->index(0, g->ny / 2)]);
}

TEST_CASE("capped helicoid top edge ramps across the axis", "[grid][boundary]") {
    const double w = pi / 2, h = w / 16;
    auto g = build_grid(DomainSpec::strip(w, -12, 13, h));
    auto bc = make_boundary_spec(SurfaceKind::helicoid(w, 1), -12, 13);
    auto t = cap_boundary(bc, 8, g);
    const double ramp = 2 * std::max(g->hx, g->hy);
    const int top = g->ny - 1;
    for (int i = 0; i < g->nx; ++i) {
        const double x = g->x(i, top), v = t.values[g->index(i, top)];
        if (x < 1 - ramp) CHECK(v == -8);
        else if (x > 1 + ramp) CHECK(v == 8);
        else CHECK(v == Approx(8 * (x - 1) / ramp).margin(1e-12));
    }
}

TEST_CASE("boundary specs must cover every edge", "[grid][boundary]") {
    DomainSpec d = DomainSpec::strip(1, 0, 1, 0.1);
    BoundarySpec bc;
    bc.edge(Edge::bottom) = {{0, 0.5, SegValue::neg_inf, {}}};
    bc.edge(Edge::top) = {{0, 1, SegValue::neg_inf, {}}};
    bc.edge(Edge::left) = {{0, 1, SegValue::neumann, {}}};
    bc.edge(Edge::right) = {{0, 1, SegValue::neumann, {}}};
    CHECK_THROWS_AS(validate(bc, d), InvalidBoundary);
    bc.edge(Edge::bottom) = {{0, 1, SegValue::finite, {}}};
    CHECK_THROWS_AS(validate(bc, d), InvalidBoundary);
}

TEST_CASE("csv round trip", "[grid][io]") {
    DomainSpec d = DomainSpec::strip(1, -1, 1, 0.125);
    auto u = field_from(build_grid(d), [](double x, double y) { return std::sin(3 * x) + y * y; });
    std::stringstream ss;
    write_csv(u, ss);
    auto v = read_csv(ss, d);
    REQUIRE(v.values.size() == u.values.size());
    for (std::size_t k = 0; k < u.values.size(); ++k) CHECK(v.values[k] == u.values[k]);
}

TEST_CASE("cubic sampling is exact on cubics", "[grid]") {
    auto g = build_grid(DomainSpec::strip(2, -1, 1, 0.1));
    auto f = [](double x, double y) { return x * x * x - 2 * x * y * y + y * y * y + 1; };
    auto u = field_from(g, f);
    for (auto [x, y] : {std::pair{0.123, 0.77}, std::pair{-0.95, 1.93}, std::pair{0.5, 0.05}})
        CHECK(*u.sample_cubic(x, y) == Approx(f(x, y)).margin(1e-12));
    CHECK_FALSE(u.sample(5, 1).has_value());
}

TEST_CASE("banded LU solves a random banded system", "[linear]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    const int n = 60, kl = 4, ku = 3;
    BandMatrix<double> A(n, kl, ku);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j) A.add(i, j, U(rng));
    std::vector<double> x(n);
    for (auto& v : x) v = U(rng);
    auto b = A.multiply(x);
    BandedLU<double> lu(A);
    lu.solve(b);
    for (int i = 0; i < n; ++i) CHECK(b[i] == Approx(x[i]).margin(1e-9));
    CHECK_THROWS_AS(A.add(0, n - 1, 1.0), LinearSolverFailure);
}
