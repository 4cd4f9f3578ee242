#include <catch_amalgamated.hpp>
#include <transol/surfaces.hpp>
#include <transol/translator.hpp>

using namespace transol;
using Catch::Approx;

namespace {

DomainSpec window(double w, double h) {
    DomainSpec d = DomainSpec::strip(w, -2, 2, h);
    d.y_lo = w / 4;
    d.y_hi = 3 * w / 4;
    return d;
}

}  // namespace

TEST_CASE("zero field has residual one", "[translator]") {
    ScalarField u(build_grid(DomainSpec::strip(1, 0, 1, 0.1)));
    auto r = translator_residual(u);
    const Grid& g = *r.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) CHECK(r(i, j) == (g.on_edge(i, j) ? 0.0 : 1.0));
    CHECK(interior_sup(r) == 1.0);
}

TEST_CASE("grim reaper residual is second order", "[translator]") {
    for (double w : {pi, std::sqrt(2.0) * pi}) {
        const double r1 = interior_sup(translator_residual(grim_reaper_field(w, window(w, w / 16))));
        const double r2 = interior_sup(translator_residual(grim_reaper_field(w, window(w, w / 32))));
        CHECK(r1 < 0.05);
        CHECK(std::log2(r1 / r2) >= 1.9);
    }
}

TEST_CASE("pointwise operator on exact derivatives", "[translator]") {
    // u = ln sin y: u_y = cot y, u_yy = -csc^2 y.
    const double y = 0.7;
    Derivatives d{0, 1 / std::tan(y), 0, 0, -1 / (std::sin(y) * std::sin(y))};
    CHECK(translator_operator(d) == Approx(0).margin(1e-14));
    // Tilted: g_w with w = sqrt(2) pi has u_x = 1, r = sqrt 2.
    const double r = std::sqrt(2.0);
    Derivatives t{1, r / std::tan(y / r), 0, 0, -1 / (std::sin(y / r) * std::sin(y / r))};
    CHECK(translator_operator(t) == Approx(0).margin(1e-13));
}

TEST_CASE("partials match difference quotients of the operator", "[translator]") {
    Derivatives d{0.3, -1.2, 0.7, 0.4, -0.9};
    const auto p = translator_partials(d);
    const double e = 1e-6;
    for (int k = 0; k < 5; ++k) {
        Derivatives a = d, b = d;
        double* pa[5] = {&a.ux, &a.uy, &a.uxx, &a.uxy, &a.uyy};
        double* pb[5] = {&b.ux, &b.uy, &b.uxx, &b.uxy, &b.uyy};
        *pa[k] += e;
        *pb[k] -= e;
        CHECK(p[k] == Approx((translator_operator(a) - translator_operator(b)) / (2 * e)).epsilon(1e-8));
    }
}

TEST_CASE("jacobian rows vanish off the interior", "[translator]") {
    auto g = build_grid(DomainSpec::strip(1, 0, 1, 0.125));
    auto u = field_from(g, [](double x, double y) { return x * y + std::sin(x); });
    auto J = translator_jacobian(u);
    CHECK(J.rows() == g->size());
    for (int i = 0; i < g->nx; ++i) {
        CHECK(J.row(g->index(i, 0)).nonZeros() == 0);
        CHECK(J.row(g->index(i, g->ny - 1)).nonZeros() == 0);
    }
    CHECK(J.row(g->index(3, 3)).nonZeros() == 9);
}

TEST_CASE("jacobian directional derivative on a smooth field", "[translator]") {
    auto g = build_grid(DomainSpec::strip(1.5, -1, 1, 0.1));
    auto u = field_from(g, [](double x, double y) { return std::cos(x + 2 * y) + 0.5 * x * x; });
    auto v = field_from(g, [](double x, double y) { return std::sin(3 * x) * y; });
    auto J = translator_jacobian(u);
    Eigen::Map<const Eigen::VectorXd> dv(v.values.data(), v.values.size());
    Eigen::VectorXd Jv = J * dv;
    const double e = 1e-6;
    ScalarField up = u, um = u;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        up.values[k] += e * v.values[k];
        um.values[k] -= e * v.values[k];
    }
    auto rp = translator_residual(up), rm = translator_residual(um);
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        err = std::max(err, std::abs((rp.values[k] - rm.values[k]) / (2 * e) - Jv[static_cast<Eigen::Index>(k)]));
        scale = std::max(scale, std::abs(Jv[static_cast<Eigen::Index>(k)]));
    }
    CHECK(err <= 1e-5 * scale);
}

TEST_CASE("excluded nodes drop out of the residual", "[translator]") {
    auto g = build_grid(DomainSpec::strip(1, 0, 1, 0.125));
    ScalarField u(g);
    u.mask[g->index(4, 4)] = NodeKind::excluded;
    auto r = translator_residual(u);
    CHECK(r(4, 4) == 0);
    CHECK(r(3, 3) == 0);
    CHECK(r(2, 2) == 1);
}
