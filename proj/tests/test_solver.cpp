#include <catch_amalgamated.hpp>
#include <transol/solver.hpp>
#include <transol/surfaces.hpp>
#include <transol/translator.hpp>

using namespace transol;
using Catch::Approx;

namespace {

BoundarySpec dirichlet_all(const DomainSpec& d, std::function<double(double, double)> f) {
    BoundarySpec bc;
    for (int e = 0; e < 4; ++e) {
        auto [a, b] = edge_range(d, Edge(e));
        bc.edges[e] = {{a, b, SegValue::finite, f}};
    }
    return bc;
}

double core_error(const ScalarField& u, const std::function<double(double, double)>& f, double x0, double x1,
                  double y0, double y1) {
    const Grid& g = *u.grid;
    double e = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i, j), y = g.y(j);
            if (x < x0 || x > x1 || y < y0 || y > y1) continue;
            e = std::max(e, std::abs(u(i, j) - f(x, y)));
        }
    return e;
}

}  // namespace

TEST_CASE("tilted grim reaper recovered from Dirichlet data", "[solver]") {
    const double w = std::sqrt(2.0) * pi, y0 = w / 8, H = 0.75 * w, h = w / 24;
    auto f = [w, y0](double x, double y) { return grim_reaper_value(w, x, y + y0); };
    DomainSpec d = DomainSpec::strip(H, -2, 2, h);
    auto [u, rep] = solve_bvp(d, dirichlet_all(d, f), SolverConfig{});
    CHECK(rep.converged);
    CHECK_FALSE(rep.has_multiplier);
    CHECK(rep.final_residual <= 1e-10);
    CHECK(rep.newton_iters.size() == 1);
    CHECK(rep.newton_iters[0] <= 12);
    CHECK(core_error(u, f, -1, 1, H / 4, 3 * H / 4) <= 5 * h * h);
}

TEST_CASE("grim reaper with infinite edges", "[solver]") {
    const double w = pi, h = pi / 16;
    DomainSpec d = DomainSpec::strip(w, -8, 8, h);
    auto bc = make_boundary_spec(SurfaceKind::grim_reaper(w), -8, 8);
    auto [u, rep] = solve_bvp(d, bc, SolverConfig{});
    CHECK(rep.converged);
    CHECK(rep.stage_caps.size() == 5);
    CHECK(rep.interior_drift <= 1e-3);
    auto f = [](double, double y) { return std::log(std::sin(y)); };
    CHECK(core_error(u, f, -4, 4, w / 4, 3 * w / 4) <= 5 * h * h + 2 * std::exp(-24.0));
}

TEST_CASE("iterative linear solver agrees with the banded path", "[solver]") {
    const double w = pi, y0 = 0.5, H = 2, h = 0.125;
    auto f = [w, y0](double x, double y) { return grim_reaper_value(w, x, y + y0); };
    DomainSpec d = DomainSpec::strip(H, -1, 1, h);
    SolverConfig a, b;
    b.linear_solver = LinearSolverKind::stabilized_iterative;
    auto [ua, ra] = solve_bvp(d, dirichlet_all(d, f), a);
    auto [ub, rb] = solve_bvp(d, dirichlet_all(d, f), b);
    REQUIRE(ra.converged);
    REQUIRE(rb.converged);
    for (std::size_t k = 0; k < ua.values.size(); ++k) CHECK(ua.values[k] == Approx(ub.values[k]).margin(1e-8));
}

TEST_CASE("solution of the divergence form also solves the pointwise operator", "[solver]") {
    const double w = pi, y0 = 0.6, H = 1.9;
    auto f = [w, y0](double x, double y) { return grim_reaper_value(w, x, y + y0); };
    double res[2];
    for (int k = 0; k < 2; ++k) {
        DomainSpec d = DomainSpec::strip(H, -1, 1, k == 0 ? 0.1 : 0.05);
        auto [u, rep] = solve_bvp(d, dirichlet_all(d, f), SolverConfig{});
        res[k] = interior_sup(translator_residual(u));
    }
    CHECK(res[1] < res[0]);
    CHECK(res[1] < 0.05);
}

TEST_CASE("solver configuration is validated", "[solver]") {
    DomainSpec d = DomainSpec::strip(1, 0, 1, 0.1);
    auto bc = dirichlet_all(d, [](double, double) { return 0.0; });
    SolverConfig c;
    c.cap_schedule = {4, 3};
    CHECK_THROWS_AS(solve_bvp(d, bc, c), InvalidArgument);
    c.cap_schedule = {};
    CHECK_THROWS_AS(solve_bvp(d, bc, c), InvalidArgument);
    c = SolverConfig{};
    c.newton_tol = 0;
    CHECK_THROWS_AS(solve_bvp(d, bc, c), InvalidArgument);
}

TEST_CASE("stagnation raises NonConvergence with the stage", "[solver]") {
    const double w = pi, h = pi / 16;
    DomainSpec d = DomainSpec::strip(w, -12, 12, h);
    auto bc = make_boundary_spec(SurfaceKind::pitchfork(w), -12, 12);
    SolverConfig c;
    c.max_newton_iters = 1;
    SolveReport rep;
    try {
        solve_bvp(d, bc, c, std::nullopt, &rep);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.stage() == 0);
        CHECK(e.residual() > c.newton_tol);
        CHECK_FALSE(rep.converged);
        CHECK(rep.failed_stage == 0);
    }
}

TEST_CASE("report serializes", "[solver]") {
    SolveReport r;
    r.converged = true;
    r.final_residual = 1e-11;
    r.newton_iters = {3, 2};
    const auto js = r.to_json();
    CHECK(js.find("\"converged\": true") != std::string::npos);
    CHECK(js.find("\"newton_iters\": [3, 2]") != std::string::npos);
}
