#include <catch_amalgamated.hpp>
#include <transol/surfaces.hpp>

using namespace transol;
using Catch::Approx;

namespace {

// Shared pitchfork solves at h = pi/32.
const PieceResult& pitchfork(Seed s) {
    static std::optional<PieceResult> zero, lift;
    auto& slot = s == Seed::zero ? zero : lift;
    if (!slot) {
        PieceConfig c;
        c.h = pi / 32;
        c.seed = s;
        slot = construct_piece(SurfaceKind::pitchfork(pi), c);
    }
    return *slot;
}

}  // namespace

TEST_CASE("surface kinds validate their widths", "[surfaces]") {
    CHECK_THROWS_AS(validate(SurfaceKind::pitchfork(3)), InvalidWidth);
    CHECK_THROWS_AS(validate(SurfaceKind::helicoid(pi)), InvalidWidth);
    CHECK_THROWS_AS(validate(SurfaceKind::scherk(pi, 1, 1)), InvalidArgument);
    CHECK_THROWS_AS(validate(SurfaceKind::trident(0, 1)), InvalidArgument);
    CHECK_THROWS_AS(grim_reaper_field(3, DomainSpec::strip(3, 0, 1, 0.1)), InvalidWidth);
    CHECK(surface_type_from_string("tilted-grim-reaper") == SurfaceType::tilted_grim_reaper);
    CHECK_THROWS_AS(surface_type_from_string("catenoid"), InvalidArgument);
}

TEST_CASE("grim reaper values", "[surfaces]") {
    CHECK(grim_reaper_value(pi, -3, pi / 4) == Approx(std::log(std::sqrt(2.0) / 2)));
    CHECK(grim_reaper_value(pi, 7, pi / 4) == Approx(-0.3466).margin(1e-4));
    CHECK(grim_reaper_tilt(std::sqrt(2.0) * pi) == Approx(1));
    DomainSpec d = DomainSpec::strip(pi, -1, 1, pi / 16);
    CHECK_THROWS_AS(grim_reaper_field(pi, d), InvalidDomain);
}

TEST_CASE("pitchfork boundary data", "[surfaces][boundary]") {
    auto bc = make_boundary_spec(SurfaceKind::pitchfork(pi), -12, 12);
    REQUIRE(bc.edge(Edge::bottom).size() == 2);
    CHECK(bc.edge(Edge::bottom)[0].value == SegValue::pos_inf);
    CHECK(bc.edge(Edge::bottom)[0].b == 0);
    CHECK(bc.edge(Edge::bottom)[1].value == SegValue::neg_inf);
    REQUIRE(bc.edge(Edge::top).size() == 1);
    CHECK(bc.edge(Edge::top)[0].value == SegValue::neg_inf);
    CHECK_THROWS_AS(make_boundary_spec(SurfaceKind::pitchfork(pi), -2, 12), TruncationTooTight);
}

TEST_CASE("helicoid boundary data", "[surfaces][boundary]") {
    auto bc = make_boundary_spec(SurfaceKind::helicoid(pi / 2, 1), -12, 13);
    REQUIRE(bc.edge(Edge::bottom).size() == 2);
    CHECK(bc.edge(Edge::bottom)[0].value == SegValue::pos_inf);
    CHECK(bc.edge(Edge::bottom)[1].value == SegValue::neg_inf);
    REQUIRE(bc.edge(Edge::top).size() == 2);
    CHECK(bc.edge(Edge::top)[0].value == SegValue::neg_inf);
    CHECK(bc.edge(Edge::top)[0].b == 1);
    CHECK(bc.edge(Edge::top)[1].value == SegValue::pos_inf);
    auto pts = bc.sign_change_points(DomainSpec::strip(pi / 2, -12, 13, 0.1));
    CHECK(pts.size() == 2);
}

TEST_CASE("trident boundary data over one period", "[surfaces][boundary]") {
    auto bc = make_boundary_spec(SurfaceKind::trident(1, 1.5), -1, 1);
    REQUIRE(bc.edge(Edge::bottom).size() == 2);
    CHECK(bc.edge(Edge::bottom)[0].value == SegValue::neg_inf);
    CHECK(bc.edge(Edge::bottom)[0].a == -1);
    CHECK(bc.edge(Edge::bottom)[0].b == 0);
    CHECK(bc.edge(Edge::bottom)[1].value == SegValue::pos_inf);
    CHECK(bc.edge(Edge::top)[0].value == SegValue::neg_inf);
    CHECK(bc.edge(Edge::left)[0].value == SegValue::periodic);
    CHECK_THROWS_AS(make_boundary_spec(SurfaceKind::trident(1, 1.5), -1, 2), InvalidDomain);
}

TEST_CASE("pitchfork piece converges", "[surfaces][slow]") {
    const auto& p = pitchfork(Seed::zero);
    CHECK(p.report.converged);
    CHECK(p.report.final_residual <= 1e-10);
    CHECK(p.report.interior_drift <= 1e-3);
    REQUIRE(p.bootstrap.has_value());
    CHECK(p.bootstrap->converged);
    // Drift shrinks with the cap.
    const auto& s = p.report.stage_drifts;
    for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k] < s[k - 1]);
}

TEST_CASE("pitchfork is unique up to vertical translation", "[surfaces][slow]") {
    auto [d, c] = quotient_distance(pitchfork(Seed::zero).field, pitchfork(Seed::capped_harmonic).field, pi);
    CHECK(d <= 1e-6);
}

TEST_CASE("quotient distance ignores vertical shifts", "[surfaces]") {
    const auto& u = pitchfork(Seed::zero).field;
    ScalarField v = u;
    for (auto& x : v.values) x += 3;
    auto [d, c] = quotient_distance(u, v, pi);
    CHECK(d <= 1e-12);
    CHECK(c == Approx(-3));
    std::vector<double> diff{1, 2, 5};
    auto [d2, c2] = quotient_distance(diff);
    CHECK(d2 == Approx(2));
    CHECK(c2 == Approx(3));
}

TEST_CASE("uniqueness probe needs two runs", "[surfaces]") {
    CHECK_THROWS_AS(uniqueness_probe(SurfaceKind::pitchfork(pi), {ProbeRun{}}), InvalidArgument);
}

TEST_CASE("uniqueness probe flags failed runs", "[surfaces]") {
    PieceConfig base;
    base.solver.max_newton_iters = 1;
    base.warmup_caps.clear();
    auto rep = uniqueness_probe(SurfaceKind::pitchfork(pi), {{Seed::zero, pi / 16, 12}, {Seed::capped_harmonic, pi / 16, 12}}, base);
    CHECK(rep.partial);
    CHECK(rep.pairs.empty());
    CHECK_FALSE(rep.runs[0].failure.empty());
}

TEST_CASE("helicoid axis calibration is pinned", "[surfaces][slow]") {
    const double w = pi / 2;
    PieceConfig c;
    c.h = w / 32;
    auto p = helicoid_axis_calibrate(w, c);
    REQUIRE(p.calibration.has_value());
    CHECK(p.calibration->converged);
    CHECK(std::abs(p.calibration->multiplier) <= 1e-8);
    CHECK(p.calibration->symmetry_residual <= 1e-3);
    CHECK(p.kind.x_hat == Approx(1.5071173).margin(1e-6));
    CHECK(p.report.converged);
}

TEST_CASE("scherk length calibration is pinned", "[surfaces][slow]") {
    PieceConfig c;
    c.h = 1.0 / 16;
    auto p = scherk_length_calibrate(pi / 2, 2, c);
    CHECK(p.calibration->converged);
    CHECK(p.kind.L == Approx(3.9084057).margin(1e-6));
}

TEST_CASE("trident width calibration is pinned", "[surfaces][slow]") {
    PieceConfig c;
    c.h = 1.0 / 32;
    auto p = trident_width_calibrate(1, c);
    CHECK(p.calibration->converged);
    CHECK(p.kind.b == Approx(1.7766979).margin(1e-6));
}

TEST_CASE("scherk piece never returns silently", "[surfaces]") {
    PieceConfig c;
    c.h = 1.0 / 8;
    try {
        auto p = construct_piece(SurfaceKind::scherk(3, 2, 5), c);
        CHECK(p.report.converged);
        CHECK(p.report.has_multiplier);
        CHECK(p.report.to_json().find("multiplier") != std::string::npos);
    } catch (const NonConvergence& e) {
        CHECK(e.residual() > 0);
    }
}

TEST_CASE("reflection about a vertical line", "[surfaces][mesh]") {
    auto v = reflect_about_line({1, 0.5, 2}, 0, 0);
    CHECK(v[0] == -1);
    CHECK(v[1] == -0.5);
    CHECK(v[2] == 2);
}

TEST_CASE("pitchfork reflection doubles the mesh", "[surfaces][mesh][slow]") {
    const auto& p = pitchfork(Seed::zero);
    auto base = graph_mesh(p.field, default_z_clip(p.report));
    auto m = schwarz_reflect(p);
    CHECK(m.patch_count() == 2);
    CHECK(m.triangles.size() == 2 * base.triangles.size());
    REQUIRE_FALSE(m.crease_lines.empty());
    CHECK(m.crease_lines[0].front()[0] == 0);
    CHECK(m.crease_lines[0].front()[1] == 0);
    auto s = sample_self_intersections(m, 200, 5);
    CHECK(s.intersections == 0);
}

TEST_CASE("unconverged pieces are not reflected", "[surfaces][mesh]") {
    PieceResult p;
    p.kind = SurfaceKind::pitchfork(pi);
    p.report.converged = false;
    CHECK_THROWS_AS(schwarz_reflect(p), RefuseUnconverged);
}

TEST_CASE("capped harmonic lift honours Dirichlet nodes", "[surfaces]") {
    const double w = pi;
    DomainSpec d = DomainSpec::strip(w, -4, 4, pi / 8);
    auto bc = make_boundary_spec(SurfaceKind::grim_reaper(w), -4, 4);
    auto u = capped_harmonic_lift(d, bc, 6);
    const Grid& g = *u.grid;
    for (int i = 0; i < g.nx; ++i) {
        CHECK(u(i, 0) == Approx(-6));
        CHECK(u(i, g.ny - 1) == Approx(-6));
    }
    // Maximum principle.
    for (double v : u.values) CHECK(v <= 1e-12);
}
