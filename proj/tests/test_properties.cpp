// Randomised invariants.
#include <catch_amalgamated.hpp>
#include <transol/geometry.hpp>
#include <transol/levelsets.hpp>
#include <transol/surfaces.hpp>
#include <transol/translator.hpp>

#include <random>

using namespace transol;
using Catch::Approx;

namespace {

struct Smooth {
    double a0, a1, a2, a3, k;
    double operator()(double x, double y) const {
        return a0 * x + a1 * y + a2 * std::sin(k * x - y) + a3 * std::cos(x + k * y);
    }
};

Smooth random_smooth(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1, 1);
    return {U(rng), U(rng), U(rng), U(rng), 1 + std::abs(U(rng))};
}

}  // namespace

TEST_CASE("residual is invariant under vertical translation", "[property]") {
    std::mt19937_64 rng(1);
    auto g = build_grid(DomainSpec::strip(1.5, -1, 1, 0.1));
    for (int n = 0; n < 20; ++n) {
        auto f = random_smooth(rng);
        const double c = 10 * std::uniform_real_distribution<double>(-1, 1)(rng);
        auto r1 = translator_residual(field_from(g, f));
        auto r2 = translator_residual(field_from(g, [&](double x, double y) { return f(x, y) + c; }));
        for (std::size_t k = 0; k < r1.values.size(); ++k) CHECK(r1.values[k] == Approx(r2.values[k]).margin(1e-8));
    }
}

TEST_CASE("residual commutes with the reflection x -> -x", "[property]") {
    std::mt19937_64 rng(2);
    auto g = build_grid(DomainSpec::strip(1, -1, 1, 0.125));
    for (int n = 0; n < 20; ++n) {
        auto f = random_smooth(rng);
        auto r1 = translator_residual(field_from(g, f));
        auto r2 = translator_residual(field_from(g, [&](double x, double y) { return f(-x, y); }));
        for (int j = 0; j < g->ny; ++j)
            for (int i = 0; i < g->nx; ++i) CHECK(r1(i, j) == Approx(r2(g->nx - 1 - i, j)).margin(1e-9));
    }
}

TEST_CASE("jacobian is linear in the direction", "[property]") {
    std::mt19937_64 rng(3);
    auto g = build_grid(DomainSpec::strip(1, -1, 1, 0.125));
    for (int n = 0; n < 20; ++n) {
        auto J = translator_jacobian(field_from(g, random_smooth(rng)));
        Eigen::VectorXd a = Eigen::VectorXd::Random(g->size()), b = Eigen::VectorXd::Random(g->size());
        const Eigen::VectorXd lhs = J * (2 * a - b), rhs = 2 * (J * a) - J * b;
        CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-10 * (1 + rhs.lpNorm<Eigen::Infinity>()));
    }
}

TEST_CASE("quotient distance is a pseudometric", "[property]") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int n = 0; n < 50; ++n) {
        std::vector<double> a(40), b(40), c(40), ab(40), ba(40), bc(40), ac(40);
        for (int k = 0; k < 40; ++k) {
            a[k] = U(rng);
            b[k] = U(rng);
            c[k] = U(rng);
            ab[k] = a[k] - b[k];
            ba[k] = b[k] - a[k];
            bc[k] = b[k] - c[k];
            ac[k] = a[k] - c[k];
        }
        const double dab = quotient_distance(ab).first;
        CHECK(dab == Approx(quotient_distance(ba).first));
        CHECK(quotient_distance(ac).first <= dab + quotient_distance(bc).first + 1e-12);
        // Exact optimum: half the spread.
        CHECK(dab == Approx(0.5 * (*std::max_element(ab.begin(), ab.end()) - *std::min_element(ab.begin(), ab.end()))));
    }
}

TEST_CASE("rotations compose and preserve the axis distance", "[property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int n = 0; n < 100; ++n) {
        const Vec3 v{U(rng), U(rng), U(rng)};
        const std::array<double, 2> p{U(rng), U(rng)};
        const double s = U(rng), t = U(rng);
        const Vec3 a = rotate_about(rotate_about(v, p, s), p, t), b = rotate_about(v, p, s + t);
        CHECK(norm(a - b) <= 1e-12);
        CHECK(std::hypot(a[0] - p[0], a[1] - p[1]) == Approx(std::hypot(v[0] - p[0], v[1] - p[1])));
        CHECK(a[2] == v[2]);
    }
}

TEST_CASE("delta bound decreases in R and increases in |y_a|", "[property]") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(0, 1);
    for (int n = 0; n < 100; ++n) {
        const double w = pi * (0.5 + U(rng)), ya = U(rng), R = (w + ya) * (1.01 + 5 * U(rng));
        CHECK(delta_bound({0, ya}, R * 1.1, w) < delta_bound({0, ya}, R, w));
        CHECK(delta_bound({0, ya + 0.01}, R, w) > delta_bound({0, ya}, R, w));
    }
}

TEST_CASE("normals are unit vectors pointing up", "[property]") {
    std::mt19937_64 rng(7);
    auto g = build_grid(DomainSpec::strip(1, -1, 1, 0.1));
    for (int n = 0; n < 10; ++n) {
        auto nf = gauss_map(field_from(g, random_smooth(rng)));
        for (std::size_t k = 0; k < nf.nu.size(); ++k) {
            if (!nf.valid[k]) continue;
            CHECK(norm(nf.nu[k]) == Approx(1));
            CHECK(nf.nu[k][2] > 0);
        }
    }
}

TEST_CASE("zero arcs of random linear fields stay near the true line", "[property]") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-1, 1);
    const double h = 1.0 / 32;
    for (int n = 0; n < 20; ++n) {
        const double a = U(rng), b = U(rng), c = 0.3 * U(rng);
        if (std::hypot(a, b) < 0.2) continue;
        auto v = field_from(rect_grid(-1, 1, -1, 1, h), [&](double x, double y) { return a * x + b * y + c; });
        auto cps = find_critical_points(v);
        CHECK(cps.empty());
        auto set = extract_zero_arcs(v, cps);
        CHECK(set.arcs.size() == 1);
        for (const auto& arc : set.arcs)
            for (const auto& p : arc.points) CHECK(std::abs(a * p[0] + b * p[1] + c) / std::hypot(a, b) <= 1e-9);
    }
}

TEST_CASE("mesh scaling scales mean curvature inversely", "[property]") {
    auto u = field_from(rect_grid(-1, 1, -1, 1, 0.05), [](double x, double y) { return 0.5 * (x * x + y * y); });
    auto m = graph_mesh(u);
    auto H1 = mean_curvature(m);
    auto H2 = mean_curvature(m.scaled(0.5));
    for (std::size_t k = 0; k < H1.size(); ++k) {
        if (std::isnan(H1[k])) continue;
        CHECK(H2[k] == Approx(2 * H1[k]).epsilon(1e-9));
    }
    // Paraboloid at the origin: kappa1 + kappa2 = 2.
    const auto g = u.grid;
    auto [fi, fj] = g->locate(0, 0);
    const int k = g->index(static_cast<int>(std::lround(fi)), static_cast<int>(std::lround(fj)));
    CHECK(std::abs(H1[k]) == Approx(2).epsilon(0.02));
}
