#pragma once

#include <Eigen/Sparse>
#include <array>
#include <vector>

#include "grid.hpp"

namespace transol {

// Translator operator in non-divergence form:
//   F = (1+u_y^2) u_xx - 2 u_x u_y u_xy + (1+u_x^2) u_yy + 1 + u_x^2 + u_y^2.
inline double translator_operator(const Derivatives& d) {
    return (1 + d.uy * d.uy) * d.uxx - 2 * d.ux * d.uy * d.uxy + (1 + d.ux * d.ux) * d.uyy + 1 +
           d.ux * d.ux + d.uy * d.uy;
}

// Partials of F with respect to (u_x, u_y, u_xx, u_xy, u_yy).
inline std::array<double, 5> translator_partials(const Derivatives& d) {
    return {-2 * d.uy * d.uxy + 2 * d.ux * d.uyy + 2 * d.ux,
            2 * d.uy * d.uxx - 2 * d.ux * d.uxy + 2 * d.uy,
            1 + d.uy * d.uy,
            -2 * d.ux * d.uy,
            1 + d.ux * d.ux};
}

// Residual on interior nodes; every other node reads 0 and keeps its mask.
inline ScalarField translator_residual(const ScalarField& u) {
    ScalarField r(u.grid, 0.0);
    r.mask = u.mask;
    const Grid& g = *u.grid;
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (!u.is_interior(i, j)) continue;
            bool ok = true;
            for (int dj = -1; dj <= 1 && ok; ++dj)
                for (int di = -1; di <= 1 && ok; ++di) ok = u.usable(i + di, j + dj);
            if (ok) r(i, j) = translator_operator(fd_derivatives(u, i, j));
        }
    return r;
}

inline double interior_sup(const ScalarField& r) {
    double m = 0;
    const Grid& g = *r.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (r.is_interior(i, j)) m = std::max(m, std::abs(r(i, j)));
    return m;
}

// dF/du as a 9-point sparse matrix over all nodes; rows of non-interior
// nodes are empty.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> translator_jacobian(const ScalarField& u) {
    const Grid& g = *u.grid;
    const auto st = derivative_stencils(g);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(g.size()) * 9);
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (!u.is_interior(i, j)) continue;
            bool ok = true;
            for (int dj = -1; dj <= 1 && ok; ++dj)
                for (int di = -1; di <= 1 && ok; ++di) ok = u.usable(i + di, j + dj);
            if (!ok) continue;
            const auto p = translator_partials(fd_derivatives(u, i, j));
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    double v = 0;
                    for (int k = 0; k < 5; ++k) v += p[k] * st.w[k][a][b];
                    if (v != 0) trip.emplace_back(g.index(i, j), g.index(i + b - 1, j + a - 1), v);
                }
        }
    Eigen::SparseMatrix<double, Eigen::RowMajor> J(g.size(), g.size());
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

}  // namespace transol
