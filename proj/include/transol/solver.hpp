#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "banded_lu.hpp"
#include "grid.hpp"

namespace transol {

enum class LinearSolverKind { banded_direct, stabilized_iterative };

// How +-INF edge data enters the discrete problem.
//  flux: the edge carries the limiting unit conormal flux of a graph that
//        blows up there, scaled by m(B) = sqrt(1 - e^{-2B}); rows sit half a
//        cell away from the edge.
//  capped_dirichlet: Dirichlet data +-B with a 2h ramp at sign changes.
enum class InfiniteEdges { flux, capped_dirichlet };

struct SolverConfig {
    double newton_tol = 1e-10;
    int max_newton_iters = 60;
    double damping = 0.5;
    double min_step = 1.0 / 32768.0;
    std::vector<double> cap_schedule{4, 6, 8, 10, 12};
    LinearSolverKind linear_solver = LinearSolverKind::banded_direct;
    std::vector<double> continuation_in_x;
    InfiniteEdges infinite_edges = InfiniteEdges::flux;
    double iterative_tol = 1e-13;
    bool verbose = false;
};

inline void validate(const SolverConfig& c) {
    if (!(c.newton_tol > 0) || c.max_newton_iters < 1 || !(c.damping > 0 && c.damping < 1) ||
        !(c.min_step > 0 && c.min_step < 1))
        throw InvalidArgument("solver tolerances must be positive");
    if (c.cap_schedule.empty()) throw InvalidArgument("cap schedule is empty");
    for (std::size_t k = 0; k < c.cap_schedule.size(); ++k) {
        if (!(c.cap_schedule[k] > 0)) throw InvalidArgument("caps must be positive");
        if (k > 0 && !(c.cap_schedule[k] > c.cap_schedule[k - 1]))
            throw InvalidArgument("cap schedule must be strictly increasing");
    }
}

struct SolveReport {
    bool converged = false;
    double final_residual = std::numeric_limits<double>::infinity();
    std::vector<int> newton_iters;
    std::vector<double> stage_caps;
    std::vector<double> stage_residuals;
    std::vector<double> stage_drifts;
    double interior_drift = 0;
    double multiplier = 0;
    bool has_multiplier = false;
    std::vector<double> residual_history;
    int nx = 0, ny = 0;
    double hx = 0, hy = 0;
    std::string failure;
    int failed_stage = -1;

    std::string to_json() const {
        std::ostringstream os;
        os << std::setprecision(17);
        auto arr = [&](const auto& v) {
            os << '[';
            for (std::size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << v[k];
            os << ']';
        };
        os << "{\"converged\": " << (converged ? "true" : "false") << ", \"final_residual\": ";
        if (std::isfinite(final_residual)) os << final_residual; else os << "null";
        os << ", \"newton_iters\": ";
        arr(newton_iters);
        os << ", \"stage_caps\": ";
        arr(stage_caps);
        os << ", \"stage_residuals\": ";
        arr(stage_residuals);
        os << ", \"stage_drifts\": ";
        arr(stage_drifts);
        os << ", \"interior_drift\": " << interior_drift;
        if (has_multiplier) os << ", \"multiplier\": " << multiplier;
        os << ", \"grid\": {\"nx\": " << nx << ", \"ny\": " << ny << ", \"hx\": " << hx << ", \"hy\": " << hy
           << "}";
        if (!failure.empty()) os << ", \"failure\": \"" << failure << "\", \"failed_stage\": " << failed_stage;
        os << "}";
        return os.str();
    }
};

inline double flux_scale(double B) { return std::sqrt(-std::expm1(-2 * B)); }

namespace detail {

enum class EndType { dirichlet, neumann, flux, periodic };

struct Axis {
    int n = 0;
    double h = 0;
    double lo = 0;
    double first = 0;
    EndType lo_end = EndType::dirichlet;
    EndType hi_end = EndType::dirichlet;
    double pos(int k) const { return first + k * h; }
};

inline Axis make_axis(double lo, double hi, double h, EndType a, EndType b) {
    Axis ax;
    ax.lo = lo;
    ax.lo_end = a;
    ax.hi_end = b;
    if (a == EndType::periodic) {
        ax.n = std::max(3, static_cast<int>(std::lround((hi - lo) / h)));
        ax.h = (hi - lo) / ax.n;
        ax.first = lo;
        return ax;
    }
    const double half = 0.5 * ((a == EndType::flux) + (b == EndType::flux));
    const double len = hi - lo;
    const int m = std::max(2, static_cast<int>(std::lround(len / h - half)));
    ax.h = len / (m + half);
    ax.n = m + 1;
    ax.first = lo + (a == EndType::flux ? 0.5 * ax.h : 0.0);
    return ax;
}

// Linear combination of at most 6 unknowns.
struct Comb {
    int n = 0;
    std::array<int, 6> node{};
    std::array<double, 6> c{};
    void add(int k, double v) {
        for (int q = 0; q < n; ++q)
            if (node[q] == k) {
                c[q] += v;
                return;
            }
        node[n] = k;
        c[n] = v;
        ++n;
    }
};

struct FaceValue {
    double G = 0;
    double iW = 0;
    Comb dG;
    Comb diW;
};

}  // namespace detail

// Discrete translator problem in divergence form, div(Du/W) + 1/W = 0, on
// the sheared grid. Each node equation balances face fluxes; the source is
// the mean of 1/W on the two faces across the width, taken as 0 on a face
// where the graph blows up.
class TranslatorProblem {
public:
    TranslatorProblem(const DomainSpec& d, const BoundarySpec& bc, const SolverConfig& cfg)
        : dom_(d), bc_(bc), cfg_(cfg) {
        validate(d);
        validate(bc, d);
        validate(cfg);
        c_ = d.cot_alpha();
        sin_ = d.kind == DomainKind::parallelogram ? std::sin(d.alpha) : 1.0;
        const std::array<detail::EndType, 4> ends{end_type(Edge::bottom), end_type(Edge::top),
                                                  end_type(Edge::left), end_type(Edge::right)};
        sx_ = detail::make_axis(d.x_min, d.x_max, d.h, ends[2], ends[3]);
        ty_ = detail::make_axis(d.y_lo, d.y_top(), d.h, ends[0], ends[1]);
        if (sx_.n < 3 || ty_.n < 3) throw GridTooCoarse("fewer than 3 nodes across the domain");
        check_corners();
        row_major_ = sx_.n < ty_.n;
        N_ = sx_.n * ty_.n;
        bw_ = (row_major_ ? sx_.n : ty_.n) + 1;
        kind_.assign(N_, 0);
        dval_.assign(N_, 0.0);
        for (int j = 0; j < ty_.n; ++j)
            for (int i = 0; i < sx_.n; ++i) kind_[id(i, j)] = classify(i, j);
        has_dirichlet_ = false;
        for (int k = 0; k < N_; ++k) has_dirichlet_ = has_dirichlet_ || kind_[k] == 1;
        if (!has_dirichlet_) {
            gauge_ = id(sx_.n / 2, ty_.n / 2);
            if (kind_[gauge_] != 0) throw InvalidBoundary("gauge node is not a flux node");
        }
        set_cap(cfg.cap_schedule.front());
    }

    int nx() const { return sx_.n; }
    int ny() const { return ty_.n; }
    int size() const { return N_; }
    bool uses_multiplier() const { return !has_dirichlet_; }
    const detail::Axis& x_axis() const { return sx_; }
    const detail::Axis& y_axis() const { return ty_; }
    int id(int i, int j) const { return row_major_ ? j * sx_.n + i : i * ty_.n + j; }
    bool periodic() const { return sx_.lo_end == detail::EndType::periodic; }
    double node_x(int i, int j) const { return sx_.pos(i) + c_ * ty_.pos(j); }
    double node_y(int j) const { return ty_.pos(j); }

    // Grid of the unknowns, as a window of the original domain.
    std::shared_ptr<const Grid> output_grid() const {
        // Periodic grids repeat the first column at x_max.
        const int nx_out = sx_.n + (periodic() ? 1 : 0);
        auto g = std::make_shared<Grid>();
        g->spec = dom_;
        g->spec.x_min = sx_.pos(0);
        g->spec.x_max = sx_.pos(nx_out - 1);
        g->spec.y_lo = ty_.pos(0);
        g->spec.y_hi = ty_.pos(ty_.n - 1);
        g->nx = nx_out;
        g->ny = ty_.n;
        g->hx = sx_.h;
        g->hy = ty_.h;
        g->s0 = sx_.pos(0);
        g->t0 = ty_.pos(0);
        g->cot = c_;
        return g;
    }

    void set_cap(double B) {
        B_ = B;
        m_ = flux_scale(B);
        const double ramp = 2 * std::max(sx_.h, ty_.h);
        for (int j = 0; j < ty_.n; ++j)
            for (int i = 0; i < sx_.n; ++i) {
                const int k = id(i, j);
                if (kind_[k] != 1) continue;
                const double x = node_x(i, j), y = node_y(j);
                double v = std::numeric_limits<double>::quiet_NaN();
                if (j == 0 && ty_.lo_end == detail::EndType::dirichlet)
                    v = capped_edge_value(bc_.edge(Edge::bottom), x, x, y, B, ramp);
                else if (j == ty_.n - 1 && ty_.hi_end == detail::EndType::dirichlet)
                    v = capped_edge_value(bc_.edge(Edge::top), x, x, y, B, ramp);
                if (std::isnan(v) && i == 0 && sx_.lo_end == detail::EndType::dirichlet)
                    v = capped_edge_value(bc_.edge(Edge::left), y, x, y, B, ramp);
                if (std::isnan(v) && i == sx_.n - 1 && sx_.hi_end == detail::EndType::dirichlet)
                    v = capped_edge_value(bc_.edge(Edge::right), y, x, y, B, ramp);
                if (std::isnan(v)) throw InvalidBoundary("no Dirichlet value at a boundary node");
                dval_[k] = v;
            }
        edge_sign_.assign(4, {});
        if (ty_.lo_end == detail::EndType::flux) edge_sign_[0] = face_signs(Edge::bottom);
        if (ty_.hi_end == detail::EndType::flux) edge_sign_[1] = face_signs(Edge::top);
        if (sx_.lo_end == detail::EndType::flux) edge_sign_[2] = face_signs(Edge::left);
        if (sx_.hi_end == detail::EndType::flux) edge_sign_[3] = face_signs(Edge::right);
    }
    double cap() const { return B_; }

    // Residual (and optionally Jacobian triplets). The unknown vector holds
    // the N node values followed by the multiplier when one is used.
    void evaluate(const std::vector<double>& u, std::vector<double>& r,
                  std::vector<Eigen::Triplet<double>>* jac) const {
        const int nx = sx_.n, ny = ty_.n;
        const double hs = sx_.h, ht = ty_.h;
        const double mu = has_dirichlet_ ? 0.0 : u[N_];
        r.assign(N_, 0.0);
        if (jac) jac->clear();

        const bool per = periodic();
        auto wrap = [&](int i) { return per ? (i + nx) % nx : i; };
        auto ds_comb = [&](int i, int j, detail::Comb& cb, double w) {
            if (per || (i > 0 && i < nx - 1)) {
                cb.add(id(wrap(i + 1), j), w / (2 * hs));
                cb.add(id(wrap(i - 1), j), -w / (2 * hs));
            } else if (i > 0 && i < nx - 1) {
                cb.add(id(i + 1, j), w / (2 * hs));
                cb.add(id(i - 1, j), -w / (2 * hs));
            } else if (i == 0) {
                cb.add(id(1, j), w / hs);
                cb.add(id(0, j), -w / hs);
            } else {
                cb.add(id(nx - 1, j), w / hs);
                cb.add(id(nx - 2, j), -w / hs);
            }
        };
        auto dt_comb = [&](int i, int j, detail::Comb& cb, double w) {
            if (j > 0 && j < ny - 1) {
                cb.add(id(i, j + 1), w / (2 * ht));
                cb.add(id(i, j - 1), -w / (2 * ht));
            } else if (j == 0) {
                cb.add(id(i, 1), w / ht);
                cb.add(id(i, 0), -w / ht);
            } else {
                cb.add(id(i, ny - 1), w / ht);
                cb.add(id(i, ny - 2), -w / ht);
            }
        };
        auto value = [&](const detail::Comb& cb) {
            double s = 0;
            for (int q = 0; q < cb.n; ++q) s += cb.c[q] * u[cb.node[q]];
            return s;
        };
        // Face flux from (a, b) = (u_s, u_t) combinations. s-faces need the
        // s-flux, t-faces the t-flux and 1/W.
        auto face = [&](const detail::Comb& A, const detail::Comb& Bc, bool sface) {
            detail::FaceValue f;
            const double a = value(A), b = value(Bc);
            const double ux = a, uy = b - c_ * a;
            const double W2 = 1 + ux * ux + uy * uy, W = std::sqrt(W2), W3 = W2 * W;
            const double F1 = ux / W, F2 = uy / W;
            const double d11 = (1 + uy * uy) / W3, d12 = -ux * uy / W3, d22 = (1 + ux * ux) / W3;
            double Ga, Gb;
            if (sface) {
                f.G = F1 - c_ * F2;
                const double gx = d11 - c_ * d12, gy = d12 - c_ * d22;
                Ga = gx - c_ * gy;
                Gb = gy;
            } else {
                f.G = F2;
                Ga = d12 - c_ * d22;
                Gb = d22;
            }
            f.iW = 1 / W;
            const double wx = -ux / W3, wy = -uy / W3;
            if (jac) {
                for (int q = 0; q < A.n; ++q) {
                    f.dG.add(A.node[q], Ga * A.c[q]);
                    f.diW.add(A.node[q], (wx - c_ * wy) * A.c[q]);
                }
                for (int q = 0; q < Bc.n; ++q) {
                    f.dG.add(Bc.node[q], Gb * Bc.c[q]);
                    f.diW.add(Bc.node[q], wy * Bc.c[q]);
                }
            }
            return f;
        };
        auto sface = [&](int i, int j) {  // between (i,j) and (i+1,j)
            detail::Comb A, Bc;
            A.add(id(wrap(i + 1), j), 1 / hs);
            A.add(id(i, j), -1 / hs);
            dt_comb(i, j, Bc, 0.5);
            dt_comb(wrap(i + 1), j, Bc, 0.5);
            return face(A, Bc, true);
        };
        auto tface = [&](int i, int j) {  // between (i,j) and (i,j+1)
            detail::Comb A, Bc;
            Bc.add(id(i, j + 1), 1 / ht);
            Bc.add(id(i, j), -1 / ht);
            ds_comb(i, j, A, 0.5);
            ds_comb(i, j + 1, A, 0.5);
            return face(A, Bc, false);
        };

        auto put = [&](int row, const detail::Comb& cb, double scale) {
            for (int q = 0; q < cb.n; ++q) jac->emplace_back(row, cb.node[q], scale * cb.c[q]);
        };

        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int k = id(i, j);
                if (kind_[k] == 1) {
                    r[k] = u[k] - dval_[k];
                    if (jac) jac->emplace_back(k, k, 1.0);
                    continue;
                }
                if (kind_[k] == 2 || kind_[k] == 3) {
                    int nb;
                    if (kind_[k] == 2) nb = i == 0 ? id(1, j) : id(nx - 2, j);
                    else nb = j == 0 ? id(i, 1) : id(i, ny - 2);
                    r[k] = u[k] - u[nb];
                    if (jac) {
                        jac->emplace_back(k, k, 1.0);
                        jac->emplace_back(k, nb, -1.0);
                    }
                    continue;
                }
                double R = 0;
                // s-direction fluxes
                if (per || i < nx - 1) {
                    auto f = sface(i, j);
                    R += f.G / hs;
                    if (jac) put(k, f.dG, 1 / hs);
                } else {
                    R += edge_sign_[3][j] * m_ / sin_ / hs;
                }
                if (per || i > 0) {
                    auto f = sface(wrap(i - 1), j);
                    R -= f.G / hs;
                    if (jac) put(k, f.dG, -1 / hs);
                } else {
                    R -= -edge_sign_[2][j] * m_ / sin_ / hs;
                }
                // t-direction fluxes and the source
                if (j < ny - 1) {
                    auto f = tface(i, j);
                    R += f.G / ht + 0.5 * f.iW;
                    if (jac) {
                        put(k, f.dG, 1 / ht);
                        put(k, f.diW, 0.5);
                    }
                } else {
                    R += edge_sign_[1][i] * m_ / ht;
                }
                if (j > 0) {
                    auto f = tface(i, j - 1);
                    R += -f.G / ht + 0.5 * f.iW;
                    if (jac) {
                        put(k, f.dG, -1 / ht);
                        put(k, f.diW, 0.5);
                    }
                } else {
                    R -= -edge_sign_[0][i] * m_ / ht;
                }
                r[k] = R + mu;
            }
    }

    // Sup norm of the residual over all equations.
    static double sup(const std::vector<double>& r) {
        double m = 0;
        for (double v : r) {
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    int bandwidth() const { return bw_; }
    int gauge_node() const { return gauge_; }
    bool is_flux_node(int k) const { return kind_[k] == 0; }

private:
    detail::EndType end_type(Edge e) const {
        bool inf = false, fin = false, neu = false, per = false;
        for (const auto& s : bc_.edge(e)) {
            inf = inf || s.infinite();
            fin = fin || s.value == SegValue::finite;
            neu = neu || s.value == SegValue::neumann;
            per = per || s.value == SegValue::periodic;
        }
        if (per) {
            const bool x_edge = e == Edge::left || e == Edge::right;
            const auto& other = bc_.edge(e == Edge::left ? Edge::right : Edge::left);
            if (!x_edge || inf || fin || neu || other.size() != 1 || other.front().value != SegValue::periodic)
                throw InvalidBoundary("periodic data must cover both x-edges");
            return detail::EndType::periodic;
        }
        if (neu && (inf || fin)) throw InvalidBoundary("Neumann data must cover a whole edge");
        if (neu) return detail::EndType::neumann;
        if (inf && fin) {
            if (cfg_.infinite_edges == InfiniteEdges::flux)
                throw InvalidBoundary(std::string("edge ") + to_string(e) +
                                      " mixes finite and infinite data; use capped Dirichlet edges");
            return detail::EndType::dirichlet;
        }
        if (inf && cfg_.infinite_edges == InfiniteEdges::flux) return detail::EndType::flux;
        return detail::EndType::dirichlet;
    }

    void check_corners() const {
        const double tol = 4 * dom_.h;
        const double c = c_;
        const std::array<std::array<double, 2>, 4> corners{{{dom_.x_min + c * dom_.y_lo, dom_.y_lo},
                                                              {dom_.x_max + c * dom_.y_lo, dom_.y_lo},
                                                              {dom_.x_min + c * dom_.y_top(), dom_.y_top()},
                                                              {dom_.x_max + c * dom_.y_top(), dom_.y_top()}}};
        for (const auto& p : bc_.sign_change_points(dom_))
            for (const auto& q : corners)
                if (std::hypot(p[0] - q[0], p[1] - q[1]) < tol)
                    throw InvalidBoundary("sign change closer than 4h to a corner");
    }

    // 0 flux-balance node, 1 Dirichlet, 2 Neumann across s, 3 Neumann across t.
    int classify(int i, int j) const {
        using detail::EndType;
        const bool s_per = sx_.lo_end == EndType::periodic;
        const bool s_lo = i == 0 && sx_.lo_end != EndType::flux && !s_per;
        const bool s_hi = i == sx_.n - 1 && sx_.hi_end != EndType::flux && !s_per;
        const bool t_lo = j == 0 && ty_.lo_end != EndType::flux;
        const bool t_hi = j == ty_.n - 1 && ty_.hi_end != EndType::flux;
        const bool sd = (s_lo && sx_.lo_end == EndType::dirichlet) || (s_hi && sx_.hi_end == EndType::dirichlet);
        const bool td = (t_lo && ty_.lo_end == EndType::dirichlet) || (t_hi && ty_.hi_end == EndType::dirichlet);
        if (sd || td) return 1;
        if (s_lo || s_hi) return 2;
        if (t_lo || t_hi) return 3;
        return 0;
    }

    // Mean sign of the infinite data over each boundary face of an edge.
    std::vector<double> face_signs(Edge e) const {
        const bool horiz = e == Edge::bottom || e == Edge::top;
        const detail::Axis& ax = horiz ? sx_ : ty_;
        const double shift = e == Edge::top ? c_ * dom_.w : 0.0;
        std::vector<double> out(ax.n, 0.0);
        const auto range = edge_range(dom_, e);
        const bool wraps = horiz && periodic();
        const double period = range[1] - range[0];
        auto overlap = [&](double a, double b) {
            double acc = 0;
            for (const auto& s : bc_.edge(e)) {
                const double lo = std::max(a, s.a), hi = std::min(b, s.b);
                if (hi > lo) acc += (hi - lo) * s.sign();
            }
            return acc;
        };
        for (int k = 0; k < ax.n; ++k) {
            double a = ax.pos(k) - 0.5 * ax.h + (horiz ? shift : 0.0);
            double b = ax.pos(k) + 0.5 * ax.h + (horiz ? shift : 0.0);
            if (wraps) {
                // Pieces of the face outside one period are folded back.
                double acc = overlap(std::max(a, range[0]), std::min(b, range[1]));
                if (a < range[0]) acc += overlap(a + period, range[1]);
                if (b > range[1]) acc += overlap(range[0], b - period);
                out[k] = acc / (b - a);
                continue;
            }
            a = std::max(a, range[0]);
            b = std::min(b, range[1]);
            out[k] = b > a ? overlap(a, b) / (b - a) : 0.0;
        }
        return out;
    }

    DomainSpec dom_;
    BoundarySpec bc_;
    SolverConfig cfg_;
    double c_ = 0, sin_ = 1;
    detail::Axis sx_, ty_;
    bool row_major_ = false;
    int N_ = 0, bw_ = 0, gauge_ = -1;
    bool has_dirichlet_ = true;
    std::vector<int> kind_;
    std::vector<double> dval_;
    std::vector<std::vector<double>> edge_sign_;
    double B_ = 0, m_ = 1;
};

namespace detail {

// One linear solve of J x = b for all right-hand sides, where J is given as
// triplets. Rows listed in `replace` are overwritten by identity rows.
class LinearSystem {
public:
    LinearSystem(int n, int bw, const std::vector<Eigen::Triplet<double>>& trip, int identity_row,
                 LinearSolverKind kind, double tol, bool general_direct = false)
        : n_(n), kind_(kind), tol_(tol) {
        if (kind == LinearSolverKind::banded_direct && general_direct) {
            std::vector<Eigen::Triplet<double>> t2;
            t2.reserve(trip.size() + 1);
            for (const auto& t : trip)
                if (t.row() != identity_row) t2.push_back(t);
            if (identity_row >= 0) t2.emplace_back(identity_row, identity_row, 1.0);
            A_.resize(n, n);
            A_.setFromTriplets(t2.begin(), t2.end());
            A_.makeCompressed();
            slu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            slu_->compute(A_);
            if (slu_->info() != Eigen::Success) throw LinearSolverFailure("sparse LU failed: singular matrix");
        } else if (kind == LinearSolverKind::banded_direct) {
            BandMatrix<double> A(n, bw, bw);
            for (const auto& t : trip)
                if (t.row() != identity_row) A.add(t.row(), t.col(), t.value());
            if (identity_row >= 0) A.add(identity_row, identity_row, 1.0);
            lu_.emplace(std::move(A));
        } else {
            std::vector<Eigen::Triplet<double>> t2;
            t2.reserve(trip.size() + 1);
            for (const auto& t : trip)
                if (t.row() != identity_row) t2.push_back(t);
            if (identity_row >= 0) t2.emplace_back(identity_row, identity_row, 1.0);
            A_.resize(n, n);
            A_.setFromTriplets(t2.begin(), t2.end());
            it_.setTolerance(tol);
            it_.setMaxIterations(4 * n);
            it_.preconditioner().setDroptol(1e-6);
            it_.preconditioner().setFillfactor(20);
            it_.compute(A_);
            if (it_.info() != Eigen::Success) throw LinearSolverFailure("ILUT preconditioner failed");
        }
    }

    void solve(std::vector<double>& b) const {
        if (lu_) {
            lu_->solve(b);
        } else if (slu_) {
            Eigen::Map<Eigen::VectorXd> rhs(b.data(), n_);
            Eigen::VectorXd x = slu_->solve(rhs);
            rhs = x;
        } else {
            Eigen::Map<Eigen::VectorXd> rhs(b.data(), n_);
            Eigen::VectorXd x = it_.solve(rhs);
            if (it_.info() != Eigen::Success || !x.allFinite())
                throw LinearSolverFailure("BiCGSTAB did not converge");
            rhs = x;
        }
        for (double v : b)
            if (!std::isfinite(v)) throw LinearSolverFailure("non-finite solution of the Newton system");
    }

private:
    int n_;
    LinearSolverKind kind_;
    double tol_;
    std::optional<BandedLU<double>> lu_;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> slu_;
    Eigen::SparseMatrix<double> A_;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it_;
};

}  // namespace detail

struct NewtonResult {
    int iters = 0;
    double residual = 0;
    std::vector<double> history;
};

// Damped Newton with backtracking on the residual sup norm. With a
// multiplier the gauge row is replaced by du = 0 and the bordered system is
// closed by block elimination.
inline NewtonResult newton_solve(const TranslatorProblem& P, std::vector<double>& u, const SolverConfig& cfg,
                                 int stage) {
    const int N = P.size();
    const bool border = P.uses_multiplier();
    const int g = P.gauge_node();
    std::vector<double> r, rt;
    std::vector<Eigen::Triplet<double>> trip;
    NewtonResult out;
    for (int it = 0;; ++it) {
        P.evaluate(u, r, &trip);
        const double rn = TranslatorProblem::sup(r);
        out.history.push_back(rn);
        out.residual = rn;
        out.iters = it;
        if (cfg.verbose) std::fprintf(stderr, "  stage %d it %d residual %.3e\n", stage, it, rn);
        if (rn <= cfg.newton_tol) return out;
        if (!std::isfinite(rn)) throw NonConvergence("residual is not finite", stage, rn);
        if (it >= cfg.max_newton_iters)
            throw NonConvergence("Newton iteration limit reached", stage, rn);

        std::vector<double> du(N), step(u.size());
        detail::LinearSystem sys(N, P.bandwidth(), trip, border ? g : -1, cfg.linear_solver,
                                 cfg.iterative_tol, P.periodic());
        for (int k = 0; k < N; ++k) du[k] = -r[k];
        if (!border) {
            sys.solve(du);
            step = du;
        } else {
            // J' z1 = -r', J' z2 = e' with row g replaced by the gauge.
            du[g] = 0;
            std::vector<double> z2(N, 0.0);
            for (int k = 0; k < N; ++k) z2[k] = (P.is_flux_node(k) && k != g) ? 1.0 : 0.0;
            sys.solve(du);
            sys.solve(z2);
            double jz1 = 0, jz2 = 0;
            for (const auto& t : trip)
                if (t.row() == g) {
                    jz1 += t.value() * du[t.col()];
                    jz2 += t.value() * z2[t.col()];
                }
            const double den = 1 - jz2;
            if (std::abs(den) < 1e-300) throw LinearSolverFailure("singular bordered system");
            const double dmu = (-r[g] - jz1) / den;
            for (int k = 0; k < N; ++k) step[k] = du[k] - dmu * z2[k];
            step[N] = dmu;
        }

        double t = 1.0;
        bool accepted = false;
        std::vector<double> trial(u.size());
        while (t >= cfg.min_step) {
            for (std::size_t k = 0; k < u.size(); ++k) trial[k] = u[k] + t * step[k];
            P.evaluate(trial, rt, nullptr);
            const double rn2 = TranslatorProblem::sup(rt);
            if (std::isfinite(rn2) && rn2 < rn * (1 - 1e-4 * t)) {
                accepted = true;
                break;
            }
            t *= cfg.damping;
        }
        if (!accepted) throw NonConvergence("line search stagnated", stage, rn);
        u.swap(trial);
    }
}

inline ScalarField unpack(const TranslatorProblem& P, const std::vector<double>& u) {
    ScalarField f(P.output_grid());
    for (int j = 0; j < P.ny(); ++j) {
        for (int i = 0; i < P.nx(); ++i) f(i, j) = u[P.id(i, j)];
        if (P.periodic()) f(P.nx(), j) = u[P.id(0, j)];
    }
    return f;
}

inline std::vector<double> pack_initial(const TranslatorProblem& P, const std::optional<ScalarField>& init) {
    std::vector<double> u(P.size() + (P.uses_multiplier() ? 1 : 0), 0.0);
    if (!init) return u;
    for (int j = 0; j < P.ny(); ++j)
        for (int i = 0; i < P.nx(); ++i) {
            const double x = P.node_x(i, j), y = P.node_y(j);
            auto v = init->sample(x, y);
            if (!v) {
                // Clamp into the initial field's grid.
                const Grid& g = *init->grid;
                auto [fi, fj] = g.locate(x, y);
                const int ii = std::clamp(static_cast<int>(std::lround(fi)), 0, g.nx - 1);
                const int jj = std::clamp(static_cast<int>(std::lround(fj)), 0, g.ny - 1);
                v = (*init)(ii, jj);
            }
            u[P.id(i, j)] = *v;
        }
    return u;
}

namespace detail {

inline BoundarySpec clip_right(const BoundarySpec& bc, const DomainSpec& d, double x_max) {
    BoundarySpec out = bc;
    const double c = d.cot_alpha();
    for (Edge e : {Edge::bottom, Edge::top}) {
        const double hi = x_max + (e == Edge::top ? c * d.w : 0.0);
        std::vector<Segment> segs;
        for (auto s : bc.edge(e)) {
            if (s.a >= hi) break;
            s.b = std::min(s.b, hi);
            segs.push_back(s);
        }
        out.edge(e) = segs;
    }
    return out;
}

}  // namespace detail

// Solves the translator boundary problem, continuing in the cap B (and in
// x_max when requested). Failures are thrown after the report is filled.
inline std::pair<ScalarField, SolveReport> solve_bvp(const DomainSpec& domain, const BoundarySpec& bc,
                                                     const SolverConfig& cfg,
                                                     const std::optional<ScalarField>& init = std::nullopt,
                                                     SolveReport* report_out = nullptr) {
    validate(cfg);
    SolveReport rep;
    std::optional<ScalarField> guess = init;

    // Optional continuation through shorter windows.
    for (double xm : cfg.continuation_in_x) {
        if (!(xm > domain.x_min) || !(xm < domain.x_max)) continue;
        DomainSpec d = domain;
        d.x_max = xm;
        SolverConfig c2 = cfg;
        c2.continuation_in_x.clear();
        auto [f, r] = solve_bvp(d, detail::clip_right(bc, domain, xm), c2, guess, report_out);
        guess = f;
    }

    TranslatorProblem P(domain, bc, cfg);
    rep.nx = P.nx();
    rep.ny = P.ny();
    rep.hx = P.x_axis().h;
    rep.hy = P.y_axis().h;
    rep.has_multiplier = P.uses_multiplier();
    std::vector<double> u = pack_initial(P, guess);

    bool has_inf = false;
    for (int e = 0; e < 4; ++e)
        for (const auto& s : bc.edges[e]) has_inf = has_inf || s.infinite();
    std::vector<double> caps = has_inf ? cfg.cap_schedule : std::vector<double>{cfg.cap_schedule.back()};

    // Core window: middle half in x.
    const double xc = 0.5 * (domain.x_min + domain.x_max), half = 0.25 * (domain.x_max - domain.x_min);
    std::vector<double> prev;
    for (std::size_t s = 0; s < caps.size(); ++s) {
        P.set_cap(caps[s]);
        NewtonResult nr;
        try {
            nr = newton_solve(P, u, cfg, static_cast<int>(s));
        } catch (const NonConvergence& e) {
            rep.converged = false;
            rep.final_residual = e.residual();
            rep.failure = e.what();
            rep.failed_stage = static_cast<int>(s);
            if (report_out) *report_out = rep;
            throw;
        } catch (const LinearSolverFailure& e) {
            rep.converged = false;
            rep.failure = e.what();
            rep.failed_stage = static_cast<int>(s);
            if (report_out) *report_out = rep;
            throw;
        }
        rep.newton_iters.push_back(nr.iters);
        rep.stage_caps.push_back(caps[s]);
        rep.stage_residuals.push_back(nr.residual);
        rep.residual_history = nr.history;
        if (!prev.empty()) {
            double d = 0;
            for (int j = 0; j < P.ny(); ++j)
                for (int i = 0; i < P.nx(); ++i)
                    if (std::abs(P.node_x(i, j) - xc) <= half) {
                        const int k = P.id(i, j);
                        d = std::max(d, std::abs(u[k] - prev[k]));
                    }
            rep.stage_drifts.push_back(d);
            rep.interior_drift = d;
        }
        prev.assign(u.begin(), u.begin() + P.size());
    }
    rep.converged = true;
    rep.final_residual = rep.stage_residuals.back();
    if (P.uses_multiplier()) rep.multiplier = u[P.size()];
    if (report_out) *report_out = rep;
    return {unpack(P, u), rep};
}

}  // namespace transol
