#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace transol {

// Square band matrix in LAPACK band storage with room for pivoting fill-in:
// entry (i, j) lives at ab[(kv + i - j) + j * ldab], kv = kl + ku.
template <class T>
class BandMatrix {
public:
    BandMatrix(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), kv_(kl + ku), ldab_(2 * kl + ku + 1),
          ab_(static_cast<std::size_t>(ldab_) * n, T(0)) {}

    int n() const { return n_; }
    int kl() const { return kl_; }
    int ku() const { return ku_; }

    bool in_band(int i, int j) const { return i - j <= kl_ && j - i <= ku_; }

    T& ref(int i, int j) { return ab_[static_cast<std::size_t>(kv_ + i - j) + static_cast<std::size_t>(j) * ldab_]; }
    T get(int i, int j) const {
        if (!in_band(i, j)) return T(0);
        return ab_[static_cast<std::size_t>(kv_ + i - j) + static_cast<std::size_t>(j) * ldab_];
    }
    void add(int i, int j, T v) {
        if (!in_band(i, j)) throw LinearSolverFailure("entry outside the band");
        ref(i, j) += v;
    }
    void zero() { std::fill(ab_.begin(), ab_.end(), T(0)); }

    // y = A x using the stored band (before factorisation).
    std::vector<T> multiply(const std::vector<T>& x) const {
        std::vector<T> y(n_, T(0));
        for (int j = 0; j < n_; ++j) {
            const int i0 = std::max(0, j - ku_), i1 = std::min(n_ - 1, j + kl_);
            for (int i = i0; i <= i1; ++i) y[i] += get(i, j) * x[j];
        }
        return y;
    }

    template <class>
    friend class BandedLU;

private:
    int n_, kl_, ku_, kv_, ldab_;
    std::vector<T> ab_;
};

// Partial-pivoting LU of a band matrix (the unblocked dgbtf2 scheme).
// Deterministic: fixed loop order, no threading.
template <class T>
class BandedLU {
public:
    explicit BandedLU(BandMatrix<T> a) : a_(std::move(a)), piv_(a_.n_) { factor(); }

    void solve(std::vector<T>& b) const {
        const int n = a_.n_, kl = a_.kl_, kv = a_.kv_;
        for (int j = 0; j < n; ++j) {
            const int p = piv_[j];
            if (p != j) std::swap(b[j], b[p]);
            const int km = std::min(kl, n - 1 - j);
            const T bj = b[j];
            if (bj != T(0))
                for (int i = 1; i <= km; ++i) b[j + i] -= at(j + i, j) * bj;
        }
        for (int j = n - 1; j >= 0; --j) {
            b[j] /= at(j, j);
            const T bj = b[j];
            if (bj == T(0)) continue;
            for (int i = std::max(0, j - kv); i < j; ++i) b[i] -= at(i, j) * bj;
        }
    }

private:
    T& at(int i, int j) { return a_.ref(i, j); }
    T at(int i, int j) const {
        return a_.ab_[static_cast<std::size_t>(a_.kv_ + i - j) + static_cast<std::size_t>(j) * a_.ldab_];
    }

    void factor() {
        const int n = a_.n_, kl = a_.kl_, ku = a_.ku_;
        int ju = 0;
        for (int j = 0; j < n; ++j) {
            const int km = std::min(kl, n - 1 - j);
            int jp = 0;
            T best = std::abs(at(j, j));
            for (int i = 1; i <= km; ++i) {
                const T v = std::abs(at(j + i, j));
                if (v > best) {
                    best = v;
                    jp = i;
                }
            }
            piv_[j] = j + jp;
            if (!(best > T(0)) || !std::isfinite(static_cast<double>(best)))
                throw LinearSolverFailure("zero or non-finite pivot in column " + std::to_string(j));
            ju = std::max(ju, std::min(j + ku + jp, n - 1));
            if (jp != 0)
                for (int c = j; c <= ju; ++c) std::swap(at(j, c), at(j + jp, c));
            const T inv = T(1) / at(j, j);
            for (int i = 1; i <= km; ++i) at(j + i, j) *= inv;
            for (int c = j + 1; c <= ju; ++c) {
                const T f = at(j, c);
                if (f == T(0)) continue;
                for (int i = 1; i <= km; ++i) at(j + i, c) -= at(j + i, j) * f;
            }
        }
    }

    BandMatrix<T> a_;
    std::vector<int> piv_;
};

}  // namespace transol
