#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "twofold/core.hpp"

namespace twofold {

namespace banded {

/// Band matrix with kl sub- and ku superdiagonals, LU-factorised in place
/// with partial pivoting (fill widens the upper band to kl + ku).
class Matrix {
  public:
    Matrix(std::size_t n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1), a_(width_ * n, 0.0) {}

    void clear() { std::fill(a_.begin(), a_.end(), 0.0); }

    double& at(std::size_t i, std::size_t j) {
        // stored band offset: i - j + (kl + ku), valid in [0, 2kl+ku]
        return a_[(i - j + kl_ + ku_) * n_ + j];
    }

    /// Solves A x = b in place; A is destroyed. Throws on a vanishing pivot.
    void solve(std::vector<double>& b) {
        const int band_lo = kl_, band_hi = kl_ + ku_;
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t pmax = k;
            double vmax = std::abs(at(k, k));
            std::size_t last = std::min(n_ - 1, k + band_lo);
            for (std::size_t i = k + 1; i <= last; ++i) {
                double v = std::abs(at(i, k));
                if (v > vmax) {
                    vmax = v;
                    pmax = i;
                }
            }
            if (!(vmax > 0.0)) throw std::runtime_error("banded solve: singular matrix");
            std::size_t jend = std::min(n_ - 1, k + band_hi);
            if (pmax != k) {
                for (std::size_t j = k; j <= jend; ++j) std::swap(at(k, j), at(pmax, j));
                std::swap(b[k], b[pmax]);
            }
            double piv = at(k, k);
            for (std::size_t i = k + 1; i <= last; ++i) {
                double m = at(i, k) / piv;
                if (m == 0.0) continue;
                for (std::size_t j = k + 1; j <= jend; ++j) at(i, j) -= m * at(k, j);
                b[i] -= m * b[k];
                at(i, k) = 0.0;
            }
        }
        for (std::size_t k = n_; k-- > 0;) {
            double s = b[k];
            std::size_t jend = std::min(n_ - 1, k + band_hi);
            for (std::size_t j = k + 1; j <= jend; ++j) s -= at(k, j) * b[j];
            b[k] = s / at(k, k);
        }
    }

  private:
    std::size_t n_;
    int kl_, ku_, width_;
    std::vector<double> a_;
};

}  // namespace banded

/// Discretisation of the escape-probability problem: u0 in [-u_max, u_max]
/// with a node exactly at u0 = 0, marched in the pseudo-time r from r_min
/// to r_max.
struct PdeGrid {
    double u_max = 12.0;
    double r_min = -8.0;
    double r_max = 12.0;
    double du = 0.01;
    double dr = 0.005;

    static PdeGrid defaults() { return PdeGrid{}; }

    std::size_t nodes() const { return 2 * half_nodes() + 1; }
    std::size_t interface_index() const { return half_nodes(); }
    std::size_t r_steps() const { return static_cast<std::size_t>(std::llround((r_max - r_min) / dr)); }
    double u(std::size_t i) const { return (static_cast<double>(i) - static_cast<double>(half_nodes())) * du; }
    double r(std::size_t j) const { return r_min + static_cast<double>(j) * dr; }

    void validate() const {
        if (!(du > 0.0) || !(dr > 0.0)) throw std::invalid_argument("PdeGrid: du, dr must be positive");
        if (!(r_min < 0.0) || !(0.0 < r_max)) throw std::invalid_argument("PdeGrid: need r_min < 0 < r_max");
        double m = u_max / du;
        if (std::abs(m - std::llround(m)) > 1e-9 * std::max(1.0, m))
            throw std::invalid_argument("PdeGrid: u_max must be an integer multiple of du");
        double s = (r_max - r_min) / dr;
        if (std::abs(s - std::llround(s)) > 1e-9 * std::max(1.0, s))
            throw std::invalid_argument("PdeGrid: r range must be an integer multiple of dr");
    }

  private:
    std::size_t half_nodes() const { return static_cast<std::size_t>(std::llround(u_max / du)); }
};

/// How the r = r_min row approximates the r -> -infinity condition. The
/// quasi-steady profile is the step function sharpened into the inward
/// advection-diffusion layer the equation itself forms at large negative r;
/// it removes the O(1) interface transient a raw step produces over the
/// first few rows.
enum class PdeInitialProfile { QuasiSteadyLayer, Step };

struct PdeOptions {
    PdeInitialProfile init = PdeInitialProfile::QuasiSteadyLayer;
    double monotone_tol = 1e-6;  ///< allowed Q decrease between neighbours
    double bounds_tol = 1e-8;    ///< allowed excursion outside [0, 1]
    double tail_tol = 1e-3;      ///< |Q(0,r_max) - Q(0,0.9 r_max)| for "converged"
};

/// Solution field Q(u0_i, r_j), rows j = 0 (initial) .. r_steps().
struct QField {
    PdeGrid grid;
    TwoFoldParams params;
    std::vector<double> values;          ///< row-major, nodes() per row
    std::vector<double> interface_trace; ///< Q(0, r_j) for every row
    double max_monotone_violation = 0.0;
    double max_bounds_violation = 0.0;

    double q(std::size_t i, std::size_t j) const { return values[j * grid.nodes() + i]; }
    const double* row(std::size_t j) const { return values.data() + j * grid.nodes(); }
};

namespace pde_detail {

inline double r_coth(double r) {
    double a = std::abs(r);
    if (a < 1e-4) return 1.0 + r * r / 3.0 - r * r * r * r / 45.0;
    if (a > 350.0) return a;
    return r / std::tanh(r);
}

inline void initial_row(const TwoFoldParams& p, const PdeGrid& g, PdeInitialProfile init,
                        std::vector<double>& q) {
    const std::size_t n = g.nodes(), I = g.interface_index();
    q.resize(n);
    if (init == PdeInitialProfile::Step) {
        for (std::size_t i = 0; i < n; ++i) q[i] = g.u(i) >= 0.0 ? 1.0 : 0.0;
        return;
    }
    const double q0 = 1.0 / (1.0 + p.A);
    const double k = 2.0 * std::abs(g.r_min);
    for (std::size_t i = 0; i <= I; ++i) q[i] = q0 * std::exp(p.A * k * g.u(i));
    for (std::size_t i = I; i < n; ++i) q[i] = 1.0 - (1.0 - q0) * std::exp(-k * g.u(i));
    q[I] = q0;
    q[0] = 0.0;
    q[n - 1] = 1.0;
}

/// Backward-Euler march of dQ/dr = a(u,r) dQ/du + D(u) d2Q/du2 with
/// exponentially fitted advection (exact for locally frozen coefficients,
/// monotone at any cell Peclet number). The interface node u = 0 carries the
/// C1 matching row: equal three-point one-sided derivatives from both sides.
/// row_cb(j, q) is invoked for every row including the initial one (j = 0).
template <typename RowCb>
void march(const TwoFoldParams& p, const PdeGrid& g, const PdeOptions& opts, RowCb&& row_cb,
           double* max_monotone = nullptr, double* max_bounds = nullptr) {
    g.validate();
    const std::size_t n = g.nodes(), I = g.interface_index(), steps = g.r_steps();
    std::vector<double> q;
    initial_row(p, g, opts.init, q);
    row_cb(std::size_t{0}, q);

    banded::Matrix mat(n, 2, 2);
    std::vector<double> rhs(n);
    const double Dl = 1.0 / (2.0 * p.B), Drt = 0.5;
    const double du = g.du, dr = g.dr;
    double worst_mono = 0.0, worst_bounds = 0.0;

    for (std::size_t m = 1; m <= steps; ++m) {
        const double r = g.r(m);
        mat.clear();
        mat.at(0, 0) = 1.0;
        rhs[0] = 0.0;
        mat.at(n - 1, n - 1) = 1.0;
        rhs[n - 1] = 1.0;
        mat.at(I, I - 2) = 1.0;
        mat.at(I, I - 1) = -4.0;
        mat.at(I, I) = 6.0;
        mat.at(I, I + 1) = -4.0;
        mat.at(I, I + 2) = 1.0;
        rhs[I] = 0.0;
        for (std::size_t i = 1; i < n - 1; ++i) {
            if (i == I) continue;
            double a, D;
            if (g.u(i) < 0.0) {
                a = (p.A / p.B) * r;
                D = Dl;
            } else {
                a = -r;
                D = Drt;
            }
            double pe = a * du / (2.0 * D);
            double Df = D * r_coth(pe);
            double adv = a / (2.0 * du);
            double dif = Df / (du * du);
            mat.at(i, i - 1) = -dr * (dif - adv);
            mat.at(i, i) = 1.0 + 2.0 * dr * dif;
            mat.at(i, i + 1) = -dr * (dif + adv);
            rhs[i] = q[i];
        }
        mat.solve(rhs);
        q.swap(rhs);
        q[0] = 0.0;  // pivoting can leave O(1e-17) residue on the Dirichlet rows
        q[n - 1] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double b = std::max(-q[i], q[i] - 1.0);
            if (b > worst_bounds) worst_bounds = b;
            if (i + 1 < n) {
                double v = q[i] - q[i + 1];
                if (v > worst_mono) worst_mono = v;
            }
        }
        if (worst_mono > opts.monotone_tol)
            throw std::runtime_error("solve_Q_pde: monotonicity violated beyond tolerance");
        if (worst_bounds > opts.bounds_tol)
            throw std::runtime_error("solve_Q_pde: solution left [0,1] beyond tolerance");
        row_cb(m, q);
    }
    if (max_monotone) *max_monotone = worst_mono;
    if (max_bounds) *max_bounds = worst_bounds;
}

}  // namespace pde_detail

/// Full field solve; rows are stored for every r including the initial one.
inline QField solve_Q_pde(const TwoFoldParams& p, const PdeGrid& grid,
                          const PdeOptions& opts = {}) {
    QField f{grid, p, {}, {}, 0.0, 0.0};
    const std::size_t n = grid.nodes(), I = grid.interface_index();
    f.values.reserve((grid.r_steps() + 1) * n);
    f.interface_trace.reserve(grid.r_steps() + 1);
    pde_detail::march(
        p, grid, opts,
        [&](std::size_t, const std::vector<double>& q) {
            f.values.insert(f.values.end(), q.begin(), q.end());
            f.interface_trace.push_back(q[I]);
        },
        &f.max_monotone_violation, &f.max_bounds_violation);
    return f;
}

/// rho_no = Q(0, r_max), with a tail-flatness diagnostic comparing against
/// Q(0, 0.9 r_max). Stores only the interface trace.
inline RhoResult rho_noise_pde(const TwoFoldParams& p, const PdeGrid& grid,
                               const PdeOptions& opts = {}) {
    const std::size_t I = grid.interface_index();
    std::vector<double> trace;
    trace.reserve(grid.r_steps() + 1);
    pde_detail::march(p, grid, opts, [&](std::size_t, const std::vector<double>& q) {
        trace.push_back(q[I]);
    });
    const std::size_t j_end = grid.r_steps();
    const double r9 = 0.9 * grid.r_max;
    std::size_t j9 = static_cast<std::size_t>(std::llround((r9 - grid.r_min) / grid.dr));
    j9 = std::min(j9, j_end);
    double tail = std::abs(trace[j_end] - trace[j9]);
    RhoResult res;
    res.value = trace[j_end];
    res.method = Method::NoisePde;
    res.converged = tail < opts.tail_tol;
    res.diagnostic = "tail_drift=" + std::to_string(tail);
    return res;
}

}  // namespace twofold
