#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "twofold/core.hpp"
#include "twofold/hysteresis.hpp"
#include "twofold/ode.hpp"
#include "twofold/parallel.hpp"
#include "twofold/rng.hpp"

namespace twofold {

/// Switching points of the delayed system's upper critical orbit. Entry k
/// holds the k-th switching point (x_k, z_k), the return time T_k to x = 0
/// and the gap S_k to the next switching point.
struct SwitchPointSequence {
    double eps = 0.0;
    double z0 = 0.0;
    struct Entry {
        double x, z, S, T;
    };
    std::vector<Entry> entries;
    std::size_t ceased_at = 0;  ///< first k whose square root turned negative; 0 if none
};

struct TimeDelayCritical {
    double y1;        ///< critical start below which the left-dipping orbit heads left
    double y1_tilde;  ///< same for the orbit that initially heads right
    double eps;
    std::size_t depth;  ///< alternations verified at y1
};

namespace td_detail {

// Everything below runs in delay units: xi = x/eps^2, zeta = z/eps,
// s = S/eps, tau = T/eps. The recursion is then parameter-free in eps.
struct Classify {
    std::size_t fail_k;  // 0 when the sequence alternated through the budget
    int side;            // +1 orbit escapes right, -1 left, 0 undecided
};

inline Classify classify_scaled(double A, double B, double zeta0, std::size_t k_budget) {
    double xi = zeta0 + 0.5;
    if (xi <= 0.0) return {1, -1};
    double zeta = zeta0 + 1.0;
    double s = -2.0 * zeta0;
    double x_prev = xi;
    for (std::size_t k = 2; k <= k_budget; ++k) {
        double tau, xi_next, zeta_next;
        if (k % 2 == 0) {  // left half-system segment
            double arg = zeta * zeta + (2.0 * B / A) * xi;
            if (arg < 0.0) return {k, x_prev > 0.0 ? 1 : -1};
            tau = (std::sqrt(arg) - zeta) / B;
            xi_next = xi - A * zeta * s - 0.5 * A * B * s * s;
            zeta_next = zeta + B * s;
        } else {  // right half-system segment
            double arg = zeta * zeta - 2.0 * xi;
            if (arg < 0.0) return {k, x_prev > 0.0 ? 1 : -1};
            tau = std::sqrt(arg) - zeta;
            xi_next = xi + zeta * s + 0.5 * s * s;
            zeta_next = zeta + s;
        }
        int want = (k % 2 == 1) ? 1 : -1;
        int got = xi_next > 0.0 ? 1 : (xi_next < 0.0 ? -1 : 0);
        if (got == 0) got = x_prev > 0.0 ? 1 : -1;  // exact tie: side of the previous point
        if (got != want) return {k, got};
        x_prev = xi_next;
        xi = xi_next;
        zeta = zeta_next;
        s = 1.0 - s + tau;
    }
    return {0, 0};
}

inline double find_eta1(double A, double B, std::size_t depth, double c) {
    const std::size_t k_budget = std::max<std::size_t>(depth, 2000);
    double lo = -c, hi = 0.0;
    for (int retry = 0;; ++retry) {
        int s_lo = classify_scaled(A, B, lo, k_budget).side;
        int s_hi = classify_scaled(A, B, hi, k_budget).side;
        if (s_lo == -1 && s_hi == 1) break;
        if (retry >= 3)
            throw std::runtime_error("find_y1: bracket endpoints classify identically");
        lo *= 2.0;
    }
    int prev_side = 1;
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        int side = classify_scaled(A, B, mid, k_budget).side;
        if (side == 0) side = prev_side;
        prev_side = side;
        if (side > 0)
            hi = mid;
        else
            lo = mid;
    }
    double eta = 0.5 * (lo + hi);
    if (classify_scaled(A, B, eta, depth).fail_k != 0)
        throw std::runtime_error("find_y1: result does not alternate through depth");
    return -eta;  // eta1 = |y1|/eps
}

}  // namespace td_detail

/// Forward switching points of the orbit that starts at (0, z0), lies right
/// of x = 0 over the delay interval before t = 0, and therefore follows the
/// right half-system until t = eps. Stops early (ceased_at set) once a square
/// root argument turns negative, i.e. the orbit stopped switching.
inline SwitchPointSequence forward_switch_sequence(const TwoFoldParams& p, double z0, double eps,
                                                   std::size_t K, double c = 10.0) {
    if (!(eps > 0.0)) throw std::invalid_argument("forward_switch_sequence: eps must be positive");
    if (K < 2) throw std::invalid_argument("forward_switch_sequence: K must be >= 2");
    if (!(z0 < 0.0) || !(std::abs(z0) <= c * eps))
        throw std::invalid_argument("forward_switch_sequence: need z0 < 0 with |z0| <= c*eps");
    SwitchPointSequence seq;
    seq.eps = eps;
    seq.z0 = z0;
    double x = z0 * eps + 0.5 * eps * eps;
    if (x <= 0.0)
        throw std::domain_error("forward_switch_sequence: x1 <= 0, orbit switched before t = eps");
    double z = z0 + eps;
    double T = -2.0 * z0;
    double S = T;
    seq.entries.push_back({x, z, S, T});
    for (std::size_t k = 2; k <= K; ++k) {
        double arg, T_k;
        if (k % 2 == 0) {
            arg = z * z + (2.0 * p.B / p.A) * x;
            if (arg < 0.0) {
                seq.ceased_at = k;
                break;
            }
            T_k = (std::sqrt(arg) - z) / p.B;
        } else {
            arg = z * z - 2.0 * x;
            if (arg < 0.0) {
                seq.ceased_at = k;
                break;
            }
            T_k = std::sqrt(arg) - z;
        }
        double x_next, z_next;
        if (k % 2 == 0) {
            x_next = x - p.A * z * S - 0.5 * p.A * p.B * S * S;
            z_next = z + p.B * S;
        } else {
            x_next = x + z * S + 0.5 * S * S;
            z_next = z + S;
        }
        double S_k = eps - S + T_k;
        seq.entries.push_back({x_next, z_next, S_k, T_k});
        x = x_next;
        z = z_next;
        S = S_k;
    }
    return seq;
}

/// Critical start y1 < 0: bisection over z0 classifying each trial by the
/// side of the first non-alternating switching point. The bracket, initially
/// (-c*eps, 0), widens twofold on a degenerate classification, up to three
/// times. Bisection runs to a width of 1e-12 * eps and the result is checked
/// to alternate through `depth` points.
inline double find_y1(const TwoFoldParams& p, double eps, std::size_t depth = 12,
                      double c = 10.0) {
    if (!(eps > 0.0)) throw std::invalid_argument("find_y1: eps must be positive");
    if (depth < 4) throw std::invalid_argument("find_y1: depth must be >= 4");
    return -td_detail::find_eta1(p.A, p.B, depth, c) * eps;
}

/// The second critical start, for the orbit that initially heads right.
/// Obtained from the left/right relabeling symmetry; that transform rescales
/// time by B, so the dual value is evaluated at delay B*eps, which in scaled
/// units multiplies the dual y1 by B.
inline double find_y1_tilde(const TwoFoldParams& p, double eps, std::size_t depth = 12,
                            double c = 10.0) {
    if (!(eps > 0.0)) throw std::invalid_argument("find_y1_tilde: eps must be positive");
    if (depth < 4) throw std::invalid_argument("find_y1_tilde: depth must be >= 4");
    return -p.B * td_detail::find_eta1(1.0 / p.A, 1.0 / p.B, depth, c) * eps;
}

inline TimeDelayCritical time_delay_critical(const TwoFoldParams& p, double eps,
                                             std::size_t depth = 12, double c = 10.0) {
    return TimeDelayCritical{find_y1(p, eps, depth, c), find_y1_tilde(p, eps, depth, c), eps,
                             depth};
}

/// Backward continuation down the negative y-axis: y2 from y1_tilde, then
/// the nested square-root recursion for y_k from y_{k-2}.
inline CriticalSequence backward_sequence(const TwoFoldParams& p, double eps,
                                          const TimeDelayCritical& crit, std::size_t K) {
    if (!(eps > 0.0)) throw std::invalid_argument("backward_sequence: eps must be positive");
    if (crit.eps != eps)
        throw std::invalid_argument("backward_sequence: crit was computed at a different eps");
    if (K < 1) throw std::invalid_argument("backward_sequence: K must be >= 1");
    const double A = p.A, B = p.B;
    CriticalSequence seq;
    seq.eps = eps;
    seq.ys.resize(K);
    seq.ys[0] = crit.y1;
    if (K >= 2) {
        double e1t = -crit.y1_tilde / eps;
        seq.ys[1] = -(1.0 / A) * (A + B + std::sqrt(A * A * e1t * e1t + (A + B) * B)) * eps;
    }
    for (std::size_t k = 3; k <= K; ++k) {
        double prev = -seq.ys[k - 3] / eps;
        double w = std::sqrt(prev * prev + A * (A + B));
        double inner = A + B + w;
        seq.ys[k - 1] = -(1.0 / A) * (A + B + std::sqrt(A * A * inner * inner + (A + B) * B)) * eps;
    }
    return seq;
}

namespace td_detail {

inline std::size_t default_window_index(const TwoFoldParams& p, double eps) {
    // Deep in the recursion y_k shrinks by (A+B)(1+A)/(2A) * eps per index;
    // aim for y_k around -0.1 and keep the index odd and bounded.
    double slope = (p.A + p.B) * (1.0 + p.A) / (2.0 * p.A);
    double k = 0.1 / (eps * slope);
    std::size_t ki = static_cast<std::size_t>(k);
    if (ki < 51) ki = 51;
    if (ki > 200'001) ki = 200'001;
    if (ki % 2 == 0) ++ki;
    return ki;
}

}  // namespace td_detail

/// Heads-right fraction of the delayed system from the window
/// [y_k, y_{k-2}]: (y_{k-1} - y_k) / (y_{k-2} - y_k). k = 0 picks the
/// default window depth.
inline RhoResult rho_timedelay(const TwoFoldParams& p, double eps, std::size_t k = 0,
                               std::size_t depth = 12) {
    if (k == 0) k = td_detail::default_window_index(p, eps);
    if (k < 3 || k % 2 == 0) throw std::invalid_argument("rho_timedelay: k must be odd and >= 3");
    TimeDelayCritical crit = time_delay_critical(p, eps, depth);
    const double A = p.A, B = p.B;
    // scaled magnitudes eta = -y/eps; advance the two parity chains in place
    double eta1 = -crit.y1 / eps;
    double eta1t = -crit.y1_tilde / eps;
    double em2 = eta1;  // eta_{j} for j = k-2 parity chain (odd)
    double em1 = (1.0 / A) * (A + B + std::sqrt(A * A * eta1t * eta1t + (A + B) * B));  // even
    auto step2 = [&](double e) {
        double w = std::sqrt(e * e + A * (A + B));
        double inner = A + B + w;
        return (1.0 / A) * (A + B + std::sqrt(A * A * inner * inner + (A + B) * B));
    };
    double q_prev = std::numeric_limits<double>::quiet_NaN();
    double q = q_prev;
    for (std::size_t j = 3; j <= k; j += 2) {
        double e = step2(em2);  // odd chain at j
        q_prev = q;
        q = (e - em1) / (e - em2);
        if (j < k) {
            em1 = step2(em1);  // even chain at j+1
            em2 = e;
        }
    }
    RhoResult r;
    r.value = q;
    r.method = Method::TimeDelay;
    r.eps_used = eps;
    r.converged = std::isfinite(q_prev) ? std::abs(q - q_prev) < 1e-4 : false;
    r.diagnostic = "k=" + std::to_string(k) + " y1/eps=" + std::to_string(-eta1);
    return r;
}

/// Integrates the delayed system: the active half-system is set by the sign
/// of x one delay earlier, realised by queueing a side toggle exactly eps
/// after every zero crossing of x. The orbit starts on the y-axis governed
/// by the right half-system, with the t = 0 crossing already queued.
template <typename Field, typename Sink = NullTraceSink>
EscapeOutcome simulate_delayed_orbit(const Field& field, const PerturbationScale& scale,
                                     double y0, const IntegratorConfig& icfg = {},
                                     Sink&& sink = Sink{}, double sample_dt = 0.0,
                                     std::size_t max_crossings = 10'000'000) {
    if (!(y0 < 0.0) || !(y0 > -scale.y_star))
        throw std::invalid_argument("simulate_delayed_orbit: need -y_star < y0 < 0");
    const double eps = scale.eps;
    const double xs = scale.x_star;
    Side side = Side::Right;
    auto rhs = [&](double, const std::array<double, 2>& s) { return field(side, s[0], s[1]); };
    PlanarIntegrator<decltype(rhs)> integ(rhs, icfg);

    double t = 0.0;
    std::array<double, 2> y{0.0, y0};
    int cur_sign = -1;  // dx/dt = y0 < 0 at t = 0, so the orbit enters x < 0
    std::deque<double> toggles{eps};
    std::size_t crossings = 1;
    sink(TracePoint{t, y[0], y[1], side, TraceKind::Cross});
    double next_sample = sample_dt > 0.0 ? sample_dt : std::numeric_limits<double>::infinity();

    for (;;) {
        double t_toggle = toggles.empty() ? std::numeric_limits<double>::infinity()
                                          : toggles.front();
        double t_stop = std::min({t_toggle, next_sample, 1e30});
        std::array<LineEvent, 3> events{LineEvent{0.0, 1, cur_sign}, LineEvent{xs, 2, 0},
                                        LineEvent{-xs, 3, 0}};
        auto hit = integ.integrate_until(t, y, t_stop, events);
        if (hit.found) {
            if (hit.id == 1) {
                y[0] = 0.0;
                cur_sign = -cur_sign;
                toggles.push_back(t + eps);
                if (++crossings > max_crossings)
                    throw std::runtime_error("simulate_delayed_orbit: crossing budget exceeded");
                sink(TracePoint{t, y[0], y[1], side, TraceKind::Cross});
                continue;
            }
            y[0] = (hit.id == 2) ? xs : -xs;
            EscapeOutcome out{hit.id == 2 ? Exit::HeadsRight : Exit::HeadsLeft, y[0], y[1], t};
            sink(TracePoint{t, y[0], y[1], side, TraceKind::Exit});
            return out;
        }
        t = t_stop;
        if (t == t_toggle) {
            toggles.pop_front();
            side = (side == Side::Left) ? Side::Right : Side::Left;
            sink(TracePoint{t, y[0], y[1], side, TraceKind::Toggle});
        } else if (t >= next_sample) {
            sink(TracePoint{t, y[0], y[1], side, TraceKind::Sample});
            next_sample += sample_dt;
        }
    }
}

inline EscapeOutcome simulate_delayed_orbit(const TwoFoldParams& p, const PerturbationScale& scale,
                                            double y0, const IntegratorConfig& icfg = {}) {
    return simulate_delayed_orbit(NormalFormField{p}, scale, y0, icfg);
}

/// Ensemble analogue of rho_hysteresis_empirical for delayed switching.
inline RhoResult rho_timedelay_empirical(const TwoFoldParams& p, const PerturbationScale& scale,
                                         std::size_t n, double y_min, double y_max,
                                         std::uint64_t seed, unsigned threads = 0) {
    if (n < 1) throw std::invalid_argument("rho_timedelay_empirical: n must be >= 1");
    if (!(y_min < y_max) || !(y_max < 0.0) || !(y_min > -scale.y_star))
        throw std::invalid_argument("rho_timedelay_empirical: bad interval");
    std::vector<std::uint8_t> right(n, 0);
    const double width = (y_max - y_min) / static_cast<double>(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(seed, i);
            double y0 = y_min + (static_cast<double>(i) + rng.next_uniform()) * width;
            right[i] = simulate_delayed_orbit(p, scale, y0).heads_right() ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    RhoResult r;
    r.value = static_cast<double>(count) / static_cast<double>(n);
    r.method = Method::TimeDelay;
    r.standard_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(n));
    r.eps_used = scale.eps;
    return r;
}

}  // namespace twofold
