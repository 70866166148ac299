#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "twofold/core.hpp"
#include "twofold/ode.hpp"
#include "twofold/parallel.hpp"
#include "twofold/rng.hpp"

namespace twofold {

/// Intersections y_1 > y_2 > ... of the critical switching trajectories with
/// the negative y-axis. ys[k-1] holds y_k.
struct CriticalSequence {
    double eps = 0.0;
    std::vector<double> ys;

    std::size_t size() const { return ys.size(); }
    double y(std::size_t k) const { return ys.at(k - 1); }
};

namespace hyst_detail {

inline void require_eps_k(double eps, std::size_t K) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (K < 1) throw std::invalid_argument("K must be at least 1");
}

}  // namespace hyst_detail

/// y_1 = -sqrt(2 eps), y_2 = -sqrt(2 (1 + 2B/A) eps),
/// y_k = -sqrt(y_{k-2}^2 + 4 (1 + B/A) eps) for k >= 3.
inline CriticalSequence critical_sequence_recursive(const TwoFoldParams& p, double eps,
                                                    std::size_t K) {
    hyst_detail::require_eps_k(eps, K);
    CriticalSequence seq;
    seq.eps = eps;
    seq.ys.resize(K);
    seq.ys[0] = -std::sqrt(2.0 * eps);
    if (K >= 2) seq.ys[1] = -std::sqrt(2.0 * (1.0 + 2.0 * p.B / p.A) * eps);
    const double incr = 4.0 * (1.0 + p.B / p.A) * eps;
    for (std::size_t k = 3; k <= K; ++k)
        seq.ys[k - 1] = -std::sqrt(seq.ys[k - 3] * seq.ys[k - 3] + incr);
    return seq;
}

/// Closed form of the same sequence:
/// odd k:  y_k = -sqrt(2) sqrt(k + (k-1) B/A) sqrt(eps)
/// even k: y_k = -sqrt(2) sqrt(k - 1 + k B/A) sqrt(eps)
inline double critical_y_explicit(const TwoFoldParams& p, double eps, std::size_t k) {
    double ba = p.B / p.A;
    double inner = (k % 2 == 1) ? (double(k) + double(k - 1) * ba)
                                : (double(k - 1) + double(k) * ba);
    return -std::sqrt(2.0 * inner * eps);
}

inline CriticalSequence critical_sequence_explicit(const TwoFoldParams& p, double eps,
                                                   std::size_t K) {
    hyst_detail::require_eps_k(eps, K);
    CriticalSequence seq;
    seq.eps = eps;
    seq.ys.resize(K);
    for (std::size_t k = 1; k <= K; ++k) seq.ys[k - 1] = critical_y_explicit(p, eps, k);
    return seq;
}

/// q over one window [y_k, y_{k-2}], k odd >= 3. Approaches A/(A+B) as k
/// grows; the value is eps-independent because eps cancels in the ratio.
inline double q_window(const TwoFoldParams& p, double eps, std::size_t k) {
    if (k < 3 || k % 2 == 0) throw std::invalid_argument("q_window: k must be odd and >= 3");
    double yk = critical_y_explicit(p, eps, k);
    double yk1 = critical_y_explicit(p, eps, k - 1);
    double yk2 = critical_y_explicit(p, eps, k - 2);
    return (yk1 - yk) / (yk2 - yk);
}

/// Fraction of the interval [y_min, y_max] whose forward orbits head right:
/// sum of the odd-k window widths between the extreme sequence points inside
/// the interval, over the spanned length. O(eps) edge slivers are dropped.
inline double q_interval(const TwoFoldParams& p, double eps, double y_min, double y_max) {
    if (!(eps > 0.0)) throw std::invalid_argument("q_interval: eps must be positive");
    if (!(y_min < y_max) || !(y_max < 0.0))
        throw std::invalid_argument("q_interval: need y_min < y_max < 0");
    auto y_odd = [&](std::size_t m) {  // m-th odd index, k = 2m-1
        return critical_y_explicit(p, eps, 2 * m - 1);
    };
    // smallest odd k with y_k <= y_max
    std::size_t lo = 1, hi = 1;
    while (y_odd(hi) > y_max) hi *= 2;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (y_odd(mid) <= y_max)
            hi = mid;
        else
            lo = mid + 1;
    }
    std::size_t k_min = 2 * lo - 1;
    if (y_odd(lo) < y_min)
        throw std::domain_error("q_interval: no odd sequence point inside interval (eps too large)");
    // largest odd k with y_k >= y_min
    lo = 1;
    hi = 2;
    while (y_odd(hi) >= y_min) hi *= 2;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (y_odd(mid) >= y_min)
            lo = mid;
        else
            hi = mid - 1;
    }
    std::size_t k_max = 2 * lo - 1;
    if (k_max < k_min + 2)
        throw std::domain_error("q_interval: fewer than two odd sequence points in interval");
    if (k_max - k_min > 250'000'000)
        throw std::domain_error("q_interval: eps too small, window sum would exceed budget");
    double num = 0.0;
    for (std::size_t k = k_min + 2; k <= k_max; k += 2)
        num += critical_y_explicit(p, eps, k - 1) - critical_y_explicit(p, eps, k);
    double den = critical_y_explicit(p, eps, k_min) - critical_y_explicit(p, eps, k_max);
    return num / den;
}

/// Where the orbit starts and how tightly to integrate it.
struct HystereticOrbitConfig {
    PerturbationScale scale;
    double y0;
    Side initial_side = Side::Right;  ///< half-system active at t = 0
    IntegratorConfig integrator;
    std::size_t max_switches = 10'000'000;

    HystereticOrbitConfig(PerturbationScale s, double y0_) : scale(s), y0(y0_) {
        if (!(y0 < 0.0) || !(y0 > -s.y_star))
            throw std::invalid_argument("HystereticOrbitConfig: need -y_star < y0 < 0");
    }
};

enum class TraceKind { Sample, Switch, Cross, Toggle, Exit };

struct TracePoint {
    double t, x, y;
    Side side;
    TraceKind kind;
};

struct NullTraceSink {
    void operator()(const TracePoint&) const {}
    static constexpr double sample_dt = 0.0;
};

/// Runs the hysteretic system: the left half-system switches to the right
/// half-system at x = +eps and back at x = -eps. Terminates at the first
/// |x| = x_star crossing.
template <typename Field, typename Sink = NullTraceSink>
EscapeOutcome simulate_hysteretic_orbit(const Field& field, const HystereticOrbitConfig& cfg,
                                        Sink&& sink = Sink{}, double sample_dt = 0.0) {
    const double eps = cfg.scale.eps;
    const double xs = cfg.scale.x_star;
    Side side = cfg.initial_side;
    auto rhs = [&](double, const std::array<double, 2>& s) { return field(side, s[0], s[1]); };
    PlanarIntegrator<decltype(rhs)> integ(rhs, cfg.integrator);

    double t = 0.0;
    std::array<double, 2> y{0.0, cfg.y0};
    sink(TracePoint{t, y[0], y[1], side, TraceKind::Sample});
    double next_sample = sample_dt > 0.0 ? sample_dt : std::numeric_limits<double>::infinity();

    std::size_t switches = 0;
    for (;;) {
        const double level = (side == Side::Left) ? eps : -eps;
        std::array<LineEvent, 3> events{LineEvent{level, 1, 0}, LineEvent{xs, 2, 0},
                                        LineEvent{-xs, 3, 0}};
        double t_stop = std::min(next_sample, 1e30);
        auto hit = integ.integrate_until(t, y, t_stop, events);
        if (!hit.found) {
            if (t >= next_sample) {
                sink(TracePoint{t, y[0], y[1], side, TraceKind::Sample});
                next_sample += sample_dt;
            }
            continue;
        }
        if (hit.id == 1) {
            y[0] = level;  // pin the located root onto the switching line
            side = (side == Side::Left) ? Side::Right : Side::Left;
            sink(TracePoint{t, y[0], y[1], side, TraceKind::Switch});
            if (++switches > cfg.max_switches)
                throw std::runtime_error("simulate_hysteretic_orbit: switch budget exceeded");
            continue;
        }
        y[0] = (hit.id == 2) ? xs : -xs;
        EscapeOutcome out{hit.id == 2 ? Exit::HeadsRight : Exit::HeadsLeft, y[0], y[1], t};
        sink(TracePoint{t, y[0], y[1], side, TraceKind::Exit});
        return out;
    }
}

inline EscapeOutcome simulate_hysteretic_orbit(const TwoFoldParams& p,
                                               const HystereticOrbitConfig& cfg) {
    return simulate_hysteretic_orbit(NormalFormField{p}, cfg);
}

/// Heads-right fraction over a jittered stratified sample of initial heights
/// in [y_min, y_max]. Orbit i draws its initial condition from (seed, i), so
/// the estimate is reproducible for a fixed seed at any thread count.
inline RhoResult rho_hysteresis_empirical(const TwoFoldParams& p, const PerturbationScale& scale,
                                          std::size_t n, double y_min, double y_max,
                                          std::uint64_t seed, unsigned threads = 0) {
    if (n < 1) throw std::invalid_argument("rho_hysteresis_empirical: n must be >= 1");
    if (!(y_min < y_max) || !(y_max < 0.0) || !(y_min > -scale.y_star))
        throw std::invalid_argument("rho_hysteresis_empirical: bad interval");
    std::vector<std::uint8_t> right(n, 0);
    const double width = (y_max - y_min) / static_cast<double>(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(seed, i);
            double y0 = y_min + (static_cast<double>(i) + rng.next_uniform()) * width;
            HystereticOrbitConfig cfg(scale, y0);
            right[i] = simulate_hysteretic_orbit(p, cfg).heads_right() ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    RhoResult r;
    r.value = static_cast<double>(count) / static_cast<double>(n);
    r.method = Method::Hysteresis;
    r.standard_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(n));
    r.eps_used = scale.eps;
    return r;
}

}  // namespace twofold
