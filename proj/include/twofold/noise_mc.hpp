#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twofold/core.hpp"
#include "twofold/parallel.hpp"
#include "twofold/rng.hpp"

namespace twofold {

/// Exponents of the self-similar zoom under which the noisy system loses its
/// eps-dependence: x ~ eps^(4/3), y ~ eps^(2/3), t ~ eps^(2/3).
struct BlowupExponents {
    static constexpr double lambda1 = 4.0 / 3.0;
    static constexpr double lambda2 = 2.0 / 3.0;
    static constexpr double lambda3 = 2.0 / 3.0;
};

struct BlowupPoint {
    double u, v, s;
};

inline BlowupPoint blowup_transform(double x, double y, double t, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("blowup_transform: eps must be positive");
    double e23 = std::cbrt(eps * eps);
    return {x / (e23 * e23), y / e23, t / e23};
}

inline void blowup_inverse(const BlowupPoint& p, double eps, double& x, double& y, double& t) {
    if (!(eps > 0.0)) throw std::invalid_argument("blowup_inverse: eps must be positive");
    double e23 = std::cbrt(eps * eps);
    x = p.u * e23 * e23;
    y = p.v * e23;
    t = p.s * e23;
}

/// Euler-Maruyama controls for the reduced system
///   du = (-A v  if u<0,  v if u>0) ds + dW,   dv = (B if u<0, 1 if u>0) ds.
/// Paths start at (u, v) = (0, s_min) and run until v >= s_max. v increases
/// at rate B on the left, so a fixed-s horizon would stop short of the
/// tangency for B < 1; the v horizon coincides with s = s_max when B = 1.
struct McConfig {
    std::size_t n_paths = 100'000;
    double dt = 5e-4;
    double s_min = -8.0;
    double s_max = 8.0;
    double u_bound = 50.0;  ///< first-exit level when classify_by_exit is set
    std::uint64_t seed = 1;
    bool classify_by_exit = false;

    void validate() const {
        if (n_paths < 1) throw std::invalid_argument("McConfig: n_paths must be >= 1");
        if (!(dt > 0.0)) throw std::invalid_argument("McConfig: dt must be positive");
        if (!(s_min < 0.0) || !(0.0 < s_max))
            throw std::invalid_argument("McConfig: need s_min < 0 < s_max");
    }
};

/// Monte Carlo estimate of the heads-right probability from the reduced
/// system. Deterministic for a fixed seed at any thread count.
inline RhoResult simulate_reduced_sde(const TwoFoldParams& p, const McConfig& cfg,
                                      unsigned threads = 0) {
    cfg.validate();
    const double sq = std::sqrt(cfg.dt);
    const std::size_t n = cfg.n_paths;
    std::vector<std::uint8_t> right(n, 0);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(cfg.seed, i);
            double u = 0.0, v = cfg.s_min;
            int exited = 0;
            while (v < cfg.s_max) {
                if (u < 0.0) {
                    u += -p.A * v * cfg.dt + sq * rng.next_normal();
                    v += p.B * cfg.dt;
                } else {
                    u += v * cfg.dt + sq * rng.next_normal();
                    v += cfg.dt;
                }
                if (cfg.classify_by_exit && std::abs(u) >= cfg.u_bound) {
                    exited = u > 0.0 ? 1 : -1;
                    break;
                }
            }
            bool heads_right = exited != 0 ? exited > 0 : u > 0.0;
            right[i] = heads_right ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    RhoResult r;
    r.value = static_cast<double>(count) / static_cast<double>(n);
    r.method = Method::NoiseMc;
    r.standard_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(n));
    return r;
}

/// Piecewise-constant repelling drift, the one-dimensional model with a
/// known zero-noise limit.
struct PwcDrift {
    double phi_minus;
    double phi_plus;

    PwcDrift(double m, double p_) : phi_minus(m), phi_plus(p_) {
        if (!(phi_minus < 0.0) || !(0.0 < phi_plus))
            throw std::invalid_argument("PwcDrift: need phi_minus < 0 < phi_plus");
    }
};

/// Weights of the two limiting delta functions as the noise vanishes:
/// (-phi^- , phi^+) / (phi^+ - phi^-). They sum to one exactly.
inline std::pair<double, double> pwc_limit_weights(const PwcDrift& d) {
    double den = d.phi_plus - d.phi_minus;
    return {-d.phi_minus / den, d.phi_plus / den};
}

struct FractionEstimate {
    double fraction;
    double standard_error;
};

/// Euler-Maruyama of dx = phi(x) dt + eps dW from x(0) = 0; returns the
/// fraction of paths with x(horizon) > 0. Internally run in the invariant
/// units x/eps^2, t/eps^2 (unit noise, same drift), where the step adapts to
/// the distance from the drift discontinuity: finest right at x = 0, where
/// all the discretisation bias of a discontinuous drift is created, and
/// growing like x^2 away from it so a single step cannot jump the interface.
/// Once |x| passes the decision zone the sign is frozen: with the drift
/// pointing outward the re-crossing probability is below exp(-80).
inline FractionEstimate simulate_pwc_sde(const PwcDrift& d, double eps, double horizon,
                                         std::size_t n, std::uint64_t seed,
                                         unsigned threads = 0) {
    if (!(eps > 0.0)) throw std::invalid_argument("simulate_pwc_sde: eps must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_pwc_sde: horizon must be positive");
    if (n < 1) throw std::invalid_argument("simulate_pwc_sde: n must be >= 1");
    const double phi_min = std::min(-d.phi_minus, d.phi_plus);
    const double t_end = horizon / (eps * eps);
    const double zone = 40.0 / phi_min;
    const double dt_min = 1e-4;
    std::vector<std::uint8_t> right(n, 0);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(seed, i);
            double x = 0.0, t = 0.0;
            while (t < t_end && std::abs(x) < zone) {
                double dt = std::max(dt_min, x * x / 16.0);
                if (t + dt > t_end) dt = t_end - t;
                double phi = x < 0.0 ? d.phi_minus : d.phi_plus;
                x += phi * dt + std::sqrt(dt) * rng.next_normal();
                t += dt;
            }
            right[i] = x > 0.0 ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    double f = static_cast<double>(count) / static_cast<double>(n);
    return {f, std::sqrt(f * (1.0 - f) / static_cast<double>(n))};
}

/// Noise directions for the unreduced system. Only the x-noise magnitude
/// sqrt(d11^2 + d12^2) enters the limit; it is normalised into eps.
struct NoiseMatrix {
    double d11 = 1.0, d12 = 0.0;
    double d21 = 0.0, d22 = 1.0;
};

/// Demonstration path: the full planar SDE in the original (x, y) variables
/// with noise amplitude eps, run to the first |x| = x_star exit. Slower and
/// eps-dependent; the reduced system and the PDE are the result paths. The
/// step resolves the blow-up time scale eps^(2/3).
inline RhoResult simulate_unreduced_sde(const TwoFoldParams& p, const PerturbationScale& scale,
                                        double y0, std::size_t n, std::uint64_t seed,
                                        NoiseMatrix d = {}, unsigned threads = 0) {
    if (!(y0 < 0.0) || !(y0 > -scale.y_star))
        throw std::invalid_argument("simulate_unreduced_sde: need -y_star < y0 < 0");
    if (n < 1) throw std::invalid_argument("simulate_unreduced_sde: n must be >= 1");
    const double eps = scale.eps;
    const double xnorm = std::sqrt(d.d11 * d.d11 + d.d12 * d.d12);
    if (!(xnorm > 0.0))
        throw std::invalid_argument("simulate_unreduced_sde: x noise must not vanish");
    const double dt = 1e-3 * std::cbrt(eps * eps);
    const double sq = std::sqrt(dt);
    const double t_max = 50.0 * (std::abs(y0) + 1.0) / std::min(1.0, std::min(p.A, p.B));
    std::vector<std::uint8_t> right(n, 0);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(seed, i);
            double x = 0.0, y = y0, t = 0.0;
            while (std::abs(x) < scale.x_star && t < t_max) {
                double w1 = rng.next_normal(), w2 = rng.next_normal();
                if (x < 0.0) {
                    x += -p.A * y * dt + eps * sq * (d.d11 * w1 + d.d12 * w2) / xnorm;
                    y += p.B * dt + eps * sq * (d.d21 * w1 + d.d22 * w2) / xnorm;
                } else {
                    x += y * dt + eps * sq * (d.d11 * w1 + d.d12 * w2) / xnorm;
                    y += dt + eps * sq * (d.d21 * w1 + d.d22 * w2) / xnorm;
                }
                t += dt;
            }
            right[i] = x > 0.0 ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    RhoResult r;
    r.value = static_cast<double>(count) / static_cast<double>(n);
    r.method = Method::NoiseMc;
    r.standard_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(n));
    r.eps_used = eps;
    return r;
}

/// Monte Carlo check of the time-reversal argument: for any bounded drift
/// with phi(u, -s) = -phi(u, s), a path started on the interface at s = -T
/// ends on either side of it at s = +T with probability 1/2. Drift is
/// templated so tests can multiply in even-in-s envelopes.
template <typename Drift>
FractionEstimate check_time_symmetry_mc(Drift&& drift, double T, std::size_t n,
                                        std::uint64_t seed, double dt = 5e-4,
                                        unsigned threads = 0) {
    if (!(T > 0.0)) throw std::invalid_argument("check_time_symmetry_mc: T must be positive");
    if (n < 1) throw std::invalid_argument("check_time_symmetry_mc: n must be >= 1");
    const std::size_t steps = static_cast<std::size_t>(std::llround(2.0 * T / dt));
    const double sq = std::sqrt(dt);
    std::vector<std::uint8_t> right(n, 0);
    parallel_for(
        n,
        [&](std::size_t i) {
            SplitStream rng(seed, i);
            double u = 0.0;
            for (std::size_t m = 0; m < steps; ++m) {
                double s = -T + (static_cast<double>(m)) * dt;
                u += drift(u, s) * dt + sq * rng.next_normal();
            }
            right[i] = u > 0.0 ? 1 : 0;
        },
        threads);
    std::size_t count = 0;
    for (auto b : right) count += b;
    double f = static_cast<double>(count) / static_cast<double>(n);
    return {f, std::sqrt(f * (1.0 - f) / static_cast<double>(n))};
}

/// The B = 1 reduced drift, truncated to keep it formally bounded; the cap
/// is far beyond anything reachable at the tested horizons.
struct OddReducedDrift {
    double A;
    double cap = 1e6;

    double operator()(double u, double s) const {
        double v = u < 0.0 ? -A * s : s;
        if (v > cap) return cap;
        if (v < -cap) return -cap;
        return v;
    }
};

inline FractionEstimate check_time_symmetry_lemma(double A, double T, std::size_t n,
                                                  std::uint64_t seed, double dt = 5e-4,
                                                  unsigned threads = 0) {
    if (!(A > 0.0)) throw std::invalid_argument("check_time_symmetry_lemma: A must be positive");
    return check_time_symmetry_mc(OddReducedDrift{A}, T, n, seed, dt, threads);
}

}  // namespace twofold
