#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace twofold {

/// Step control for the planar Dormand-Prince 5(4) integrator.
struct IntegratorConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double max_step = 0.05;
    double initial_step = 1e-6;
    double event_tol_x = 1e-12;  ///< roots refined until |x - level| is below this
    std::size_t max_steps = 50'000'000;

    IntegratorConfig() = default;
};

/// Crossing of a vertical line x = level. ref_sign, when nonzero, states
/// which side of the line the orbit currently occupies; it makes detection
/// well-posed on the first span after a restart exactly on the line.
struct LineEvent {
    double level = 0.0;
    int id = 0;
    int ref_sign = 0;
};

namespace ode_detail {

using Vec2 = std::array<double, 2>;

/// Cubic Hermite interpolant over one accepted step. Exact for the
/// leading-order fields, whose coordinates are polynomials of degree <= 2
/// in time.
struct HermiteSpan {
    double t0, t1;
    Vec2 y0, y1, f0, f1;

    Vec2 eval(double t) const {
        double h = t1 - t0;
        double s = (t - t0) / h;
        double s2 = s * s, s3 = s2 * s;
        double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return {h00 * y0[0] + h * h10 * f0[0] + h01 * y1[0] + h * h11 * f1[0],
                h00 * y0[1] + h * h10 * f0[1] + h01 * y1[1] + h * h11 * f1[1]};
    }
};

inline int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace ode_detail

/// Adaptive DP5(4) for a planar field Field: (t, {x,y}) -> {dx,dy}, stopping
/// at the earliest line-crossing event. Grazing dips that cross a line and
/// return within one step are caught by locating the interior extremum of x
/// whenever dx/dt changes sign across the step.
template <typename Field>
class PlanarIntegrator {
  public:
    using Vec2 = ode_detail::Vec2;

    struct Hit {
        bool found = false;
        int id = 0;
        double t = 0.0;
        Vec2 state{0.0, 0.0};
    };

    PlanarIntegrator(Field f, IntegratorConfig cfg)
        : f_(std::move(f)), cfg_(cfg), h_(cfg.initial_step) {}

    /// Advances (t, y) until the earliest event root or t_end. Returns
    /// found=false when t_end was reached without an event.
    template <typename Events>
    Hit integrate_until(double& t, Vec2& y, double t_end, const Events& events) {
        Vec2 k1 = f_(t, y);
        while (t < t_end) {
            double h = std::min({h_, cfg_.max_step, t_end - t});
            if (++steps_used_ > cfg_.max_steps)
                throw std::runtime_error("PlanarIntegrator: step budget exceeded");
            Vec2 y_new, k7;
            double err = step_dp5(t, y, h, k1, y_new, k7);
            double scale =
                cfg_.abs_tol + cfg_.rel_tol * std::max({std::abs(y[0]), std::abs(y[1]),
                                                        std::abs(y_new[0]), std::abs(y_new[1])});
            double ratio = err / scale;
            if (!std::isfinite(err) || ratio > 1.0) {
                double shrink = std::isfinite(ratio) ? std::max(0.2, 0.9 * std::pow(ratio, -0.2))
                                                     : 0.2;
                h_ = h * shrink;
                if (h_ <= 1e-15 * std::max(1.0, std::abs(t)))
                    throw std::runtime_error("PlanarIntegrator: step underflow");
                continue;
            }
            ode_detail::HermiteSpan span{t, t + h, y, y_new, k1, k7};
            Hit hit = locate_event(span, events);
            double grow = ratio > 1e-12 ? std::min(5.0, 0.9 * std::pow(ratio, -0.2)) : 5.0;
            h_ = std::min(cfg_.max_step, h * grow);
            if (hit.found) {
                t = hit.t;
                y = hit.state;
                return hit;
            }
            t += h;
            y = y_new;
            k1 = k7;  // FSAL
        }
        return Hit{};
    }

    std::size_t steps_used() const { return steps_used_; }
    void set_step_hint(double h) { h_ = h; }

  private:
    double step_dp5(double t, const Vec2& y, double h, const Vec2& k1, Vec2& y_out, Vec2& k7) {
        auto at = [&](double c, double a1, double a2 = 0, double a3 = 0, double a4 = 0,
                      double a5 = 0) {
            Vec2 s = {y[0] + h * (a1 * k_[0][0] + a2 * k_[1][0] + a3 * k_[2][0] + a4 * k_[3][0] +
                                  a5 * k_[4][0]),
                      y[1] + h * (a1 * k_[0][1] + a2 * k_[1][1] + a3 * k_[2][1] + a4 * k_[3][1] +
                                  a5 * k_[4][1])};
            return f_(t + c * h, s);
        };
        k_[0] = k1;
        k_[1] = at(1.0 / 5, 1.0 / 5);
        k_[2] = at(3.0 / 10, 3.0 / 40, 9.0 / 40);
        k_[3] = at(4.0 / 5, 44.0 / 45, -56.0 / 15, 32.0 / 9);
        k_[4] = at(8.0 / 9, 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729);
        k_[5] = at(1.0, 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656);
        for (int i = 0; i < 2; ++i)
            y_out[i] = y[i] + h * (35.0 / 384 * k_[0][i] + 500.0 / 1113 * k_[2][i] +
                                   125.0 / 192 * k_[3][i] - 2187.0 / 6784 * k_[4][i] +
                                   11.0 / 84 * k_[5][i]);
        k7 = f_(t + h, y_out);
        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            double e = h * (71.0 / 57600 * k_[0][i] - 71.0 / 16695 * k_[2][i] +
                            71.0 / 1920 * k_[3][i] - 17253.0 / 339200 * k_[4][i] +
                            22.0 / 525 * k_[5][i] - 1.0 / 40 * k7[i]);
            err = std::max(err, std::abs(e));
        }
        return err;
    }

    template <typename Events>
    Hit locate_event(const ode_detail::HermiteSpan& span, const Events& events) {
        using ode_detail::sign_of;
        Hit best;
        for (const auto& ev : events) {
            double g0 = span.y0[0] - ev.level;
            double g1 = span.y1[0] - ev.level;
            int s0 = ev.ref_sign != 0 ? ev.ref_sign : sign_of(g0);
            if (s0 == 0) continue;
            double t_hit;
            if (sign_of(g1) != s0) {
                t_hit = bisect(span, ev.level, span.t0, span.t1, s0);
            } else {
                double d0 = span.f0[0];
                double d1 = span.f1[0];
                if (sign_of(d0) == sign_of(d1) || d0 == 0.0) continue;
                double t_ext = bisect_extremum(span, d0);
                double g_ext = span.eval(t_ext)[0] - ev.level;
                if (g_ext == 0.0 || sign_of(g_ext) == s0) continue;
                t_hit = bisect(span, ev.level, span.t0, t_ext, s0);
            }
            if (!best.found || t_hit < best.t) {
                best.found = true;
                best.t = t_hit;
                best.id = ev.id;
                best.state = span.eval(t_hit);
            }
        }
        return best;
    }

    double bisect(const ode_detail::HermiteSpan& span, double level, double lo, double hi,
                  int s_lo) {
        using ode_detail::sign_of;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double g = span.eval(mid)[0] - level;
            if (std::abs(g) <= cfg_.event_tol_x &&
                hi - lo <= 1e-13 * std::max(1.0, std::abs(hi)))
                return mid;
            if (sign_of(g) == s_lo)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-16 * std::max(1.0, std::abs(hi))) break;
        }
        return hi;  // err on the far side so the crossing is committed
    }

    double bisect_extremum(const ode_detail::HermiteSpan& span, double d0) {
        using ode_detail::sign_of;
        double lo = span.t0, hi = span.t1;
        int s_lo = sign_of(d0);
        for (int it = 0; it < 120; ++it) {
            double mid = 0.5 * (lo + hi);
            ode_detail::Vec2 s = span.eval(mid);
            double d = f_(mid, s)[0];
            if (sign_of(d) == s_lo)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
        }
        return 0.5 * (lo + hi);
    }

    Field f_;
    IntegratorConfig cfg_;
    double h_;
    std::array<Vec2, 6> k_{};
    std::size_t steps_used_ = 0;
};

}  // namespace twofold
