#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace twofold {

/// Normal-form constants of the planar visible-visible two-fold.
/// A is the ratio of tangential accelerations of the two half-systems,
/// B the ratio of their vertical drifts. Both must be positive.
struct TwoFoldParams {
    double A;
    double B;

    TwoFoldParams(double A_, double B_) : A(A_), B(B_) {
        if (!(A > 0.0) || !(B > 0.0))
            throw std::invalid_argument("TwoFoldParams: A and B must be positive");
        if (!std::isfinite(A) || !std::isfinite(B))
            throw std::invalid_argument("TwoFoldParams: A and B must be finite");
    }
};

/// Involution (A,B) -> (1/A,1/B). Swapping the roles of the two half-planes
/// maps the system onto itself with these parameters, so any heads-right
/// fraction satisfies rho(p) + rho(dual(p)) = 1.
inline TwoFoldParams dual_params(const TwoFoldParams& p) {
    return TwoFoldParams(1.0 / p.A, 1.0 / p.B);
}

/// Which half-plane vector field is active.
enum class Side { Left, Right };

inline const char* to_string(Side s) { return s == Side::Left ? "L" : "R"; }

/// Perturbation size plus the escape box. An orbit "heads right" when it
/// first leaves |x| < x_star through x = +x_star. Requires eps << x_star.
struct PerturbationScale {
    double eps;
    double x_star;
    double y_star;

    PerturbationScale(double eps_, double x_star_ = 0.05, double y_star_ = 1.0)
        : eps(eps_), x_star(x_star_), y_star(y_star_) {
        if (!(eps > 0.0)) throw std::invalid_argument("PerturbationScale: eps must be positive");
        if (!(x_star > eps))
            throw std::invalid_argument("PerturbationScale: x_star must exceed eps");
        if (!(y_star > 0.0)) throw std::invalid_argument("PerturbationScale: y_star must be positive");
    }
};

enum class Exit { HeadsRight, HeadsLeft };

/// Result of running one orbit to the boundary of the escape box.
struct EscapeOutcome {
    Exit exit;
    double x;  ///< exit point, |x| == x_star up to event tolerance
    double y;
    double t;  ///< exit time

    bool heads_right() const { return exit == Exit::HeadsRight; }
};

enum class Method { Hysteresis, TimeDelay, NoisePde, NoiseMc };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Hysteresis: return "hy";
        case Method::TimeDelay: return "td";
        case Method::NoisePde: return "no-pde";
        case Method::NoiseMc: return "no-mc";
    }
    return "?";
}

/// A heads-right fraction or probability with provenance. standard_error is
/// present only for Monte Carlo estimators; eps_used only when the method
/// evaluates at a finite perturbation size.
struct RhoResult {
    double value = 0.0;
    Method method = Method::Hysteresis;
    std::optional<double> standard_error;
    std::optional<double> eps_used;
    bool converged = true;
    std::string diagnostic;
};

/// Leading-order half-plane fields: Left = (-A*y, B), Right = (y, 1).
/// Higher-order terms of the normal form do not enter the limiting
/// fractions, so they are dropped; see PerturbedField for the test hook.
inline std::array<double, 2> vector_field(const TwoFoldParams& p, Side side, double /*x*/,
                                          double y) {
    if (side == Side::Left) return {-p.A * y, p.B};
    return {y, 1.0};
}

struct NormalFormField {
    TwoFoldParams params;
    std::array<double, 2> operator()(Side side, double x, double y) const {
        return vector_field(params, side, x, y);
    }
};

/// Normal form plus quadratic corrections, used by tests to confirm that
/// higher-order terms leave the limiting fractions unchanged.
struct PerturbedField {
    TwoFoldParams params;
    double cxx = 0.0;  ///< adds cxx * x to dx/dt on both sides
    double cyy = 0.0;  ///< adds cyy * y^2 to dx/dt on both sides
    double cy = 0.0;   ///< adds cy * y to dy/dt on both sides

    std::array<double, 2> operator()(Side side, double x, double y) const {
        auto f = vector_field(params, side, x, y);
        f[0] += cxx * x + cyy * y * y;
        f[1] += cy * y;
        return f;
    }
};

/// Closed form of the hysteresis limit: rho = A / (A + B).
inline RhoResult rho_hysteresis_closed_form(const TwoFoldParams& p) {
    RhoResult r;
    r.value = p.A / (p.A + p.B);
    r.method = Method::Hysteresis;
    return r;
}

}  // namespace twofold
