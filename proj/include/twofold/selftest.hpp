#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "twofold/core.hpp"
#include "twofold/hysteresis.hpp"
#include "twofold/noise_mc.hpp"
#include "twofold/noise_pde.hpp"
#include "twofold/sweep.hpp"
#include "twofold/timedelay.hpp"

namespace twofold::selftest {

struct CriterionResult {
    std::string id;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

class Runner {
  public:
    Runner(std::ostream& os, const std::vector<std::string>& only,
           const std::vector<std::string>& except)
        : os_(os), only_(only), except_(except) {}

    bool selected(const std::string& id) const {
        for (const auto& e : except_)
            if (e == id) return false;
        if (only_.empty()) return true;
        for (const auto& o : only_)
            if (o == id) return true;
        return false;
    }

    template <typename Fn>
    void run(const std::string& id, const std::string& title, Fn&& fn) {
        if (!selected(id)) return;
        CriterionResult r;
        r.id = id;
        r.title = title;
        auto t0 = std::chrono::steady_clock::now();
        try {
            fn(r);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail += std::string(" exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        os_ << (r.passed ? "[PASS]" : "[FAIL]") << " criterion " << r.id << ": " << title << " ("
            << num(r.seconds) << " s)" << (r.detail.empty() ? "" : " |") << r.detail << "\n";
        os_.flush();
        results_.push_back(std::move(r));
    }

    const std::vector<CriterionResult>& results() const { return results_; }

  private:
    std::ostream& os_;
    std::vector<std::string> only_, except_;
    std::vector<CriterionResult> results_;
};

}  // namespace detail

/// Runs the acceptance criteria, printing one pass/fail line each. `only` /
/// `except` filter by criterion id ("1".."13", with 6 split into 6a/6b/6c).
inline std::vector<CriterionResult> run_acceptance(std::ostream& os,
                                                   const std::vector<std::string>& only = {},
                                                   const std::vector<std::string>& except = {}) {
    using detail::num;
    detail::Runner run(os, only, except);

    run.run("1", "hysteresis closed form equals A/(A+B) to 1e-12 on a 21x21 grid", [](auto& r) {
        SweepAxis ax;  // defaults: 21 log-spaced values in [0.25, 4]
        double worst = 0.0;
        for (std::size_t i = 0; i < ax.count; ++i)
            for (std::size_t j = 0; j < ax.count; ++j) {
                TwoFoldParams p(ax.value(i), ax.value(j));
                double got = rho_hysteresis_closed_form(p).value;
                worst = std::max(worst, std::abs(got - p.A / (p.A + p.B)));
            }
        r.detail = " max|err|=" + num(worst);
        r.passed = worst <= 1e-12;
    });

    run.run("2", "q_interval at (2,4) over [-0.5,-0.1] converges to 1/3", [](auto& r) {
        TwoFoldParams p(2, 4);
        double prev = 1e9;
        bool decreasing = true;
        double final_err = 0.0;
        for (double eps : {1e-4, 1e-5, 1e-6}) {
            double err = std::abs(q_interval(p, eps, -0.5, -0.1) - 1.0 / 3.0);
            if (err >= prev) decreasing = false;
            prev = err;
            final_err = err;
            r.detail += " err(eps=" + num(eps) + ")=" + num(err);
        }
        r.passed = decreasing && final_err <= 0.01;
    });

    run.run("3", "hysteretic ensemble (n=4000, eps=1e-4) matches A/(A+B) within 3 s.e.",
            [](auto& r) {
                r.passed = true;
                for (auto [a, b] : {std::pair{1.0, 1.0}, {2.0, 4.0}, {4.0, 1.0}}) {
                    TwoFoldParams p(a, b);
                    PerturbationScale scale(1e-4);
                    RhoResult est = rho_hysteresis_empirical(p, scale, 4000, -0.5, -0.1, 2024);
                    double err = std::abs(est.value - p.A / (p.A + p.B));
                    double lim = 3.0 * *est.standard_error;
                    r.detail += " (" + num(a) + "," + num(b) + "): err=" + num(err) +
                                " 3se=" + num(lim);
                    if (!(err <= lim)) r.passed = false;
                }
            });

    run.run("4", "time-delay symmetry rho+dual=1 +- 0.01 at five points; rho(1,1)=0.5 +- 0.01",
            [](auto& r) {
                r.passed = true;
                const double eps = 1e-5;
                for (auto [a, b] : {std::pair{2.0, 4.0}, {1.0, 2.0}, {3.0, 0.7}, {0.5, 2.0},
                                    {4.0, 1.0}}) {
                    TwoFoldParams p(a, b);
                    double s = rho_timedelay(p, eps).value + rho_timedelay(dual_params(p), eps).value;
                    r.detail += " sum(" + num(a) + "," + num(b) + ")=" + num(s);
                    if (!(std::abs(s - 1.0) <= 0.01)) r.passed = false;
                }
                double r11 = rho_timedelay(TwoFoldParams(1, 1), eps).value;
                r.detail += " rho(1,1)=" + num(r11);
                if (!(std::abs(r11 - 0.5) <= 0.01)) r.passed = false;
            });

    run.run("5", "time-delay recursion vs delayed-orbit ensemble (n=2000, eps=1e-3) within 0.03",
            [](auto& r) {
                r.passed = true;
                for (auto [a, b] : {std::pair{1.0, 2.0}, {2.0, 1.0}}) {
                    TwoFoldParams p(a, b);
                    double rec = rho_timedelay(p, 1e-3).value;
                    RhoResult sim =
                        rho_timedelay_empirical(p, PerturbationScale(1e-3), 2000, -0.5, -0.1, 7);
                    double d = std::abs(rec - sim.value);
                    r.detail += " (" + num(a) + "," + num(b) + "): rec=" + num(rec) +
                                " sim=" + num(sim.value) + " d=" + num(d);
                    if (!(d <= 0.03)) r.passed = false;
                }
            });

    run.run("6a", "PDE rho(A, A^2) = 1/(1+A) +- 0.01 for A in {0.5,1,2,3} (default grid)",
            [](auto& r) {
                r.passed = true;
                for (double a : {0.5, 1.0, 2.0, 3.0}) {
                    auto rho = rho_noise_pde(TwoFoldParams(a, a * a), PdeGrid::defaults());
                    double err = std::abs(rho.value - 1.0 / (1.0 + a));
                    r.detail += " A=" + num(a) + ": err=" + num(err);
                    if (!(err <= 0.01)) r.passed = false;
                }
            });

    run.run("6b", "PDE rho(A, 1) = 1/2 +- 0.01 for A in {0.25,1,4} (default grid)", [](auto& r) {
        r.passed = true;
        for (double a : {0.25, 1.0, 4.0}) {
            auto rho = rho_noise_pde(TwoFoldParams(a, 1.0), PdeGrid::defaults());
            double err = std::abs(rho.value - 0.5);
            r.detail += " A=" + num(a) + ": err=" + num(err);
            if (!(err <= 0.01)) r.passed = false;
        }
    });

    run.run("6c", "PDE rho(0.05, B) = 1/2 +- 0.02 for B in {0.5, 2}", [](auto& r) {
        // The A -> 0 limit is 1/2, but at A = 0.05 the limit is not yet
        // reached: domain-converged solves and an independent reduced-SDE
        // Monte Carlo both put rho near 0.536 (B=0.5) and 0.468 (B=2).
        // Evaluated as stated; the converged values are reported alongside.
        r.passed = true;
        for (double b : {0.5, 2.0}) {
            TwoFoldParams p(0.05, b);
            auto rho = rho_noise_pde(p, PdeGrid::defaults());
            PdeGrid big;
            big.u_max = 40.0;
            big.r_min = -32.0;
            big.r_max = 48.0;
            big.du = 0.02;
            big.dr = 0.01;
            auto rho_big = rho_noise_pde(p, big);
            double err = std::abs(rho.value - 0.5);
            r.detail += " B=" + num(b) + ": default=" + num(rho.value) + " (err=" + num(err) +
                        "), domain-converged=" + num(rho_big.value);
            if (!(err <= 0.02)) r.passed = false;
        }
    });

    run.run("7", "interface identity for B=A^2: max_r |Q(0,r)-1/(1+A)| <= 1e-2, shrinking on refinement",
            [](auto& r) {
                r.passed = true;
                double dev2_default = 0.0;
                for (double a : {0.5, 1.0, 2.0, 3.0}) {
                    QField f = solve_Q_pde(TwoFoldParams(a, a * a), PdeGrid::defaults());
                    double dev = 0.0;
                    for (double q0 : f.interface_trace)
                        dev = std::max(dev, std::abs(q0 - 1.0 / (1.0 + a)));
                    if (a == 2.0) dev2_default = dev;
                    r.detail += " A=" + num(a) + ": maxdev=" + num(dev);
                    if (!(dev <= 1e-2)) r.passed = false;
                }
                PdeGrid fine = PdeGrid::defaults();
                fine.du /= 2;
                fine.dr /= 2;
                std::size_t iface = fine.interface_index();
                double dev_fine = 0.0;
                pde_detail::march(TwoFoldParams(2, 4), fine, PdeOptions{},
                                  [&](std::size_t, const std::vector<double>& q) {
                                      dev_fine = std::max(dev_fine, std::abs(q[iface] - 1.0 / 3.0));
                                  });
                r.detail += " refined A=2: maxdev=" + num(dev_fine);
                if (!(dev_fine < dev2_default)) r.passed = false;
            });

    run.run("8", "Q(0, r_max) at (2,4) = 1/3 +- 0.01", [](auto& r) {
        auto rho = rho_noise_pde(TwoFoldParams(2, 4), PdeGrid::defaults());
        double err = std::abs(rho.value - 1.0 / 3.0);
        r.detail = " rho=" + num(rho.value) + " err=" + num(err) +
                   (rho.converged ? "" : " (tail not converged)");
        r.passed = err <= 0.01 && rho.converged;
    });

    run.run("9", "PDE vs reduced-SDE Monte Carlo (n=1e5) within max(0.01, 3 s.e.)", [](auto& r) {
        r.passed = true;
        for (auto [a, b] : {std::pair{1.0, 1.0}, {2.0, 4.0}, {1.0, 2.0}}) {
            TwoFoldParams p(a, b);
            double pde = rho_noise_pde(p, PdeGrid::defaults()).value;
            McConfig mc;
            mc.seed = 99;
            RhoResult est = simulate_reduced_sde(p, mc);
            double d = std::abs(pde - est.value);
            double lim = std::max(0.01, 3.0 * *est.standard_error);
            r.detail += " (" + num(a) + "," + num(b) + "): d=" + num(d);
            if (!(d <= lim)) r.passed = false;
        }
    });

    run.run("10", "piecewise-constant drift: weights exact; MC at eps=0.02 hits 2/3 +- 0.02",
            [](auto& r) {
                PwcDrift d(-1.0, 2.0);
                auto [wl, wr] = pwc_limit_weights(d);
                bool weights_ok = std::abs(wl - 1.0 / 3.0) <= 1e-15 &&
                                  std::abs(wr - 2.0 / 3.0) <= 1e-15 && wl + wr == 1.0;
                auto est = simulate_pwc_sde(d, 0.02, 1.0, 100'000, 11);
                double err = std::abs(est.fraction - 2.0 / 3.0);
                r.detail = " weights=(" + num(wl) + "," + num(wr) + ") frac=" +
                           num(est.fraction) + " err=" + num(err);
                r.passed = weights_ok && err <= 0.02;
            });

    run.run("11", "odd-in-time drift gives P[u(T)>0] = 1/2 within 3 s.e. (n=1e5)", [](auto& r) {
        r.passed = true;
        for (auto [a, T] : {std::pair{1.0, 2.0}, {5.0, 3.0}}) {
            auto est = check_time_symmetry_lemma(a, T, 100'000, 5);
            double err = std::abs(est.fraction - 0.5);
            double lim = 3.0 * est.standard_error;
            r.detail += " A=" + num(a) + ": p=" + num(est.fraction);
            if (!(err <= lim)) r.passed = false;
        }
    });

    run.run("12", "PDE rho(A,2) approaches 1/2 through A in {10,30,100}; final within 0.02",
            [](auto& r) {
                double prev = 1e9;
                bool shrinking = true;
                double last = 0.0;
                for (double a : {10.0, 30.0, 100.0}) {
                    double rho = rho_noise_pde(TwoFoldParams(a, 2.0), PdeGrid::defaults()).value;
                    last = std::abs(rho - 0.5);
                    r.detail += " A=" + num(a) + ": |rho-1/2|=" + num(last);
                    if (last >= prev + 2e-3) shrinking = false;
                    prev = last;
                }
                r.passed = shrinking && last <= 0.02;
            });

    run.run("13", "sweep output is byte-identical across runs and worker counts", [](auto& r) {
        SweepSpec spec;
        spec.a_axis = SweepAxis{0.5, 2.0, 4, true};
        spec.b_axis = SweepAxis{0.5, 2.0, 4, true};
        spec.methods = {Method::Hysteresis, Method::NoiseMc};
        spec.params.mc.n_paths = 2000;
        spec.params.mc.dt = 2e-3;
        spec.seed = 31;
        std::string one = to_csv(run_sweep(spec, 1));
        std::string four = to_csv(run_sweep(spec, 4));
        std::string again = to_csv(run_sweep(spec, 4));
        r.passed = (one == four) && (four == again);
        r.detail = r.passed ? " identical bytes" : " outputs differ";
    });

    return run.results();
}

inline bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

}  // namespace twofold::selftest
