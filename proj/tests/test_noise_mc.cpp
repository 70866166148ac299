#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "twofold/noise_mc.hpp"
#include "twofold/noise_pde.hpp"
#include "twofold/rng.hpp"

using namespace twofold;

TEST_CASE("limit weights of the piecewise-constant drift") {
    auto [l1, r1] = pwc_limit_weights(PwcDrift(-1, 1));
    CHECK(l1 == 0.5);
    CHECK(r1 == 0.5);
    auto [l2, r2] = pwc_limit_weights(PwcDrift(-1, 2));
    CHECK(l2 == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(r2 == Catch::Approx(2.0 / 3.0).margin(1e-15));
    auto [l3, r3] = pwc_limit_weights(PwcDrift(-3, 1));
    CHECK(l3 == 0.75);
    CHECK(r3 == 0.25);
    CHECK(l2 + r2 == 1.0);
    CHECK_THROWS_AS(PwcDrift(1, 2), std::invalid_argument);
}

TEST_CASE("pwc simulation approaches the limit weights") {
    auto sym = simulate_pwc_sde(PwcDrift(-1, 1), 0.05, 1.0, 20'000, 4);
    CHECK(std::abs(sym.fraction - 0.5) <= 3.0 * sym.standard_error);

    auto f = simulate_pwc_sde(PwcDrift(-1, 2), 0.02, 1.0, 20'000, 4);
    CHECK(std::abs(f.fraction - 2.0 / 3.0) <= 0.02);

    // at eps = 1 the horizon is too short for the limit; the deviation from
    // the weight is then large and shrinks as eps decreases
    auto rough = simulate_pwc_sde(PwcDrift(-1, 2), 1.0, 1.0, 20'000, 4);
    CHECK(std::abs(f.fraction - 2.0 / 3.0) < std::abs(rough.fraction - 2.0 / 3.0));
}

TEST_CASE("reduced SDE hits the symmetric and B=A^2 values") {
    McConfig cfg;
    cfg.n_paths = 20'000;
    cfg.dt = 1e-3;
    cfg.seed = 8;
    auto r11 = simulate_reduced_sde(TwoFoldParams(1, 1), cfg);
    CHECK(std::abs(r11.value - 0.5) <= 3.0 * *r11.standard_error);
    auto r24 = simulate_reduced_sde(TwoFoldParams(2, 4), cfg);
    CHECK(std::abs(r24.value - 1.0 / 3.0) <= std::max(0.01, 3.0 * *r24.standard_error));
    CHECK(r24.method == Method::NoiseMc);
}

TEST_CASE("reduced SDE is reproducible at any thread count") {
    McConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt = 2e-3;
    cfg.seed = 5;
    double a = simulate_reduced_sde(TwoFoldParams(1, 2), cfg, 1).value;
    double b = simulate_reduced_sde(TwoFoldParams(1, 2), cfg, 3).value;
    CHECK(a == b);
    cfg.seed = 6;
    CHECK(simulate_reduced_sde(TwoFoldParams(1, 2), cfg, 2).value != a);
}

TEST_CASE("first-exit classification agrees with the final sign") {
    McConfig cfg;
    cfg.n_paths = 10'000;
    cfg.dt = 1e-3;
    cfg.seed = 12;
    auto fin = simulate_reduced_sde(TwoFoldParams(1, 1), cfg);
    cfg.classify_by_exit = true;
    cfg.u_bound = 30.0;
    auto ex = simulate_reduced_sde(TwoFoldParams(1, 1), cfg);
    CHECK(std::abs(fin.value - ex.value) <=
          3.0 * std::sqrt(*fin.standard_error * *fin.standard_error +
                          *ex.standard_error * *ex.standard_error));
}

TEST_CASE("halving dt moves the estimate by less than one standard error") {
    // coupled Brownian increments isolate the discretisation bias: the
    // coarse chain consumes the pairwise sums of the fine chain's normals
    TwoFoldParams p(1, 2);
    const double dt = 1e-3, sq = std::sqrt(dt);
    const double dth = dt / 2, sqh = std::sqrt(dth);
    const std::size_t n = 30'000;
    std::size_t right_c = 0, right_f = 0;
    for (std::size_t i = 0; i < n; ++i) {
        SplitStream rng(21, i);
        double uc = 0.0, vc = -8.0, uf = 0.0, vf = -8.0;
        while (vc < 8.0 || vf < 8.0) {
            double g1 = rng.next_normal(), g2 = rng.next_normal();
            if (vf < 8.0) {
                for (double g : {g1, g2}) {
                    if (uf < 0.0) {
                        uf += -p.A * vf * dth + sqh * g;
                        vf += p.B * dth;
                    } else {
                        uf += vf * dth + sqh * g;
                        vf += dth;
                    }
                }
            }
            if (vc < 8.0) {
                double g = (g1 + g2) / std::sqrt(2.0);
                if (uc < 0.0) {
                    uc += -p.A * vc * dt + sq * g;
                    vc += p.B * dt;
                } else {
                    uc += vc * dt + sq * g;
                    vc += dt;
                }
            }
        }
        right_c += uc > 0.0;
        right_f += uf > 0.0;
    }
    double pc = double(right_c) / n, pf = double(right_f) / n;
    double se = std::sqrt(pf * (1.0 - pf) / n);
    CHECK(std::abs(pc - pf) < se);
}

TEST_CASE("odd-in-time drift ends on either side with probability 1/2") {
    auto a1 = check_time_symmetry_lemma(1.0, 2.0, 20'000, 17);
    CHECK(std::abs(a1.fraction - 0.5) <= 3.0 * a1.standard_error);
    auto a5 = check_time_symmetry_lemma(5.0, 3.0, 20'000, 18);
    CHECK(std::abs(a5.fraction - 0.5) <= 3.0 * a5.standard_error);

    // an even-in-s envelope keeps the drift odd in time
    auto bump = [](double u, double s) {
        double base = u < 0.0 ? -2.0 * s : s;
        return base * (1.0 + 0.5 * std::exp(-s * s));
    };
    auto e = check_time_symmetry_mc(bump, 2.0, 20'000, 19);
    CHECK(std::abs(e.fraction - 0.5) <= 3.0 * e.standard_error);
    CHECK_THROWS_AS(check_time_symmetry_lemma(-1.0, 2.0, 100, 1), std::invalid_argument);
}

TEST_CASE("unreduced SDE approaches the reduced limit as eps shrinks") {
    TwoFoldParams p(2, 4);
    auto coarse = simulate_unreduced_sde(p, PerturbationScale(0.1, 0.2), -0.3, 4000, 31);
    auto fine = simulate_unreduced_sde(p, PerturbationScale(0.01, 0.2), -0.3, 4000, 31);
    CHECK(std::abs(fine.value - 1.0 / 3.0) <= 0.03);
    CHECK(std::abs(fine.value - 1.0 / 3.0) <=
          std::abs(coarse.value - 1.0 / 3.0) + 2.0 * *fine.standard_error);
    // only the x-noise magnitude matters at leading order
    auto tilted = simulate_unreduced_sde(p, PerturbationScale(0.01, 0.2), -0.3, 4000, 32,
                                         NoiseMatrix{0.6, 0.8, 0.5, 0.5});
    CHECK(std::abs(tilted.value - fine.value) <=
          3.0 * std::sqrt(*fine.standard_error * *fine.standard_error +
                          *tilted.standard_error * *tilted.standard_error));
}

TEST_CASE("PDE and Monte Carlo agree away from special values") {
    McConfig cfg;
    cfg.n_paths = 20'000;
    cfg.seed = 23;
    PdeGrid g;
    g.du = 0.02;
    g.dr = 0.01;
    double pde = rho_noise_pde(TwoFoldParams(1, 2), g).value;
    auto mc = simulate_reduced_sde(TwoFoldParams(1, 2), cfg);
    CHECK(std::abs(pde - mc.value) <= std::max(0.01, 3.0 * *mc.standard_error));
}
