#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "twofold/timedelay.hpp"

using namespace twofold;

TEST_CASE("forward sequence start values and domain guard") {
    TwoFoldParams p(1, 1);
    const double eps = 1e-3;
    CHECK_THROWS_AS(forward_switch_sequence(p, -eps, eps, 8), std::domain_error);
    CHECK_THROWS_AS(forward_switch_sequence(p, 0.1, eps, 8), std::invalid_argument);
    CHECK_THROWS_AS(forward_switch_sequence(p, -1.0, eps, 8), std::invalid_argument);

    auto seq = forward_switch_sequence(p, -eps / 4.0, eps, 8);
    CHECK(seq.entries[0].x == Catch::Approx(2.5e-7).epsilon(1e-12));
    CHECK(seq.entries[0].z == Catch::Approx(7.5e-4).epsilon(1e-12));
    CHECK(seq.entries[0].T == Catch::Approx(5e-4).epsilon(1e-12));
    CHECK(seq.entries[0].S == Catch::Approx(5e-4).epsilon(1e-12));
}

TEST_CASE("switch points alternate at the critical start and fail off it") {
    TwoFoldParams p(2, 4);
    const double eps = 1e-4;
    double y1 = find_y1(p, eps, 12);
    auto critical = forward_switch_sequence(p, y1, eps, 12);
    REQUIRE(critical.ceased_at == 0);
    for (std::size_t k = 1; k <= critical.entries.size(); ++k) {
        double want = (k % 2 == 1) ? 1.0 : -1.0;
        REQUIRE(critical.entries[k - 1].x * want > 0.0);
        REQUIRE(critical.entries[k - 1].S > 0.0);
        REQUIRE(critical.entries[k - 1].T > 0.0);
    }
    for (double off : {1e-9 * eps * 1e3, -1e-9 * eps * 1e3}) {
        auto seq = forward_switch_sequence(p, y1 + off, eps, 64);
        bool failed = seq.ceased_at != 0;
        for (std::size_t k = 1; !failed && k <= seq.entries.size(); ++k) {
            double want = (k % 2 == 1) ? 1.0 : -1.0;
            if (seq.entries[k - 1].x * want <= 0.0) failed = true;
        }
        CHECK(failed);
    }
}

TEST_CASE("critical start values") {
    const double eps = 1e-4;
    CHECK(find_y1(TwoFoldParams(1, 1), eps) / eps == Catch::Approx(-0.30264332).margin(1e-6));
    CHECK(find_y1(TwoFoldParams(2, 4), eps) / eps == Catch::Approx(-0.14842169).margin(1e-6));
    CHECK(find_y1(TwoFoldParams(1, 2), eps) / eps == Catch::Approx(-0.29493390).margin(1e-6));
    CHECK(find_y1(TwoFoldParams(0.5, 0.25), eps) / eps ==
          Catch::Approx(-0.42806299).margin(1e-6));
    for (double a : {0.25, 1.0, 4.0})
        for (double b : {0.25, 1.0, 4.0}) {
            double y1 = find_y1(TwoFoldParams(a, b), eps);
            CHECK(y1 < 0.0);
            CHECK(std::abs(y1) < 10.0 * eps);
        }
    CHECK_THROWS_AS(find_y1(TwoFoldParams(1, 1), eps, 3), std::invalid_argument);
}

TEST_CASE("y1 over eps does not depend on eps") {
    TwoFoldParams p(3, 0.7);
    double ref = find_y1(p, 1e-3) / 1e-3;
    for (double eps : {1e-4, 1e-5}) {
        double v = find_y1(p, eps) / eps;
        CHECK(std::abs(v - ref) <= 1e-2 * std::abs(ref));
        CHECK(std::abs(v - ref) <= 1e-9);  // the scheme is exactly scale invariant
    }
}

TEST_CASE("depth doubling leaves y1 essentially unchanged") {
    TwoFoldParams p(1, 2);
    const double eps = 1e-5;
    double a = find_y1(p, eps, 8) / eps;
    double b = find_y1(p, eps, 16) / eps;
    CHECK(std::abs(a - b) < 1e-3);
}

TEST_CASE("second critical start via the relabeling symmetry") {
    const double eps = 1e-4;
    // self-dual point: both critical orbits see the same system
    CHECK(find_y1_tilde(TwoFoldParams(1, 1), eps) ==
          Catch::Approx(find_y1(TwoFoldParams(1, 1), eps)).epsilon(1e-12));
    // the relabeling rescales time by B, hence the delay: tilde-y1(A,B) = B * y1(1/A,1/B)
    TwoFoldParams p(2, 4);
    CHECK(find_y1_tilde(p, eps) ==
          Catch::Approx(p.B * find_y1(dual_params(p), eps)).epsilon(1e-10));
    CHECK(p.B * find_y1_tilde(dual_params(p), eps) ==
          Catch::Approx(find_y1(p, eps) * 1.0).epsilon(1e-10));
}

TEST_CASE("empirical critical start matches the recursion") {
    // independent oracle: bisect the delayed-orbit outcome over z0
    TwoFoldParams p(2, 4);
    const double eps = 1e-4;
    PerturbationScale sc(eps);
    double lo = -0.499 * eps, hi = -1e-7 * eps;
    REQUIRE_FALSE(simulate_delayed_orbit(p, sc, lo).heads_right());
    REQUIRE(simulate_delayed_orbit(p, sc, hi).heads_right());
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        if (simulate_delayed_orbit(p, sc, mid).heads_right())
            hi = mid;
        else
            lo = mid;
    }
    double empirical = 0.5 * (lo + hi) / eps;
    CHECK(empirical == Catch::Approx(find_y1(p, eps) / eps).margin(2e-4));
}

TEST_CASE("backward sequence formula, ordering and growth rate") {
    TwoFoldParams p(1, 1);
    const double eps = 1e-4;
    auto crit = time_delay_critical(p, eps);
    auto seq = backward_sequence(p, eps, crit, 200);
    double t = crit.y1_tilde / eps;
    CHECK(seq.y(2) == Catch::Approx(-(2.0 + std::sqrt(t * t + 2.0)) * eps).epsilon(1e-12));
    for (std::size_t k = 2; k <= 200; ++k) REQUIRE(seq.y(k) < seq.y(k - 1));

    TwoFoldParams q(1, 2);
    auto critq = time_delay_critical(q, eps);
    auto seqq = backward_sequence(q, eps, critq, 2003);
    double slope = (seqq.y(2001) - seqq.y(2003)) / eps;  // positive: y decreases
    CHECK(slope == Catch::Approx((q.A + q.B) * (1.0 + q.A) / q.A).margin(2e-2));

    TimeDelayCritical stale = critq;
    stale.eps = 2e-4;
    CHECK_THROWS_AS(backward_sequence(q, eps, stale, 10), std::invalid_argument);
}

TEST_CASE("second boundary location agrees with a delayed-orbit scan") {
    TwoFoldParams p(2, 4);
    const double eps = 1e-3;
    auto crit = time_delay_critical(p, eps);
    auto seq = backward_sequence(p, eps, crit, 2);
    PerturbationScale sc(eps);
    double lo = -6.5 * eps, hi = -5.5 * eps;  // bracket around the predicted y2
    REQUIRE(simulate_delayed_orbit(p, sc, lo).heads_right());
    REQUIRE_FALSE(simulate_delayed_orbit(p, sc, hi).heads_right());
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        if (simulate_delayed_orbit(p, sc, mid).heads_right())
            lo = mid;
        else
            hi = mid;
    }
    CHECK(0.5 * (lo + hi) == Catch::Approx(seq.y(2)).epsilon(2e-3));
}

TEST_CASE("rho_timedelay values and symmetry") {
    const double eps = 1e-5;
    RhoResult r11 = rho_timedelay(TwoFoldParams(1, 1), eps);
    CHECK(std::abs(r11.value - 0.5) <= 1e-3);
    CHECK(r11.method == Method::TimeDelay);
    CHECK(r11.converged);

    CHECK(rho_timedelay(TwoFoldParams(2, 4), eps).value ==
          Catch::Approx(0.654623).margin(5e-4));

    for (auto [a, b] : {std::pair{2.0, 4.0}, {1.0, 2.0}, {4.0, 1.0}, {0.3, 2.5}}) {
        TwoFoldParams p(a, b);
        double s = rho_timedelay(p, eps).value + rho_timedelay(dual_params(p), eps).value;
        CHECK(std::abs(s - 1.0) <= 1e-3);
    }
    CHECK_THROWS_AS(rho_timedelay(TwoFoldParams(1, 1), eps, 4), std::invalid_argument);
}

TEST_CASE("delayed orbit terminates and toggles lag crossings by exactly eps") {
    TwoFoldParams p(1, 1);
    PerturbationScale sc(1e-3);
    std::vector<TracePoint> trace;
    auto sink = [&](const TracePoint& pt) { trace.push_back(pt); };
    EscapeOutcome out = simulate_delayed_orbit(NormalFormField{p}, sc, -0.3, IntegratorConfig{},
                                               sink);
    CHECK(std::abs(out.x) == sc.x_star);
    std::vector<double> crossings, toggles;
    for (const auto& pt : trace) {
        if (pt.kind == TraceKind::Cross) crossings.push_back(pt.t);
        if (pt.kind == TraceKind::Toggle) toggles.push_back(pt.t);
    }
    REQUIRE(toggles.size() >= 10);
    REQUIRE(crossings.size() >= toggles.size());
    for (std::size_t i = 0; i < toggles.size(); ++i)
        REQUIRE(toggles[i] == crossings[i] + sc.eps);  // exact: queued as t + eps
}

TEST_CASE("quadratic corrections leave the delayed fraction unchanged") {
    TwoFoldParams p(1, 2);
    PerturbationScale sc(1e-3);
    const std::size_t n = 300;
    std::size_t base = 0, pert = 0;
    PerturbedField field{p, 0.3, 0.3, 0.3};
    for (std::size_t i = 0; i < n; ++i) {
        SplitStream rng(9, i);
        double y0 = -0.5 + (static_cast<double>(i) + rng.next_uniform()) * (0.4 / n);
        base += simulate_delayed_orbit(NormalFormField{p}, sc, y0).heads_right();
        pert += simulate_delayed_orbit(field, sc, y0).heads_right();
    }
    double d = std::abs(double(base) - double(pert)) / n;
    CHECK(d <= 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("delayed ensemble is symmetric at (1,1) and reproducible") {
    TwoFoldParams p(1, 1);
    PerturbationScale sc(1e-3);
    RhoResult a = rho_timedelay_empirical(p, sc, 400, -0.5, -0.1, 3, 2);
    CHECK(std::abs(a.value - 0.5) <= 3.0 * *a.standard_error);
    RhoResult b = rho_timedelay_empirical(p, sc, 400, -0.5, -0.1, 3, 1);
    CHECK(a.value == b.value);
}
