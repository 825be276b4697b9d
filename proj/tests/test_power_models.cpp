// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file test_power_models.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "esrtk/power_models.hpp"
#include "esrtk/synthetic.hpp"
#include "testing.hpp"

using namespace esr;
using esr::test::approx;
using esr::test::rel_err;

namespace
{
double const h = 6.62607015e-34;
double const mu_b = 9.2740100783e-24;

TlsLossParams const tls_truth{1e-6, 1e5, 1.0, 0.2};

//! Single-expression T1e: 1/(P_sat T2e (g muB/hbar)^2 alpha^2).
double oracle_t1e(double p_sat, double t2e, double alpha, double g)
{
    double const gamma = g * mu_b / (h / (2.0 * std::numbers::pi));
    return 1.0 / (p_sat * t2e * gamma * gamma * alpha * alpha);
}
}  // namespace

TEST_CASE("TLS law closed forms")
{
    auto const& p = tls_truth;
    CHECK(tls_loss(0.0, p) == approx(1e-6 + 1e-5).epsilon(1e-14));
    CHECK(std::abs(tls_loss(1e12 * p.n_c, p) - p.delta0) < 1e-2 / p.q_tls);
    double const half = p.n_c * (std::pow(2.0, 1.0 / p.beta) - 1.0);
    CHECK(half == approx(31.0).epsilon(1e-14));
    CHECK(tls_loss(half, p) == approx(p.delta0 + 0.5 / p.q_tls).epsilon(1e-14));
    CHECK_THROWS_AS(tls_loss(-1.0, p), std::domain_error);
    CHECK_THROWS_AS(tls_loss(1.0, TlsLossParams{1e-6, -1.0, 1.0, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(tls_loss(1.0, TlsLossParams{1e-6, 1e5, 1.0, 1.5}), std::invalid_argument);
}

TEST_CASE("saturation law closed forms")
{
    SaturationParams const p{4e-6, 0.71e-9, 1.0};
    CHECK(saturation_loss(0.0, p) == 4e-6);
    CHECK(saturation_loss(p.p_sat, p) == approx(2e-6).epsilon(1e-14));
    CHECK(saturation_loss(3.0 * p.p_sat, p) == approx(1e-6).epsilon(1e-14));
    CHECK_THROWS_AS(saturation_loss(-1.0, p), std::domain_error);
    CHECK_THROWS_AS(saturation_loss(1.0, SaturationParams{4e-6, 0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(saturation_loss(1.0, SaturationParams{4e-6, 1e-9, 2.5}),
                    std::invalid_argument);
}

TEST_CASE("T1e inversion")
{
    double const t1e = invert_psat_for_t1e(0.71e-9, 30e-9, {0.21}, 2.0);
    CHECK(rel_err(t1e, oracle_t1e(0.71e-9, 30e-9, 0.21, 2.0)) < 1e-9);
    CHECK(t1e == approx(34.4143e-6).epsilon(1e-5));
    CHECK(rel_err(saturation_power(t1e, 30e-9, {0.21}, 2.0), 0.71e-9) < 1e-12);
    CHECK(invert_psat_for_t1e(0.355e-9, 30e-9, {0.21}, 2.0) == approx(2.0 * t1e).epsilon(1e-14));
    CHECK_THROWS_AS(invert_psat_for_t1e(0.0, 30e-9, {0.21}, 2.0), std::domain_error);
    CHECK_THROWS_AS(saturation_power(1e-6, 30e-9, {-0.21}, 2.0), std::domain_error);
}

TEST_CASE("noiseless TLS sweep is recovered exactly")
{
    auto const n = log_grid(0.1, 1e6, 41);
    auto const sweep = simulate_tls_sweep(tls_truth, n, NoiseSpec{});
    auto const fit = fit_tls_law(sweep);
    CHECK(fit.fit.converged);
    CHECK(rel_err(fit.params.delta0, 1e-6) < 1e-6);
    CHECK(rel_err(fit.params.q_tls, 1e5) < 1e-6);
    CHECK(rel_err(fit.params.n_c, 1.0) < 1e-6);
    CHECK(rel_err(fit.params.beta, 0.2) < 1e-6);
    CHECK_FALSE(fit.weakly_constrained);
    CHECK(fit.warnings.empty());
}

TEST_CASE("noisy TLS sweep recovers beta")
{
    auto const n = log_grid(0.1, 1e6, 41);
    auto const sweep
        = simulate_tls_sweep(tls_truth, n, NoiseSpec{NoiseKind::gaussian, NoiseLevel::relative, 0.05, 11});
    auto const fit = fit_tls_law(sweep);
    CHECK(fit.fit.converged);
    CHECK(std::abs(fit.params.beta - 0.2) < 0.05);
}

TEST_CASE("doubling Q_TLS halves the low-power loss drop")
{
    auto const n = log_grid(0.1, 1e6, 41);
    TlsLossParams doubled = tls_truth;
    doubled.q_tls *= 2.0;
    auto const a = fit_tls_law(simulate_tls_sweep(tls_truth, n, NoiseSpec{}));
    auto const b = fit_tls_law(simulate_tls_sweep(doubled, n, NoiseSpec{}));
    double const drop_a = tls_loss(0.0, a.params) - a.params.delta0;
    double const drop_b = tls_loss(0.0, b.params) - b.params.delta0;
    CHECK(drop_b / drop_a == approx(0.5).epsilon(1e-6));
}

TEST_CASE("a narrow sweep is flagged as weakly constrained")
{
    auto const n = log_grid(10.0, 500.0, 12);
    auto const fit = fit_tls_law(simulate_tls_sweep(tls_truth, n, NoiseSpec{}));
    CHECK(fit.weakly_constrained);
    REQUIRE_FALSE(fit.notes.empty());
    CHECK(fit.notes.front().find("2 decades") != std::string::npos);
}

TEST_CASE("a constant sweep pins beta with a warning")
{
    std::vector<SweepPoint> flat;
    for (double x : log_grid(0.1, 1e6, 21))
    {
        flat.push_back({x, 1e5});
    }
    auto const fit = fit_tls_law(flat);
    CHECK_FALSE(fit.warnings.empty());
    for (double x : {0.1, 1e3, 1e6})
    {
        CHECK(1.0 / tls_loss(x, fit.params) == approx(1e5).epsilon(1e-6));
    }
}

TEST_CASE("sweep validation")
{
    std::vector<SweepPoint> few{{1, 1}, {2, 1}, {3, 1}};
    CHECK_THROWS_AS(fit_tls_law(few), std::invalid_argument);
    CHECK_THROWS_AS(fit_saturation(few), std::invalid_argument);
    std::vector<SweepPoint> bad{{1, 1}, {2, 1}, {3, -1}, {4, 1}, {5, 1}, {6, 1}};
    CHECK_THROWS_AS(fit_tls_law(bad), std::invalid_argument);
}

TEST_CASE("saturation fits")
{
    auto const p = log_grid(1e-12, 1e-6, 61);
    for (double p_sat : {0.71e-9, 0.44e-9})
    {
        CAPTURE(p_sat);
        SaturationParams const truth{4e-6, p_sat, 1.0};
        auto const exact = fit_saturation(simulate_saturation_sweep(truth, p, NoiseSpec{}));
        CHECK(exact.fit.converged);
        CHECK(rel_err(exact.params.p_sat, p_sat) < 1e-6);
        CHECK(rel_err(exact.params.qb0_inverse, 4e-6) < 1e-6);
        CHECK(rel_err(exact.params.epsilon, 1.0) < 1e-6);
        CHECK_FALSE(exact.weakly_constrained);

        auto const noisy = fit_saturation(simulate_saturation_sweep(
            truth, p, NoiseSpec{NoiseKind::gaussian, NoiseLevel::relative, 0.1, 5}));
        CHECK(rel_err(noisy.params.p_sat, p_sat) < 0.15);
    }
    // entirely below the knee
    auto const low = log_grid(1e-14, 1e-12, 21);
    auto const fit = fit_saturation(simulate_saturation_sweep({4e-6, 0.71e-9, 1.0}, low, NoiseSpec{}));
    CHECK(fit.weakly_constrained);
}

TEST_CASE("property: loss laws are monotone")
{
    test::Gen gen(51);
    for (int trial = 0; trial < 500; ++trial)
    {
        TlsLossParams const t{gen.log_uniform(1e-8, 1e-5), gen.log_uniform(1e3, 1e7),
                              gen.log_uniform(0.1, 100.0), gen.uniform(0.05, 1.0)};
        double const n1 = gen.log_uniform(1e-3, 1e6);
        double const n2 = n1 * gen.log_uniform(1.01, 100.0);
        CHECK(tls_loss(n2, t) < tls_loss(n1, t));

        double const e1 = gen.uniform(0.1, 1.9);
        double const e2 = e1 + gen.uniform(0.01, 2.0 - e1);
        SaturationParams const s1{gen.log_uniform(1e-7, 1e-4), gen.log_uniform(1e-11, 1e-7), e1};
        SaturationParams s2 = s1;
        s2.epsilon = e2;
        double const p1 = gen.log_uniform(1e-13, 1e-5);
        double const p2 = p1 * gen.log_uniform(1.01, 100.0);
        CHECK(saturation_loss(p2, s1) < saturation_loss(p1, s1));
        CHECK(saturation_loss(p1, s2) < saturation_loss(p1, s1));
    }
}

TEST_CASE("property: TLS fits are invariant under photon rescaling")
{
    test::Gen gen(52);
    for (int trial = 0; trial < 10; ++trial)
    {
        double const c = gen.log_uniform(1e-2, 1e2);
        TlsLossParams const t{gen.log_uniform(1e-7, 1e-5), gen.log_uniform(3e4, 3e5), 1.0,
                              gen.uniform(0.1, 0.45)};
        TlsLossParams scaled = t;
        scaled.n_c *= c;
        auto const n = log_grid(0.1, 1e6, 41);
        std::vector<double> cn;
        for (double v : n)
        {
            cn.push_back(c * v);
        }
        std::uint64_t const seed = gen.bits();
        NoiseSpec const noise{NoiseKind::gaussian, NoiseLevel::relative, 0.02, seed};
        auto const a = fit_tls_law(simulate_tls_sweep(t, n, noise));
        auto const b = fit_tls_law(simulate_tls_sweep(scaled, cn, noise));
        CAPTURE(trial);
        double const beta_ci = 2.0 * std::max(a.uncertainties.beta, b.uncertainties.beta);
        double const q_ci = 2.0 * std::max(a.uncertainties.q_tls, b.uncertainties.q_tls);
        CHECK(std::abs(a.params.beta - b.params.beta) <= beta_ci + 1e-9);
        CHECK(std::abs(a.params.q_tls - b.params.q_tls) <= q_ci + 1e-9 * t.q_tls);
        CHECK(b.params.n_c / a.params.n_c == approx(c).epsilon(1e-3));
        // interacting-TLS signature survives the fit
        CHECK(a.params.beta < 0.5);
    }
}
