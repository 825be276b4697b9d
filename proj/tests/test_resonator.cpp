// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file test_resonator.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "esrtk/resonator.hpp"
#include "esrtk/synthetic.hpp"
#include "testing.hpp"

using namespace esr;
using esr::test::approx;
using esr::test::rel_err;

namespace
{
double const hbar = 6.62607015e-34 / (2.0 * std::numbers::pi);

//! Notch response written out term by term.
Complex oracle_s21(double f, double f0, double ql, double qc, double phi, double a,
                   double alpha, double tau)
{
    Complex const i(0.0, 1.0);
    Complex const env = a * std::exp(i * alpha) * std::exp(-2.0 * std::numbers::pi * i * f * tau);
    return env * (1.0 - (ql / qc) * std::exp(i * phi) / (1.0 + 2.0 * i * ql * (f / f0 - 1.0)));
}

ResonatorFit with_qi(double qi)
{
    return make_resonator(4.47e9, qi, 5e4);
}
}  // namespace

TEST_CASE("loaded Q and the notch model")
{
    double const ql = loaded_q(1e5, 5e4, 0.0);
    CHECK(ql == approx(1.0 / (1.0 / 1e5 + 1.0 / 5e4)).epsilon(1e-14));
    // diameter correction: 1/Ql = 1/Qi + cos(phi)/Qc
    CHECK(loaded_q(2e5, 1e5, 0.1) == approx(1.0 / (5e-6 + std::cos(0.1) / 1e5)).epsilon(1e-14));

    auto const r = make_resonator(4.47e9, 2e5, 1e5, 0.1, 0.3, 0.4, 2e-8);
    for (double f : {4.4699e9, 4.47e9, 4.47003e9})
    {
        Complex const expected = oracle_s21(f, r.f0, r.q_loaded, r.q_coupling, 0.1, 0.3, 0.4, 2e-8);
        Complex const got = notch_s21(r, f);
        CHECK(std::abs(got - expected) < 1e-13);
    }
    // on resonance with no background the dip depth is Ql/Qc
    auto const bare = make_resonator(4.47e9, 1e5, 5e4);
    CHECK(std::abs(notch_s21(bare, 4.47e9)) == approx(1.0 - bare.q_loaded / 5e4).epsilon(1e-14));
    CHECK(std::abs(notch_s21(bare, 4.47e9)) == approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("resonator validation")
{
    CHECK_THROWS_AS(make_resonator(4.47e9, -1.0, 5e4), std::invalid_argument);
    CHECK_THROWS_AS(make_resonator(0.0, 1e5, 5e4), std::invalid_argument);
    auto r = make_resonator(4.47e9, 1e5, 5e4);
    r.q_loaded *= 2.0;
    CHECK_THROWS_AS(validate(r), std::invalid_argument);

    ComplexTrace t;
    t.frequencies = {1.0, 2.0};
    t.s21 = {1.0, 1.0};
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t.frequencies = linear_grid(1.0, 16.0, 16);
    t.s21.assign(16, Complex(1.0, 0.0));
    CHECK_NOTHROW(validate(t));
    std::swap(t.frequencies[3], t.frequencies[4]);
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
}

TEST_CASE("noiseless round trip")
{
    auto const truth = make_resonator(4.47e9, 2e5, 1e5, 0.1, 0.3, 0.4, 2e-8);
    auto const grid = resonance_grid(truth, 4001);
    auto const trace = simulate_s21(truth, grid, NoiseSpec{NoiseKind::complex_gaussian});
    auto const fit = fit_s21_notch(trace);
    CHECK(fit.converged);
    CHECK(rel_err(fit.f0, truth.f0) < 1e-9);
    CHECK(rel_err(fit.q_internal, truth.q_internal) < 1e-6);
    CHECK(rel_err(fit.q_coupling, truth.q_coupling) < 1e-6);
    CHECK(rel_err(fit.q_loaded, truth.q_loaded) < 1e-6);
    CHECK(std::abs(fit.mismatch_angle - 0.1) < 1e-6);
    CHECK(rel_err(fit.cable_delay, 2e-8) < 1e-6);
}

TEST_CASE("noisy fit recovers Qi and Qc")
{
    auto const truth = make_resonator(4.47e9, 1e5, 5e4);
    auto const grid = resonance_grid(truth, 2001);
    auto const trace
        = simulate_s21(truth, grid, NoiseSpec{NoiseKind::complex_gaussian, NoiseLevel::snr, 40.0, 7});
    auto const fit = fit_s21_notch(trace);
    CHECK(fit.converged);
    CHECK(rel_err(fit.q_internal, 1e5) < 0.05);
    CHECK(rel_err(fit.q_coupling, 5e4) < 0.05);
    CHECK(fit.uncertainties.q_internal > 0.0);
    CHECK(std::abs(fit.q_internal - 1e5) < 5.0 * fit.uncertainties.q_internal);
}

TEST_CASE("a flat trace has no resonance")
{
    ComplexTrace t;
    t.frequencies = linear_grid(4.46e9, 4.48e9, 501);
    Xoshiro256 rng(3);
    for (std::size_t i = 0; i < 501; ++i)
    {
        t.s21.emplace_back(1.0 + 0.01 * rng.normal(), 0.01 * rng.normal());
    }
    CHECK_THROWS_AS(fit_s21_notch(t), NoResonanceError);
}

TEST_CASE("ESR spectrum assembly")
{
    std::vector<std::pair<double, ResonatorFit>> fits{
        {0.1, with_qi(8e4)}, {0.0, with_qi(1e5)}, {0.2, with_qi(9e4)}};
    auto const s = build_esr_spectrum(fits, ReferencePolicy::zero_field_only);
    REQUIRE(s.fields.size() == 3);
    CHECK(s.fields == std::vector<double>{0.0, 0.1, 0.2});
    CHECK(s.qb_inverse[0] == 0.0);
    CHECK(s.qb_inverse[1] == approx(1.0 / 8e4 - 1.0 / 1e5).epsilon(1e-12));
    CHECK(s.qb_inverse[1] == approx(2.5e-6).epsilon(1e-12));
    CHECK(s.qb_inverse[2] == approx(1.0 / 9e4 - 1e-5).epsilon(1e-12));
    CHECK(s.reference_field == 0.0);
    CHECK(s.reference_qi_inverse == approx(1e-5).epsilon(1e-15));
    CHECK(s.resonator_f0 == 4.47e9);
    CHECK(s.warnings.empty());

    std::vector<std::pair<double, ResonatorFit>> no_zero{{0.1, with_qi(8e4)}, {0.2, with_qi(9e4)}};
    CHECK_THROWS_AS(build_esr_spectrum(no_zero, ReferencePolicy::zero_field_only),
                    std::invalid_argument);
    auto const lowest = build_esr_spectrum(no_zero, ReferencePolicy::lowest_field);
    CHECK(lowest.reference_field == 0.1);
    CHECK(lowest.qb_inverse[0] == 0.0);
    CHECK(lowest.warnings.size() == 1);

    std::vector<std::pair<double, ResonatorFit>> dup{
        {0.0, with_qi(1e5)}, {0.1, with_qi(8e4)}, {0.1, with_qi(9e4)}};
    CHECK_THROWS_AS(build_esr_spectrum(dup), std::invalid_argument);
    std::vector<std::pair<double, ResonatorFit>> one{{0.0, with_qi(1e5)}};
    CHECK_THROWS_AS(build_esr_spectrum(one), std::invalid_argument);
}

TEST_CASE("photon number and circulating power")
{
    auto r = make_resonator(4.47e9, 1e5 / 9.0, 1e5);
    REQUIRE(r.q_loaded == approx(1e4).epsilon(1e-12));
    CHECK(circulating_power(1e-9, r) == approx(2e-6).epsilon(1e-12));
    double const w = 2.0 * std::numbers::pi * 4.47e9;
    CHECK(photon_number(1e-9, r) == approx(2.0 * 1e8 * 1e-9 / (1e5 * hbar * w * w)).epsilon(1e-9));
    CHECK(photon_number(1e-9, r) == approx(2.40425e7).epsilon(1e-5));
    CHECK(photon_number(0.0, r) == 0.0);
    CHECK_THROWS_AS(photon_number(-1.0, r), std::invalid_argument);
}

TEST_CASE("property: photon number is linear in drive power")
{
    test::Gen gen(41);
    for (int trial = 0; trial < 200; ++trial)
    {
        auto const r = make_resonator(gen.uniform(4e9, 8e9), gen.log_uniform(1e4, 1e6),
                                      gen.log_uniform(1e4, 1e6), gen.uniform(-0.5, 0.5));
        double const p = gen.log_uniform(1e-18, 1e-6);
        double const k = gen.log_uniform(1e-3, 1e3);
        CHECK(photon_number(k * p, r) == approx(k * photon_number(p, r)).epsilon(1e-12));
        CHECK(circulating_power(k * p, r) == approx(k * circulating_power(p, r)).epsilon(1e-12));
    }
}

TEST_CASE("property: spectrum assembly ignores input order")
{
    test::Gen gen(42);
    for (int trial = 0; trial < 100; ++trial)
    {
        int const n = gen.integer(2, 40);
        std::vector<std::pair<double, ResonatorFit>> fits;
        for (int i = 0; i < n; ++i)
        {
            fits.emplace_back(0.005 * i, with_qi(gen.log_uniform(1e4, 1e6)));
        }
        auto const ref = build_esr_spectrum(fits, ReferencePolicy::zero_field_only);
        for (int i = n - 1; i > 0; --i)
        {
            std::swap(fits[static_cast<std::size_t>(i)],
                      fits[static_cast<std::size_t>(gen.integer(0, i))]);
        }
        auto const shuffled = build_esr_spectrum(fits, ReferencePolicy::zero_field_only);
        CHECK(shuffled.fields == ref.fields);
        CHECK(shuffled.qb_inverse == ref.qb_inverse);
    }
}

TEST_CASE("property: noiseless fits invert the simulator")
{
    test::Gen gen(43);
    for (int trial = 0; trial < 20; ++trial)
    {
        auto const truth = make_resonator(gen.uniform(4e9, 6e9), gen.log_uniform(1e4, 1e6),
                                          gen.log_uniform(1e4, 1e6), gen.uniform(-0.3, 0.3),
                                          gen.uniform(0.1, 2.0), gen.uniform(-3.0, 3.0),
                                          gen.uniform(0.0, 5e-8));
        auto const grid = resonance_grid(truth, 2001);
        auto const fit = fit_s21_notch(simulate_s21(truth, grid, NoiseSpec{}));
        CAPTURE(trial);
        CHECK(rel_err(fit.q_internal, truth.q_internal) < 1e-6);
        CHECK(rel_err(fit.q_coupling, truth.q_coupling) < 1e-6);
    }
}
