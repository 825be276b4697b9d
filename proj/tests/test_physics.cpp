// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file test_physics.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <doctest.h>

#include "esrtk/physics.hpp"
#include "testing.hpp"

using namespace esr;
using esr::test::rel_err;

namespace
{
// Oracle: the same relations written directly from SI constants
constexpr double h = 6.62607015e-34;
constexpr double mu_b = 9.2740100783e-24;
constexpr double hbar = h / (2 * std::numbers::pi);

double oracle_field(double f, double g)
{
    return h * f / (g * mu_b);
}
double oracle_rate(double dB, double g)
{
    return g * mu_b * dB / h;
}
}  // namespace

TEST_CASE("constants")
{
    CHECK(constants::planck_h == h);
    CHECK(constants::bohr_magneton == mu_b);
    CHECK(rel_err(constants::hbar, 1.054571817e-34) < 1e-9);
    // free electron: gamma_e = g_e muB / hbar
    CHECK(rel_err(constants::electron_gyromagnetic_ratio,
                  constants::free_electron_g * mu_b / hbar)
          < 1e-9);
}

TEST_CASE("resonance field")
{
    SpinSpecies const g2{2.0, 0.5, "g2"};
    double const b = resonance_field(4.47e9, g2);
    CHECK(b == test::approx(oracle_field(4.47e9, 2.0)).epsilon(1e-14));
    CHECK(b == test::approx(0.159686).epsilon(1e-5));
    CHECK(resonance_frequency(b, g2) == test::approx(4.47e9).epsilon(1e-14));
    CHECK_THROWS_AS(resonance_frequency(0.0, g2), std::domain_error);
}

TEST_CASE("g factor from peak")
{
    double const g = g_factor_from_peak(0.162, 4.47e9);
    CHECK(g == test::approx(h * 4.47e9 / (mu_b * 0.162)).epsilon(1e-14));
    CHECK(g == test::approx(1.97143).epsilon(1e-5));
}

TEST_CASE("linewidth chain")
{
    double const rate = linewidth_to_rate(1.2e-3, 2.0);
    CHECK(rate == test::approx(oracle_rate(1.2e-3, 2.0)).epsilon(1e-14));
    CHECK(rate == test::approx(33.5910e6).epsilon(1e-5));
    CHECK(rate_to_t2e(rate) == test::approx(29.7699e-9).epsilon(1e-5));
    CHECK(rate_to_t2e(670e6) == test::approx(1.49254e-9).epsilon(1e-5));
    CHECK(linewidth_to_rate(5e-3, 2.0) == test::approx(139.962e6).epsilon(1e-5));
}

TEST_CASE("hyperfine and half field")
{
    double const split = hyperfine_splitting_field(1.42e9, 2.0);
    CHECK(split == test::approx(oracle_field(1.42e9, 2.0)).epsilon(1e-14));
    CHECK(split == test::approx(50.728e-3).epsilon(1e-4));
    CHECK(hyperfine_splitting_field(670e6, 2.0) == test::approx(23.935e-3).epsilon(1e-4));
    CHECK(half_field_position(0.162) == 0.081);
}

TEST_CASE("gyromagnetic ratio")
{
    CHECK(gyromagnetic_ratio(2.0) == test::approx(2.0 * mu_b / hbar).epsilon(1e-14));
    CHECK(gyromagnetic_ratio(2.0) == test::approx(1.75882e11).epsilon(1e-5));
}

TEST_CASE("invalid arguments")
{
    CHECK_THROWS_AS(resonance_field(-1.0, {}), std::domain_error);
    CHECK_THROWS_AS(resonance_field(1e9, {0.0, 0.5, ""}), std::invalid_argument);
    CHECK_THROWS_AS(validate(SpinSpecies{2.0, 0.7, ""}), std::invalid_argument);
    CHECK_NOTHROW(validate(SpinSpecies{2.0, 1.0, "triplet"}));
    CHECK_THROWS_AS(g_factor_from_peak(0.0, 4.47e9), std::domain_error);
    CHECK_THROWS_AS(linewidth_to_rate(-1e-3, 2.0), std::domain_error);
    CHECK_THROWS_AS(rate_to_t2e(0.0), std::domain_error);
    CHECK_THROWS_AS(resonance_field(std::nan(""), {}), std::domain_error);
    CHECK_THROWS_AS(half_field_position(0.0), std::domain_error);
}

TEST_CASE("property: field and frequency are inverse")
{
    test::Gen gen(11);
    for (int i = 0; i < 500; ++i)
    {
        SpinSpecies const s{gen.uniform(0.5, 4.0), 0.5, ""};
        double const f = gen.log_uniform(1e6, 1e12);
        CAPTURE(i);
        CHECK(rel_err(resonance_frequency(resonance_field(f, s), s), f) < 1e-13);
        double const b = resonance_field(f, s);
        CHECK(rel_err(g_factor_from_peak(b, f), s.g_factor) < 1e-13);
    }
}

TEST_CASE("property: rate and T2e scale linearly")
{
    test::Gen gen(12);
    for (int i = 0; i < 500; ++i)
    {
        double const g = gen.uniform(0.5, 4.0);
        double const dB = gen.log_uniform(1e-6, 1e-1);
        double const k = gen.uniform(1.5, 10.0);
        CAPTURE(i);
        CHECK(rel_err(linewidth_to_rate(k * dB, g), k * linewidth_to_rate(dB, g)) < 1e-13);
        CHECK(rel_err(rate_to_t2e(linewidth_to_rate(dB, g)) * linewidth_to_rate(dB, g), 1.0)
              < 1e-14);
    }
}
