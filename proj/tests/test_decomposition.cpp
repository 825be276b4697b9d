// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file test_decomposition.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "esrtk/decomposition.hpp"
#include "esrtk/physics.hpp"
#include "esrtk/synthetic.hpp"
#include "testing.hpp"

using namespace esr;
using esr::test::approx;
using esr::test::rel_err;

namespace
{
double const f0 = 4.47e9;

CompositeSpectrumModel silicon(double scale_a = 1.0, double scale_b = 1.0)
{
    CompositeSpectrumModel m;
    m.lorentzians = {{0.162, 1.2e-3, 6e-6 * scale_a, "A"}, {0.162, 0.0239, 2.5e-6 * scale_b, "B"}};
    m.background = PedestalBackground{0.05, 5e-3, 1.5e-6, 0.2};
    return m;
}

EsrSpectrum spectrum_of(CompositeSpectrumModel const& m, std::uint64_t seed = 0, double snr = 0.0,
                        std::size_t n = 3001)
{
    return simulate_esr_spectrum(m, linear_grid(0.0, 0.3, n),
                                 NoiseSpec{NoiseKind::gaussian, NoiseLevel::snr, snr, seed});
}

DecompositionResult two_lorentzian(EsrSpectrum const& s)
{
    return decompose(s, make_standard_template("two-lorentzian", s, f0), f0);
}

EsrSpectrum scaled(EsrSpectrum s, double k)
{
    for (double& v : s.qb_inverse)
    {
        v *= k;
    }
    return s;
}
}  // namespace

TEST_CASE("noiseless two-peak spectrum is recovered exactly")
{
    auto const r = two_lorentzian(spectrum_of(silicon()));
    REQUIRE(r.converged);
    auto const* a = r.find_peak("A");
    auto const* b = r.find_peak("B");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(rel_err(a->center, 0.162) < 1e-6);
    CHECK(rel_err(a->fwhm, 1.2e-3) < 1e-6);
    CHECK(rel_err(a->amplitude, 6e-6) < 1e-6);
    CHECK(rel_err(b->fwhm, 0.0239) < 1e-6);
    CHECK(rel_err(b->amplitude, 2.5e-6) < 1e-6);
    // derived quantities follow the closed forms
    CHECK(a->area == approx(std::numbers::pi * a->amplitude * a->fwhm / 2.0).epsilon(1e-14));
    CHECK(a->g_factor == approx(g_factor_from_peak(a->center, f0)).epsilon(1e-14));
    CHECK(a->fwhm_as_rate == approx(linewidth_to_rate(a->fwhm, a->g_factor)).epsilon(1e-14));
    CHECK(a->t2e == approx(1.0 / a->fwhm_as_rate).epsilon(1e-14));
    CHECK(a->shape == "lorentzian");
    CHECK(r.total_area
          == approx(a->area + b->area + r.pedestal_area).epsilon(1e-12));
    REQUIRE(r.model.background);
    CHECK(rel_err(r.model.background->height, 1.5e-6) < 1e-5);
    CHECK(r.fit.chi_squared < 1e-20);
}

TEST_CASE("decomposition input errors")
{
    auto const s = spectrum_of(silicon());
    DecompositionTemplate empty;
    CHECK_THROWS_AS(decompose(s, empty, f0), std::invalid_argument);
    CHECK_THROWS_AS(decompose(s, make_standard_template("two-lorentzian", s, f0), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_standard_template("three-lorentzian", s, f0), std::invalid_argument);
    auto t = make_standard_template("one-lorentzian", s, f0);
    t.lorentzians[0].center.initial = 0.5;
    CHECK_THROWS_AS(decompose(s, t, f0), std::invalid_argument);
}

TEST_CASE("scaling the spectrum scales amplitudes and areas only")
{
    auto const s = spectrum_of(silicon(), 4, 40.0);
    auto const base = two_lorentzian(s);
    for (double k : {0.25, 3.0})
    {
        CAPTURE(k);
        auto const r = two_lorentzian(scaled(s, k));
        for (char const* label : {"A", "B"})
        {
            auto const* p = r.find_peak(label);
            auto const* q = base.find_peak(label);
            CHECK(p->center == approx(q->center).epsilon(1e-6));
            CHECK(p->fwhm == approx(q->fwhm).epsilon(1e-5));
            CHECK(p->amplitude == approx(k * q->amplitude).epsilon(1e-5));
            CHECK(p->area == approx(k * q->area).epsilon(1e-5));
        }
    }
}

TEST_CASE("half-field peak")
{
    auto with = silicon();
    with.gaussians = {{0.081, 0.02, 1.5e-6, "half-field"}};
    auto const s = spectrum_of(with, 1, 20.0, 9001);
    auto const found = detect_half_field_peak(s, 0.162);
    REQUIRE(found.detected);
    CHECK(std::abs(found.peak->center / 0.162 - 0.5) < 0.02);
    CHECK(found.delta_aic > decisive_delta_aic);

    auto const none = detect_half_field_peak(spectrum_of(silicon(), 1, 20.0, 9001), 0.162);
    CHECK_FALSE(none.detected);
    CHECK_FALSE(none.peak);

    // the field range must reach down to a quarter of the g=2 field
    auto const narrow = simulate_esr_spectrum(silicon(), linear_grid(0.1, 0.3, 501), NoiseSpec{});
    CHECK_THROWS_AS(detect_half_field_peak(narrow, 0.162), std::invalid_argument);
    CHECK_THROWS_AS(detect_half_field_peak(s, 0.0), std::invalid_argument);
}

TEST_CASE("model selection prefers two peaks when they are there")
{
    auto const s = spectrum_of(silicon(), 2, 20.0);
    std::vector<DecompositionTemplate> candidates{
        make_standard_template("one-lorentzian", s, f0),
        make_standard_template("two-lorentzian", s, f0)};
    auto const sel = auto_model_select(s, candidates, f0);
    CHECK(sel.best.template_name == "two-lorentzian");
    CHECK(sel.ranking.size() == 2);
    CHECK(sel.ranking[1].delta_aic > decisive_delta_aic);
    CHECK(sel.note.find("decisive") == 0);
    CHECK_THROWS_AS(auto_model_select(s, {candidates[0]}, f0), std::invalid_argument);
}

TEST_CASE("identical candidates tie to the first listed")
{
    auto const s = spectrum_of(silicon(), 3, 20.0);
    auto first = make_standard_template("two-lorentzian", s, f0);
    auto second = first;
    first.name = "first";
    second.name = "second";
    auto const sel = auto_model_select(s, {second, first}, f0);
    CHECK(sel.best.template_name == "second");
    CHECK(sel.note.find("tie") != std::string::npos);
}

TEST_CASE("treatment comparison")
{
    auto const ref = two_lorentzian(spectrum_of(silicon()));

    auto const same = compare_treatments({{"as-is", ref}, {"again", ref}});
    CHECK(same.labels == std::vector<std::string>{"as-is", "again"});
    CHECK(same.total_area_ratios[1] == 1.0);
    for (double r : same.per_peak_area_ratios[1])
    {
        CHECK(r == 1.0);
    }

    auto const quarter = two_lorentzian(scaled(spectrum_of(silicon()), 0.25));
    auto const q = compare_treatments({{"as-is", ref}, {"hf", quarter}});
    CHECK(q.total_area_ratios[1] == approx(0.25).epsilon(1e-6));
    for (double r : q.per_peak_area_ratios[1])
    {
        CHECK(r == approx(0.25).epsilon(1e-6));
    }
    CHECK(q.selective_reductions[1].empty());
    CHECK(q.notes.find("4-fold") != std::string::npos);

    auto const annealed = two_lorentzian(spectrum_of(silicon(0.2)));
    auto const a = compare_treatments({{"as-is", ref}, {"annealed", annealed}});
    CHECK(a.per_peak_area_ratios[1][0] == approx(0.2).epsilon(1e-5));
    CHECK(a.per_peak_area_ratios[1][1] == approx(1.0).epsilon(1e-5));
    CHECK(a.selective_reductions[1] == std::vector<std::string>{"A"});

    auto const one = decompose(spectrum_of(silicon()),
                               make_standard_template("one-lorentzian", spectrum_of(silicon()), f0),
                               f0);
    CHECK_THROWS_AS(compare_treatments({{"as-is", ref}, {"other", one}}), std::invalid_argument);
    CHECK_THROWS_AS(compare_treatments({{"as-is", ref}}), std::invalid_argument);
}

TEST_CASE("property: peak labels follow width, not seed order")
{
    test::Gen gen(71);
    for (int trial = 0; trial < 8; ++trial)
    {
        double const wa = gen.log_uniform(0.8e-3, 2e-3);
        double const wb = gen.log_uniform(15e-3, 30e-3);
        CompositeSpectrumModel m = silicon();
        m.lorentzians = {{0.162, wb, 2.5e-6, ""}, {0.162, wa, 6e-6, ""}};
        auto const s = spectrum_of(m, gen.bits(), 30.0);
        auto const r = two_lorentzian(s);
        CAPTURE(trial);
        REQUIRE(r.converged);
        CHECK(r.find_peak("A")->fwhm < r.find_peak("B")->fwhm);
        CHECK(rel_err(r.find_peak("A")->fwhm, wa) < 0.1);
        CHECK(rel_err(r.find_peak("B")->fwhm, wb) < 0.2);
    }
}

TEST_CASE("property: decomposition is equivariant under loss scaling")
{
    test::Gen gen(72);
    for (int trial = 0; trial < 5; ++trial)
    {
        auto const s = spectrum_of(silicon(gen.uniform(0.5, 2.0), gen.uniform(0.5, 2.0)),
                                   gen.bits(), 30.0);
        double const k = gen.log_uniform(0.1, 10.0);
        auto const a = two_lorentzian(s);
        auto const b = two_lorentzian(scaled(s, k));
        CAPTURE(trial);
        CHECK(b.total_area == approx(k * a.total_area).epsilon(1e-4));
        CHECK(b.find_peak("A")->center == approx(a.find_peak("A")->center).epsilon(1e-6));
    }
}
