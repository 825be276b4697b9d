// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file decomposition.hpp
//! Decomposition of ESR loss spectra into Lorentzian/Gaussian components,
//! model selection, and comparison across surface treatments.
//---------------------------------------------------------------------------//
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "esrtk/fitting.hpp"
#include "esrtk/lineshapes.hpp"
#include "esrtk/resonator.hpp"

namespace esr
{
//---------------------------------------------------------------------------//
// Templates: a composite model whose parameters carry bounds and seeds.
//---------------------------------------------------------------------------//
struct PeakTemplate
{
    ParameterSpec center;
    ParameterSpec fwhm;
    ParameterSpec amplitude;
    std::string label;
};

struct PedestalTemplate
{
    ParameterSpec onset;
    ParameterSpec width;
    ParameterSpec height;
    ParameterSpec decay_rate;  //!< 1 / decay_scale [1/T]; zero is a flat plateau
};

//! Symmetric Lorentzian pair with tied width and amplitude.
struct SatellitePairTemplate
{
    ParameterSpec center;
    ParameterSpec splitting;  //!< full separation of the pair [T]
    ParameterSpec fwhm;
    ParameterSpec amplitude;
    std::string label = "H";
};

struct DecompositionTemplate
{
    std::string name;
    std::vector<PeakTemplate> lorentzians;
    std::vector<PeakTemplate> gaussians;
    std::optional<PedestalTemplate> pedestal;
    std::optional<SatellitePairTemplate> satellites;
    ParameterSpec offset{"offset", 0.0};

    std::size_t component_count() const;
    std::size_t parameter_count() const;
};

//---------------------------------------------------------------------------//
struct PeakRecord
{
    std::string label;
    std::string shape;  //!< "lorentzian" or "gaussian"
    double center = 0.0;
    double center_uncertainty = 0.0;
    double fwhm = 0.0;
    double fwhm_uncertainty = 0.0;
    double amplitude = 0.0;
    double amplitude_uncertainty = 0.0;
    double fwhm_as_rate = 0.0;  //!< [Hz]
    double t2e = 0.0;           //!< [s]
    double area = 0.0;
    double area_uncertainty = 0.0;
    double g_factor = 0.0;
    std::vector<std::string> warnings;
};

struct SatelliteRecord
{
    double center = 0.0;
    double splitting_field = 0.0;
    double splitting_field_uncertainty = 0.0;
    double splitting_frequency = 0.0;  //!< [Hz]
    double splitting_frequency_uncertainty = 0.0;
    double g_factor = 0.0;
};

struct DecompositionResult
{
    std::string template_name;
    CompositeSpectrumModel model;
    FitResult fit;
    std::vector<PeakRecord> per_peak;
    std::optional<SatelliteRecord> satellites;
    double pedestal_area = 0.0;  //!< integrated over the spectrum's field range
    double pedestal_area_uncertainty = 0.0;
    double total_area = 0.0;  //!< peak areas plus pedestal area
    double total_area_uncertainty = 0.0;
    double field_min = 0.0;
    double field_max = 0.0;
    double resonator_f0 = 0.0;
    bool converged = false;
    std::vector<std::string> warnings;

    PeakRecord const* find_peak(std::string const& label) const;
};

//! Fit the template to the spectrum and derive per-peak linewidth, rate,
//! T2e, g-factor and area.
DecompositionResult decompose(EsrSpectrum const& spectrum,
                              DecompositionTemplate const& tmpl,
                              double resonator_f0,
                              FitOptions const& options = {});

//---------------------------------------------------------------------------//
// Template construction
//---------------------------------------------------------------------------//
struct TemplateOptions
{
    double g_seed = 2.0;
    std::size_t lorentzian_count = 1;
    bool pedestal = true;
    bool hyperfine_satellites = false;
    double hyperfine_frequency = 1.42e9;  //!< atomic hydrogen [Hz]
    //! Seed for a half-field Gaussian; omitted when empty.
    std::optional<GaussianPeak> half_field;
};

inline constexpr std::size_t min_decomposition_points = 20;

//! Data-seeded template: peaks share a center at the spectrum maximum,
//! with widths seeded at 1 mT, 20 mT, ...
DecompositionTemplate
make_template(EsrSpectrum const& spectrum, double resonator_f0, TemplateOptions const& options);

//! Named standard templates: one-lorentzian, two-lorentzian,
//! one-lorentzian-hyperfine, two-lorentzian-hyperfine.
std::vector<std::string> standard_template_names();
DecompositionTemplate make_standard_template(std::string const& name,
                                             EsrSpectrum const& spectrum,
                                             double resonator_f0,
                                             TemplateOptions options = {});

//---------------------------------------------------------------------------//
struct CandidateSummary
{
    std::string template_name;
    double aic = 0.0;
    double delta_aic = 0.0;
    int n_parameters = 0;
    bool converged = false;
};

struct ModelSelection
{
    DecompositionResult best;
    std::vector<CandidateSummary> ranking;  //!< ascending AIC
    std::string note;
};

//! Fit every candidate and return the decisive winner, or the simplest
//! model within the decisive margin of the best AIC.
ModelSelection auto_model_select(EsrSpectrum const& spectrum,
                                 std::vector<DecompositionTemplate> const& candidates,
                                 double resonator_f0,
                                 FitOptions const& options = {});

//---------------------------------------------------------------------------//
struct HalfFieldDetection
{
    bool detected = false;
    std::optional<GaussianPeak> peak;
    GaussianPeak uncertainties;
    double residual_rms = 0.0;
    double significance = 0.0;  //!< amplitude over its standard error
    double delta_aic = 0.0;     //!< AIC gain from adding the Gaussian
    double g2_center = 0.0;
    FitResult fit;
};

/*!
 * Refit the spectrum as two Lorentzians on a pedestal, with and without a
 * Gaussian seeded at g2_center/2. The peak is detected when adding it
 * lowers the AIC decisively and its center stays off the bounds.
 */
HalfFieldDetection detect_half_field_peak(EsrSpectrum const& spectrum,
                                          double g2_center,
                                          FitOptions const& options = {});

//---------------------------------------------------------------------------//
struct TreatmentComparison
{
    std::vector<std::string> labels;
    std::vector<std::string> peak_labels;
    //! [treatment][peak], relative to the first treatment
    std::vector<std::vector<double>> per_peak_area_ratios;
    std::vector<std::vector<double>> per_peak_area_ratio_uncertainties;
    std::vector<double> total_area_ratios;
    std::vector<double> total_area_ratio_uncertainties;
    //! peaks singled out per treatment as selectively reduced
    std::vector<std::vector<std::string>> selective_reductions;
    std::string notes;
};

TreatmentComparison
compare_treatments(std::vector<std::pair<std::string, DecompositionResult>> const& results);

}  // namespace esr
