// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file lineshapes.hpp
//! Spectral components of a field-swept loss spectrum.
//---------------------------------------------------------------------------//
#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esr
{
//! Height-parameterized Lorentzian: amplitude is the peak value.
struct LorentzianPeak
{
    double center = 0.0;     //!< [T]
    double fwhm = 1e-3;      //!< [T]
    double amplitude = 0.0;  //!< peak loss
    std::string label;
};

//! Height-parameterized Gaussian.
struct GaussianPeak
{
    double center = 0.0;
    double fwhm = 1e-3;
    double amplitude = 0.0;
    std::string label;
};

/*!
 * Broad background with a smooth onset and optional high-field roll-off.
 *
 * The onset is a logistic step centered on onset_field, shifted and
 * rescaled so that it vanishes at zero field and tends to one far above
 * the onset. Above the onset it decays as exp(-(B - onset)/decay_scale);
 * an infinite decay_scale gives a flat plateau.
 */
struct PedestalBackground
{
    double onset_field = 0.05;
    double transition_width = 5e-3;
    double height = 0.0;
    double decay_scale = std::numeric_limits<double>::infinity();
};

struct CompositeSpectrumModel
{
    std::vector<LorentzianPeak> lorentzians;
    std::vector<GaussianPeak> gaussians;
    std::optional<PedestalBackground> background;
    double constant_offset = 0.0;
};

void validate(LorentzianPeak const& peak);
void validate(GaussianPeak const& peak);
void validate(PedestalBackground const& pedestal);
void validate(CompositeSpectrumModel const& model);

double evaluate(LorentzianPeak const& peak, double field);
double evaluate(GaussianPeak const& peak, double field);
double evaluate(PedestalBackground const& pedestal, double field);
double evaluate(CompositeSpectrumModel const& model, double field);

//! Pointwise model evaluation; throws std::domain_error on a non-finite
//! or negative field.
std::vector<double>
evaluate_model(CompositeSpectrumModel const& model, std::span<double const> fields);

double analytic_area(LorentzianPeak const& peak);
double analytic_area(GaussianPeak const& peak);

//! Trapezoidal integral of sampled values over strictly increasing fields.
double numeric_area(std::span<double const> fields, std::span<double const> values);

//---------------------------------------------------------------------------//
// Partial derivatives, used to supply analytic Jacobians to the fitter.
//---------------------------------------------------------------------------//
struct PeakGradient
{
    double d_center = 0.0;
    double d_fwhm = 0.0;
    double d_amplitude = 0.0;
};

struct PedestalGradient
{
    double d_onset = 0.0;
    double d_width = 0.0;
    double d_height = 0.0;
    double d_decay_rate = 0.0;  //!< with respect to 1 / decay_scale
};

PeakGradient gradient(LorentzianPeak const& peak, double field);
PeakGradient gradient(GaussianPeak const& peak, double field);
PedestalGradient gradient(PedestalBackground const& pedestal, double field);

}  // namespace esr
