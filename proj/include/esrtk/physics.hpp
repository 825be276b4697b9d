// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file physics.hpp
//! Physical constants and field/frequency/linewidth conversions for
//! electron spin resonance.
//---------------------------------------------------------------------------//
#pragma once

#include <numbers>
#include <string>

namespace esr
{
//---------------------------------------------------------------------------//
/*!
 * CODATA-2018 constants (SI units).
 *
 * Constant                     | Unit          | Notes
 * ---------------------------- | ------------- | -----------------------
 * planck_h                     | J s           | exact by definition
 * hbar                         | J s           | h / 2 pi
 * bohr_magneton                | J / T         |
 * free_electron_g              | -             | magnitude of g_e
 * electron_gyromagnetic_ratio  | rad s^-1 T^-1 | for the free electron
 */
namespace constants
{
inline constexpr double planck_h = 6.62607015e-34;
inline constexpr double hbar = planck_h / (2.0 * std::numbers::pi);
inline constexpr double bohr_magneton = 9.2740100783e-24;
inline constexpr double free_electron_g = 2.00231930436256;
inline constexpr double electron_gyromagnetic_ratio
    = 2.0 * std::numbers::pi * 28.0249514242e9;
}  // namespace constants

//! Spin-center description used to convert resonance fields.
struct SpinSpecies
{
    double g_factor = 2.0;
    double spin_quantum_number = 0.5;  //!< 1/2 or 1
    std::string label;
};

//! Throws std::invalid_argument unless g > 0 and S is 1/2 or 1.
void validate(SpinSpecies const& species);

// Zeeman resonance: h f = g muB B
double resonance_field(double frequency_hz, SpinSpecies const& species);
double resonance_frequency(double field_tesla, SpinSpecies const& species);
double g_factor_from_peak(double field_tesla, double frequency_hz);

//! Convert a FWHM in field units to a rate in Hz: g muB dB / h.
double linewidth_to_rate(double fwhm_tesla, double g_factor);

//! Coherence time as the reciprocal of the FWHM rate in Hz, not 1/(pi rate).
double rate_to_t2e(double rate_hz);

//! Field separation equivalent to a hyperfine splitting frequency.
double hyperfine_splitting_field(double splitting_hz, double g_factor);

//! Position of the S=1 half-field (Delta m_s = 2) transition.
double half_field_position(double g2_peak_field_tesla);

//! Gyromagnetic ratio g muB / hbar in rad s^-1 T^-1.
double gyromagnetic_ratio(double g_factor);

}  // namespace esr
