// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file resonator.hpp
//! Notch-type resonator S21 fitting and ESR loss-spectrum assembly.
//---------------------------------------------------------------------------//
#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esrtk/fitting.hpp"

namespace esr
{
using Complex = std::complex<double>;

struct TraceMetadata
{
    double applied_field = 0.0;  //!< [T]
    double drive_power = 0.0;    //!< [W]
    double temperature = 0.0;    //!< [K]
};

struct ComplexTrace
{
    std::vector<double> frequencies;  //!< [Hz], strictly increasing
    std::vector<Complex> s21;         //!< linear transmission
    TraceMetadata metadata;
};

//! Throws std::invalid_argument unless the trace has >= 16 finite samples
//! on a strictly increasing frequency axis.
void validate(ComplexTrace const& trace);

/*!
 * Parameters of the notch model
 *
 *   S21(f) = a e^{i alpha} e^{-2 pi i f tau}
 *            [1 - (Ql/|Qc|) e^{i phi} / (1 + 2 i Ql (f/f0 - 1))]
 *
 * with the diameter-corrected internal quality factor
 * 1/Qi = 1/Ql - cos(phi)/|Qc|.
 */
struct ResonatorFit
{
    double f0 = 0.0;
    double q_loaded = 0.0;
    double q_coupling = 0.0;  //!< |Qc|
    double q_internal = 0.0;
    double mismatch_angle = 0.0;  //!< phi [rad]
    double amplitude_scale = 1.0;
    double phase_offset = 0.0;  //!< alpha [rad]
    double cable_delay = 0.0;   //!< tau [s]

    struct Uncertainties
    {
        double f0 = 0.0;
        double q_loaded = 0.0;
        double q_coupling = 0.0;
        double q_internal = 0.0;
        double mismatch_angle = 0.0;
        double amplitude_scale = 0.0;
        double phase_offset = 0.0;
        double cable_delay = 0.0;
    } uncertainties;

    bool converged = true;
    double chi_squared = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;
};

//! Loaded Q implied by (Qi, |Qc|, phi).
double loaded_q(double q_internal, double q_coupling, double mismatch_angle);

//! Build a self-consistent truth record from Qi, |Qc| and phi.
ResonatorFit make_resonator(double f0,
                            double q_internal,
                            double q_coupling,
                            double mismatch_angle = 0.0,
                            double amplitude_scale = 1.0,
                            double phase_offset = 0.0,
                            double cable_delay = 0.0);

//! Throws std::invalid_argument unless all quality factors are positive and
//! consistent with each other.
void validate(ResonatorFit const& fit);

//! Evaluate the notch model at one frequency.
Complex notch_s21(ResonatorFit const& params, double frequency);

struct NotchFitOptions
{
    FitOptions solver{};
    //! required dip depth in units of the smoothed noise floor
    double detection_threshold = 3.0;
};

//! Raised when a trace shows no resolvable resonance dip.
class NoResonanceError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

ResonatorFit fit_s21_notch(ComplexTrace const& trace, NotchFitOptions const& options = {});

//---------------------------------------------------------------------------//
struct EsrSpectrum
{
    std::vector<double> fields;       //!< [T], strictly increasing
    std::vector<double> qb_inverse;   //!< 1/Qi(B) - 1/Qi(B_ref)
    double reference_qi_inverse = 0.0;
    double reference_field = 0.0;
    double resonator_f0 = 0.0;
    std::vector<std::string> warnings;
};

//! Throws std::invalid_argument on mismatched lengths or unordered fields.
void validate(EsrSpectrum const& spectrum);

enum class ReferencePolicy
{
    zero_field_only,  //!< missing B = 0 entry is an error
    lowest_field      //!< fall back to the lowest field, with a warning
};

EsrSpectrum build_esr_spectrum(std::span<std::pair<double, ResonatorFit> const> fits,
                               ReferencePolicy policy = ReferencePolicy::lowest_field);

//! Mean intracavity photon number 2 Ql^2 P / (|Qc| hbar w0^2).
double photon_number(double drive_power, ResonatorFit const& fit);

//! Circulating power 2 Ql^2 P / |Qc|.
double circulating_power(double drive_power, ResonatorFit const& fit);

}  // namespace esr
