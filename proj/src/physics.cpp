// SPDX-License-Identifier: Apache-2.0
#include "esrtk/physics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace esr
{
namespace
{
void require_positive(double value, char const* what)
{
    if (!(value > 0.0) || !std::isfinite(value))
    {
        throw std::domain_error(std::string(what) + " must be positive and finite");
    }
}
}  // namespace

void validate(SpinSpecies const& species)
{
    if (!(species.g_factor > 0.0) || !std::isfinite(species.g_factor))
    {
        throw std::invalid_argument("g-factor must be positive");
    }
    if (species.spin_quantum_number != 0.5 && species.spin_quantum_number != 1.0)
    {
        throw std::invalid_argument("spin quantum number must be 1/2 or 1");
    }
}

double resonance_field(double frequency_hz, SpinSpecies const& species)
{
    require_positive(frequency_hz, "frequency");
    validate(species);
    return constants::planck_h * frequency_hz
           / (species.g_factor * constants::bohr_magneton);
}

double resonance_frequency(double field_tesla, SpinSpecies const& species)
{
    require_positive(field_tesla, "field");
    validate(species);
    return species.g_factor * constants::bohr_magneton * field_tesla
           / constants::planck_h;
}

double g_factor_from_peak(double field_tesla, double frequency_hz)
{
    require_positive(field_tesla, "field");
    require_positive(frequency_hz, "frequency");
    return constants::planck_h * frequency_hz
           / (constants::bohr_magneton * field_tesla);
}

double linewidth_to_rate(double fwhm_tesla, double g_factor)
{
    require_positive(fwhm_tesla, "linewidth");
    require_positive(g_factor, "g-factor");
    return g_factor * constants::bohr_magneton * fwhm_tesla / constants::planck_h;
}

double rate_to_t2e(double rate_hz)
{
    require_positive(rate_hz, "rate");
    return 1.0 / rate_hz;
}

double hyperfine_splitting_field(double splitting_hz, double g_factor)
{
    require_positive(splitting_hz, "splitting frequency");
    require_positive(g_factor, "g-factor");
    return constants::planck_h * splitting_hz / (g_factor * constants::bohr_magneton);
}

double half_field_position(double g2_peak_field_tesla)
{
    require_positive(g2_peak_field_tesla, "g=2 peak field");
    return g2_peak_field_tesla / 2.0;
}

double gyromagnetic_ratio(double g_factor)
{
    require_positive(g_factor, "g-factor");
    return g_factor * constants::bohr_magneton / constants::hbar;
}

}  // namespace esr
