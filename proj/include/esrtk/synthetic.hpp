// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file synthetic.hpp
//! Seeded forward simulation of S21 traces, ESR spectra and power sweeps.
//---------------------------------------------------------------------------//
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "esrtk/lineshapes.hpp"
#include "esrtk/power_models.hpp"
#include "esrtk/resonator.hpp"

namespace esr
{
//---------------------------------------------------------------------------//
/*!
 * Portable pseudo-random generator.
 *
 * State is seeded from a 64-bit seed with splitmix64:
 *   z = (x += 0x9E3779B97F4A7C15)
 *   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *   return z ^ (z >> 31)
 * and advanced with xoshiro256**:
 *   out = rotl(s1 * 5, 7) * 9
 *   t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
 *   s3 = rotl(s3, 45)
 * Uniforms take the top 53 bits; normals use the Box-Muller pair
 * sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2), cosine first.
 */
class Xoshiro256
{
  public:
    explicit Xoshiro256(std::uint64_t seed);

    std::uint64_t next();
    //! Uniform in [0, 1).
    double uniform();
    double normal();

  private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

enum class NoiseKind
{
    complex_gaussian,  //!< independent normal noise on Re and Im
    gaussian
};

enum class NoiseLevel
{
    snr,       //!< sigma = signal scale / level
    absolute,  //!< sigma = level
    relative   //!< sigma_i = level * |value_i|
};

struct NoiseSpec
{
    NoiseKind kind = NoiseKind::gaussian;
    NoiseLevel mode = NoiseLevel::snr;
    double level = 0.0;  //!< zero disables noise
    std::uint64_t seed = 0;
};

//! Evaluate the notch model and add complex noise. For the snr mode the
//! per-quadrature sigma is amplitude_scale / level.
ComplexTrace simulate_s21(ResonatorFit const& truth,
                          std::span<double const> frequencies,
                          NoiseSpec const& noise,
                          TraceMetadata const& metadata = {});

//! n points spanning f0 +/- half_span_linewidths * f0/Ql.
std::vector<double>
resonance_grid(ResonatorFit const& truth, std::size_t n, double half_span_linewidths = 6.0);

struct SpectrumSimulationOptions
{
    double resonator_f0 = 4.47e9;
    //! field-independent internal loss, 1/Qi at zero field without spins
    double intrinsic_loss = 1e-5;
};

/*!
 * Evaluate the model on the field grid, add noise, and reference the
 * result to the lowest field so that qb_inverse there is exactly zero.
 * For the snr mode sigma is max|model - offset| / level.
 */
EsrSpectrum simulate_esr_spectrum(CompositeSpectrumModel const& model,
                                  std::span<double const> fields,
                                  NoiseSpec const& noise,
                                  SpectrumSimulationOptions const& options = {});

//! Uniform field grid [start, stop] with count points.
std::vector<double> linear_grid(double start, double stop, std::size_t count);
//! Log-spaced grid [start, stop] with count points.
std::vector<double> log_grid(double start, double stop, std::size_t count);

//! Photon-number sweep of Qi following the TLS law (noise applied to 1/Qi).
std::vector<SweepPoint> simulate_tls_sweep(TlsLossParams const& truth,
                                           std::span<double const> photons,
                                           NoiseSpec const& noise);

//! Circulating-power sweep of 1/Q_B following the saturation law.
std::vector<SweepPoint> simulate_saturation_sweep(SaturationParams const& truth,
                                                  std::span<double const> powers,
                                                  NoiseSpec const& noise);

}  // namespace esr
