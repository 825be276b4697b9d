// SPDX-License-Identifier: Apache-2.0
#include "esrtk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace esr
{
namespace
{
std::uint64_t splitmix64(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31U);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k)
{
    return (x << static_cast<unsigned>(k)) | (x >> static_cast<unsigned>(64 - k));
}

void check_increasing(std::span<double const> v, char const* what)
{
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        if (!std::isfinite(v[i]) || (i > 0 && !(v[i] > v[i - 1])))
        {
            throw std::invalid_argument(std::string(what)
                                        + " must be finite and strictly increasing");
        }
    }
}

double sigma_for(NoiseSpec const& noise, double scale, double value)
{
    if (!(noise.level >= 0.0) || !std::isfinite(noise.level))
    {
        throw std::invalid_argument("noise level must be finite and non-negative");
    }
    if (noise.level == 0.0)
    {
        return 0.0;
    }
    switch (noise.mode)
    {
        case NoiseLevel::snr:
            return scale / noise.level;
        case NoiseLevel::absolute:
            return noise.level;
        case NoiseLevel::relative:
            return noise.level * std::abs(value);
    }
    return 0.0;
}
}  // namespace

//---------------------------------------------------------------------------//
Xoshiro256::Xoshiro256(std::uint64_t seed)
{
    std::uint64_t x = seed;
    for (auto& s : s_)
    {
        s = splitmix64(x);
    }
}

std::uint64_t Xoshiro256::next()
{
    std::uint64_t const result = rotl(s_[1] * 5U, 7) * 9U;
    std::uint64_t const t = s_[1] << 17U;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform()
{
    return static_cast<double>(next() >> 11U) * 0x1.0p-53;
}

double Xoshiro256::normal()
{
    if (has_spare_)
    {
        has_spare_ = false;
        return spare_;
    }
    double const u1 = uniform();
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double const theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

//---------------------------------------------------------------------------//
ComplexTrace simulate_s21(ResonatorFit const& truth,
                          std::span<double const> frequencies,
                          NoiseSpec const& noise,
                          TraceMetadata const& metadata)
{
    validate(truth);
    check_increasing(frequencies, "frequencies");
    double const sigma = sigma_for(noise, truth.amplitude_scale, truth.amplitude_scale);
    Xoshiro256 rng(noise.seed);
    ComplexTrace trace;
    trace.metadata = metadata;
    trace.frequencies.assign(frequencies.begin(), frequencies.end());
    trace.s21.reserve(frequencies.size());
    for (double f : frequencies)
    {
        Complex s = notch_s21(truth, f);
        if (sigma > 0.0)
        {
            double const re = rng.normal();
            double const im = rng.normal();
            s += Complex(sigma * re, sigma * im);
        }
        trace.s21.push_back(s);
    }
    return trace;
}

std::vector<double>
resonance_grid(ResonatorFit const& truth, std::size_t n, double half_span_linewidths)
{
    validate(truth);
    double const half = half_span_linewidths * truth.f0 / truth.q_loaded;
    return linear_grid(truth.f0 - half, truth.f0 + half, n);
}

EsrSpectrum simulate_esr_spectrum(CompositeSpectrumModel const& model,
                                  std::span<double const> fields,
                                  NoiseSpec const& noise,
                                  SpectrumSimulationOptions const& options)
{
    validate(model);
    check_increasing(fields, "fields");
    if (fields.size() < 2)
    {
        throw std::invalid_argument("a spectrum needs at least two field points");
    }
    std::vector<double> raw = evaluate_model(model, fields);
    double scale = 0.0;
    for (double v : raw)
    {
        scale = std::max(scale, std::abs(v - model.constant_offset));
    }
    Xoshiro256 rng(noise.seed);
    for (double& v : raw)
    {
        double const sigma = sigma_for(noise, scale, v);
        if (sigma > 0.0)
        {
            v += sigma * rng.normal();
        }
    }

    EsrSpectrum spectrum;
    spectrum.fields.assign(fields.begin(), fields.end());
    spectrum.reference_field = fields.front();
    spectrum.reference_qi_inverse = options.intrinsic_loss + raw.front();
    spectrum.resonator_f0 = options.resonator_f0;
    spectrum.qb_inverse.reserve(raw.size());
    for (double v : raw)
    {
        spectrum.qb_inverse.push_back(v - raw.front());
    }
    return spectrum;
}

std::vector<double> linear_grid(double start, double stop, std::size_t count)
{
    if (count < 2 || !(stop > start))
    {
        throw std::invalid_argument("grid needs count >= 2 and stop > start");
    }
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        g[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return g;
}

std::vector<double> log_grid(double start, double stop, std::size_t count)
{
    if (!(start > 0.0))
    {
        throw std::invalid_argument("log grid needs a positive start");
    }
    auto g = linear_grid(std::log10(start), std::log10(stop), count);
    for (auto& v : g)
    {
        v = std::pow(10.0, v);
    }
    return g;
}

std::vector<SweepPoint> simulate_tls_sweep(TlsLossParams const& truth,
                                           std::span<double const> photons,
                                           NoiseSpec const& noise)
{
    validate(truth);
    check_increasing(photons, "photon grid");
    std::vector<double> loss;
    double scale = 0.0;
    for (double n : photons)
    {
        loss.push_back(tls_loss(n, truth));
        scale = std::max(scale, loss.back());
    }
    Xoshiro256 rng(noise.seed);
    std::vector<SweepPoint> out;
    for (std::size_t i = 0; i < photons.size(); ++i)
    {
        double y = loss[i];
        double const sigma = sigma_for(noise, scale, y);
        if (sigma > 0.0)
        {
            y += sigma * rng.normal();
        }
        out.push_back({photons[i], 1.0 / y});
    }
    return out;
}

std::vector<SweepPoint> simulate_saturation_sweep(SaturationParams const& truth,
                                                  std::span<double const> powers,
                                                  NoiseSpec const& noise)
{
    validate(truth);
    check_increasing(powers, "power grid");
    std::vector<double> loss;
    double scale = 0.0;
    for (double p : powers)
    {
        if (!(p > 0.0))
        {
            throw std::invalid_argument("power grid must be positive");
        }
        loss.push_back(saturation_loss(p, truth));
        scale = std::max(scale, loss.back());
    }
    Xoshiro256 rng(noise.seed);
    std::vector<SweepPoint> out;
    for (std::size_t i = 0; i < powers.size(); ++i)
    {
        double y = loss[i];
        double const sigma = sigma_for(noise, scale, y);
        if (sigma > 0.0)
        {
            y += sigma * rng.normal();
        }
        out.push_back({powers[i], y});
    }
    return out;
}

}  // namespace esr
