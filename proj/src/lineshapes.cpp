// SPDX-License-Identifier: Apache-2.0
#include "esrtk/lineshapes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace esr
{
namespace
{
constexpr double four_ln2 = 4.0 * std::numbers::ln2;

double logistic(double t)
{
    if (t >= 0.0)
    {
        return 1.0 / (1.0 + std::exp(-t));
    }
    double const e = std::exp(t);
    return e / (1.0 + e);
}

double decay_rate(PedestalBackground const& p)
{
    return std::isinf(p.decay_scale) ? 0.0 : 1.0 / p.decay_scale;
}

void check_peak(double center, double fwhm, double amplitude)
{
    if (!std::isfinite(center))
    {
        throw std::invalid_argument("peak center must be finite");
    }
    if (!(fwhm > 0.0) || !std::isfinite(fwhm))
    {
        throw std::invalid_argument("peak fwhm must be positive");
    }
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    {
        throw std::invalid_argument("peak amplitude must be non-negative");
    }
}
}  // namespace

void validate(LorentzianPeak const& peak)
{
    check_peak(peak.center, peak.fwhm, peak.amplitude);
}

void validate(GaussianPeak const& peak)
{
    check_peak(peak.center, peak.fwhm, peak.amplitude);
}

void validate(PedestalBackground const& pedestal)
{
    if (!(pedestal.transition_width > 0.0) || !std::isfinite(pedestal.transition_width))
    {
        throw std::invalid_argument("pedestal transition width must be positive");
    }
    if (!(pedestal.height >= 0.0) || !std::isfinite(pedestal.height))
    {
        throw std::invalid_argument("pedestal height must be non-negative");
    }
    if (!std::isfinite(pedestal.onset_field))
    {
        throw std::invalid_argument("pedestal onset must be finite");
    }
    if (!(pedestal.decay_scale > 0.0))
    {
        throw std::invalid_argument("pedestal decay scale must be positive");
    }
}

void validate(CompositeSpectrumModel const& model)
{
    for (auto const& p : model.lorentzians)
    {
        validate(p);
    }
    for (auto const& p : model.gaussians)
    {
        validate(p);
    }
    if (model.background)
    {
        validate(*model.background);
    }
    if (!std::isfinite(model.constant_offset))
    {
        throw std::invalid_argument("constant offset must be finite");
    }
}

double evaluate(LorentzianPeak const& peak, double field)
{
    double const x = 2.0 * (field - peak.center) / peak.fwhm;
    return peak.amplitude / (1.0 + x * x);
}

double evaluate(GaussianPeak const& peak, double field)
{
    double const x = (field - peak.center) / peak.fwhm;
    return peak.amplitude * std::exp(-four_ln2 * x * x);
}

double evaluate(PedestalBackground const& pedestal, double field)
{
    double const w = pedestal.transition_width;
    double const s0 = logistic(-pedestal.onset_field / w);
    double const s = logistic((field - pedestal.onset_field) / w);
    double const step = (s - s0) / (1.0 - s0);
    double const above = std::max(0.0, field - pedestal.onset_field);
    return pedestal.height * step * std::exp(-decay_rate(pedestal) * above);
}

double evaluate(CompositeSpectrumModel const& model, double field)
{
    double sum = model.constant_offset;
    if (model.background)
    {
        sum += evaluate(*model.background, field);
    }
    for (auto const& p : model.lorentzians)
    {
        sum += evaluate(p, field);
    }
    for (auto const& p : model.gaussians)
    {
        sum += evaluate(p, field);
    }
    return sum;
}

std::vector<double>
evaluate_model(CompositeSpectrumModel const& model, std::span<double const> fields)
{
    std::vector<double> out;
    out.reserve(fields.size());
    for (double b : fields)
    {
        if (!std::isfinite(b) || b < 0.0)
        {
            throw std::domain_error("field values must be finite and non-negative");
        }
        out.push_back(evaluate(model, b));
    }
    return out;
}

double analytic_area(LorentzianPeak const& peak)
{
    validate(peak);
    return peak.amplitude * std::numbers::pi * peak.fwhm / 2.0;
}

double analytic_area(GaussianPeak const& peak)
{
    validate(peak);
    return peak.amplitude * peak.fwhm * std::sqrt(std::numbers::pi / four_ln2);
}

double numeric_area(std::span<double const> fields, std::span<double const> values)
{
    if (fields.size() != values.size())
    {
        throw std::invalid_argument("fields and values differ in length");
    }
    if (fields.size() < 2)
    {
        throw std::invalid_argument("at least two samples are needed to integrate");
    }
    double area = 0.0;
    for (std::size_t i = 1; i < fields.size(); ++i)
    {
        double const dx = fields[i] - fields[i - 1];
        if (!(dx > 0.0))
        {
            throw std::invalid_argument("fields must be strictly increasing");
        }
        area += 0.5 * dx * (values[i] + values[i - 1]);
    }
    return area;
}

PeakGradient gradient(LorentzianPeak const& peak, double field)
{
    double const x = 2.0 * (field - peak.center) / peak.fwhm;
    double const denom = 1.0 + x * x;
    double const shape = 1.0 / denom;
    // d/dx of a/(1+x^2) = -2 a x / (1+x^2)^2
    double const d_dx = -2.0 * peak.amplitude * x * shape * shape;
    PeakGradient g;
    g.d_amplitude = shape;
    g.d_center = d_dx * (-2.0 / peak.fwhm);
    g.d_fwhm = d_dx * (-x / peak.fwhm);
    return g;
}

PeakGradient gradient(GaussianPeak const& peak, double field)
{
    double const x = (field - peak.center) / peak.fwhm;
    double const shape = std::exp(-four_ln2 * x * x);
    double const d_dx = -2.0 * four_ln2 * x * peak.amplitude * shape;
    PeakGradient g;
    g.d_amplitude = shape;
    g.d_center = d_dx * (-1.0 / peak.fwhm);
    g.d_fwhm = d_dx * (-x / peak.fwhm);
    return g;
}

PedestalGradient gradient(PedestalBackground const& pedestal, double field)
{
    double const w = pedestal.transition_width;
    double const on = pedestal.onset_field;
    double const t = (field - on) / w;
    double const t0 = -on / w;
    double const s = logistic(t);
    double const s0 = logistic(t0);
    double const step = (s - s0) / (1.0 - s0);
    double const k = decay_rate(pedestal);
    double const above = std::max(0.0, field - on);
    double const roll = std::exp(-k * above);

    // step = (s - s0) / (1 - s0); differentiate through t and t0
    auto d_step = [&](double dt, double dt0) {
        double const ds = s * (1.0 - s) * dt;
        double const ds0 = s0 * (1.0 - s0) * dt0;
        return (ds - ds0 + step * ds0) / (1.0 - s0);
    };

    PedestalGradient g;
    g.d_height = step * roll;
    double const d_roll_d_onset = field > on ? k * roll : 0.0;
    g.d_onset = pedestal.height
                * (d_step(-1.0 / w, -1.0 / w) * roll + step * d_roll_d_onset);
    g.d_width = pedestal.height * d_step(-t / w, -t0 / w) * roll;
    g.d_decay_rate = -pedestal.height * step * above * roll;
    return g;
}

}  // namespace esr
