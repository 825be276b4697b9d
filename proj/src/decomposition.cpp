// SPDX-License-Identifier: Apache-2.0
#include "esrtk/decomposition.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numbers>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "esrtk/physics.hpp"

namespace esr
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();

//---------------------------------------------------------------------------//
// Flat parameter layout of a template.
//---------------------------------------------------------------------------//
struct Layout
{
    std::size_t n_lorentz = 0;
    std::size_t n_gauss = 0;
    bool pedestal = false;
    bool satellites = false;

    std::size_t lorentz(std::size_t i) const { return 3 * i; }
    std::size_t gauss(std::size_t i) const { return 3 * (n_lorentz + i); }
    std::size_t pedestal_at() const { return 3 * (n_lorentz + n_gauss); }
    std::size_t satellites_at() const { return pedestal_at() + (pedestal ? 4 : 0); }
    std::size_t offset_at() const { return satellites_at() + (satellites ? 4 : 0); }
    std::size_t size() const { return offset_at() + 1; }
};

Layout layout_of(DecompositionTemplate const& t)
{
    return {t.lorentzians.size(), t.gaussians.size(), t.pedestal.has_value(),
            t.satellites.has_value()};
}

ParameterSpec named(ParameterSpec spec, std::string const& name)
{
    spec.name = name;
    return spec;
}

std::vector<ParameterSpec> flatten(DecompositionTemplate const& t)
{
    std::vector<ParameterSpec> specs;
    for (std::size_t i = 0; i < t.lorentzians.size(); ++i)
    {
        std::string const p = "L" + std::to_string(i) + ".";
        specs.push_back(named(t.lorentzians[i].center, p + "center"));
        specs.push_back(named(t.lorentzians[i].fwhm, p + "fwhm"));
        specs.push_back(named(t.lorentzians[i].amplitude, p + "amplitude"));
    }
    for (std::size_t i = 0; i < t.gaussians.size(); ++i)
    {
        std::string const p = "G" + std::to_string(i) + ".";
        specs.push_back(named(t.gaussians[i].center, p + "center"));
        specs.push_back(named(t.gaussians[i].fwhm, p + "fwhm"));
        specs.push_back(named(t.gaussians[i].amplitude, p + "amplitude"));
    }
    if (t.pedestal)
    {
        specs.push_back(named(t.pedestal->onset, "pedestal.onset"));
        specs.push_back(named(t.pedestal->width, "pedestal.width"));
        specs.push_back(named(t.pedestal->height, "pedestal.height"));
        specs.push_back(named(t.pedestal->decay_rate, "pedestal.decay_rate"));
    }
    if (t.satellites)
    {
        specs.push_back(named(t.satellites->center, "satellites.center"));
        specs.push_back(named(t.satellites->splitting, "satellites.splitting"));
        specs.push_back(named(t.satellites->fwhm, "satellites.fwhm"));
        specs.push_back(named(t.satellites->amplitude, "satellites.amplitude"));
    }
    specs.push_back(named(t.offset, "offset"));
    return specs;
}

PedestalBackground pedestal_from(std::span<double const> p, std::size_t at)
{
    PedestalBackground b;
    b.onset_field = p[at];
    b.transition_width = p[at + 1];
    b.height = p[at + 2];
    b.decay_scale = p[at + 3] > 0.0 ? 1.0 / p[at + 3] : inf;
    return b;
}

std::pair<LorentzianPeak, LorentzianPeak> satellites_from(std::span<double const> p, std::size_t at)
{
    LorentzianPeak lo{p[at] - 0.5 * p[at + 1], p[at + 2], p[at + 3], {}};
    LorentzianPeak hi{p[at] + 0.5 * p[at + 1], p[at + 2], p[at + 3], {}};
    return {lo, hi};
}

//! Model for a flat parameter vector; satellites expand to two Lorentzians
//! appended after the main peaks.
CompositeSpectrumModel build_model(Layout const& l, std::span<double const> p)
{
    CompositeSpectrumModel m;
    for (std::size_t i = 0; i < l.n_lorentz; ++i)
    {
        auto const at = l.lorentz(i);
        m.lorentzians.push_back({p[at], p[at + 1], p[at + 2], {}});
    }
    for (std::size_t i = 0; i < l.n_gauss; ++i)
    {
        auto const at = l.gauss(i);
        m.gaussians.push_back({p[at], p[at + 1], p[at + 2], {}});
    }
    if (l.pedestal)
    {
        m.background = pedestal_from(p, l.pedestal_at());
    }
    if (l.satellites)
    {
        auto [lo, hi] = satellites_from(p, l.satellites_at());
        m.lorentzians.push_back(lo);
        m.lorentzians.push_back(hi);
    }
    m.constant_offset = p[l.offset_at()];
    return m;
}

void model_jacobian(Layout const& l,
                    std::span<double const> p,
                    std::span<double const> fields,
                    Eigen::Ref<Eigen::MatrixXd> jac)
{
    jac.setZero();
    for (std::size_t k = 0; k < fields.size(); ++k)
    {
        auto const row = static_cast<Eigen::Index>(k);
        double const b = fields[k];
        auto put = [&](std::size_t col, double v) { jac(row, static_cast<Eigen::Index>(col)) = v; };
        for (std::size_t i = 0; i < l.n_lorentz; ++i)
        {
            auto const at = l.lorentz(i);
            auto const g = gradient(LorentzianPeak{p[at], p[at + 1], p[at + 2], {}}, b);
            put(at, g.d_center);
            put(at + 1, g.d_fwhm);
            put(at + 2, g.d_amplitude);
        }
        for (std::size_t i = 0; i < l.n_gauss; ++i)
        {
            auto const at = l.gauss(i);
            auto const g = gradient(GaussianPeak{p[at], p[at + 1], p[at + 2], {}}, b);
            put(at, g.d_center);
            put(at + 1, g.d_fwhm);
            put(at + 2, g.d_amplitude);
        }
        if (l.pedestal)
        {
            auto const at = l.pedestal_at();
            auto const g = gradient(pedestal_from(p, at), b);
            put(at, g.d_onset);
            put(at + 1, g.d_width);
            put(at + 2, g.d_height);
            put(at + 3, g.d_decay_rate);
        }
        if (l.satellites)
        {
            auto const at = l.satellites_at();
            auto const [lo, hi] = satellites_from(p, at);
            auto const glo = gradient(lo, b);
            auto const ghi = gradient(hi, b);
            put(at, glo.d_center + ghi.d_center);
            put(at + 1, 0.5 * (ghi.d_center - glo.d_center));
            put(at + 2, glo.d_fwhm + ghi.d_fwhm);
            put(at + 3, glo.d_amplitude + ghi.d_amplitude);
        }
        put(l.offset_at(), 1.0);
    }
}

double median(std::vector<double> v)
{
    if (v.empty())
    {
        return 0.0;
    }
    auto const mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

std::vector<double> smooth(std::span<double const> v, std::size_t window)
{
    std::size_t const half = window / 2;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        std::size_t const lo = i >= half ? i - half : 0;
        std::size_t const hi = std::min(v.size() - 1, i + half);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k)
        {
            s += v[k];
        }
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double median_spacing(std::span<double const> fields)
{
    std::vector<double> d;
    for (std::size_t i = 1; i < fields.size(); ++i)
    {
        d.push_back(fields[i] - fields[i - 1]);
    }
    return median(d);
}

//! Median of values whose fields fall in [lo, hi].
double median_in(EsrSpectrum const& s, std::span<double const> values, double lo, double hi)
{
    std::vector<double> v;
    for (std::size_t i = 0; i < s.fields.size(); ++i)
    {
        if (s.fields[i] >= lo && s.fields[i] <= hi)
        {
            v.push_back(values[i]);
        }
    }
    return median(v);
}

double quadratic_form(std::vector<double> const& grad,
                      std::vector<std::size_t> const& idx,
                      Eigen::MatrixXd const& cov)
{
    double v = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
    {
        for (std::size_t b = 0; b < idx.size(); ++b)
        {
            v += grad[a] * grad[b]
                 * cov(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
        }
    }
    return std::max(0.0, v);
}

std::string letter_label(std::size_t i)
{
    if (i < 26)
    {
        return std::string(1, static_cast<char>('A' + i));
    }
    return "L" + std::to_string(i);
}

}  // namespace

//---------------------------------------------------------------------------//
std::size_t DecompositionTemplate::component_count() const
{
    return lorentzians.size() + gaussians.size() + (pedestal ? 1 : 0) + (satellites ? 2 : 0);
}

std::size_t DecompositionTemplate::parameter_count() const
{
    return layout_of(*this).size();
}

PeakRecord const* DecompositionResult::find_peak(std::string const& label) const
{
    auto const it = std::find_if(per_peak.begin(), per_peak.end(),
                                 [&](auto const& p) { return p.label == label; });
    return it == per_peak.end() ? nullptr : &*it;
}

DecompositionResult decompose(EsrSpectrum const& spectrum,
                              DecompositionTemplate const& tmpl,
                              double resonator_f0,
                              FitOptions const& options)
{
    validate(spectrum);
    if (tmpl.component_count() == 0)
    {
        throw std::invalid_argument("decomposition template has no components");
    }
    if (!(resonator_f0 > 0.0))
    {
        throw std::invalid_argument("resonator frequency must be positive");
    }
    double const lo = spectrum.fields.front();
    double const hi = spectrum.fields.back();
    auto check_center = [&](ParameterSpec const& c) {
        if (c.initial < lo || c.initial > hi)
        {
            throw std::invalid_argument("initial center of '" + c.name
                                        + "' lies outside the spectrum's field range");
        }
    };
    for (auto const& p : tmpl.lorentzians)
    {
        check_center(p.center);
    }
    for (auto const& p : tmpl.gaussians)
    {
        check_center(p.center);
    }
    if (tmpl.satellites)
    {
        check_center(tmpl.satellites->center);
    }

    Layout const layout = layout_of(tmpl);
    std::vector<ParameterSpec> const specs = flatten(tmpl);
    std::span<double const> const fields = spectrum.fields;

    LeastSquaresProblem problem;
    problem.observations = spectrum.qb_inverse;
    problem.model = [&](std::span<double const> p, std::span<double> out) {
        CompositeSpectrumModel const m = build_model(layout, p);
        for (std::size_t i = 0; i < fields.size(); ++i)
        {
            out[i] = evaluate(m, fields[i]);
        }
    };
    problem.jacobian = [&](std::span<double const> p, Eigen::Ref<Eigen::MatrixXd> jac) {
        model_jacobian(layout, p, fields, jac);
    };

    DecompositionResult result;
    result.template_name = tmpl.name;
    result.fit = least_squares(problem, specs, options);
    result.converged = result.fit.converged;
    result.field_min = lo;
    result.field_max = hi;
    result.resonator_f0 = resonator_f0;
    auto const& p = result.fit.parameters;
    auto const& cov = result.fit.covariance;
    auto const& se = result.fit.standard_errors;
    result.model = build_model(layout, p);

    if (!result.fit.converged)
    {
        result.warnings.push_back("decomposition did not converge: " + result.fit.message);
    }
    if (!result.fit.well_conditioned)
    {
        result.warnings.push_back("ill-conditioned covariance; some parameters are unconstrained");
    }

    // total area gradient over every parameter, accumulated per component
    std::vector<double> total_grad(p.size(), 0.0);
    double total = 0.0;

    auto make_record = [&](std::string label, std::string shape, std::size_t at, double area,
                           double d_area_d_fwhm, double d_area_d_amp) {
        PeakRecord r;
        r.label = std::move(label);
        r.shape = std::move(shape);
        r.center = p[at];
        r.center_uncertainty = se[at];
        r.fwhm = p[at + 1];
        r.fwhm_uncertainty = se[at + 1];
        r.amplitude = p[at + 2];
        r.amplitude_uncertainty = se[at + 2];
        r.area = area;
        r.area_uncertainty = std::sqrt(
            quadratic_form({d_area_d_fwhm, d_area_d_amp}, {at + 1, at + 2}, cov));
        if (r.center > 0.0)
        {
            r.g_factor = g_factor_from_peak(r.center, resonator_f0);
            r.fwhm_as_rate = linewidth_to_rate(r.fwhm, r.g_factor);
            r.t2e = rate_to_t2e(r.fwhm_as_rate);
        }
        else
        {
            r.g_factor = std::nan("");
            r.fwhm_as_rate = std::nan("");
            r.t2e = std::nan("");
            r.warnings.push_back("center at zero field; g-factor undefined");
        }
        for (std::size_t k = at; k < at + 3; ++k)
        {
            if (result.fit.at_bound[k])
            {
                r.warnings.push_back(specs[k].name + " pinned at a bound");
            }
        }
        return r;
    };

    // main Lorentzians, labeled by ascending width
    std::vector<std::size_t> order(layout.n_lorentz);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p[layout.lorentz(a) + 1] < p[layout.lorentz(b) + 1];
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
    {
        auto const at = layout.lorentz(order[rank]);
        LorentzianPeak const peak{p[at], p[at + 1], p[at + 2], {}};
        double const area = analytic_area(peak);
        double const dw = peak.amplitude * std::numbers::pi / 2.0;
        double const da = std::numbers::pi * peak.fwhm / 2.0;
        result.per_peak.push_back(make_record(letter_label(rank), "lorentzian", at, area, dw, da));
        total += area;
        total_grad[at + 1] += dw;
        total_grad[at + 2] += da;
    }
    double const gauss_factor = std::sqrt(std::numbers::pi / (4.0 * std::numbers::ln2));
    for (std::size_t i = 0; i < layout.n_gauss; ++i)
    {
        auto const at = layout.gauss(i);
        GaussianPeak const peak{p[at], p[at + 1], p[at + 2], {}};
        double const area = analytic_area(peak);
        double const dw = peak.amplitude * gauss_factor;
        double const da = peak.fwhm * gauss_factor;
        std::string label = tmpl.gaussians[i].label.empty() ? "G" + std::to_string(i + 1)
                                                             : tmpl.gaussians[i].label;
        result.per_peak.push_back(make_record(std::move(label), "gaussian", at, area, dw, da));
        total += area;
        total_grad[at + 1] += dw;
        total_grad[at + 2] += da;
    }
    if (layout.satellites)
    {
        auto const at = layout.satellites_at();
        auto const [low, high] = satellites_from(p, at);
        std::string const base = tmpl.satellites->label;
        double const area = analytic_area(low);
        double const dw = low.amplitude * std::numbers::pi / 2.0;
        double const da = std::numbers::pi * low.fwhm / 2.0;
        double const area_unc = std::sqrt(quadratic_form({dw, da}, {at + 2, at + 3}, cov));
        for (auto const& [peak, suffix] :
             {std::pair{low, std::string("-low")}, std::pair{high, std::string("-high")}})
        {
            PeakRecord r;
            r.label = base + suffix;
            r.shape = "lorentzian";
            r.center = peak.center;
            // center of either line depends on the pair center and splitting
            r.center_uncertainty = std::sqrt(quadratic_form(
                {1.0, suffix == "-low" ? -0.5 : 0.5}, {at, at + 1}, cov));
            r.fwhm = peak.fwhm;
            r.fwhm_uncertainty = se[at + 2];
            r.amplitude = peak.amplitude;
            r.amplitude_uncertainty = se[at + 3];
            r.area = area;
            r.area_uncertainty = area_unc;
            if (r.center > 0.0)
            {
                r.g_factor = g_factor_from_peak(r.center, resonator_f0);
                r.fwhm_as_rate = linewidth_to_rate(r.fwhm, r.g_factor);
                r.t2e = rate_to_t2e(r.fwhm_as_rate);
            }
            for (std::size_t k = at; k < at + 4; ++k)
            {
                if (result.fit.at_bound[k])
                {
                    r.warnings.push_back(specs[k].name + " pinned at a bound");
                }
            }
            result.per_peak.push_back(std::move(r));
        }
        total += 2.0 * area;
        total_grad[at + 2] += 2.0 * dw;
        total_grad[at + 3] += 2.0 * da;

        SatelliteRecord sat;
        sat.center = p[at];
        sat.splitting_field = p[at + 1];
        sat.splitting_field_uncertainty = se[at + 1];
        if (sat.center > 0.0)
        {
            sat.g_factor = g_factor_from_peak(sat.center, resonator_f0);
            // inverse of hyperfine_splitting_field
            sat.splitting_frequency = linewidth_to_rate(sat.splitting_field, sat.g_factor);
            sat.splitting_frequency_uncertainty
                = sat.splitting_frequency * sat.splitting_field_uncertainty / sat.splitting_field;
        }
        result.satellites = sat;
    }

    if (layout.pedestal)
    {
        auto const at = layout.pedestal_at();
        auto pedestal_area = [&](std::span<double const> q) {
            PedestalBackground const b = pedestal_from(q, at);
            std::vector<double> v(fields.size());
            for (std::size_t i = 0; i < fields.size(); ++i)
            {
                v[i] = evaluate(b, fields[i]);
            }
            return numeric_area(fields, v);
        };
        result.pedestal_area = pedestal_area(p);
        std::vector<double> grad(4);
        std::vector<double> q(p.begin(), p.end());
        for (std::size_t k = 0; k < 4; ++k)
        {
            double const h = 1e-6 * (q[at + k] != 0.0 ? std::abs(q[at + k]) : 1.0);
            double const keep = q[at + k];
            q[at + k] = keep + h;
            double const up = pedestal_area(q);
            q[at + k] = std::max(keep - h, 0.0);
            double const down = pedestal_area(q);
            grad[k] = (up - down) / (keep + h - q[at + k]);
            q[at + k] = keep;
            total_grad[at + k] += grad[k];
        }
        result.pedestal_area_uncertainty
            = std::sqrt(quadratic_form(grad, {at, at + 1, at + 2, at + 3}, cov));
        total += result.pedestal_area;
    }

    // label the fitted model like the peak records
    for (std::size_t rank = 0; rank < order.size(); ++rank)
    {
        result.model.lorentzians[order[rank]].label = letter_label(rank);
    }
    for (std::size_t i = 0; i < layout.n_gauss; ++i)
    {
        result.model.gaussians[i].label = result.per_peak[layout.n_lorentz + i].label;
    }
    if (layout.satellites)
    {
        std::string const base = tmpl.satellites->label;
        result.model.lorentzians[layout.n_lorentz].label = base + "-low";
        result.model.lorentzians[layout.n_lorentz + 1].label = base + "-high";
    }

    std::vector<std::size_t> all(p.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    result.total_area = total;
    result.total_area_uncertainty = std::sqrt(quadratic_form(total_grad, all, cov));
    return result;
}

//---------------------------------------------------------------------------//
DecompositionTemplate
make_template(EsrSpectrum const& spectrum, double resonator_f0, TemplateOptions const& options)
{
    validate(spectrum);
    if (spectrum.fields.size() < min_decomposition_points)
    {
        throw std::invalid_argument("decomposition needs at least "
                                    + std::to_string(min_decomposition_points)
                                    + " field points, found "
                                    + std::to_string(spectrum.fields.size()));
    }
    auto const& f = spectrum.fields;
    double const lo = f.front();
    double const hi = f.back();
    double const span = hi - lo;
    double const step = median_spacing(f);
    std::size_t window = std::max<std::size_t>(1, f.size() / 300) | 1U;
    std::vector<double> const sm = smooth(spectrum.qb_inverse, window);

    auto const i_max = static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin());
    double const center = f[i_max];
    double const offset = median_in(spectrum, spectrum.qb_inverse, lo, lo + 0.05 * span);
    double const height = std::max(sm[i_max] - offset, 1e-30);
    double const tiny = 1e-3 * height;

    DecompositionTemplate t;
    t.offset = {"offset", offset};

    double const min_width = std::max(step, 1e-6);
    // seeds: 1 mT, 20 mT, then wider
    std::vector<double> const width_seeds{1e-3, 20e-3, 60e-3};
    std::vector<double> const amp_share{0.6, 0.3, 0.1};
    for (std::size_t i = 0; i < options.lorentzian_count; ++i)
    {
        double const w = std::clamp(width_seeds[std::min(i, width_seeds.size() - 1)],
                                    2.0 * min_width, 0.5 * span);
        double const share = options.lorentzian_count == 1
                                 ? 0.8
                                 : amp_share[std::min(i, amp_share.size() - 1)];
        PeakTemplate p;
        p.label = letter_label(i);
        p.center = {"center", center, lo, hi};
        p.fwhm = {"fwhm", w, min_width, span};
        p.amplitude = {"amplitude", std::max(share * height, tiny), 0.0, inf};
        t.lorentzians.push_back(p);
    }

    if (options.pedestal)
    {
        double const onset = std::clamp(0.31 * center, lo + min_width, hi - min_width);
        double const level = median_in(spectrum, sm, 0.4 * center, 0.6 * center) - offset;
        PedestalTemplate ped;
        ped.onset = {"onset", onset, lo, std::max(center, onset + min_width)};
        ped.width = {"width", std::max(0.03 * center, 2.0 * min_width), min_width, 0.5 * span};
        ped.height = {"height", std::max(level, tiny), 0.0, inf};
        ped.decay_rate = {"decay_rate", 1.0 / std::max(center, 10.0 * min_width), 0.0, inf};
        t.pedestal = ped;
    }

    if (options.half_field)
    {
        auto const& g = *options.half_field;
        double const c = std::clamp(g.center, lo, hi);
        PeakTemplate p;
        p.label = g.label.empty() ? "half-field" : g.label;
        p.center = {"center", c, std::max(lo, 0.85 * c), std::min(hi, 1.15 * c)};
        p.fwhm = {"fwhm", std::max(g.fwhm, 2.0 * min_width), min_width, 0.5 * span};
        p.amplitude = {"amplitude", std::max(g.amplitude, tiny), 0.0, inf};
        t.gaussians.push_back(p);
    }

    if (options.hyperfine_satellites)
    {
        double const split = hyperfine_splitting_field(options.hyperfine_frequency, options.g_seed);
        double const left = std::clamp(center - 0.5 * split, lo, hi);
        double const right = std::clamp(center + 0.5 * split, lo, hi);
        auto value_at = [&](double b) {
            auto const it = std::lower_bound(f.begin(), f.end(), b);
            auto const i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                it - f.begin(), static_cast<std::ptrdiff_t>(f.size()) - 1));
            return sm[i] - offset;
        };
        SatellitePairTemplate s;
        s.center = {"center", center, lo, hi};
        s.splitting = {"splitting", split, 0.7 * split, 1.3 * split};
        // a pair only a few samples wide can lock onto two noise spikes
        double const min_pair_width = std::min(10.0 * min_width, 0.1 * split);
        s.fwhm = {"fwhm", std::clamp(2e-3, 2.0 * min_pair_width, 0.25 * split), min_pair_width,
                  0.5 * split};
        s.amplitude = {"amplitude",
                       std::max(0.5 * (value_at(left) + value_at(right)), tiny), 0.0, inf};
        t.satellites = s;
    }

    std::ostringstream name;
    name << options.lorentzian_count << "L";
    t.name = name.str();
    (void)resonator_f0;
    return t;
}

std::vector<std::string> standard_template_names()
{
    return {"one-lorentzian", "two-lorentzian", "one-lorentzian-hyperfine",
            "two-lorentzian-hyperfine"};
}

DecompositionTemplate make_standard_template(std::string const& name,
                                             EsrSpectrum const& spectrum,
                                             double resonator_f0,
                                             TemplateOptions options)
{
    if (name == "one-lorentzian" || name == "one-lorentzian-hyperfine")
    {
        options.lorentzian_count = 1;
    }
    else if (name == "two-lorentzian" || name == "two-lorentzian-hyperfine")
    {
        options.lorentzian_count = 2;
    }
    else
    {
        throw std::invalid_argument("unknown template '" + name + "'");
    }
    options.hyperfine_satellites = name.ends_with("-hyperfine");
    DecompositionTemplate t = make_template(spectrum, resonator_f0, options);
    t.name = name;
    return t;
}

//---------------------------------------------------------------------------//
ModelSelection auto_model_select(EsrSpectrum const& spectrum,
                                 std::vector<DecompositionTemplate> const& candidates,
                                 double resonator_f0,
                                 FitOptions const& options)
{
    if (candidates.size() < 2)
    {
        throw std::invalid_argument("model selection needs at least two candidate templates");
    }
    std::vector<DecompositionResult> results;
    results.reserve(candidates.size());
    for (auto const& c : candidates)
    {
        results.push_back(decompose(spectrum, c, resonator_f0, options));
    }

    std::vector<std::size_t> usable;
    std::vector<FitResult> fits;
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        if (results[i].converged)
        {
            usable.push_back(i);
            fits.push_back(results[i].fit);
        }
    }
    if (usable.empty())
    {
        throw std::runtime_error("no candidate template converged");
    }

    auto const ranking = compare_models(fits);
    ModelSelection sel;
    for (auto const& r : ranking)
    {
        auto const& res = results[usable[r.index]];
        sel.ranking.push_back({res.template_name, r.aic, r.delta_aic, r.n_parameters, true});
    }
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        if (!results[i].converged)
        {
            sel.ranking.push_back({results[i].template_name, std::nan(""), std::nan(""),
                                   results[i].fit.n_free, false});
        }
    }

    // simplest model within the decisive margin; equal size goes to lower
    // AIC, exact ties to the first-listed candidate
    std::size_t chosen = usable[ranking.front().index];
    ModelRanking const* chosen_rank = &ranking.front();
    for (auto const& r : ranking)
    {
        if (r.delta_aic >= decisive_delta_aic)
        {
            continue;
        }
        std::size_t const cand = usable[r.index];
        bool better = r.n_parameters < chosen_rank->n_parameters;
        if (r.n_parameters == chosen_rank->n_parameters)
        {
            better = r.aic < chosen_rank->aic || (r.aic == chosen_rank->aic && cand < chosen);
        }
        if (better)
        {
            chosen = cand;
            chosen_rank = &r;
        }
    }

    std::ostringstream note;
    if (ranking.size() > 1 && ranking[1].delta_aic >= decisive_delta_aic
        && chosen == usable[ranking.front().index])
    {
        note << "decisive: " << results[chosen].template_name << " leads by "
             << ranking[1].delta_aic << " in AIC";
    }
    else
    {
        note << "no decisive winner; simplest model within dAIC < " << decisive_delta_aic
             << " selected: " << results[chosen].template_name;
    }
    bool tie = false;
    for (auto const& r : ranking)
    {
        if (usable[r.index] != chosen && r.aic == chosen_rank->aic)
        {
            tie = true;
        }
    }
    if (tie)
    {
        note << " (dAIC = 0 tie broken in favor of the first-listed candidate)";
    }
    sel.note = note.str();
    sel.best = std::move(results[chosen]);
    return sel;
}

//---------------------------------------------------------------------------//
HalfFieldDetection
detect_half_field_peak(EsrSpectrum const& spectrum, double g2_center, FitOptions const& options)
{
    validate(spectrum);
    if (!(g2_center > 0.0))
    {
        throw std::invalid_argument("g=2 center must be positive");
    }
    double const half = half_field_position(g2_center);
    if (spectrum.fields.front() > 0.5 * half || spectrum.fields.back() < g2_center)
    {
        throw std::invalid_argument(
            "spectrum must extend from below a quarter of the g=2 field up to the g=2 field");
    }
    // nominal f0 only labels g-factors, which are not used here
    double const f0 = spectrum.resonator_f0 > 0.0 ? spectrum.resonator_f0
                                                   : resonance_frequency(g2_center, {});

    TemplateOptions topt;
    topt.lorentzian_count = 2;
    DecompositionResult const base = decompose(spectrum, make_template(spectrum, f0, topt), f0,
                                               options);

    // seed the Gaussian from what the base model leaves unexplained
    std::vector<double> residual(spectrum.fields.size());
    for (std::size_t i = 0; i < residual.size(); ++i)
    {
        residual[i] = spectrum.qb_inverse[i] - evaluate(base.model, spectrum.fields[i]);
    }
    double const bump = median_in(spectrum, residual, 0.9 * half, 1.1 * half);
    double const scale = *std::max_element(spectrum.qb_inverse.begin(), spectrum.qb_inverse.end());
    topt.half_field = GaussianPeak{half, 0.12 * g2_center, std::max(bump, 1e-2 * scale),
                                   "half-field"};
    DecompositionTemplate with = make_template(spectrum, f0, topt);
    with.name = "two-lorentzian+half-field";
    DecompositionResult const full = decompose(spectrum, with, f0, options);

    HalfFieldDetection out;
    out.g2_center = g2_center;
    out.fit = full.fit;
    out.residual_rms
        = std::sqrt(full.fit.chi_squared / static_cast<double>(spectrum.fields.size()));
    if (base.converged && full.converged)
    {
        out.delta_aic = akaike(base.fit) - akaike(full.fit);
    }
    PeakRecord const* rec = full.find_peak("half-field");
    GaussianPeak const peak{rec->center, rec->fwhm, rec->amplitude, "half-field"};
    out.uncertainties = {rec->center_uncertainty, rec->fwhm_uncertainty,
                         rec->amplitude_uncertainty, "half-field"};
    out.significance
        = rec->amplitude_uncertainty > 0.0 ? rec->amplitude / rec->amplitude_uncertainty : 0.0;
    bool const pinned = std::any_of(rec->warnings.begin(), rec->warnings.end(), [](auto const& w) {
        return w.find("center") != std::string::npos;
    });
    out.detected = full.converged && !pinned && out.delta_aic > decisive_delta_aic;
    if (out.detected)
    {
        out.peak = peak;
    }
    return out;
}

//---------------------------------------------------------------------------//
TreatmentComparison
compare_treatments(std::vector<std::pair<std::string, DecompositionResult>> const& results)
{
    if (results.size() < 2)
    {
        throw std::invalid_argument("treatment comparison needs at least two entries");
    }
    TreatmentComparison cmp;
    auto const& reference = results.front().second;
    for (auto const& p : reference.per_peak)
    {
        cmp.peak_labels.push_back(p.label);
    }
    std::vector<std::string> ref_sorted = cmp.peak_labels;
    std::sort(ref_sorted.begin(), ref_sorted.end());

    auto ratio = [](double x, double sx, double x0, double sx0) -> std::pair<double, double> {
        if (x0 == 0.0)
        {
            return {std::nan(""), std::nan("")};
        }
        double const r = x / x0;
        double rel = 0.0;
        if (x != 0.0)
        {
            rel += (sx / x) * (sx / x);
        }
        rel += (sx0 / x0) * (sx0 / x0);
        return {r, std::abs(r) * std::sqrt(rel)};
    };

    std::ostringstream notes;
    for (std::size_t t = 0; t < results.size(); ++t)
    {
        auto const& [label, res] = results[t];
        std::vector<std::string> labels;
        for (auto const& p : res.per_peak)
        {
            labels.push_back(p.label);
        }
        std::sort(labels.begin(), labels.end());
        if (labels != ref_sorted)
        {
            throw std::invalid_argument("peak labels of '" + label
                                        + "' do not match the reference treatment");
        }
        cmp.labels.push_back(label);

        std::vector<double> ratios;
        std::vector<double> errors;
        for (auto const& pl : cmp.peak_labels)
        {
            PeakRecord const* now = res.find_peak(pl);
            PeakRecord const* ref = reference.find_peak(pl);
            auto const [r, e] = t == 0 ? std::pair{1.0, 0.0}
                                       : ratio(now->area, now->area_uncertainty, ref->area,
                                               ref->area_uncertainty);
            ratios.push_back(r);
            errors.push_back(e);
        }
        auto const [tr, te] = t == 0 ? std::pair{1.0, 0.0}
                                     : ratio(res.total_area, res.total_area_uncertainty,
                                             reference.total_area,
                                             reference.total_area_uncertainty);

        // a peak is singled out when it fell to at most half of the median
        // ratio of the other peaks
        std::vector<std::string> selective;
        if (t > 0 && ratios.size() >= 2)
        {
            for (std::size_t k = 0; k < ratios.size(); ++k)
            {
                std::vector<double> others;
                for (std::size_t q = 0; q < ratios.size(); ++q)
                {
                    if (q != k && std::isfinite(ratios[q]))
                    {
                        others.push_back(ratios[q]);
                    }
                }
                if (!others.empty() && std::isfinite(ratios[k]) && ratios[k] < 1.0
                    && ratios[k] <= 0.5 * median(others))
                {
                    selective.push_back(cmp.peak_labels[k]);
                }
            }
        }
        if (t > 0)
        {
            notes << label << ": total area ratio " << tr;
            if (tr > 0.0)
            {
                notes << " (" << 1.0 / tr << "-fold change)";
            }
            for (auto const& s : selective)
            {
                notes << "; selective reduction of peak " << s;
            }
            notes << "\n";
        }
        cmp.per_peak_area_ratios.push_back(std::move(ratios));
        cmp.per_peak_area_ratio_uncertainties.push_back(std::move(errors));
        cmp.total_area_ratios.push_back(tr);
        cmp.total_area_ratio_uncertainties.push_back(te);
        cmp.selective_reductions.push_back(std::move(selective));
    }
    cmp.notes = notes.str();
    return cmp;
}

}  // namespace esr
