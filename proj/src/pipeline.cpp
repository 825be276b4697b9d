// SPDX-License-Identifier: Apache-2.0
#include "esrtk/pipeline.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "esrtk/io.hpp"

namespace esr
{
namespace
{
//! AIC of the offset-only model.
double flat_aic(EsrSpectrum const& s)
{
    double const n = static_cast<double>(s.qb_inverse.size());
    double const mean = std::accumulate(s.qb_inverse.begin(), s.qb_inverse.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s.qb_inverse)
    {
        ss += (v - mean) * (v - mean);
    }
    if (!(ss > 0.0))
    {
        return -std::numeric_limits<double>::infinity();
    }
    return n * std::log(ss / n) + 2.0;
}

void collect_warnings(DecompositionResult const& d, std::vector<std::string>& out)
{
    for (auto const& w : d.warnings)
    {
        out.push_back(w);
    }
    for (auto const& p : d.per_peak)
    {
        for (auto const& w : p.warnings)
        {
            out.push_back("peak " + p.label + ": " + w);
        }
    }
}
}  // namespace

SpectrumAnalysis
analyze_spectrum(EsrSpectrum const& spectrum, double resonator_f0, PipelineConfig const& config)
{
    validate(spectrum);
    SpectrumAnalysis a;
    TemplateOptions topt;
    topt.g_seed = config.g_seed;
    topt.hyperfine_frequency = config.hyperfine_frequency;

    // null test: a single peak on a pedestal must beat a flat line decisively
    DecompositionResult const one = decompose(
        spectrum, make_standard_template("one-lorentzian", spectrum, resonator_f0, topt),
        resonator_f0, config.fit);
    double const aic_flat = flat_aic(spectrum);
    a.null_delta_aic = one.converged && std::isfinite(aic_flat) ? aic_flat - akaike(one.fit)
                                                                : 0.0;
    a.significant = a.null_delta_aic > decisive_delta_aic;
    if (!a.significant)
    {
        std::ostringstream os;
        os << "no significant peaks: a single peak improves the AIC over a flat line by "
           << format_number(a.null_delta_aic) << " (decisive above "
           << format_number(decisive_delta_aic) << ")";
        a.notes.push_back(os.str());
        return a;
    }
    a.g2_center = one.find_peak("A")->center;

    double const lo = spectrum.fields.front();
    double const hi = spectrum.fields.back();
    if (lo <= 0.25 * a.g2_center && hi >= a.g2_center)
    {
        a.half_field = detect_half_field_peak(spectrum, a.g2_center, config.fit);
        if (a.half_field->detected)
        {
            topt.half_field = *a.half_field->peak;
            a.half_field_note = "half-field peak detected and included in every candidate";
        }
        else
        {
            a.half_field_note = "no half-field peak: adding one does not improve the AIC decisively";
        }
    }
    else
    {
        a.half_field_note = "half-field search skipped: the field range must span a quarter of "
                            "the g=2 field up to the g=2 field";
    }

    if (config.template_name == "auto")
    {
        std::vector<DecompositionTemplate> candidates;
        for (auto const& name : standard_template_names())
        {
            candidates.push_back(make_standard_template(name, spectrum, resonator_f0, topt));
        }
        a.selection = auto_model_select(spectrum, candidates, resonator_f0, config.fit);
        for (auto const& c : a.selection->ranking)
        {
            if (!c.converged)
            {
                a.notes.push_back("candidate " + c.template_name
                                  + " did not converge and was not ranked");
            }
        }
        a.decomposition = a.selection->best;
    }
    else
    {
        a.decomposition = decompose(
            spectrum,
            make_standard_template(config.template_name, spectrum, resonator_f0, topt),
            resonator_f0, config.fit);
    }
    collect_warnings(*a.decomposition, a.warnings);
    return a;
}

std::string components_csv(EsrSpectrum const& spectrum, CompositeSpectrumModel const& model)
{
    std::vector<std::string> names;
    std::set<std::string> used{columns::field, columns::qb_inverse, "model_total", "pedestal",
                               "offset"};
    auto unique = [&](std::string base, std::string const& fallback) {
        if (base.empty())
        {
            base = fallback;
        }
        std::string name = base;
        for (int k = 2; used.contains(name); ++k)
        {
            name = base + "_" + std::to_string(k);
        }
        used.insert(name);
        return name;
    };
    for (std::size_t i = 0; i < model.lorentzians.size(); ++i)
    {
        names.push_back(unique(model.lorentzians[i].label, "lorentzian_" + std::to_string(i + 1)));
    }
    for (std::size_t i = 0; i < model.gaussians.size(); ++i)
    {
        names.push_back(unique(model.gaussians[i].label, "gaussian_" + std::to_string(i + 1)));
    }

    std::ostringstream os;
    os << columns::field << ',' << columns::qb_inverse << ",model_total";
    for (auto const& n : names)
    {
        os << ',' << n;
    }
    if (model.background)
    {
        os << ",pedestal";
    }
    os << ",offset\n";
    for (std::size_t i = 0; i < spectrum.fields.size(); ++i)
    {
        double const b = spectrum.fields[i];
        os << format_number(b) << ',' << format_number(spectrum.qb_inverse[i]) << ','
           << format_number(evaluate(model, b));
        for (auto const& p : model.lorentzians)
        {
            os << ',' << format_number(evaluate(p, b));
        }
        for (auto const& p : model.gaussians)
        {
            os << ',' << format_number(evaluate(p, b));
        }
        if (model.background)
        {
            os << ',' << format_number(evaluate(*model.background, b));
        }
        os << ',' << format_number(model.constant_offset) << '\n';
    }
    return os.str();
}

}  // namespace esr
