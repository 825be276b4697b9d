// SPDX-License-Identifier: Apache-2.0
#include "esrtk/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "esrtk/io.hpp"

namespace esr
{
namespace
{
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void dump_to(Json const& j, std::string& out, int indent)
{
    std::string const pad(static_cast<std::size_t>(indent + 2), ' ');
    switch (j.type())
    {
        case Json::value_t::object:
        {
            if (j.empty())
            {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto const& [key, value] : j.items())
            {
                if (!first)
                {
                    out += ",\n";
                }
                first = false;
                out += pad;
                out += Json(key).dump();
                out += ": ";
                dump_to(value, out, indent + 2);
            }
            out += "\n";
            out.append(static_cast<std::size_t>(indent), ' ');
            out += "}";
            return;
        }
        case Json::value_t::array:
        {
            if (j.empty())
            {
                out += "[]";
                return;
            }
            bool const flat = std::all_of(j.begin(), j.end(), [](Json const& e) {
                return e.is_primitive();
            });
            if (flat)
            {
                out += "[";
                for (std::size_t i = 0; i < j.size(); ++i)
                {
                    if (i > 0)
                    {
                        out += ", ";
                    }
                    dump_to(j[i], out, indent);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i)
            {
                if (i > 0)
                {
                    out += ",\n";
                }
                out += pad;
                dump_to(j[i], out, indent + 2);
            }
            out += "\n";
            out.append(static_cast<std::size_t>(indent), ' ');
            out += "]";
            return;
        }
        case Json::value_t::number_float:
        {
            double const v = j.get<double>();
            out += std::isfinite(v) ? format_number(v) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

Json strings(std::vector<std::string> const& v)
{
    Json a = Json::array();
    for (auto const& s : v)
    {
        a.push_back(s);
    }
    return a;
}

std::vector<std::string> read_strings(Json const& j, char const* key)
{
    std::vector<std::string> out;
    if (j.contains(key))
    {
        for (auto const& s : j.at(key))
        {
            out.push_back(s.get<std::string>());
        }
    }
    return out;
}

Json value_with_error(double value, double error)
{
    Json j = Json::object();
    put_number(j, "value", value);
    put_number(j, "uncertainty", error, "not determined by the fit");
    return j;
}

Json peak_json(std::string const& label, double center, double fwhm, double amplitude)
{
    Json p = Json::object();
    p["label"] = label;
    put_number(p, "center_tesla", center);
    put_number(p, "fwhm_tesla", fwhm);
    put_number(p, "amplitude", amplitude);
    return p;
}
}  // namespace

//---------------------------------------------------------------------------//
std::string dump_json(Json const& j)
{
    std::string out;
    dump_to(j, out, 0);
    out += "\n";
    return out;
}

void put_number(Json& obj, std::string const& key, double value, std::string_view reason)
{
    if (std::isfinite(value))
    {
        obj[key] = value;
        return;
    }
    obj[key] = nullptr;
    obj["null_reasons"][key] = std::string(reason);
}

double get_number(Json const& obj, std::string const& key)
{
    if (!obj.is_object() || !obj.contains(key))
    {
        throw std::invalid_argument("missing key '" + key + "'");
    }
    auto const& v = obj.at(key);
    if (v.is_null())
    {
        return nan;
    }
    if (!v.is_number())
    {
        throw std::invalid_argument("key '" + key + "' is not a number");
    }
    return v.get<double>();
}

//---------------------------------------------------------------------------//
Json to_json(FitResult const& fit)
{
    Json j = Json::object();
    j["converged"] = fit.converged;
    j["message"] = fit.message;
    j["iterations"] = fit.iterations;
    j["n_data"] = fit.n_data;
    j["n_free"] = fit.n_free;
    j["degrees_of_freedom"] = fit.degrees_of_freedom;
    put_number(j, "chi_squared", fit.chi_squared);
    put_number(j, "reduced_chi_squared", fit.reduced_chi_squared(), "no degrees of freedom");
    j["well_conditioned"] = fit.well_conditioned;
    Json params = Json::array();
    for (std::size_t i = 0; i < fit.parameters.size(); ++i)
    {
        Json p = Json::object();
        p["name"] = i < fit.names.size() ? fit.names[i] : std::to_string(i);
        put_number(p, "value", fit.parameters[i]);
        put_number(p, "standard_error", fit.standard_errors[i], "not determined by the fit");
        p["at_bound"] = i < fit.at_bound.size() && fit.at_bound[i];
        params.push_back(std::move(p));
    }
    j["parameters"] = std::move(params);
    Json cov = Json::array();
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r)
    {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c)
        {
            double const v = fit.covariance(r, c);
            row.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
        }
        cov.push_back(std::move(row));
    }
    j["covariance"] = std::move(cov);
    if (!fit.covariance.allFinite())
    {
        j["null_reasons"]["covariance"] = "entries for parameters not determined by the fit";
    }
    return j;
}

FitResult fit_result_from_json(Json const& j)
{
    FitResult f;
    f.converged = j.at("converged").get<bool>();
    f.message = j.at("message").get<std::string>();
    f.iterations = j.at("iterations").get<int>();
    f.n_data = j.at("n_data").get<int>();
    f.n_free = j.at("n_free").get<int>();
    f.degrees_of_freedom = j.at("degrees_of_freedom").get<int>();
    f.chi_squared = get_number(j, "chi_squared");
    f.well_conditioned = j.at("well_conditioned").get<bool>();
    for (auto const& p : j.at("parameters"))
    {
        f.names.push_back(p.at("name").get<std::string>());
        f.parameters.push_back(get_number(p, "value"));
        f.standard_errors.push_back(get_number(p, "standard_error"));
        f.at_bound.push_back(p.at("at_bound").get<bool>());
    }
    auto const n = static_cast<Eigen::Index>(f.parameters.size());
    f.covariance = Eigen::MatrixXd::Zero(n, n);
    auto const& cov = j.at("covariance");
    if (static_cast<Eigen::Index>(cov.size()) != n)
    {
        throw std::invalid_argument("covariance size does not match the parameters");
    }
    for (Eigen::Index r = 0; r < n; ++r)
    {
        auto const& row = cov.at(static_cast<std::size_t>(r));
        for (Eigen::Index c = 0; c < n; ++c)
        {
            auto const& v = row.at(static_cast<std::size_t>(c));
            f.covariance(r, c) = v.is_null() ? nan : v.get<double>();
        }
    }
    return f;
}

//---------------------------------------------------------------------------//
namespace
{
template<class T>
void put_resonator_fields(Json& j, T const& r)
{
    put_number(j, "f0_hz", r.f0);
    put_number(j, "q_loaded", r.q_loaded);
    put_number(j, "q_coupling", r.q_coupling);
    put_number(j, "q_internal", r.q_internal);
    put_number(j, "mismatch_angle_rad", r.mismatch_angle);
    put_number(j, "amplitude_scale", r.amplitude_scale);
    put_number(j, "phase_offset_rad", r.phase_offset);
    put_number(j, "cable_delay_s", r.cable_delay);
}

template<class T>
void get_resonator_fields(Json const& j, T& r)
{
    r.f0 = get_number(j, "f0_hz");
    r.q_loaded = get_number(j, "q_loaded");
    r.q_coupling = get_number(j, "q_coupling");
    r.q_internal = get_number(j, "q_internal");
    r.mismatch_angle = get_number(j, "mismatch_angle_rad");
    r.amplitude_scale = get_number(j, "amplitude_scale");
    r.phase_offset = get_number(j, "phase_offset_rad");
    r.cable_delay = get_number(j, "cable_delay_s");
}
}  // namespace

Json to_json(ResonatorFit const& fit)
{
    Json j = Json::object();
    put_resonator_fields(j, fit);
    Json u = Json::object();
    put_resonator_fields(u, fit.uncertainties);
    j["uncertainties"] = std::move(u);
    j["converged"] = fit.converged;
    put_number(j, "chi_squared", fit.chi_squared);
    j["iterations"] = fit.iterations;
    j["warnings"] = strings(fit.warnings);
    return j;
}

ResonatorFit resonator_fit_from_json(Json const& j)
{
    ResonatorFit r;
    get_resonator_fields(j, r);
    get_resonator_fields(j.at("uncertainties"), r.uncertainties);
    r.converged = j.at("converged").get<bool>();
    r.chi_squared = get_number(j, "chi_squared");
    r.iterations = j.at("iterations").get<int>();
    r.warnings = read_strings(j, "warnings");
    return r;
}

//---------------------------------------------------------------------------//
Json to_json(CompositeSpectrumModel const& model)
{
    Json j = Json::object();
    Json lor = Json::array();
    for (auto const& p : model.lorentzians)
    {
        lor.push_back(peak_json(p.label, p.center, p.fwhm, p.amplitude));
    }
    Json gau = Json::array();
    for (auto const& p : model.gaussians)
    {
        gau.push_back(peak_json(p.label, p.center, p.fwhm, p.amplitude));
    }
    j["lorentzians"] = std::move(lor);
    j["gaussians"] = std::move(gau);
    if (model.background)
    {
        Json b = Json::object();
        put_number(b, "onset_field_tesla", model.background->onset_field);
        put_number(b, "transition_width_tesla", model.background->transition_width);
        put_number(b, "height", model.background->height);
        put_number(b, "decay_scale_tesla", model.background->decay_scale,
                   "flat plateau without decay");
        j["pedestal"] = std::move(b);
    }
    else
    {
        j["pedestal"] = nullptr;
    }
    put_number(j, "constant_offset", model.constant_offset);
    return j;
}

CompositeSpectrumModel model_from_json(Json const& j)
{
    CompositeSpectrumModel m;
    for (auto const& p : j.at("lorentzians"))
    {
        m.lorentzians.push_back({get_number(p, "center_tesla"), get_number(p, "fwhm_tesla"),
                                 get_number(p, "amplitude"), p.value("label", "")});
    }
    for (auto const& p : j.at("gaussians"))
    {
        m.gaussians.push_back({get_number(p, "center_tesla"), get_number(p, "fwhm_tesla"),
                               get_number(p, "amplitude"), p.value("label", "")});
    }
    auto const& b = j.at("pedestal");
    if (!b.is_null())
    {
        PedestalBackground ped;
        ped.onset_field = get_number(b, "onset_field_tesla");
        ped.transition_width = get_number(b, "transition_width_tesla");
        ped.height = get_number(b, "height");
        double const scale = get_number(b, "decay_scale_tesla");
        ped.decay_scale = std::isnan(scale) ? std::numeric_limits<double>::infinity() : scale;
        m.background = ped;
    }
    m.constant_offset = get_number(j, "constant_offset");
    return m;
}

//---------------------------------------------------------------------------//
Json to_json(PeakRecord const& p)
{
    Json j = Json::object();
    j["label"] = p.label;
    j["shape"] = p.shape;
    put_number(j, "center_tesla", p.center);
    put_number(j, "center_uncertainty_tesla", p.center_uncertainty, "not determined by the fit");
    put_number(j, "fwhm_tesla", p.fwhm);
    put_number(j, "fwhm_uncertainty_tesla", p.fwhm_uncertainty, "not determined by the fit");
    put_number(j, "amplitude", p.amplitude);
    put_number(j, "amplitude_uncertainty", p.amplitude_uncertainty, "not determined by the fit");
    put_number(j, "g_factor", p.g_factor, "peak center at zero field");
    put_number(j, "fwhm_rate_hz", p.fwhm_as_rate, "g-factor undefined");
    put_number(j, "t2e_s", p.t2e, "g-factor undefined");
    put_number(j, "area", p.area);
    put_number(j, "area_uncertainty", p.area_uncertainty, "not determined by the fit");
    j["warnings"] = strings(p.warnings);
    return j;
}

Json to_json(DecompositionResult const& r)
{
    Json j = Json::object();
    j["template"] = r.template_name;
    j["converged"] = r.converged;
    put_number(j, "resonator_f0_hz", r.resonator_f0);
    put_number(j, "field_min_tesla", r.field_min);
    put_number(j, "field_max_tesla", r.field_max);
    Json peaks = Json::array();
    for (auto const& p : r.per_peak)
    {
        peaks.push_back(to_json(p));
    }
    j["peaks"] = std::move(peaks);
    if (r.satellites)
    {
        auto const& s = *r.satellites;
        Json sj = Json::object();
        put_number(sj, "center_tesla", s.center);
        put_number(sj, "splitting_tesla", s.splitting_field);
        put_number(sj, "splitting_uncertainty_tesla", s.splitting_field_uncertainty,
                   "not determined by the fit");
        put_number(sj, "splitting_hz", s.splitting_frequency, "g-factor undefined");
        put_number(sj, "splitting_uncertainty_hz", s.splitting_frequency_uncertainty,
                   "not determined by the fit");
        put_number(sj, "g_factor", s.g_factor, "pair center at zero field");
        j["satellites"] = std::move(sj);
    }
    else
    {
        j["satellites"] = nullptr;
    }
    put_number(j, "pedestal_area", r.pedestal_area);
    put_number(j, "pedestal_area_uncertainty", r.pedestal_area_uncertainty,
               "not determined by the fit");
    put_number(j, "total_area", r.total_area);
    put_number(j, "total_area_uncertainty", r.total_area_uncertainty,
               "not determined by the fit");
    j["model"] = to_json(r.model);
    j["fit"] = to_json(r.fit);
    j["warnings"] = strings(r.warnings);
    return j;
}

DecompositionResult decomposition_from_json(Json const& j)
{
    DecompositionResult r;
    r.template_name = j.at("template").get<std::string>();
    r.converged = j.at("converged").get<bool>();
    r.resonator_f0 = get_number(j, "resonator_f0_hz");
    r.field_min = get_number(j, "field_min_tesla");
    r.field_max = get_number(j, "field_max_tesla");
    for (auto const& p : j.at("peaks"))
    {
        PeakRecord rec;
        rec.label = p.at("label").get<std::string>();
        rec.shape = p.at("shape").get<std::string>();
        rec.center = get_number(p, "center_tesla");
        rec.center_uncertainty = get_number(p, "center_uncertainty_tesla");
        rec.fwhm = get_number(p, "fwhm_tesla");
        rec.fwhm_uncertainty = get_number(p, "fwhm_uncertainty_tesla");
        rec.amplitude = get_number(p, "amplitude");
        rec.amplitude_uncertainty = get_number(p, "amplitude_uncertainty");
        rec.g_factor = get_number(p, "g_factor");
        rec.fwhm_as_rate = get_number(p, "fwhm_rate_hz");
        rec.t2e = get_number(p, "t2e_s");
        rec.area = get_number(p, "area");
        rec.area_uncertainty = get_number(p, "area_uncertainty");
        rec.warnings = read_strings(p, "warnings");
        r.per_peak.push_back(std::move(rec));
    }
    auto const& s = j.at("satellites");
    if (!s.is_null())
    {
        SatelliteRecord sat;
        sat.center = get_number(s, "center_tesla");
        sat.splitting_field = get_number(s, "splitting_tesla");
        sat.splitting_field_uncertainty = get_number(s, "splitting_uncertainty_tesla");
        sat.splitting_frequency = get_number(s, "splitting_hz");
        sat.splitting_frequency_uncertainty = get_number(s, "splitting_uncertainty_hz");
        sat.g_factor = get_number(s, "g_factor");
        r.satellites = sat;
    }
    r.pedestal_area = get_number(j, "pedestal_area");
    r.pedestal_area_uncertainty = get_number(j, "pedestal_area_uncertainty");
    r.total_area = get_number(j, "total_area");
    r.total_area_uncertainty = get_number(j, "total_area_uncertainty");
    r.model = model_from_json(j.at("model"));
    r.fit = fit_result_from_json(j.at("fit"));
    r.warnings = read_strings(j, "warnings");
    return r;
}

//---------------------------------------------------------------------------//
Json to_json(HalfFieldDetection const& d)
{
    Json j = Json::object();
    j["detected"] = d.detected;
    put_number(j, "g2_center_tesla", d.g2_center);
    if (d.peak)
    {
        Json p = peak_json(d.peak->label, d.peak->center, d.peak->fwhm, d.peak->amplitude);
        put_number(p, "center_uncertainty_tesla", d.uncertainties.center,
                   "not determined by the fit");
        put_number(p, "fwhm_uncertainty_tesla", d.uncertainties.fwhm, "not determined by the fit");
        put_number(p, "amplitude_uncertainty", d.uncertainties.amplitude,
                   "not determined by the fit");
        put_number(p, "center_over_g2_center", d.peak->center / d.g2_center);
        j["peak"] = std::move(p);
    }
    else
    {
        j["peak"] = nullptr;
    }
    put_number(j, "delta_aic", d.delta_aic, "a comparison fit did not converge");
    put_number(j, "significance", d.significance, "amplitude uncertainty not determined");
    put_number(j, "residual_rms", d.residual_rms);
    return j;
}

Json to_json(ModelSelection const& s)
{
    Json j = Json::object();
    j["selected"] = s.best.template_name;
    j["note"] = s.note;
    Json ranking = Json::array();
    for (auto const& c : s.ranking)
    {
        Json e = Json::object();
        e["template"] = c.template_name;
        e["converged"] = c.converged;
        e["n_parameters"] = c.n_parameters;
        put_number(e, "aic", c.aic, "fit did not converge");
        put_number(e, "delta_aic", c.delta_aic, "fit did not converge");
        ranking.push_back(std::move(e));
    }
    j["ranking"] = std::move(ranking);
    return j;
}

//---------------------------------------------------------------------------//
Json to_json(TlsFit const& f)
{
    Json j = Json::object();
    j["law"] = "tls";
    Json p = Json::object();
    p["delta0"] = value_with_error(f.params.delta0, f.uncertainties.delta0);
    p["q_tls"] = value_with_error(f.params.q_tls, f.uncertainties.q_tls);
    p["n_c"] = value_with_error(f.params.n_c, f.uncertainties.n_c);
    p["beta"] = value_with_error(f.params.beta, f.uncertainties.beta);
    j["parameters"] = std::move(p);
    j["converged"] = f.fit.converged;
    j["weakly_constrained"] = f.weakly_constrained;
    j["notes"] = strings(f.notes);
    j["warnings"] = strings(f.warnings);
    j["fit"] = to_json(f.fit);
    return j;
}

Json to_json(SaturationFit const& f)
{
    Json j = Json::object();
    j["law"] = "saturation";
    Json p = Json::object();
    p["qb0_inverse"] = value_with_error(f.params.qb0_inverse, f.uncertainties.qb0_inverse);
    p["p_sat_watt"] = value_with_error(f.params.p_sat, f.uncertainties.p_sat);
    p["epsilon"] = value_with_error(f.params.epsilon, f.uncertainties.epsilon);
    j["parameters"] = std::move(p);
    j["converged"] = f.fit.converged;
    j["weakly_constrained"] = f.weakly_constrained;
    j["notes"] = strings(f.notes);
    j["warnings"] = strings(f.warnings);
    j["fit"] = to_json(f.fit);
    return j;
}

//---------------------------------------------------------------------------//
Json to_json(TreatmentComparison const& c)
{
    Json j = Json::object();
    j["reference"] = c.labels.empty() ? "" : c.labels.front();
    j["peak_labels"] = strings(c.peak_labels);
    Json rows = Json::array();
    for (std::size_t t = 0; t < c.labels.size(); ++t)
    {
        Json row = Json::object();
        row["label"] = c.labels[t];
        put_number(row, "total_area_ratio", c.total_area_ratios[t], "reference area is zero");
        put_number(row, "total_area_ratio_uncertainty", c.total_area_ratio_uncertainties[t],
                   "reference area is zero");
        put_number(row, "total_reduction_factor", 1.0 / c.total_area_ratios[t],
                   "treated area is zero or undefined");
        Json peaks = Json::array();
        for (std::size_t k = 0; k < c.peak_labels.size(); ++k)
        {
            Json p = Json::object();
            p["label"] = c.peak_labels[k];
            put_number(p, "area_ratio", c.per_peak_area_ratios[t][k], "reference area is zero");
            put_number(p, "area_ratio_uncertainty", c.per_peak_area_ratio_uncertainties[t][k],
                       "reference area is zero");
            peaks.push_back(std::move(p));
        }
        row["peaks"] = std::move(peaks);
        row["selective_reductions"] = strings(c.selective_reductions[t]);
        rows.push_back(std::move(row));
    }
    j["treatments"] = std::move(rows);
    j["notes"] = c.notes;
    return j;
}

}  // namespace esr
