// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>

#include "esrtk/io.hpp"
#include "esrtk/physics.hpp"
#include "esrtk/pipeline.hpp"
#include "esrtk/synthetic.hpp"

#ifndef ESRTK_PRESET_DIR
#    define ESRTK_PRESET_DIR "data/presets"
#endif

namespace esr::cli
{
namespace
{
namespace fs = std::filesystem;

enum Exit : int
{
    ok = 0,
    input_error = 1,
    flagged = 2
};

struct Context
{
    PipelineConfig config;
    fs::path base;  //!< directory that relative inputs are resolved against
    bool verbose = false;
    std::vector<std::uint64_t> seeds;
    std::string command;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    fs::path input(std::size_t i) const
    {
        fs::path p(config.inputs[i]);
        return p.is_relative() && !base.empty() ? base / p : p;
    }
    fs::path output(std::string const& name) const { return fs::path(config.output_dir) / name; }
    void log(std::string const& msg) const
    {
        if (verbose)
        {
            *err << "esrtk: " << msg << '\n';
        }
    }
};

std::string hex(std::uint64_t v)
{
    char buf[24];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json provenance(Context const& ctx)
{
    Json p = Json::object();
    p["tool"] = "esrtk";
    p["version"] = tool_version();
    p["command"] = ctx.command;
    p["config_hash"] = hex(config_hash(ctx.config));
    p["seeds"] = ctx.seeds;
    p["config"] = to_json(ctx.config);
    return p;
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

//! File name without the extension and without a suffix written by esrtk.
std::string base_stem(fs::path const& p)
{
    std::string s = p.stem().string();
    for (char const* suffix : {".spectrum", ".traces", ".sweep", ".fits", ".decomposition",
                               ".power"})
    {
        std::string_view const sv(suffix);
        if (s.size() > sv.size() && s.ends_with(sv))
        {
            s.resize(s.size() - sv.size());
            break;
        }
    }
    return s;
}

//! Output stems unique across inputs that share a file name.
std::vector<std::string> stems(Context const& ctx)
{
    std::map<std::string, int> count;
    for (std::size_t i = 0; i < ctx.config.inputs.size(); ++i)
    {
        ++count[base_stem(ctx.input(i))];
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ctx.config.inputs.size(); ++i)
    {
        std::string s = base_stem(ctx.input(i));
        if (count[s] > 1)
        {
            s += "-" + std::to_string(i + 1);
        }
        out.push_back(s);
    }
    return out;
}

Json read_json_file(fs::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw InputError(path.string() + ": cannot open file");
    }
    try
    {
        return Json::parse(in);
    }
    catch (Json::parse_error const& e)
    {
        throw InputError(path.string() + ": not valid JSON (" + e.what() + ")");
    }
}

Json plot_manifest(std::string const& title,
                   std::string const& data,
                   std::string const& x,
                   std::vector<std::string> const& y,
                   std::string const& x_label,
                   std::string const& y_label,
                   bool log_x)
{
    Json p = Json::object();
    p["title"] = title;
    p["data"] = data;
    p["x"] = x;
    p["y"] = y;
    p["x_label"] = x_label;
    p["y_label"] = y_label;
    p["x_scale"] = log_x ? "log" : "linear";
    Json m = Json::object();
    m["plots"] = Json::array({p});
    return m;
}

//---------------------------------------------------------------------------//
// fit-s21
//---------------------------------------------------------------------------//
struct TraceRecord
{
    TraceMetadata metadata;
    std::size_t n_points = 0;
    std::optional<ResonatorFit> fit;
    std::string error;
};

std::vector<TraceRecord> fit_traces(std::vector<ComplexTrace> const& traces,
                                    PipelineConfig const& config)
{
    NotchFitOptions opt;
    opt.solver = config.fit;
    opt.detection_threshold = config.detection_threshold;
    std::vector<TraceRecord> out;
    for (auto const& tr : traces)
    {
        TraceRecord r;
        r.metadata = tr.metadata;
        r.n_points = tr.frequencies.size();
        try
        {
            r.fit = fit_s21_notch(tr, opt);
        }
        catch (NoResonanceError const& e)
        {
            r.error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

bool flagged_record(TraceRecord const& r)
{
    return !r.fit || !r.fit->converged || !r.fit->warnings.empty();
}

Json record_json(TraceRecord const& r, std::size_t index)
{
    Json j = Json::object();
    j["index"] = index;
    put_number(j, "applied_field_tesla", r.metadata.applied_field);
    put_number(j, "drive_power_watt", r.metadata.drive_power);
    put_number(j, "temperature_kelvin", r.metadata.temperature);
    j["n_points"] = r.n_points;
    j["status"] = !r.fit ? "no_resonance" : (flagged_record(r) ? "flagged" : "ok");
    if (r.fit)
    {
        j["fit"] = to_json(*r.fit);
        double const q = r.fit->q_loaded;
        if (q > 0.0 && r.fit->q_coupling > 0.0 && r.fit->f0 > 0.0)
        {
            put_number(j, "photon_number", photon_number(r.metadata.drive_power, *r.fit));
            put_number(j, "circulating_power_watt",
                       circulating_power(r.metadata.drive_power, *r.fit));
        }
    }
    else
    {
        j["fit"] = nullptr;
        j["null_reasons"]["fit"] = r.error;
    }
    return j;
}

int cmd_fit_s21(Context& ctx)
{
    auto const& cfg = ctx.config;
    if (cfg.inputs.empty())
    {
        throw InputError("fit-s21 needs at least one trace CSV");
    }
    auto const names = stems(ctx);
    // independent files are fitted concurrently; results are written in
    // input order to per-input paths
    std::vector<std::future<std::vector<TraceRecord>>> jobs;
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i)
    {
        fs::path const path = ctx.input(i);
        jobs.push_back(std::async(std::launch::async, [path, &cfg] {
            return fit_traces(read_traces(path), cfg);
        }));
    }
    std::vector<std::vector<TraceRecord>> results;
    for (auto& j : jobs)
    {
        results.push_back(j.get());
    }

    int code = ok;
    for (std::size_t i = 0; i < results.size(); ++i)
    {
        Json doc = Json::object();
        doc["provenance"] = provenance(ctx);
        doc["source"] = cfg.inputs[i];
        Json records = Json::array();
        std::size_t n_flagged = 0;
        for (std::size_t k = 0; k < results[i].size(); ++k)
        {
            records.push_back(record_json(results[i][k], k));
            n_flagged += flagged_record(results[i][k]) ? 1 : 0;
        }
        doc["records"] = std::move(records);
        fs::path const dest = ctx.output(names[i] + ".fits.json");
        write_text(dest, dump_json(doc));
        *ctx.out << dest.string() << ": " << results[i].size() << " trace(s), " << n_flagged
                 << " flagged\n";
        if (n_flagged > 0)
        {
            code = flagged;
        }
    }
    return code;
}

//---------------------------------------------------------------------------//
// spectrum
//---------------------------------------------------------------------------//
struct LoadedSpectrum
{
    EsrSpectrum spectrum;
    std::vector<std::string> warnings;
};

LoadedSpectrum load_spectrum(Context const& ctx)
{
    auto const& cfg = ctx.config;
    if (cfg.inputs.empty())
    {
        throw InputError("spectrum needs fit records, trace CSVs or a spectrum CSV");
    }
    LoadedSpectrum out;
    std::vector<std::pair<double, ResonatorFit>> records;
    std::optional<EsrSpectrum> direct;
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i)
    {
        fs::path const path = ctx.input(i);
        if (path.extension() == ".json")
        {
            Json const doc = read_json_file(path);
            if (!doc.contains("records") || !doc.at("records").is_array())
            {
                throw InputError(path.string() + ": expected a fit-s21 report with 'records'");
            }
            for (auto const& r : doc.at("records"))
            {
                try
                {
                    if (r.at("fit").is_null())
                    {
                        out.warnings.push_back(path.string() + ": record "
                                               + std::to_string(r.at("index").get<int>())
                                               + " has no fit and was skipped");
                        continue;
                    }
                    records.emplace_back(get_number(r, "applied_field_tesla"),
                                         resonator_fit_from_json(r.at("fit")));
                }
                catch (Json::exception const& e)
                {
                    throw InputError(path.string() + ": malformed record (" + e.what() + ")");
                }
                catch (std::invalid_argument const& e)
                {
                    throw InputError(path.string() + ": malformed record (" + e.what() + ")");
                }
            }
            continue;
        }
        CsvTable const head = read_csv(path);
        if (head.has(columns::frequency))
        {
            auto const fits = fit_traces(read_traces(path), cfg);
            for (std::size_t k = 0; k < fits.size(); ++k)
            {
                if (!fits[k].fit)
                {
                    out.warnings.push_back(path.string() + ": trace " + std::to_string(k)
                                           + " skipped: " + fits[k].error);
                    continue;
                }
                records.emplace_back(fits[k].metadata.applied_field, *fits[k].fit);
            }
        }
        else if (head.has(columns::field) && head.has(columns::qb_inverse))
        {
            if (direct)
            {
                throw InputError("only one spectrum CSV can be analyzed at a time");
            }
            direct = read_spectrum(path);
        }
        else
        {
            throw InputError(path.string()
                             + ":1: header matches neither the trace nor the spectrum schema");
        }
    }
    if (direct && !records.empty())
    {
        throw InputError("a spectrum CSV cannot be combined with resonator fits");
    }
    if (direct)
    {
        out.spectrum = *direct;
        return out;
    }
    try
    {
        out.spectrum = build_esr_spectrum(records, cfg.reference_policy);
    }
    catch (std::invalid_argument const& e)
    {
        throw InputError(e.what());
    }
    for (auto const& w : out.spectrum.warnings)
    {
        out.warnings.push_back(w);
    }
    return out;
}

int cmd_spectrum(Context& ctx)
{
    auto const& cfg = ctx.config;
    LoadedSpectrum const loaded = load_spectrum(ctx);
    EsrSpectrum const& spectrum = loaded.spectrum;
    double const f0 = cfg.resonator_f0.value_or(spectrum.resonator_f0);
    if (!(f0 > 0.0))
    {
        throw InputError("resonator frequency unknown: the spectrum carries none; set "
                         "resonator_f0_hz in the config");
    }
    std::string const id = !cfg.resonator_id.empty() ? cfg.resonator_id
                                                     : base_stem(ctx.input(0));
    ctx.log("analyzing " + std::to_string(spectrum.fields.size()) + " field points");

    SpectrumAnalysis const a = analyze_spectrum(spectrum, f0, cfg);
    std::vector<std::string> warnings = loaded.warnings;
    for (auto const& w : a.warnings)
    {
        warnings.push_back(w);
    }

    Json doc = Json::object();
    doc["provenance"] = provenance(ctx);
    doc["resonator_id"] = id;
    doc["status"] = a.significant ? "decomposed" : "no significant peaks";
    Json s = Json::object();
    s["n_points"] = spectrum.fields.size();
    put_number(s, "field_min_tesla", spectrum.fields.front());
    put_number(s, "field_max_tesla", spectrum.fields.back());
    put_number(s, "reference_field_tesla", spectrum.reference_field);
    put_number(s, "reference_qi_inverse", spectrum.reference_qi_inverse);
    put_number(s, "resonator_f0_hz", f0);
    doc["spectrum"] = std::move(s);
    Json null_test = Json::object();
    put_number(null_test, "delta_aic", a.null_delta_aic);
    null_test["significant"] = a.significant;
    doc["null_test"] = std::move(null_test);
    if (a.half_field)
    {
        doc["half_field"] = to_json(*a.half_field);
    }
    else
    {
        doc["half_field"] = nullptr;
        doc["null_reasons"]["half_field"]
            = a.significant ? a.half_field_note : "no significant peaks";
    }
    doc["half_field_note"] = a.half_field_note;
    if (a.selection)
    {
        doc["selection"] = to_json(*a.selection);
    }
    else
    {
        doc["selection"] = nullptr;
        doc["null_reasons"]["selection"]
            = a.significant ? "template fixed to " + cfg.template_name : "no significant peaks";
    }
    if (a.decomposition)
    {
        doc["decomposition"] = to_json(*a.decomposition);
    }
    else
    {
        doc["decomposition"] = nullptr;
        doc["null_reasons"]["decomposition"] = "no significant peaks";
    }
    doc["notes"] = strings(a.notes);
    doc["warnings"] = strings(warnings);

    write_spectrum(ctx.output(id + ".spectrum.csv"), spectrum);
    fs::path const report = ctx.output(id + ".decomposition.json");
    write_text(report, dump_json(doc));
    std::vector<std::string> ycols{columns::qb_inverse};
    if (a.decomposition)
    {
        write_text(ctx.output(id + ".components.csv"),
                   components_csv(spectrum, a.decomposition->model));
        ycols.push_back("model_total");
    }
    std::string const data_file = a.decomposition ? id + ".components.csv" : id + ".spectrum.csv";
    write_text(ctx.output(id + ".plot.json"),
               dump_json(plot_manifest("ESR loss spectrum " + id, data_file, columns::field, ycols,
                                       "magnetic field (T)", "1/Q_B", false)));

    *ctx.out << report.string() << ": " << doc["status"].get<std::string>();
    if (a.decomposition)
    {
        *ctx.out << " with " << a.decomposition->template_name;
    }
    *ctx.out << ", " << warnings.size() << " warning(s)\n";
    for (auto const& w : warnings)
    {
        *ctx.err << "warning: " << w << '\n';
    }
    return warnings.empty() ? ok : flagged;
}

//---------------------------------------------------------------------------//
// power
//---------------------------------------------------------------------------//
int cmd_power(Context& ctx)
{
    auto const& cfg = ctx.config;
    if (cfg.inputs.empty())
    {
        throw InputError("power needs at least one sweep CSV");
    }
    auto const names = stems(ctx);
    int code = ok;
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i)
    {
        PowerSweep const sweep = read_sweep(ctx.input(i));
        PowerLaw law = cfg.power_law;
        if (law == PowerLaw::automatic)
        {
            law = sweep.quantity == SweepQuantity::qi ? PowerLaw::tls : PowerLaw::saturation;
        }
        if ((law == PowerLaw::tls) != (sweep.quantity == SweepQuantity::qi))
        {
            throw InputError(cfg.inputs[i] + ": the "
                             + (law == PowerLaw::tls ? std::string("TLS law needs a 'qi' column")
                                                     : std::string("saturation law needs a "
                                                                   "'qb_inverse' column")));
        }
        Json doc = Json::object();
        doc["provenance"] = provenance(ctx);
        doc["source"] = cfg.inputs[i];
        doc["power_axis"] = to_string(sweep.axis);
        std::vector<std::string> notes;
        std::vector<std::string> warnings;
        std::vector<double> model;
        std::vector<double> data;
        try
        {
            if (law == PowerLaw::tls)
            {
                TlsFitOptions opt;
                opt.solver = cfg.fit;
                TlsFit const f = fit_tls_law(sweep.points, opt);
                doc["result"] = to_json(f);
                notes = f.notes;
                warnings = f.warnings;
                if (sweep.axis != SweepAxis::photons)
                {
                    notes.push_back(std::string("n_c is expressed in units of ")
                                    + to_string(sweep.axis));
                }
                for (auto const& p : sweep.points)
                {
                    data.push_back(1.0 / p.y);
                    model.push_back(tls_loss(p.x, f.params));
                }
            }
            else
            {
                SaturationFitOptions opt;
                opt.solver = cfg.fit;
                SaturationFit const f = fit_saturation(sweep.points, opt);
                doc["result"] = to_json(f);
                notes = f.notes;
                warnings = f.warnings;
                if (sweep.axis != SweepAxis::circulating_power)
                {
                    notes.push_back(std::string("P_sat is expressed in units of ")
                                    + to_string(sweep.axis));
                }
                Json derived = Json::object();
                if (cfg.t2e)
                {
                    double const t1e = invert_psat_for_t1e(
                        f.params.p_sat, *cfg.t2e, {cfg.field_to_power_alpha}, cfg.g_seed);
                    put_number(derived, "t1e_s", t1e);
                    put_number(derived, "t1e_uncertainty_s",
                               t1e * f.uncertainties.p_sat / f.params.p_sat,
                               "P_sat uncertainty not determined");
                    put_number(derived, "t2e_s", *cfg.t2e);
                    put_number(derived, "field_to_power_alpha", cfg.field_to_power_alpha);
                    put_number(derived, "g_factor", cfg.g_seed);
                    doc["derived"] = std::move(derived);
                }
                else
                {
                    doc["derived"] = nullptr;
                    doc["null_reasons"]["derived"] = "T1e needs power.t2e_s in the config";
                }
                for (auto const& p : sweep.points)
                {
                    data.push_back(p.y);
                    model.push_back(saturation_loss(p.x, f.params));
                }
            }
        }
        catch (std::invalid_argument const& e)
        {
            throw InputError(cfg.inputs[i] + ": " + e.what());
        }
        doc["notes"] = strings(notes);
        doc["warnings"] = strings(warnings);

        std::string const y = law == PowerLaw::tls ? "inverse_qi" : "qb_inverse";
        std::ostringstream csv;
        csv << to_string(sweep.axis) << ',' << y << ",model\n";
        for (std::size_t k = 0; k < data.size(); ++k)
        {
            csv << format_number(sweep.points[k].x) << ',' << format_number(data[k]) << ','
                << format_number(model[k]) << '\n';
        }
        write_text(ctx.output(names[i] + ".power_curve.csv"), csv.str());
        write_text(ctx.output(names[i] + ".power_plot.json"),
                   dump_json(plot_manifest(
                       (law == PowerLaw::tls ? "TLS loss " : "spin saturation ") + names[i],
                       names[i] + ".power_curve.csv", to_string(sweep.axis), {y, "model"},
                       to_string(sweep.axis), y, true)));
        fs::path const dest = ctx.output(names[i] + ".power.json");
        write_text(dest, dump_json(doc));
        *ctx.out << dest.string() << ": " << (law == PowerLaw::tls ? "tls" : "saturation")
                 << " law, " << warnings.size() << " warning(s)\n";
        for (auto const& n : notes)
        {
            *ctx.err << "note: " << n << '\n';
        }
        for (auto const& w : warnings)
        {
            *ctx.err << "warning: " << w << '\n';
        }
        if (!warnings.empty())
        {
            code = flagged;
        }
    }
    return code;
}

//---------------------------------------------------------------------------//
// compare
//---------------------------------------------------------------------------//
std::string fixed(double v)
{
    if (!std::isfinite(v))
    {
        return "n/a";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

int cmd_compare(Context& ctx)
{
    auto const& cfg = ctx.config;
    if (cfg.inputs.size() < 2)
    {
        throw InputError("compare needs at least two decomposition reports");
    }
    auto const names = stems(ctx);
    std::vector<std::string> const labels = cfg.labels.empty() ? names : cfg.labels;
    std::vector<std::pair<std::string, DecompositionResult>> entries;
    int code = ok;
    for (std::size_t i = 0; i < cfg.inputs.size(); ++i)
    {
        Json const doc = read_json_file(ctx.input(i));
        Json const* d = &doc;
        if (doc.contains("decomposition"))
        {
            d = &doc.at("decomposition");
        }
        if (d->is_null())
        {
            throw InputError(cfg.inputs[i] + ": report has no decomposition (no significant peaks)");
        }
        try
        {
            entries.emplace_back(labels[i], decomposition_from_json(*d));
        }
        catch (std::exception const& e)
        {
            throw InputError(cfg.inputs[i] + ": not a decomposition report (" + e.what() + ")");
        }
        if (!entries.back().second.converged)
        {
            code = flagged;
        }
    }
    TreatmentComparison cmp;
    try
    {
        cmp = compare_treatments(entries);
    }
    catch (std::invalid_argument const& e)
    {
        throw InputError(e.what());
    }

    // optional Q_TLS column from power reports
    std::vector<std::optional<std::pair<double, double>>> q_tls(entries.size());
    for (std::size_t i = 0; i < cfg.power_fits.size(); ++i)
    {
        fs::path p(cfg.power_fits[i]);
        if (p.is_relative() && !ctx.base.empty())
        {
            p = ctx.base / p;
        }
        Json const doc = read_json_file(p);
        try
        {
            auto const& r = doc.at("result");
            if (r.at("law").get<std::string>() != "tls")
            {
                throw InputError(cfg.power_fits[i] + ": not a TLS power fit");
            }
            auto const& q = r.at("parameters").at("q_tls");
            q_tls[i] = std::pair{get_number(q, "value"), get_number(q, "uncertainty")};
        }
        catch (Json::exception const& e)
        {
            throw InputError(cfg.power_fits[i] + ": malformed power report (" + e.what() + ")");
        }
    }

    Json doc = Json::object();
    doc["provenance"] = provenance(ctx);
    doc["inputs"] = cfg.inputs;
    doc["comparison"] = to_json(cmp);
    Json area = Json::array();
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        Json row = Json::object();
        row["label"] = entries[i].first;
        put_number(row, "total_area", entries[i].second.total_area);
        put_number(row, "total_area_uncertainty", entries[i].second.total_area_uncertainty,
                   "not determined by the fit");
        put_number(row, "inverse_total_area", 1.0 / entries[i].second.total_area,
                   "total area is zero");
        if (q_tls[i])
        {
            put_number(row, "q_tls", q_tls[i]->first);
            put_number(row, "q_tls_uncertainty", q_tls[i]->second, "not determined by the fit");
        }
        else
        {
            row["q_tls"] = nullptr;
            row["null_reasons"]["q_tls"] = "no TLS power fit supplied";
        }
        area.push_back(std::move(row));
    }
    doc["areas"] = std::move(area);

    std::string const id = cfg.resonator_id.empty() ? "treatments" : cfg.resonator_id;
    fs::path const dest = ctx.output(id + ".comparison.json");
    write_text(dest, dump_json(doc));

    std::ostringstream csv;
    csv << "treatment,peak,area_ratio,area_ratio_uncertainty\n";
    for (std::size_t t = 0; t < cmp.labels.size(); ++t)
    {
        for (std::size_t k = 0; k < cmp.peak_labels.size(); ++k)
        {
            csv << cmp.labels[t] << ',' << cmp.peak_labels[k] << ','
                << format_number(cmp.per_peak_area_ratios[t][k]) << ','
                << format_number(cmp.per_peak_area_ratio_uncertainties[t][k]) << '\n';
        }
        csv << cmp.labels[t] << ",total," << format_number(cmp.total_area_ratios[t]) << ','
            << format_number(cmp.total_area_ratio_uncertainties[t]) << '\n';
    }
    write_text(ctx.output(id + ".comparison.csv"), csv.str());

    std::ostringstream md;
    md << "# Treatment comparison\n\nAreas relative to **" << cmp.labels.front() << "**.\n\n";
    md << "| treatment | total area ratio | reduction |";
    for (auto const& p : cmp.peak_labels)
    {
        md << " peak " << p << " |";
    }
    md << " 1/area | Q_TLS |\n|---|---|---|";
    for (std::size_t k = 0; k < cmp.peak_labels.size(); ++k)
    {
        md << "---|";
    }
    md << "---|---|\n";
    for (std::size_t t = 0; t < cmp.labels.size(); ++t)
    {
        md << "| " << cmp.labels[t] << " | " << fixed(cmp.total_area_ratios[t]) << " ± "
           << fixed(cmp.total_area_ratio_uncertainties[t]) << " | "
           << fixed(1.0 / cmp.total_area_ratios[t]) << "x |";
        for (std::size_t k = 0; k < cmp.peak_labels.size(); ++k)
        {
            md << ' ' << fixed(cmp.per_peak_area_ratios[t][k]) << " ± "
               << fixed(cmp.per_peak_area_ratio_uncertainties[t][k]) << " |";
        }
        md << ' ' << fixed(1.0 / entries[t].second.total_area) << " | "
           << (q_tls[t] ? fixed(q_tls[t]->first) : std::string("n/a")) << " |\n";
    }
    if (!cmp.notes.empty())
    {
        md << "\n" << cmp.notes;
    }
    write_text(ctx.output(id + ".comparison.md"), md.str());
    write_text(ctx.output(id + ".comparison_plot.json"),
               dump_json(plot_manifest("area ratio by treatment", id + ".comparison.csv", "treatment",
                                       {"area_ratio"}, "treatment", "area ratio", false)));

    *ctx.out << dest.string() << ": " << cmp.labels.size() << " treatments\n";
    if (!cmp.notes.empty())
    {
        *ctx.out << cmp.notes;
    }
    return code;
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//
struct PresetReader
{
    Json const& root;

    Json const& at(Json const& obj, std::string const& key, std::string const& path) const
    {
        if (!obj.is_object() || !obj.contains(key))
        {
            throw ConfigError(path + "." + key + ": required");
        }
        return obj.at(key);
    }
    double number(Json const& obj, std::string const& key, std::string const& path) const
    {
        auto const& v = at(obj, key, path);
        if (!v.is_number())
        {
            throw ConfigError(path + "." + key + ": must be a number");
        }
        return v.get<double>();
    }
    std::vector<double> grid(Json const& obj, std::string const& path) const
    {
        double const start = number(obj, "start", path);
        double const stop = number(obj, "stop", path);
        auto const& c = at(obj, "count", path);
        if (!c.is_number_integer() || c.get<long long>() < 2)
        {
            throw ConfigError(path + ".count: must be an integer >= 2");
        }
        auto const count = c.get<std::size_t>();
        std::string const spacing = obj.value("spacing", "linear");
        try
        {
            if (spacing == "log")
            {
                return log_grid(start, stop, count);
            }
            if (spacing != "linear")
            {
                throw ConfigError(path + ".spacing: must be 'linear' or 'log'");
            }
            return linear_grid(start, stop, count);
        }
        catch (std::invalid_argument const& e)
        {
            throw ConfigError(path + ": " + e.what());
        }
    }
    NoiseSpec noise(Json const& obj, std::string const& path, std::uint64_t seed) const
    {
        NoiseSpec n;
        n.seed = seed;
        if (obj.is_null())
        {
            return n;
        }
        std::string const mode = obj.value("mode", "snr");
        if (mode == "snr")
        {
            n.mode = NoiseLevel::snr;
        }
        else if (mode == "absolute")
        {
            n.mode = NoiseLevel::absolute;
        }
        else if (mode == "relative")
        {
            n.mode = NoiseLevel::relative;
        }
        else
        {
            throw ConfigError(path + ".mode: must be 'snr', 'absolute' or 'relative'");
        }
        n.level = number(obj, "level", path);
        return n;
    }
    ResonatorFit resonator(Json const& obj, std::string const& path, double q_internal) const
    {
        try
        {
            return make_resonator(number(obj, "f0_hz", path), q_internal,
                                  number(obj, "q_coupling", path),
                                  obj.value("mismatch_angle_rad", 0.0),
                                  obj.value("amplitude_scale", 1.0),
                                  obj.value("phase_offset_rad", 0.0), obj.value("cable_delay_s", 0.0));
        }
        catch (std::invalid_argument const& e)
        {
            throw ConfigError(path + ": " + e.what());
        }
    }
    CompositeSpectrumModel model(std::string const& path) const
    {
        try
        {
            auto m = model_from_json(at(root, "model", "preset"));
            validate(m);
            return m;
        }
        catch (std::invalid_argument const& e)
        {
            throw ConfigError(path + ": " + e.what());
        }
        catch (Json::exception const& e)
        {
            throw ConfigError(path + ": " + e.what());
        }
    }
};

fs::path find_preset(std::string const& name)
{
    fs::path p(name);
    if (p.extension() == ".json" && fs::exists(p))
    {
        return p;
    }
    fs::path const candidate = preset_directory() / (name + ".json");
    if (fs::exists(candidate))
    {
        return candidate;
    }
    std::string list;
    if (fs::is_directory(preset_directory()))
    {
        std::vector<std::string> found;
        for (auto const& e : fs::directory_iterator(preset_directory()))
        {
            if (e.path().extension() == ".json")
            {
                found.push_back(e.path().stem().string());
            }
        }
        std::sort(found.begin(), found.end());
        for (auto const& f : found)
        {
            list += (list.empty() ? "" : ", ") + f;
        }
    }
    throw ConfigError("preset: unknown preset '" + name + "' (available: " + list + ")");
}

int cmd_simulate(Context& ctx, std::string const& preset_name, std::optional<std::uint64_t> seed)
{
    fs::path const path = find_preset(preset_name);
    Json preset = read_json_file(path);
    PresetReader const r{preset};
    std::string const name = preset.value("name", path.stem().string());
    std::string const kind = preset.value("kind", "");
    std::uint64_t const s = seed ? *seed
                                 : (preset.contains("seed") ? preset.at("seed").get<std::uint64_t>()
                                                            : 0);
    preset["seed"] = s;
    ctx.seeds = {s};

    fs::path dest;
    if (kind == "spectrum")
    {
        SpectrumSimulationOptions opt;
        opt.resonator_f0 = r.number(preset, "resonator_f0_hz", "preset");
        opt.intrinsic_loss = preset.value("intrinsic_loss", opt.intrinsic_loss);
        auto const fields = r.grid(r.at(preset, "fields", "preset"), "preset.fields");
        auto const model = r.model("preset.model");
        auto const noise = r.noise(preset.value("noise", Json()), "preset.noise", s);
        dest = ctx.output(name + ".spectrum.csv");
        write_spectrum(dest, simulate_esr_spectrum(model, fields, noise, opt));
    }
    else if (kind == "s21")
    {
        auto const& res = r.at(preset, "resonator", "preset");
        auto const truth = r.resonator(res, "preset.resonator", r.number(res, "q_internal", "preset.resonator"));
        auto const& c = r.at(preset, "points", "preset");
        auto const freqs = resonance_grid(truth, c.get<std::size_t>(),
                                          preset.value("half_span_linewidths", 6.0));
        auto noise = r.noise(preset.value("noise", Json()), "preset.noise", s);
        noise.kind = NoiseKind::complex_gaussian;
        TraceMetadata meta;
        meta.applied_field = preset.value("field_tesla", 0.0);
        meta.drive_power = preset.value("drive_power_watt", 0.0);
        meta.temperature = preset.value("temperature_kelvin", 0.0);
        dest = ctx.output(name + ".traces.csv");
        write_traces(dest, {simulate_s21(truth, freqs, noise, meta)});
    }
    else if (kind == "esr_traces")
    {
        auto const model = r.model("preset.model");
        auto const fields = r.grid(r.at(preset, "fields", "preset"), "preset.fields");
        double const intrinsic = r.number(preset, "intrinsic_loss", "preset");
        auto const& res = r.at(preset, "resonator", "preset");
        auto const& c = r.at(preset, "points", "preset");
        NoiseSpec base = r.noise(preset.value("noise", Json()), "preset.noise", s);
        base.kind = NoiseKind::complex_gaussian;
        Xoshiro256 seeds(s);
        std::vector<ComplexTrace> traces;
        for (double b : fields)
        {
            auto const truth = r.resonator(res, "preset.resonator", 1.0 / (intrinsic + evaluate(model, b)));
            auto const freqs = resonance_grid(truth, c.get<std::size_t>(),
                                              preset.value("half_span_linewidths", 6.0));
            NoiseSpec n = base;
            n.seed = seeds.next();
            TraceMetadata meta{b, preset.value("drive_power_watt", 0.0),
                               preset.value("temperature_kelvin", 0.0)};
            traces.push_back(simulate_s21(truth, freqs, n, meta));
        }
        dest = ctx.output(name + ".traces.csv");
        write_traces(dest, traces);
    }
    else if (kind == "tls" || kind == "saturation")
    {
        auto const& t = r.at(preset, "truth", "preset");
        auto const grid = r.grid(r.at(preset, "grid", "preset"), "preset.grid");
        auto const noise = r.noise(preset.value("noise", Json()), "preset.noise", s);
        PowerSweep sweep;
        try
        {
            if (kind == "tls")
            {
                TlsLossParams const truth{r.number(t, "delta0", "preset.truth"),
                                          r.number(t, "q_tls", "preset.truth"),
                                          r.number(t, "n_c", "preset.truth"),
                                          r.number(t, "beta", "preset.truth")};
                sweep.axis = SweepAxis::photons;
                sweep.quantity = SweepQuantity::qi;
                sweep.points = simulate_tls_sweep(truth, grid, noise);
            }
            else
            {
                SaturationParams const truth{r.number(t, "qb0_inverse", "preset.truth"),
                                             r.number(t, "p_sat_watt", "preset.truth"),
                                             r.number(t, "epsilon", "preset.truth")};
                sweep.axis = SweepAxis::circulating_power;
                sweep.quantity = SweepQuantity::qb_inverse;
                sweep.points = simulate_saturation_sweep(truth, grid, noise);
            }
        }
        catch (std::invalid_argument const& e)
        {
            throw ConfigError("preset.truth: " + std::string(e.what()));
        }
        dest = ctx.output(name + ".sweep.csv");
        write_sweep(dest, sweep);
    }
    else
    {
        throw ConfigError("preset.kind: must be one of spectrum, s21, esr_traces, tls, saturation");
    }

    Json truth = Json::object();
    Json prov = Json::object();
    prov["tool"] = "esrtk";
    prov["version"] = tool_version();
    prov["command"] = "simulate";
    prov["preset"] = name;
    prov["seeds"] = ctx.seeds;
    truth["provenance"] = std::move(prov);
    truth["truth"] = preset;
    write_text(ctx.output(name + ".truth.json"), dump_json(truth));
    *ctx.out << dest.string() << ": simulated " << kind << " preset '" << name << "' with seed "
             << s << '\n';
    return ok;
}

}  // namespace

//---------------------------------------------------------------------------//
fs::path preset_directory()
{
    return fs::path(ESRTK_PRESET_DIR);
}

int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"esrtk: ESR loss spectroscopy of superconducting resonators", "esrtk"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version());

    std::string config_path;
    std::string out_dir;
    std::string template_name;
    bool verbose = false;
    std::vector<std::string> inputs;
    auto add_common = [&](CLI::App* sub, bool with_template) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--verbose", verbose, "progress messages on stderr");
        if (with_template)
        {
            sub->add_option("--template", template_name, "auto or a standard template name");
        }
    };
    auto* fit = app.add_subcommand("fit-s21", "fit notch resonances in S21 trace CSVs");
    fit->add_option("inputs", inputs, "trace CSV files");
    add_common(fit, false);
    auto* spec = app.add_subcommand("spectrum", "build and decompose an ESR loss spectrum");
    spec->add_option("inputs", inputs, "fit reports, trace CSVs or a spectrum CSV");
    add_common(spec, true);
    auto* power = app.add_subcommand("power", "fit TLS or spin-saturation power laws");
    power->add_option("inputs", inputs, "power sweep CSV files");
    add_common(power, false);
    auto* cmp = app.add_subcommand("compare", "compare decompositions across treatments");
    cmp->add_option("inputs", inputs, "decomposition reports");
    add_common(cmp, false);
    auto* sim = app.add_subcommand("simulate", "generate synthetic data from a preset");
    std::string preset;
    std::optional<std::uint64_t> seed;
    sim->add_option("preset", preset, "preset name or preset JSON file")->required();
    sim->add_option("--seed", seed, "64-bit seed overriding the preset's");
    sim->add_option("--out", out_dir, "output directory");
    sim->add_flag("--verbose", verbose, "progress messages on stderr");

    std::vector<std::string> argv_copy(args.rbegin(), args.rend());
    if (!argv_copy.empty())
    {
        argv_copy.pop_back();  // program name
    }
    try
    {
        app.parse(argv_copy);
    }
    catch (CLI::CallForHelp const&)
    {
        out << app.help();
        return ok;
    }
    catch (CLI::CallForVersion const&)
    {
        out << tool_version() << '\n';
        return ok;
    }
    catch (CLI::ParseError const& e)
    {
        err << "esrtk: " << e.what() << '\n';
        return input_error;
    }

    Context ctx;
    ctx.out = &out;
    ctx.err = &err;
    ctx.verbose = verbose;
    try
    {
        if (!config_path.empty())
        {
            ctx.config = load_config(config_path);
            ctx.base = fs::path(config_path).parent_path();
        }
        if (!inputs.empty())
        {
            ctx.config.inputs = inputs;
            ctx.config.labels.clear();
            ctx.config.power_fits.clear();
            ctx.base.clear();
        }
        if (!out_dir.empty())
        {
            ctx.config.output_dir = out_dir;
        }
        if (!template_name.empty())
        {
            ctx.config.template_name = template_name;
        }
        validate(ctx.config, ctx.base);

        if (sim->parsed())
        {
            ctx.command = "simulate";
            return cmd_simulate(ctx, preset, seed);
        }
        if (fit->parsed())
        {
            ctx.command = "fit-s21";
            return cmd_fit_s21(ctx);
        }
        if (spec->parsed())
        {
            ctx.command = "spectrum";
            return cmd_spectrum(ctx);
        }
        if (power->parsed())
        {
            ctx.command = "power";
            return cmd_power(ctx);
        }
        ctx.command = "compare";
        return cmd_compare(ctx);
    }
    catch (ConfigError const& e)
    {
        err << "esrtk: configuration error: " << e.what() << '\n';
    }
    catch (InputError const& e)
    {
        err << "esrtk: input error: " << e.what() << '\n';
    }
    catch (fs::filesystem_error const& e)
    {
        err << "esrtk: file error: " << e.what() << '\n';
    }
    catch (std::invalid_argument const& e)
    {
        err << "esrtk: invalid input: " << e.what() << '\n';
    }
    catch (std::domain_error const& e)
    {
        err << "esrtk: invalid input: " << e.what() << '\n';
    }
    catch (Json::exception const& e)
    {
        err << "esrtk: malformed JSON input: " << e.what() << '\n';
    }
    return input_error;
}

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err)
{
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace esr::cli
