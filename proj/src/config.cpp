// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "esrtk/io.hpp"
#include "esrtk/pipeline.hpp"

#ifndef ESRTK_VERSION
#    define ESRTK_VERSION "0.0.0"
#endif

namespace esr
{
namespace
{
[[noreturn]] void bad(std::string const& path, std::string const& what)
{
    throw ConfigError(path + ": " + what);
}

std::string join(std::string const& path, std::string const& key)
{
    return path + "." + key;
}

void check_keys(Json const& obj, std::string const& path, std::set<std::string> const& allowed)
{
    if (!obj.is_object())
    {
        bad(path, "must be an object");
    }
    for (auto const& [key, value] : obj.items())
    {
        if (!allowed.contains(key))
        {
            bad(join(path, key), "unknown key");
        }
    }
}

double number(Json const& v, std::string const& path)
{
    if (!v.is_number())
    {
        bad(path, "must be a number");
    }
    double const x = v.get<double>();
    if (!std::isfinite(x))
    {
        bad(path, "must be finite");
    }
    return x;
}

double positive(Json const& v, std::string const& path)
{
    double const x = number(v, path);
    if (!(x > 0.0))
    {
        bad(path, "must be positive");
    }
    return x;
}

std::string text(Json const& v, std::string const& path)
{
    if (!v.is_string())
    {
        bad(path, "must be a string");
    }
    return v.get<std::string>();
}

std::vector<std::string> text_list(Json const& v, std::string const& path)
{
    if (!v.is_array())
    {
        bad(path, "must be an array of strings");
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out.push_back(text(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

char const* to_string(ReferencePolicy p)
{
    return p == ReferencePolicy::zero_field_only ? "zero_field_only" : "lowest_field";
}

char const* to_string(PowerLaw law)
{
    switch (law)
    {
        case PowerLaw::automatic:
            return "auto";
        case PowerLaw::tls:
            return "tls";
        case PowerLaw::saturation:
            return "saturation";
    }
    return "";
}

void check_paths(std::vector<std::string> const& paths,
                 std::string const& path,
                 std::filesystem::path const& base)
{
    for (std::size_t i = 0; i < paths.size(); ++i)
    {
        std::filesystem::path p(paths[i]);
        if (p.is_relative() && !base.empty())
        {
            p = base / p;
        }
        if (!std::filesystem::exists(p))
        {
            bad(path + "[" + std::to_string(i) + "]", "file '" + p.string() + "' does not exist");
        }
    }
}
}  // namespace

//---------------------------------------------------------------------------//
bool PipelineConfig::operator==(PipelineConfig const& o) const
{
    return inputs == o.inputs && labels == o.labels && power_fits == o.power_fits
           && resonator_id == o.resonator_id && g_seed == o.g_seed
           && template_name == o.template_name && fit.tolerance == o.fit.tolerance
           && fit.step_tolerance == o.fit.step_tolerance
           && fit.max_iterations == o.fit.max_iterations
           && fit.initial_damping == o.fit.initial_damping && output_dir == o.output_dir
           && reference_policy == o.reference_policy && resonator_f0 == o.resonator_f0
           && hyperfine_frequency == o.hyperfine_frequency
           && detection_threshold == o.detection_threshold && power_law == o.power_law
           && field_to_power_alpha == o.field_to_power_alpha && t2e == o.t2e;
}

PipelineConfig config_from_json(Json const& j, std::filesystem::path const& base_dir)
{
    std::string const root = "config";
    check_keys(j, root,
               {"inputs", "labels", "power_fits", "resonator_id", "species", "template", "fit",
                "output_dir", "reference_policy", "resonator_f0_hz", "hyperfine_frequency_hz",
                "detection_threshold", "power"});
    PipelineConfig c;
    if (j.contains("inputs"))
    {
        c.inputs = text_list(j.at("inputs"), join(root, "inputs"));
    }
    if (j.contains("labels"))
    {
        c.labels = text_list(j.at("labels"), join(root, "labels"));
    }
    if (j.contains("power_fits"))
    {
        c.power_fits = text_list(j.at("power_fits"), join(root, "power_fits"));
    }
    if (j.contains("resonator_id"))
    {
        c.resonator_id = text(j.at("resonator_id"), join(root, "resonator_id"));
    }
    if (j.contains("species"))
    {
        auto const& s = j.at("species");
        std::string const path = join(root, "species");
        check_keys(s, path, {"g_seed"});
        if (s.contains("g_seed"))
        {
            c.g_seed = positive(s.at("g_seed"), join(path, "g_seed"));
        }
    }
    if (j.contains("template"))
    {
        c.template_name = text(j.at("template"), join(root, "template"));
    }
    if (j.contains("fit"))
    {
        auto const& f = j.at("fit");
        std::string const path = join(root, "fit");
        check_keys(f, path, {"tolerance", "step_tolerance", "max_iterations", "initial_damping"});
        if (f.contains("tolerance"))
        {
            c.fit.tolerance = positive(f.at("tolerance"), join(path, "tolerance"));
        }
        if (f.contains("step_tolerance"))
        {
            c.fit.step_tolerance = positive(f.at("step_tolerance"), join(path, "step_tolerance"));
        }
        if (f.contains("max_iterations"))
        {
            auto const& v = f.at("max_iterations");
            if (!v.is_number_integer() || v.get<long long>() < 1
                || v.get<long long>() > 1000000)
            {
                bad(join(path, "max_iterations"), "must be an integer in [1, 1000000]");
            }
            c.fit.max_iterations = v.get<int>();
        }
        if (f.contains("initial_damping"))
        {
            c.fit.initial_damping
                = positive(f.at("initial_damping"), join(path, "initial_damping"));
        }
    }
    if (j.contains("output_dir"))
    {
        c.output_dir = text(j.at("output_dir"), join(root, "output_dir"));
    }
    if (j.contains("reference_policy"))
    {
        std::string const v = text(j.at("reference_policy"), join(root, "reference_policy"));
        if (v == "zero_field_only")
        {
            c.reference_policy = ReferencePolicy::zero_field_only;
        }
        else if (v == "lowest_field")
        {
            c.reference_policy = ReferencePolicy::lowest_field;
        }
        else
        {
            bad(join(root, "reference_policy"), "must be 'zero_field_only' or 'lowest_field'");
        }
    }
    if (j.contains("resonator_f0_hz") && !j.at("resonator_f0_hz").is_null())
    {
        c.resonator_f0 = positive(j.at("resonator_f0_hz"), join(root, "resonator_f0_hz"));
    }
    if (j.contains("hyperfine_frequency_hz"))
    {
        c.hyperfine_frequency
            = positive(j.at("hyperfine_frequency_hz"), join(root, "hyperfine_frequency_hz"));
    }
    if (j.contains("detection_threshold"))
    {
        c.detection_threshold
            = positive(j.at("detection_threshold"), join(root, "detection_threshold"));
    }
    if (j.contains("power"))
    {
        auto const& p = j.at("power");
        std::string const path = join(root, "power");
        check_keys(p, path, {"law", "field_to_power_alpha", "t2e_s"});
        if (p.contains("law"))
        {
            std::string const v = text(p.at("law"), join(path, "law"));
            if (v == "auto")
            {
                c.power_law = PowerLaw::automatic;
            }
            else if (v == "tls")
            {
                c.power_law = PowerLaw::tls;
            }
            else if (v == "saturation")
            {
                c.power_law = PowerLaw::saturation;
            }
            else
            {
                bad(join(path, "law"), "must be 'auto', 'tls' or 'saturation'");
            }
        }
        if (p.contains("field_to_power_alpha"))
        {
            c.field_to_power_alpha
                = positive(p.at("field_to_power_alpha"), join(path, "field_to_power_alpha"));
        }
        if (p.contains("t2e_s") && !p.at("t2e_s").is_null())
        {
            c.t2e = positive(p.at("t2e_s"), join(path, "t2e_s"));
        }
    }
    validate(c, base_dir);
    return c;
}

void validate(PipelineConfig const& c, std::filesystem::path const& base_dir)
{
    std::string const root = "config";
    auto const names = standard_template_names();
    if (c.template_name != "auto"
        && std::find(names.begin(), names.end(), c.template_name) == names.end())
    {
        std::string list = "auto";
        for (auto const& n : names)
        {
            list += ", " + n;
        }
        bad(join(root, "template"), "unknown template '" + c.template_name + "' (one of " + list + ")");
    }
    if (!c.labels.empty() && c.labels.size() != c.inputs.size())
    {
        bad(join(root, "labels"), "must have one label per input");
    }
    if (!c.power_fits.empty() && c.power_fits.size() != c.inputs.size())
    {
        bad(join(root, "power_fits"), "must have one entry per input");
    }
    if (c.output_dir.empty())
    {
        bad(join(root, "output_dir"), "must not be empty");
    }
    if (!(c.g_seed > 0.0) || !std::isfinite(c.g_seed))
    {
        bad(join(root, "species.g_seed"), "must be positive");
    }
    if (!(c.fit.tolerance > 0.0) || !(c.fit.step_tolerance > 0.0) || c.fit.max_iterations < 1
        || !(c.fit.initial_damping > 0.0))
    {
        bad(join(root, "fit"), "tolerances and damping must be positive, max_iterations >= 1");
    }
    check_paths(c.inputs, join(root, "inputs"), base_dir);
    check_paths(c.power_fits, join(root, "power_fits"), base_dir);
}

PipelineConfig load_config(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw ConfigError("config: cannot open '" + path.string() + "'");
    }
    Json j;
    try
    {
        j = Json::parse(in);
    }
    catch (Json::parse_error const& e)
    {
        throw ConfigError("config: '" + path.string() + "' is not valid JSON (" + e.what() + ")");
    }
    return config_from_json(j, path.parent_path());
}

Json to_json(PipelineConfig const& c)
{
    Json j = Json::object();
    j["inputs"] = c.inputs;
    j["labels"] = c.labels;
    j["power_fits"] = c.power_fits;
    j["resonator_id"] = c.resonator_id;
    j["species"] = Json{{"g_seed", c.g_seed}};
    j["template"] = c.template_name;
    Json f = Json::object();
    f["tolerance"] = c.fit.tolerance;
    f["step_tolerance"] = c.fit.step_tolerance;
    f["max_iterations"] = c.fit.max_iterations;
    f["initial_damping"] = c.fit.initial_damping;
    j["fit"] = std::move(f);
    j["output_dir"] = c.output_dir;
    j["reference_policy"] = to_string(c.reference_policy);
    j["resonator_f0_hz"] = c.resonator_f0 ? Json(*c.resonator_f0) : Json(nullptr);
    j["hyperfine_frequency_hz"] = c.hyperfine_frequency;
    j["detection_threshold"] = c.detection_threshold;
    Json p = Json::object();
    p["law"] = to_string(c.power_law);
    p["field_to_power_alpha"] = c.field_to_power_alpha;
    p["t2e_s"] = c.t2e ? Json(*c.t2e) : Json(nullptr);
    j["power"] = std::move(p);
    return j;
}

std::uint64_t config_hash(PipelineConfig const& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump_json(to_json(config)))
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string tool_version()
{
    return ESRTK_VERSION;
}

}  // namespace esr
