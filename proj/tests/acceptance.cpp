// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file acceptance.cpp
//! One pass/fail line per acceptance criterion.
//---------------------------------------------------------------------------//
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "esrtk/io.hpp"
#include "esrtk/physics.hpp"
#include "esrtk/pipeline.hpp"
#include "esrtk/power_models.hpp"
#include "esrtk/synthetic.hpp"

namespace fs = std::filesystem;
using namespace esr;

namespace
{
double const h = 6.62607015e-34;
double const mu_b = 9.2740100783e-24;

double rel(double actual, double expected)
{
    return std::abs(actual - expected) / std::abs(expected);
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

//---------------------------------------------------------------------------//
//! Presets are generated through the simulate command into a scratch area.
class Presets
{
  public:
    Presets() : dir_(fs::temp_directory_path() / "esrtk-acceptance")
    {
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Presets() { fs::remove_all(dir_); }

    EsrSpectrum spectrum(std::string const& name, std::uint64_t seed)
    {
        fs::path const out = dir_ / (name + "-" + std::to_string(seed));
        std::ostringstream sink;
        int const code = cli::run({"esrtk", "simulate", name, "--seed", std::to_string(seed),
                                   "--out", out.string()},
                                  sink, sink);
        if (code != 0)
        {
            throw std::runtime_error("simulate " + name + " failed: " + sink.str());
        }
        return read_spectrum(out / (name + ".spectrum.csv"));
    }

    //! Default seed of a preset.
    std::uint64_t seed(std::string const& name) const
    {
        std::ifstream in(cli::preset_directory() / (name + ".json"));
        return Json::parse(in).at("seed").get<std::uint64_t>();
    }

    CompositeSpectrumModel model(std::string const& name) const
    {
        std::ifstream in(cli::preset_directory() / (name + ".json"));
        return model_from_json(Json::parse(in).at("model"));
    }

    double f0(std::string const& name) const
    {
        std::ifstream in(cli::preset_directory() / (name + ".json"));
        return Json::parse(in).at("resonator_f0_hz").get<double>();
    }

  private:
    fs::path dir_;
};

std::string fmt(char const* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

//---------------------------------------------------------------------------//
Outcome linewidth_chain()
{
    double const rate = linewidth_to_rate(1.2e-3, 2.0);
    double const t2e = rate_to_t2e(rate);
    double const t2e_b = rate_to_t2e(670e6);
    bool const pass = rel(33e6, rate) < 0.03 && rel(30e-9, t2e) < 0.03 && rel(1.5e-9, t2e_b) < 0.03
                      && std::abs(rate - 33.6e6) < 0.05e6 && std::abs(t2e - 29.8e-9) < 0.05e-9
                      && std::abs(t2e_b - 1.49e-9) < 0.005e-9;
    return {pass, "rate " + fmt("%.4g", rate / 1e6) + " MHz, T2e " + fmt("%.4g", t2e * 1e9)
                      + " ns, 670 MHz -> " + fmt("%.4g", t2e_b * 1e9)
                      + " ns; published values within 3%"};
}

Outcome field_frequency()
{
    double const b = resonance_field(4.47e9, {2.0});
    double const g = g_factor_from_peak(0.162, 4.47e9);
    bool const pass = std::abs(b - 0.1597) <= 1e-4 && std::abs(g - 1.971) <= 1e-3
                      && rel(0.162, b) < 0.02;
    return {pass, "B(4.47 GHz, g=2) " + fmt("%.5g", b * 1e3) + " mT (159.7 +/- 0.1), g(162 mT) "
                      + fmt("%.5g", g) + " (1.971 +/- 0.001), 162 mT within "
                      + fmt("%.2g", 100 * rel(0.162, b)) + "% (< 2%)"};
}

Outcome half_field(Presets& presets)
{
    auto const s = presets.spectrum("silicon", presets.seed("silicon"));
    double const f0 = presets.f0("silicon");
    auto const one = decompose(s, make_standard_template("one-lorentzian", s, f0), f0);
    double const g2 = one.find_peak("A")->center;
    auto const d = detect_half_field_peak(s, g2);
    double const ratio = d.detected ? d.peak->center / g2 : std::nan("");
    return {d.detected && std::abs(ratio - 0.5) <= 0.02,
            "center/g2_center " + fmt("%.4f", ratio) + " (0.50 +/- 0.02), dAIC "
                + fmt("%.1f", d.delta_aic)};
}

Outcome decomposition_round_trip(Presets& presets)
{
    auto const truth = presets.model("silicon");
    double const f0 = presets.f0("silicon");
    int good = 0;
    int selected = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        auto const s = presets.spectrum("silicon", seed);
        auto const one = decompose(s, make_standard_template("one-lorentzian", s, f0), f0);
        double const g2 = one.find_peak("A")->center;
        TemplateOptions topt;
        auto const hf = detect_half_field_peak(s, g2);
        if (hf.detected)
        {
            topt.half_field = *hf.peak;
        }
        std::vector<DecompositionTemplate> const candidates{
            make_standard_template("one-lorentzian", s, f0, topt),
            make_standard_template("two-lorentzian", s, f0, topt)};
        auto const sel = auto_model_select(s, candidates, f0);
        bool ok = sel.best.template_name == "two-lorentzian" && sel.ranking.size() == 2
                  && sel.ranking[1].delta_aic > decisive_delta_aic;
        selected += ok ? 1 : 0;
        for (auto const& p : truth.lorentzians)
        {
            auto const* got = sel.best.find_peak(p.label);
            ok = ok && got && rel(got->center, p.center) <= 0.005 && rel(got->fwhm, p.fwhm) <= 0.10
                 && rel(got->amplitude, p.amplitude) <= 0.10;
        }
        good += ok ? 1 : 0;
    }
    return {good >= 95, std::to_string(good) + "/100 seeds within tolerance (>= 95), two peaks "
                            "selected with dAIC > 10 in " + std::to_string(selected) + "/100"};
}

Outcome tls_round_trip()
{
    TlsLossParams const truth{1e-6, 1e5, 1.0, 0.2};
    auto const n = log_grid(0.1, 1e6, 41);
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        auto const fit = fit_tls_law(simulate_tls_sweep(
            truth, n, NoiseSpec{NoiseKind::gaussian, NoiseLevel::relative, 0.05, seed}));
        good += std::abs(fit.params.beta - 0.2) <= 0.05 && rel(fit.params.q_tls, 1e5) <= 0.10;
    }
    return {good >= 95, std::to_string(good) + "/100 seeds with |beta - 0.2| <= 0.05 and Q_TLS "
                            "within 10% (>= 95)"};
}

Outcome saturation_round_trip()
{
    auto const p = log_grid(1e-12, 1e-6, 61);
    std::string detail;
    bool pass = true;
    for (double p_sat : {0.71e-9, 0.44e-9})
    {
        SaturationParams const truth{4e-6, p_sat, 1.0};
        int good = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed)
        {
            auto const fit = fit_saturation(simulate_saturation_sweep(
                truth, p, NoiseSpec{NoiseKind::gaussian, NoiseLevel::relative, 0.10, seed}));
            good += rel(fit.params.p_sat, p_sat) <= 0.15;
        }
        pass = pass && good >= 90;
        detail += (detail.empty() ? "" : ", ") + fmt("%.2f", p_sat * 1e9) + " nW: "
                  + std::to_string(good) + "/100";
    }
    return {pass, detail + " within 15% (>= 90 each)"};
}

Outcome t1e_inversion()
{
    double const t1e = invert_psat_for_t1e(0.71e-9, 30e-9, {0.21}, 2.0);
    double const gamma = 2.0 * mu_b / (h / (2.0 * std::numbers::pi));
    double const oracle = 1.0 / (0.71e-9 * 30e-9 * gamma * gamma * 0.21 * 0.21);
    double const back = saturation_power(t1e, 30e-9, {0.21}, 2.0);
    return {rel(t1e, oracle) <= 1e-9 && rel(back, 0.71e-9) <= 1e-12,
            "T1e " + fmt("%.5g", t1e * 1e6) + " us, oracle error " + fmt("%.1e", rel(t1e, oracle))
                + " (<= 1e-9), round trip " + fmt("%.1e", rel(back, 0.71e-9)) + " (<= 1e-12)"};
}

Outcome treatment_comparison(Presets& presets)
{
    std::vector<std::pair<std::string, DecompositionResult>> entries;
    for (std::string const name : {"silicon", "silicon-hf", "silicon-annealed"})
    {
        auto const s = presets.spectrum(name, presets.seed(name));
        auto a = analyze_spectrum(s, presets.f0(name), {});
        if (!a.decomposition)
        {
            return {false, name + ": no decomposition"};
        }
        entries.emplace_back(name, std::move(*a.decomposition));
    }
    auto const cmp = compare_treatments(entries);
    double const reduction = 1.0 / cmp.total_area_ratios[1];
    bool const uniform = cmp.selective_reductions[1].empty();
    bool const selective = cmp.selective_reductions[2] == std::vector<std::string>{"A"};
    return {std::abs(reduction - 4.0) <= 0.2 && uniform && selective,
            "x0.25 pair: " + fmt("%.3f", reduction) + "-fold (4.0 +/- 0.2), uniform pair flags "
                + std::to_string(cmp.selective_reductions[1].size()) + " peaks, annealed flags "
                + (selective ? "peak A" : "wrong peaks")};
}

Outcome notch_round_trip()
{
    Xoshiro256 draw(2024);
    auto log_uniform = [&](double lo, double hi) {
        return lo * std::pow(hi / lo, draw.uniform());
    };
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        double const qi = log_uniform(1e4, 1e6);
        double const qc = log_uniform(1e4, 1e6);
        double const f0 = 4e9 + 4e9 * draw.uniform();
        double const phi = 0.4 * draw.uniform() - 0.2;
        auto const truth = make_resonator(f0, qi, qc, phi, 1.0, 0.0, 0.0);
        auto const trace = simulate_s21(truth, resonance_grid(truth, 100001),
                                        NoiseSpec{NoiseKind::complex_gaussian, NoiseLevel::snr, 40.0,
                                                  seed});
        try
        {
            auto const fit = fit_s21_notch(trace);
            good += rel(fit.q_internal, qi) <= 0.02 && rel(fit.q_coupling, qc) <= 0.02
                    && rel(fit.f0, f0) <= 0.02;
        }
        catch (NoResonanceError const&)
        {
        }
    }
    return {good >= 95, std::to_string(good) + "/100 draws with Qi, Qc, f0 within 2% (>= 95)"};
}

Outcome hyperfine(Presets& presets)
{
    auto const s = presets.spectrum("sapphire", presets.seed("sapphire"));
    auto const a = analyze_spectrum(s, presets.f0("sapphire"), {});
    if (!a.decomposition || !a.decomposition->satellites)
    {
        return {false, "selected model has no hyperfine satellites"};
    }
    double const f = a.decomposition->satellites->splitting_frequency;
    return {rel(f, 1.42e9) <= 0.02, a.decomposition->template_name + " selected, splitting "
                                        + fmt("%.4g", f / 1e9) + " GHz (1.42 +/- 2%)"};
}

}  // namespace

int main()
{
    Presets presets;
    struct Criterion
    {
        int id;
        char const* name;
        double budget;  // [s]
        std::function<Outcome()> run;
    };
    std::vector<Criterion> const criteria{
        {1, "linewidth/coherence chain", 0.1, linewidth_chain},
        {2, "field/frequency consistency", 0.1, field_frequency},
        {3, "half-field relation", 1.0, [&] { return half_field(presets); }},
        {4, "decomposition round trip", 30.0, [&] { return decomposition_round_trip(presets); }},
        {5, "TLS law round trip", 10.0, tls_round_trip},
        {6, "saturation law round trip", 10.0, saturation_round_trip},
        {7, "T1e inversion", 0.1, t1e_inversion},
        {8, "treatment comparison", 5.0, [&] { return treatment_comparison(presets); }},
        {9, "S21 extraction", 30.0, notch_round_trip},
        {10, "hyperfine satellites", 5.0, [&] { return hyperfine(presets); }},
    };

    int failed = 0;
    for (auto const& c : criteria)
    {
        auto const start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (std::exception const& e)
        {
            o = {false, std::string("threw: ") + e.what()};
        }
        double const secs
            = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool const in_time = secs <= c.budget;
        bool const pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s  %2d %-28s %s [%.2f s, budget %.4g s%s]\n", pass ? "PASS" : "FAIL", c.id,
                    c.name, o.detail.c_str(), secs, c.budget, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}
