// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file test_io_report.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <doctest.h>

#include "esrtk/io.hpp"
#include "esrtk/pipeline.hpp"
#include "esrtk/report.hpp"
#include "esrtk/synthetic.hpp"
#include "testing.hpp"

using namespace esr;
using esr::test::ScratchDir;
using esr::test::spit;

namespace
{
//! The message of the InputError thrown by f, or empty.
template<class F>
std::string input_error(F&& f)
{
    try
    {
        f();
    }
    catch (InputError const& e)
    {
        return e.what();
    }
    return {};
}
}  // namespace

TEST_CASE("CSV basics: BOM, comments, metadata")
{
    ScratchDir dir("io-basic");
    spit(dir / "a.csv",
         "\xEF\xBB\xBF# resonator_f0_hz = 4.47e9\n# free text\n\nfield_tesla,qb_inverse\n"
         "0,0\n0.1,1e-6\r\n0.2,2e-6\n");
    auto const t = read_csv(dir / "a.csv");
    CHECK(t.header == std::vector<std::string>{"field_tesla", "qb_inverse"});
    CHECK(t.rows.size() == 3);
    CHECK(t.line_numbers == std::vector<std::size_t>{5, 6, 7});
    CHECK(t.metadata.at("resonator_f0_hz") == "4.47e9");
    CHECK(t.column("qb_inverse") == 1);
    CHECK_FALSE(t.has("qi"));

    auto const s = read_spectrum(dir / "a.csv");
    CHECK(s.resonator_f0 == 4.47e9);
    CHECK(s.qb_inverse[1] == 1e-6);
}

TEST_CASE("CSV diagnostics carry path and line")
{
    ScratchDir dir("io-errors");
    auto const p = (dir / "bad.csv").string();

    spit(dir / "bad.csv", "field_tesla,qb_inverse\n0,0\n0.1,abc\n");
    CHECK(input_error([&] { read_csv(p); }) == p + ":3: column 'qb_inverse': 'abc' is not a number");

    spit(dir / "bad.csv", "field_tesla,qb_inverse\n0,0\n0.1\n");
    CHECK(input_error([&] { read_csv(p); }) == p + ":3: expected 2 fields, found 1");

    spit(dir / "bad.csv", "0,1\n0.1,1\n");
    CHECK(input_error([&] { read_csv(p); }).starts_with(p + ":1: header row is missing"));

    spit(dir / "bad.csv", "field_tesla,qb_inverse\n0,0\n0.1,nan\n");
    CHECK(input_error([&] { read_csv(p); }) == p + ":3: column 'qb_inverse' is not finite");

    spit(dir / "bad.csv", "");
    CHECK(input_error([&] { read_csv(p); }) == p + ":1: file has no header row");

    spit(dir / "bad.csv", "field_tesla,qb_inverse\n");
    CHECK(input_error([&] { read_csv(p); }) == p + ":1: file has no data rows");

    spit(dir / "bad.csv", "field_tesla,field_tesla\n0,0\n");
    CHECK(input_error([&] { read_csv(p); }).starts_with(p + ":1: duplicate column"));

    spit(dir / "bad.csv", "field_tesla,qb_inverse\n0,0\n0.2,1\n0.1,1\n");
    CHECK(input_error([&] { read_spectrum(p); }) == p + ":4: fields must be strictly increasing");

    spit(dir / "bad.csv", "field_tesla,other\n0,0\n0.2,1\n");
    CHECK(input_error([&] { read_spectrum(p); }) == p + ":1: missing required column 'qb_inverse'");

    spit(dir / "bad.csv", "photons,qi,qb_inverse\n1,1,1\n");
    CHECK(input_error([&] { read_sweep(p); }).starts_with(p + ":1: expected exactly one"));

    spit(dir / "bad.csv", "photons,qi\n1,1\n2,-1\n");
    CHECK(input_error([&] { read_sweep(p); }) == p + ":3: qi must be positive");

    CHECK(input_error([&] { read_csv(dir / "missing.csv"); }).ends_with("cannot open file"));
}

TEST_CASE("traces split on metadata changes and round trip")
{
    ScratchDir dir("io-traces");
    auto const truth = make_resonator(4.47e9, 1e5, 5e4, 0.1);
    auto const grid = resonance_grid(truth, 64);
    std::vector<ComplexTrace> traces;
    for (double b : {0.0, 0.1, 0.2})
    {
        traces.push_back(simulate_s21(truth, grid,
                                      NoiseSpec{NoiseKind::complex_gaussian, NoiseLevel::snr, 40.0,
                                                static_cast<std::uint64_t>(b * 10)},
                                      TraceMetadata{b, 1e-15, 0.01}));
    }
    write_traces(dir / "t.csv", traces);
    auto const back = read_traces(dir / "t.csv");
    REQUIRE(back.size() == 3);
    for (std::size_t k = 0; k < 3; ++k)
    {
        CHECK(back[k].frequencies == traces[k].frequencies);
        CHECK(back[k].s21 == traces[k].s21);
        CHECK(back[k].metadata.applied_field == traces[k].metadata.applied_field);
        CHECK(back[k].metadata.drive_power == 1e-15);
    }

    // a trace too short to fit is reported at its first row
    std::string text = "frequency_hz,s21_real,s21_imag,field_tesla,drive_power_watt,temperature_kelvin\n";
    for (int i = 0; i < 4; ++i)
    {
        text += std::to_string(1e9 + i) + ",1,0,0,0,0\n";
    }
    spit(dir / "short.csv", text);
    auto const p = (dir / "short.csv").string();
    CHECK(input_error([&] { read_traces(p); }).starts_with(p + ":2: trace starting here"));
}

TEST_CASE("spectrum and sweep round trips")
{
    ScratchDir dir("io-roundtrip");
    CompositeSpectrumModel m;
    m.lorentzians = {{0.162, 1.2e-3, 6e-6, "A"}};
    auto const s = simulate_esr_spectrum(m, linear_grid(0.0, 0.3, 101),
                                         NoiseSpec{NoiseKind::gaussian, NoiseLevel::snr, 20.0, 1});
    write_spectrum(dir / "s.csv", s);
    auto const back = read_spectrum(dir / "s.csv");
    CHECK(back.fields == s.fields);
    CHECK(back.qb_inverse == s.qb_inverse);
    CHECK(back.resonator_f0 == s.resonator_f0);
    CHECK(back.reference_qi_inverse == s.reference_qi_inverse);

    PowerSweep sweep;
    sweep.axis = SweepAxis::circulating_power;
    sweep.quantity = SweepQuantity::qb_inverse;
    sweep.metadata["resonator"] = "r1";
    sweep.points = simulate_saturation_sweep({4e-6, 0.71e-9, 1.0}, log_grid(1e-12, 1e-6, 13),
                                             NoiseSpec{});
    write_sweep(dir / "p.csv", sweep);
    auto const pb = read_sweep(dir / "p.csv");
    CHECK(pb.axis == SweepAxis::circulating_power);
    CHECK(pb.quantity == SweepQuantity::qb_inverse);
    CHECK(pb.metadata.at("resonator") == "r1");
    REQUIRE(pb.points.size() == 13);
    for (std::size_t i = 0; i < 13; ++i)
    {
        CHECK(pb.points[i].x == sweep.points[i].x);
        CHECK(pb.points[i].y == sweep.points[i].y);
    }
}

TEST_CASE("numbers survive text")
{
    test::Gen gen(81);
    for (int i = 0; i < 2000; ++i)
    {
        double const v = (gen.bits() & 1 ? -1.0 : 1.0) * gen.log_uniform(1e-300, 1e300);
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("JSON output: nulls carry reasons")
{
    Json j = Json::object();
    put_number(j, "ok", 1.5);
    put_number(j, "bad", std::nan(""), "no zero-field reference");
    put_number(j, "big", std::numeric_limits<double>::infinity());
    CHECK(j["ok"] == 1.5);
    CHECK(j["bad"].is_null());
    CHECK(j["null_reasons"]["bad"] == "no zero-field reference");
    CHECK(j["null_reasons"]["big"] == "not finite");
    CHECK(get_number(j, "ok") == 1.5);
    CHECK(std::isnan(get_number(j, "bad")));
    CHECK_THROWS_AS(get_number(j, "absent"), std::invalid_argument);
    CHECK_THROWS_AS(get_number(j, "null_reasons"), std::invalid_argument);

    Json k = Json::object();
    k["x"] = 0.1;
    k["y"] = std::nan("");
    CHECK(dump_json(k) == "{\n  \"x\": 0.10000000000000001,\n  \"y\": null\n}\n");
}

TEST_CASE("record round trips")
{
    auto const r = make_resonator(4.47e9, 1.2e5, 4e4, 0.2, 0.5, 1.0, 3e-8);
    auto const back = resonator_fit_from_json(to_json(r));
    CHECK(back.q_internal == r.q_internal);
    CHECK(back.q_coupling == r.q_coupling);
    CHECK(back.f0 == r.f0);
    CHECK(back.cable_delay == r.cable_delay);

    CompositeSpectrumModel m;
    m.lorentzians = {{0.162, 1.2e-3, 6e-6, "A"}};
    m.gaussians = {{0.081, 0.02, 1.5e-6, "half-field"}};
    m.background = PedestalBackground{0.05, 5e-3, 1.5e-6, std::numeric_limits<double>::infinity()};
    m.constant_offset = -1e-7;
    auto const mb = model_from_json(to_json(m));
    CHECK(mb.lorentzians[0].label == "A");
    CHECK(mb.gaussians[0].center == 0.081);
    REQUIRE(mb.background);
    CHECK(std::isinf(mb.background->decay_scale));
    CHECK(mb.constant_offset == -1e-7);
    CHECK(dump_json(to_json(mb)) == dump_json(to_json(m)));
}

TEST_CASE("configuration")
{
    ScratchDir dir("io-config");
    spit(dir / "in.csv", "field_tesla,qb_inverse\n0,0\n0.1,1\n");
    Json j = Json::parse(R"({"inputs": ["in.csv"], "template": "two-lorentzian",
                             "fit": {"max_iterations": 50}, "power": {"law": "tls", "t2e_s": 3e-8}})");
    auto const c = config_from_json(j, dir.path());
    CHECK(c.template_name == "two-lorentzian");
    CHECK(c.fit.max_iterations == 50);
    CHECK(c.power_law == PowerLaw::tls);
    CHECK(c.t2e == 3e-8);
    CHECK(config_from_json(to_json(c), dir.path()) == c);
    CHECK(config_hash(config_from_json(to_json(c), dir.path())) == config_hash(c));
    PipelineConfig other = c;
    other.g_seed = 2.0023;
    CHECK(config_hash(other) != config_hash(c));

    auto config_error = [&](char const* text) {
        try
        {
            config_from_json(Json::parse(text), dir.path());
        }
        catch (ConfigError const& e)
        {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(config_error(R"({"bogus": 1})") == "config.bogus: unknown key");
    CHECK(config_error(R"({"fit": {"tolerance": -1}})") == "config.fit.tolerance: must be positive");
    CHECK(config_error(R"({"template": "three"})").starts_with("config.template: unknown template"));
    CHECK(config_error(R"({"inputs": ["nope.csv"]})").starts_with("config.inputs[0]: file"));
    CHECK(config_error(R"({"inputs": ["in.csv"], "labels": ["a", "b"]})")
          == "config.labels: must have one label per input");
    CHECK(config_error(R"({"reference_policy": "first"})").starts_with("config.reference_policy"));
    CHECK(config_error(R"({"fit": {"max_iterations": 0.5}})").starts_with("config.fit.max_iterations"));

    spit(dir / "broken.json", "{ not json");
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "absent.json"), ConfigError);
}
