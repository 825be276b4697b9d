// SPDX-License-Identifier: Apache-2.0
#include "esrtk/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace esr
{
namespace
{
std::string trim(std::string_view s)
{
    auto const is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.front()))
    {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back()))
    {
        s.remove_suffix(1);
    }
    return std::string(s);
}

std::vector<std::string> split(std::string const& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        auto const comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos)
        {
            break;
        }
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(std::string const& path, std::size_t line, std::string const& what)
{
    throw InputError(path + ":" + std::to_string(line) + ": " + what);
}

std::size_t require(CsvTable const& t, char const* name)
{
    auto const c = t.column(name);
    if (c == CsvTable::npos)
    {
        throw InputError(t.path + ":1: missing required column '" + name + "'");
    }
    return c;
}

double meta_number(CsvTable const& t, std::string const& key, double fallback)
{
    auto const it = t.metadata.find(key);
    if (it == t.metadata.end())
    {
        return fallback;
    }
    double v = 0.0;
    auto const& s = it->second;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        throw InputError(t.path + ": metadata '" + key + "' is not a number");
    }
    return v;
}

std::ofstream open_out(std::filesystem::path const& path)
{
    if (path.has_parent_path())
    {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw InputError("cannot write '" + path.string() + "'");
    }
    return out;
}
}  // namespace

//---------------------------------------------------------------------------//
std::size_t CsvTable::column(std::string const& name) const
{
    auto const it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? npos : static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::filesystem::path const& path)
{
    CsvTable t;
    t.path = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw InputError(t.path + ": cannot open file");
    }
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line))
    {
        ++number;
        if (number == 1 && line.starts_with("\xEF\xBB\xBF"))
        {
            line.erase(0, 3);
        }
        std::string const text = trim(line);
        if (text.empty())
        {
            continue;
        }
        if (text.front() == '#')
        {
            auto const eq = text.find('=');
            if (eq != std::string::npos)
            {
                t.metadata[trim(std::string_view(text).substr(1, eq - 1))]
                    = trim(std::string_view(text).substr(eq + 1));
            }
            continue;
        }
        auto cells = split(text);
        if (!have_header)
        {
            for (auto const& c : cells)
            {
                if (c.empty())
                {
                    fail(t.path, number, "empty column name in header");
                }
                if (std::count(cells.begin(), cells.end(), c) > 1)
                {
                    fail(t.path, number, "duplicate column '" + c + "'");
                }
                double ignored = 0.0;
                auto const [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), ignored);
                if (ec == std::errc{} && ptr == c.data() + c.size())
                {
                    fail(t.path, number, "header row is missing (found a numeric row first)");
                }
            }
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
        {
            fail(t.path, number,
                 "expected " + std::to_string(t.header.size()) + " fields, found "
                     + std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t k = 0; k < cells.size(); ++k)
        {
            auto const& c = cells[k];
            auto const [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[k]);
            if (c.empty() || ec != std::errc{} || ptr != c.data() + c.size())
            {
                fail(t.path, number,
                     "column '" + t.header[k] + "': '" + c + "' is not a number");
            }
            if (!std::isfinite(row[k]))
            {
                fail(t.path, number, "column '" + t.header[k] + "' is not finite");
            }
        }
        t.rows.push_back(std::move(row));
        t.line_numbers.push_back(number);
    }
    if (!have_header)
    {
        throw InputError(t.path + ":" + std::to_string(std::max<std::size_t>(number, 1))
                         + ": file has no header row");
    }
    if (t.rows.empty())
    {
        throw InputError(t.path + ":" + std::to_string(number) + ": file has no data rows");
    }
    return t;
}

std::string format_number(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_text(std::filesystem::path const& path, std::string const& text)
{
    auto out = open_out(path);
    out << text;
    if (!out)
    {
        throw InputError("failed writing '" + path.string() + "'");
    }
}

//---------------------------------------------------------------------------//
std::vector<ComplexTrace> read_traces(std::filesystem::path const& path)
{
    CsvTable const t = read_csv(path);
    std::size_t const cf = require(t, columns::frequency);
    std::size_t const cr = require(t, columns::s21_real);
    std::size_t const ci = require(t, columns::s21_imag);
    std::size_t const cb = require(t, columns::field);
    std::size_t const cp = require(t, columns::drive_power);
    std::size_t const ct = require(t, columns::temperature);

    std::vector<ComplexTrace> traces;
    std::vector<std::size_t> first_line;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        auto const& r = t.rows[i];
        TraceMetadata const meta{r[cb], r[cp], r[ct]};
        bool const same = !traces.empty() && traces.back().metadata.applied_field == meta.applied_field
                          && traces.back().metadata.drive_power == meta.drive_power
                          && traces.back().metadata.temperature == meta.temperature;
        if (!same)
        {
            traces.emplace_back();
            traces.back().metadata = meta;
            first_line.push_back(t.line_numbers[i]);
        }
        auto& tr = traces.back();
        if (!tr.frequencies.empty() && !(r[cf] > tr.frequencies.back()))
        {
            fail(t.path, t.line_numbers[i], "frequency must increase within a trace");
        }
        tr.frequencies.push_back(r[cf]);
        tr.s21.emplace_back(r[cr], r[ci]);
    }
    for (std::size_t k = 0; k < traces.size(); ++k)
    {
        try
        {
            validate(traces[k]);
        }
        catch (std::invalid_argument const& e)
        {
            fail(t.path, first_line[k], std::string("trace starting here: ") + e.what());
        }
    }
    return traces;
}

void write_traces(std::filesystem::path const& path, std::vector<ComplexTrace> const& traces)
{
    std::ostringstream os;
    os << columns::frequency << ',' << columns::s21_real << ',' << columns::s21_imag << ','
       << columns::field << ',' << columns::drive_power << ',' << columns::temperature << '\n';
    for (auto const& tr : traces)
    {
        std::string const meta = format_number(tr.metadata.applied_field) + ','
                                 + format_number(tr.metadata.drive_power) + ','
                                 + format_number(tr.metadata.temperature);
        for (std::size_t i = 0; i < tr.frequencies.size(); ++i)
        {
            os << format_number(tr.frequencies[i]) << ',' << format_number(tr.s21[i].real()) << ','
               << format_number(tr.s21[i].imag()) << ',' << meta << '\n';
        }
    }
    write_text(path, os.str());
}

//---------------------------------------------------------------------------//
EsrSpectrum read_spectrum(std::filesystem::path const& path)
{
    CsvTable const t = read_csv(path);
    std::size_t const cb = require(t, columns::field);
    std::size_t const cq = require(t, columns::qb_inverse);
    EsrSpectrum s;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        double const b = t.rows[i][cb];
        if (b < 0.0)
        {
            fail(t.path, t.line_numbers[i], "field must be non-negative");
        }
        if (!s.fields.empty() && !(b > s.fields.back()))
        {
            fail(t.path, t.line_numbers[i], "fields must be strictly increasing");
        }
        s.fields.push_back(b);
        s.qb_inverse.push_back(t.rows[i][cq]);
    }
    if (s.fields.size() < 2)
    {
        throw InputError(t.path + ": a spectrum needs at least two rows");
    }
    s.resonator_f0 = meta_number(t, "resonator_f0_hz", 0.0);
    s.reference_field = meta_number(t, "reference_field_tesla", s.fields.front());
    s.reference_qi_inverse = meta_number(t, "reference_qi_inverse", 0.0);
    return s;
}

void write_spectrum(std::filesystem::path const& path, EsrSpectrum const& spectrum)
{
    std::ostringstream os;
    os << "# resonator_f0_hz=" << format_number(spectrum.resonator_f0) << '\n'
       << "# reference_field_tesla=" << format_number(spectrum.reference_field) << '\n'
       << "# reference_qi_inverse=" << format_number(spectrum.reference_qi_inverse) << '\n'
       << columns::field << ',' << columns::qb_inverse << '\n';
    for (std::size_t i = 0; i < spectrum.fields.size(); ++i)
    {
        os << format_number(spectrum.fields[i]) << ',' << format_number(spectrum.qb_inverse[i])
           << '\n';
    }
    write_text(path, os.str());
}

//---------------------------------------------------------------------------//
char const* to_string(SweepAxis axis)
{
    switch (axis)
    {
        case SweepAxis::photons:
            return columns::photons;
        case SweepAxis::drive_power:
            return columns::drive_power;
        case SweepAxis::circulating_power:
            return columns::circulating_power;
    }
    return "";
}

char const* to_string(SweepQuantity quantity)
{
    return quantity == SweepQuantity::qi ? columns::qi : columns::qb_inverse;
}

PowerSweep read_sweep(std::filesystem::path const& path)
{
    CsvTable const t = read_csv(path);
    PowerSweep s;
    s.metadata = t.metadata;

    std::vector<SweepAxis> axes;
    for (auto a : {SweepAxis::photons, SweepAxis::drive_power, SweepAxis::circulating_power})
    {
        if (t.has(to_string(a)))
        {
            axes.push_back(a);
        }
    }
    if (axes.size() != 1)
    {
        throw InputError(t.path
                         + ":1: expected exactly one power column (photons, drive_power_watt or "
                           "circulating_power_watt)");
    }
    s.axis = axes.front();
    bool const has_qi = t.has(columns::qi);
    bool const has_qb = t.has(columns::qb_inverse);
    if (has_qi == has_qb)
    {
        throw InputError(t.path + ":1: expected exactly one of the columns 'qi' or 'qb_inverse'");
    }
    s.quantity = has_qi ? SweepQuantity::qi : SweepQuantity::qb_inverse;

    std::size_t const cx = t.column(to_string(s.axis));
    std::size_t const cy = t.column(to_string(s.quantity));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        double const x = t.rows[i][cx];
        double const y = t.rows[i][cy];
        if (x < 0.0)
        {
            fail(t.path, t.line_numbers[i], "power must be non-negative");
        }
        if (!(y > 0.0))
        {
            fail(t.path, t.line_numbers[i], std::string(to_string(s.quantity)) + " must be positive");
        }
        s.points.push_back({x, y});
    }
    return s;
}

void write_sweep(std::filesystem::path const& path, PowerSweep const& sweep)
{
    std::ostringstream os;
    for (auto const& [k, v] : sweep.metadata)
    {
        os << "# " << k << '=' << v << '\n';
    }
    os << to_string(sweep.axis) << ',' << to_string(sweep.quantity) << '\n';
    for (auto const& p : sweep.points)
    {
        os << format_number(p.x) << ',' << format_number(p.y) << '\n';
    }
    write_text(path, os.str());
}

}  // namespace esr
