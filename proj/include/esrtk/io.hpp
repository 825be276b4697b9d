// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file io.hpp
//! CSV interchange for traces, spectra and power sweeps.
//!
//! Files are UTF-8 with a mandatory header row, '.' as decimal separator,
//! and '#' comment lines. Comments of the form "# key=value" are kept as
//! metadata.
//---------------------------------------------------------------------------//
#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "esrtk/power_models.hpp"
#include "esrtk/resonator.hpp"

namespace esr
{
//! Malformed input file; the message carries "path:line: ...".
class InputError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct CsvTable
{
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;  //!< source line of each row
    std::map<std::string, std::string> metadata;

    //! Column index, or npos when absent.
    std::size_t column(std::string const& name) const;
    bool has(std::string const& name) const { return column(name) != npos; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

CsvTable read_csv(std::filesystem::path const& path);

//! 17 significant digits, so the text reads back to the same double.
std::string format_number(double value);

//---------------------------------------------------------------------------//
namespace columns
{
inline constexpr char const* frequency = "frequency_hz";
inline constexpr char const* s21_real = "s21_real";
inline constexpr char const* s21_imag = "s21_imag";
inline constexpr char const* field = "field_tesla";
inline constexpr char const* drive_power = "drive_power_watt";
inline constexpr char const* temperature = "temperature_kelvin";
inline constexpr char const* qb_inverse = "qb_inverse";
inline constexpr char const* photons = "photons";
inline constexpr char const* circulating_power = "circulating_power_watt";
inline constexpr char const* qi = "qi";
}  // namespace columns

//! Traces start a new record whenever field, drive power or temperature
//! changes between consecutive rows.
std::vector<ComplexTrace> read_traces(std::filesystem::path const& path);
void write_traces(std::filesystem::path const& path, std::vector<ComplexTrace> const& traces);

//! Spectrum CSV with resonator_f0_hz, reference_field_tesla and
//! reference_qi_inverse kept as metadata comments.
EsrSpectrum read_spectrum(std::filesystem::path const& path);
void write_spectrum(std::filesystem::path const& path, EsrSpectrum const& spectrum);

enum class SweepAxis
{
    photons,
    drive_power,
    circulating_power
};

enum class SweepQuantity
{
    qi,
    qb_inverse
};

struct PowerSweep
{
    SweepAxis axis = SweepAxis::photons;
    SweepQuantity quantity = SweepQuantity::qi;
    std::vector<SweepPoint> points;
    std::map<std::string, std::string> metadata;
};

PowerSweep read_sweep(std::filesystem::path const& path);
void write_sweep(std::filesystem::path const& path, PowerSweep const& sweep);

char const* to_string(SweepAxis axis);
char const* to_string(SweepQuantity quantity);

//! Write text atomically enough for reruns: the whole buffer in one go.
void write_text(std::filesystem::path const& path, std::string const& text);

}  // namespace esr
