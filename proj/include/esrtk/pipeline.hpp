// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file pipeline.hpp
//! Configuration, analysis orchestration and the esrtk command line.
//---------------------------------------------------------------------------//
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "esrtk/decomposition.hpp"
#include "esrtk/report.hpp"

namespace esr
{
//! Invalid configuration; the message starts with the offending JSON path.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class PowerLaw
{
    automatic,  //!< by sweep column: qi -> TLS law, qb_inverse -> saturation
    tls,
    saturation
};

struct PipelineConfig
{
    std::vector<std::string> inputs;
    //! treatment labels for compare, parallel to inputs
    std::vector<std::string> labels;
    //! optional power-fit reports for compare, parallel to inputs
    std::vector<std::string> power_fits;
    std::string resonator_id;
    double g_seed = 2.0;
    std::string template_name = "auto";
    FitOptions fit;
    std::string output_dir = "esrtk-out";
    ReferencePolicy reference_policy = ReferencePolicy::zero_field_only;
    std::optional<double> resonator_f0;  //!< [Hz]
    double hyperfine_frequency = 1.42e9;  //!< [Hz]
    double detection_threshold = 3.0;
    PowerLaw power_law = PowerLaw::automatic;
    double field_to_power_alpha = 0.21;  //!< [T/sqrt(W)]
    std::optional<double> t2e;           //!< [s], enables T1e inversion

    bool operator==(PipelineConfig const& other) const;
};

//! Parse and validate; relative paths are checked against base_dir.
PipelineConfig config_from_json(Json const& j, std::filesystem::path const& base_dir = {});
PipelineConfig load_config(std::filesystem::path const& path);
Json to_json(PipelineConfig const& config);
//! Throws ConfigError unless every value is in range and every path exists.
void validate(PipelineConfig const& config, std::filesystem::path const& base_dir = {});

//! FNV-1a over the canonical JSON text of the config.
std::uint64_t config_hash(PipelineConfig const& config);
std::string tool_version();

//---------------------------------------------------------------------------//
//! Result of the spectrum stage: null test, half-field search and the
//! selected decomposition.
struct SpectrumAnalysis
{
    bool significant = false;
    double null_delta_aic = 0.0;  //!< AIC(flat) - AIC(one Lorentzian)
    double g2_center = 0.0;
    std::optional<HalfFieldDetection> half_field;
    std::string half_field_note;
    std::optional<ModelSelection> selection;
    std::optional<DecompositionResult> decomposition;
    std::vector<std::string> notes;
    std::vector<std::string> warnings;
};

SpectrumAnalysis analyze_spectrum(EsrSpectrum const& spectrum,
                                  double resonator_f0,
                                  PipelineConfig const& config);

//! Per-component curves: field, data, model total, then each component.
std::string components_csv(EsrSpectrum const& spectrum, CompositeSpectrumModel const& model);

//---------------------------------------------------------------------------//
namespace cli
{
//! Exit codes: 0 success, 1 input or configuration error, 2 analysis
//! flagged (non-convergence or warnings).
int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err);
int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err);

//! Directory holding the simulate presets.
std::filesystem::path preset_directory();
}  // namespace cli

}  // namespace esr
