// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file report.hpp
//! JSON records for fits, decompositions, power fits and comparisons.
//---------------------------------------------------------------------------//
#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "esrtk/decomposition.hpp"
#include "esrtk/power_models.hpp"
#include "esrtk/resonator.hpp"

namespace esr
{
using Json = nlohmann::ordered_json;

//! Two-space indented JSON with keys in insertion order and floats printed
//! with 17 significant digits. Non-finite numbers become null.
std::string dump_json(Json const& j);

//! Store a number, or null plus an entry under "null_reasons".
void put_number(Json& obj, std::string const& key, double value,
                std::string_view reason = "not finite");
//! Read a number; null reads as NaN. Throws std::invalid_argument when the
//! key is missing or has the wrong type.
double get_number(Json const& obj, std::string const& key);

Json to_json(FitResult const& fit);
FitResult fit_result_from_json(Json const& j);

Json to_json(ResonatorFit const& fit);
ResonatorFit resonator_fit_from_json(Json const& j);

Json to_json(CompositeSpectrumModel const& model);
CompositeSpectrumModel model_from_json(Json const& j);

Json to_json(PeakRecord const& peak);
Json to_json(DecompositionResult const& result);
DecompositionResult decomposition_from_json(Json const& j);

Json to_json(HalfFieldDetection const& detection);
Json to_json(ModelSelection const& selection);

Json to_json(TlsFit const& fit);
Json to_json(SaturationFit const& fit);

Json to_json(TreatmentComparison const& comparison);

}  // namespace esr
