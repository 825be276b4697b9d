// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file power_models.hpp
//! Power dependence of resonator loss: interacting-TLS saturation law and
//! spin saturation law.
//---------------------------------------------------------------------------//
#pragma once

#include <span>
#include <string>
#include <vector>

#include "esrtk/fitting.hpp"

namespace esr
{
//! One sample of a power sweep: x is the power axis, y the measured value.
struct SweepPoint
{
    double x = 0.0;
    double y = 0.0;
};

//! 1/Qi(n) = delta0 + (1/Q_TLS) (1 + n/n_c)^(-beta)
struct TlsLossParams
{
    double delta0 = 0.0;  //!< power-independent loss
    double q_tls = 1.0;
    double n_c = 1.0;     //!< photons
    double beta = 0.5;
};

//! 1/Q_B(P) = (1/Q_B0) (1 + P/P_sat)^(-epsilon)
struct SaturationParams
{
    double qb0_inverse = 0.0;
    double p_sat = 1e-9;  //!< [W]
    double epsilon = 1.0;
};

//! Microwave field per square-root power at the spins [T / sqrt(W)].
struct FieldToPowerCoefficient
{
    double alpha = 0.21;
};

void validate(TlsLossParams const& p);
void validate(SaturationParams const& p);

double tls_loss(double photons, TlsLossParams const& p);
double saturation_loss(double power, SaturationParams const& p);

struct TlsFitOptions
{
    FitOptions solver{};
    //! weight residuals by 1/y^2 so every decade counts equally
    bool relative_weighting = true;
};

struct TlsFit
{
    TlsLossParams params;
    TlsLossParams uncertainties;
    FitResult fit;
    //! set when the sweep cannot pin every parameter; informational only
    bool weakly_constrained = false;
    std::vector<std::string> notes;
    std::vector<std::string> warnings;
};

//! Fit the TLS law to (photon number, Qi) samples; the fit runs on 1/Qi.
TlsFit fit_tls_law(std::span<SweepPoint const> sweep, TlsFitOptions const& options = {});

struct SaturationFitOptions
{
    FitOptions solver{};
    bool relative_weighting = true;
};

struct SaturationFit
{
    SaturationParams params;
    SaturationParams uncertainties;
    FitResult fit;
    bool weakly_constrained = false;
    std::vector<std::string> notes;
    std::vector<std::string> warnings;
};

//! Fit the spin saturation law to (circulating power, 1/Q_B) samples.
SaturationFit
fit_saturation(std::span<SweepPoint const> sweep, SaturationFitOptions const& options = {});

//! T1e = 1 / (P_sat T2e gamma_e^2 alpha^2), gamma_e = g muB / hbar.
double invert_psat_for_t1e(double p_sat, double t2e, FieldToPowerCoefficient alpha, double g);

//! Forward relation P_sat = 1 / (T1e T2e gamma_e^2 alpha^2).
double saturation_power(double t1e, double t2e, FieldToPowerCoefficient alpha, double g);

}  // namespace esr
