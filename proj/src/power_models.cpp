// SPDX-License-Identifier: Apache-2.0
#include "esrtk/power_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "esrtk/physics.hpp"

namespace esr
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<SweepPoint> sorted_by_x(std::span<SweepPoint const> sweep)
{
    std::vector<SweepPoint> s(sweep.begin(), sweep.end());
    std::stable_sort(s.begin(), s.end(), [](auto const& a, auto const& b) { return a.x < b.x; });
    return s;
}

void check_sweep(std::span<SweepPoint const> sweep, std::size_t min_points, char const* what)
{
    if (sweep.size() < min_points)
    {
        throw std::invalid_argument(std::string(what) + " needs at least "
                                    + std::to_string(min_points) + " points");
    }
    for (auto const& p : sweep)
    {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || !(p.y > 0.0))
        {
            throw std::invalid_argument(std::string(what)
                                        + " needs finite, non-negative power and positive values");
        }
    }
}

//! Decades spanned by the positive part of the power axis.
double decades(std::vector<SweepPoint> const& s)
{
    double lo = inf;
    double hi = 0.0;
    for (auto const& p : s)
    {
        if (p.x > 0.0)
        {
            lo = std::min(lo, p.x);
            hi = std::max(hi, p.x);
        }
    }
    return hi > lo ? std::log10(hi / lo) : 0.0;
}

double geometric_mean_positive(std::vector<SweepPoint> const& s)
{
    double sum = 0.0;
    int count = 0;
    for (auto const& p : s)
    {
        if (p.x > 0.0)
        {
            sum += std::log(p.x);
            ++count;
        }
    }
    return count > 0 ? std::exp(sum / count) : 1.0;
}

void append_bound_warnings(FitResult const& fit, std::vector<std::string>& warnings)
{
    for (std::size_t j = 0; j < fit.names.size(); ++j)
    {
        if (fit.at_bound[j])
        {
            warnings.push_back(fit.names[j] + " pinned at a bound");
        }
    }
    if (!fit.converged)
    {
        warnings.push_back("fit did not converge: " + fit.message);
    }
    if (!fit.well_conditioned)
    {
        warnings.push_back("ill-conditioned covariance; some parameters are unconstrained");
    }
}
}  // namespace

void validate(TlsLossParams const& p)
{
    if (!(p.delta0 >= 0.0) || !(p.q_tls > 0.0) || !(p.n_c > 0.0) || !(p.beta > 0.0)
        || !(p.beta <= 1.0) || !std::isfinite(p.delta0) || !std::isfinite(p.q_tls)
        || !std::isfinite(p.n_c))
    {
        throw std::invalid_argument(
            "TLS parameters need delta0 >= 0, Q_TLS > 0, n_c > 0, beta in (0, 1]");
    }
}

void validate(SaturationParams const& p)
{
    if (!(p.qb0_inverse >= 0.0) || !(p.p_sat > 0.0) || !(p.epsilon > 0.0)
        || !(p.epsilon <= 2.0) || !std::isfinite(p.qb0_inverse) || !std::isfinite(p.p_sat))
    {
        throw std::invalid_argument(
            "saturation parameters need 1/Q_B0 >= 0, P_sat > 0, epsilon in (0, 2]");
    }
}

double tls_loss(double photons, TlsLossParams const& p)
{
    validate(p);
    if (!(photons >= 0.0))
    {
        throw std::domain_error("photon number must be non-negative");
    }
    return p.delta0 + std::pow(1.0 + photons / p.n_c, -p.beta) / p.q_tls;
}

double saturation_loss(double power, SaturationParams const& p)
{
    validate(p);
    if (!(power >= 0.0))
    {
        throw std::domain_error("power must be non-negative");
    }
    return p.qb0_inverse * std::pow(1.0 + power / p.p_sat, -p.epsilon);
}

//---------------------------------------------------------------------------//
TlsFit fit_tls_law(std::span<SweepPoint const> sweep, TlsFitOptions const& options)
{
    check_sweep(sweep, 6, "TLS fit");
    auto const s = sorted_by_x(sweep);

    std::vector<double> n(s.size());
    std::vector<double> loss(s.size());
    std::vector<double> w;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        n[i] = s[i].x;
        loss[i] = 1.0 / s[i].y;
    }
    if (options.relative_weighting)
    {
        for (double y : loss)
        {
            w.push_back(1.0 / (y * y));
        }
    }

    // seeds: delta0 at the high-power asymptote, TLS loss from the drop
    double const high = loss.back();
    double const low = loss.front();
    double const delta0 = std::max(high, 1e-3 * low);
    double const tls = std::max(low - high, 1e-3 * low);

    std::array<ParameterSpec, 4> specs{{
        {"delta0", delta0, 0.0, inf, false},
        {"tls_loss", tls, 0.0, inf, false},
        {"n_c", geometric_mean_positive(s), 0.0, inf, false},
        {"beta", 0.3, 0.0, 1.0, false},
    }};

    auto model = [](double x, std::span<double const> p) {
        return p[0] + p[1] * std::pow(1.0 + x / p[2], -p[3]);
    };

    TlsFit out;
    out.fit = curve_fit(model, n, loss, w, specs, options.solver);
    auto const& p = out.fit.parameters;
    auto const& e = out.fit.standard_errors;
    out.params.delta0 = p[0];
    out.params.q_tls = 1.0 / p[1];
    out.params.n_c = p[2];
    out.params.beta = p[3];
    out.uncertainties.delta0 = e[0];
    out.uncertainties.q_tls = e[1] / (p[1] * p[1]);
    out.uncertainties.n_c = e[2];
    out.uncertainties.beta = e[3];

    if (decades(s) < 2.0)
    {
        out.weakly_constrained = true;
        out.notes.push_back("weakly constrained: photon numbers span fewer than 2 decades");
    }
    append_bound_warnings(out.fit, out.warnings);
    return out;
}

SaturationFit fit_saturation(std::span<SweepPoint const> sweep, SaturationFitOptions const& options)
{
    check_sweep(sweep, 5, "saturation fit");
    auto const s = sorted_by_x(sweep);

    std::vector<double> power(s.size());
    std::vector<double> loss(s.size());
    std::vector<double> w;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        power[i] = s[i].x;
        loss[i] = s[i].y;
    }
    if (options.relative_weighting)
    {
        for (double y : loss)
        {
            w.push_back(1.0 / (y * y));
        }
    }

    // 1/Q_B0 from the low-power plateau; the knee where the loss halves
    std::size_t const head = std::max<std::size_t>(1, s.size() / 10);
    double q0 = 0.0;
    for (std::size_t i = 0; i < head; ++i)
    {
        q0 += loss[i];
    }
    q0 /= static_cast<double>(head);
    double knee = geometric_mean_positive(s);
    bool knee_found = false;
    for (std::size_t i = 1; i < s.size(); ++i)
    {
        if (loss[i] <= 0.5 * q0 && loss[i - 1] > 0.5 * q0 && power[i - 1] > 0.0)
        {
            double const t = (loss[i - 1] - 0.5 * q0) / (loss[i - 1] - loss[i]);
            knee = std::exp(std::log(power[i - 1]) + t * (std::log(power[i]) - std::log(power[i - 1])));
            knee_found = true;
            break;
        }
    }

    std::array<ParameterSpec, 3> specs{{
        {"qb0_inverse", q0, 0.0, inf, false},
        {"p_sat", knee, 0.0, inf, false},
        {"epsilon", 1.0, 0.0, 2.0, false},
    }};
    auto model = [](double x, std::span<double const> p) {
        return p[0] * std::pow(1.0 + x / p[1], -p[2]);
    };

    SaturationFit out;
    out.fit = curve_fit(model, power, loss, w, specs, options.solver);
    auto const& p = out.fit.parameters;
    auto const& e = out.fit.standard_errors;
    out.params = {p[0], p[1], p[2]};
    out.uncertainties = {e[0], e[1], e[2]};

    double const p_min = power.front() > 0.0 ? power.front() : (power.size() > 1 ? power[1] : 0.0);
    if (decades(s) < 2.0)
    {
        out.weakly_constrained = true;
        out.notes.push_back("weakly constrained: powers span fewer than 2 decades");
    }
    if (!knee_found || out.params.p_sat < p_min || out.params.p_sat > power.back())
    {
        out.weakly_constrained = true;
        out.notes.push_back("weakly constrained: sweep does not straddle the saturation knee");
    }
    append_bound_warnings(out.fit, out.warnings);
    return out;
}

double invert_psat_for_t1e(double p_sat, double t2e, FieldToPowerCoefficient alpha, double g)
{
    if (!(p_sat > 0.0) || !(t2e > 0.0) || !(alpha.alpha > 0.0) || !(g > 0.0))
    {
        throw std::domain_error("P_sat, T2e, alpha and g must all be positive");
    }
    double const gamma = gyromagnetic_ratio(g);
    return 1.0 / (p_sat * t2e * gamma * gamma * alpha.alpha * alpha.alpha);
}

double saturation_power(double t1e, double t2e, FieldToPowerCoefficient alpha, double g)
{
    if (!(t1e > 0.0) || !(t2e > 0.0) || !(alpha.alpha > 0.0) || !(g > 0.0))
    {
        throw std::domain_error("T1e, T2e, alpha and g must all be positive");
    }
    double const gamma = gyromagnetic_ratio(g);
    return 1.0 / (t1e * t2e * gamma * gamma * alpha.alpha * alpha.alpha);
}

}  // namespace esr
