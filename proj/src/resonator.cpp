// SPDX-License-Identifier: Apache-2.0
#include "esrtk/resonator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "esrtk/physics.hpp"

namespace esr
{
namespace
{
constexpr double two_pi = 2.0 * std::numbers::pi;

double median(std::vector<double> v)
{
    auto const mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1)
    {
        return *mid;
    }
    double const hi = *mid;
    double const lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

std::vector<double> moving_average(std::vector<double> const& v, std::size_t window)
{
    std::size_t const half = window / 2;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        std::size_t const lo = i >= half ? i - half : 0;
        std::size_t const hi = std::min(v.size() - 1, i + half);
        double sum = 0.0;
        for (std::size_t k = lo; k <= hi; ++k)
        {
            sum += v[k];
        }
        out[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double wrap_angle(double a)
{
    a = std::remainder(a, two_pi);
    return a <= -std::numbers::pi ? a + two_pi : a;
}

// Parameter order used by the solver.
enum Param : std::size_t
{
    p_amplitude,
    p_alpha,
    p_tau,
    p_f0,
    p_ql,
    p_qc,
    p_phi,
    n_params
};

struct CircleFit
{
    Complex center;
    double radius = 0.0;
};

// Algebraic least-squares circle through the points.
CircleFit fit_circle(std::span<Complex const> z)
{
    Eigen::MatrixXd a(static_cast<Eigen::Index>(z.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i)
    {
        auto const ii = static_cast<Eigen::Index>(i);
        a(ii, 0) = z[i].real();
        a(ii, 1) = z[i].imag();
        a(ii, 2) = 1.0;
        b[ii] = -std::norm(z[i]);
    }
    Eigen::Vector3d const c = a.colPivHouseholderQr().solve(b);
    CircleFit fit;
    fit.center = Complex(-c[0] / 2.0, -c[1] / 2.0);
    fit.radius = std::sqrt(std::max(0.0, std::norm(fit.center) - c[2]));
    return fit;
}

// Common slope of the unwrapped phase over both edges of the trace.
double edge_phase_slope(std::span<double const> u, std::span<Complex const> s, std::size_t m)
{
    double sxy = 0.0;
    double sxx = 0.0;
    auto accumulate = [&](std::size_t begin, std::size_t end) {
        std::vector<double> phase;
        double prev = std::arg(s[begin]);
        double offset = 0.0;
        for (std::size_t i = begin; i < end; ++i)
        {
            double const p = std::arg(s[i]);
            double d = p - prev;
            if (d > std::numbers::pi)
            {
                offset -= two_pi;
            }
            else if (d < -std::numbers::pi)
            {
                offset += two_pi;
            }
            prev = p;
            phase.push_back(p + offset);
        }
        double ubar = 0.0;
        double pbar = 0.0;
        for (std::size_t i = begin; i < end; ++i)
        {
            ubar += u[i];
            pbar += phase[i - begin];
        }
        ubar /= static_cast<double>(end - begin);
        pbar /= static_cast<double>(end - begin);
        for (std::size_t i = begin; i < end; ++i)
        {
            sxy += (u[i] - ubar) * (phase[i - begin] - pbar);
            sxx += (u[i] - ubar) * (u[i] - ubar);
        }
    };
    accumulate(0, m);
    accumulate(u.size() - m, u.size());
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct Seed
{
    std::array<double, n_params> p{};
};

Seed seed_notch(std::span<double const> freqs,
                std::span<Complex const> s21,
                double f_ref,
                std::vector<double> const& smoothed,
                std::size_t i_min)
{
    std::size_t const n = freqs.size();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        u[i] = freqs[i] - f_ref;
    }

    // cable delay from the phase slope of the trace edges
    std::size_t const edge = std::max<std::size_t>(4, n / 10);
    double const tau = -edge_phase_slope(u, s21, edge) / two_pi;

    std::vector<Complex> z(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        z[i] = s21[i] * std::polar(1.0, two_pi * u[i] * tau);
    }
    CircleFit const circle = fit_circle(z);

    // off-resonant point: trace edges projected onto the circle
    std::size_t const tail = std::max<std::size_t>(2, n / 20);
    Complex p_edge{0.0, 0.0};
    for (std::size_t i = 0; i < tail; ++i)
    {
        p_edge += z[i] + z[n - 1 - i];
    }
    p_edge /= static_cast<double>(2 * tail);
    Complex dir = p_edge - circle.center;
    if (std::abs(dir) == 0.0)
    {
        dir = Complex(1.0, 0.0);
    }
    Complex const off_res = circle.center + circle.radius * dir / std::abs(dir);
    Complex const on_res = 2.0 * circle.center - off_res;

    Complex const q = 1.0 - on_res / off_res;
    double depth = std::clamp(std::abs(q), 1e-4, 0.999);
    double phi = std::clamp(std::arg(q), -1.2, 1.2);
    double const amplitude = std::abs(off_res);

    // loaded Q from the half-depth width of |S21|^2
    double const f0 = freqs[i_min];
    double const base2 = amplitude * amplitude;
    double const min2 = smoothed[i_min] * smoothed[i_min];
    double const level = 0.5 * (base2 + min2);
    auto crossing = [&](bool left) -> double {
        std::size_t i = i_min;
        while (true)
        {
            if (left ? i == 0 : i + 1 >= n)
            {
                return std::nan("");
            }
            std::size_t const next = left ? i - 1 : i + 1;
            double const a2 = smoothed[i] * smoothed[i];
            double const b2 = smoothed[next] * smoothed[next];
            if (b2 >= level)
            {
                double const t = (level - a2) / (b2 - a2);
                return freqs[i] + t * (freqs[next] - freqs[i]);
            }
            i = next;
        }
    };
    double const f_left = crossing(true);
    double const f_right = crossing(false);
    double fwhm = f_right - f_left;
    if (!(fwhm > 0.0))
    {
        fwhm = (freqs.back() - freqs.front()) / 4.0;
    }
    double const ql = f0 / fwhm;
    // keep 1/Qi positive: depth * cos(phi) < 1
    depth = std::min(depth, 0.999 / std::max(std::cos(phi), 1e-3));

    Seed s;
    s.p[p_amplitude] = amplitude;
    s.p[p_alpha] = std::arg(off_res);
    s.p[p_tau] = tau;
    s.p[p_f0] = f0;
    s.p[p_ql] = ql;
    s.p[p_qc] = ql / depth;
    s.p[p_phi] = phi;
    return s;
}

}  // namespace

//---------------------------------------------------------------------------//
void validate(ComplexTrace const& trace)
{
    if (trace.frequencies.size() != trace.s21.size())
    {
        throw std::invalid_argument("trace frequency and S21 lengths differ");
    }
    if (trace.frequencies.size() < 16)
    {
        throw std::invalid_argument("trace needs at least 16 samples");
    }
    for (std::size_t i = 0; i < trace.frequencies.size(); ++i)
    {
        if (!std::isfinite(trace.frequencies[i]) || !std::isfinite(trace.s21[i].real())
            || !std::isfinite(trace.s21[i].imag()))
        {
            throw std::invalid_argument("trace contains non-finite samples");
        }
        if (i > 0 && !(trace.frequencies[i] > trace.frequencies[i - 1]))
        {
            throw std::invalid_argument("trace frequencies must be strictly increasing");
        }
    }
}

double loaded_q(double q_internal, double q_coupling, double mismatch_angle)
{
    return 1.0 / (1.0 / q_internal + std::cos(mismatch_angle) / q_coupling);
}

ResonatorFit make_resonator(double f0,
                            double q_internal,
                            double q_coupling,
                            double mismatch_angle,
                            double amplitude_scale,
                            double phase_offset,
                            double cable_delay)
{
    ResonatorFit r;
    r.f0 = f0;
    r.q_internal = q_internal;
    r.q_coupling = q_coupling;
    r.mismatch_angle = mismatch_angle;
    r.q_loaded = loaded_q(q_internal, q_coupling, mismatch_angle);
    r.amplitude_scale = amplitude_scale;
    r.phase_offset = phase_offset;
    r.cable_delay = cable_delay;
    validate(r);
    return r;
}

void validate(ResonatorFit const& fit)
{
    if (!(fit.f0 > 0.0) || !std::isfinite(fit.f0))
    {
        throw std::invalid_argument("resonance frequency must be positive");
    }
    if (!(fit.q_loaded > 0.0) || !(fit.q_coupling > 0.0) || !(fit.q_internal > 0.0)
        || !std::isfinite(fit.q_loaded) || !std::isfinite(fit.q_coupling)
        || !std::isfinite(fit.q_internal))
    {
        throw std::invalid_argument("quality factors must be positive and finite");
    }
    if (!(fit.amplitude_scale > 0.0) || !std::isfinite(fit.mismatch_angle)
        || !std::isfinite(fit.phase_offset) || !std::isfinite(fit.cable_delay))
    {
        throw std::invalid_argument("invalid resonator background parameters");
    }
    double const implied = 1.0 / fit.q_internal + std::cos(fit.mismatch_angle) / fit.q_coupling;
    if (std::abs(implied * fit.q_loaded - 1.0) > 1e-6)
    {
        throw std::invalid_argument("Ql, Qi and Qc are inconsistent");
    }
}

Complex notch_s21(ResonatorFit const& r, double f)
{
    Complex const env = r.amplitude_scale
                        * std::polar(1.0, r.phase_offset - two_pi * f * r.cable_delay);
    Complex const dn(1.0, 2.0 * r.q_loaded * (f / r.f0 - 1.0));
    return env
           * (1.0 - (r.q_loaded / r.q_coupling) * std::polar(1.0, r.mismatch_angle) / dn);
}

ResonatorFit fit_s21_notch(ComplexTrace const& trace, NotchFitOptions const& options)
{
    validate(trace);
    auto const& freqs = trace.frequencies;
    auto const& s21 = trace.s21;
    std::size_t const n = freqs.size();

    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        mag[i] = std::abs(s21[i]);
    }
    std::size_t window = std::clamp<std::size_t>(n / 100, 1, 51);
    window |= 1U;
    std::vector<double> const smoothed = moving_average(mag, window);

    // noise floor from neighbor differences (robust), reduced by smoothing
    std::vector<double> diffs(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        diffs[i] = mag[i + 1] - mag[i];
    }
    double const dmed = median(diffs);
    for (auto& d : diffs)
    {
        d = std::abs(d - dmed);
    }
    double const sigma = 1.4826 * median(diffs) / std::numbers::sqrt2;
    double const noise_floor = sigma / std::sqrt(static_cast<double>(window));

    auto const i_min = static_cast<std::size_t>(
        std::min_element(smoothed.begin(), smoothed.end()) - smoothed.begin());
    double const baseline = median(mag);
    double const depth = baseline - smoothed[i_min];
    if (!(depth > options.detection_threshold * noise_floor) || !(depth > 0.0))
    {
        throw NoResonanceError("no resonance dip above the noise floor");
    }

    double const f_ref = 0.5 * (freqs.front() + freqs.back());
    Seed const seed = seed_notch(freqs, s21, f_ref, smoothed, i_min);

    std::vector<double> obs(2 * n);
    for (std::size_t i = 0; i < n; ++i)
    {
        obs[i] = s21[i].real();
        obs[n + i] = s21[i].imag();
    }

    // Model in offset frequency u = f - f_ref; alpha here absorbs 2 pi f_ref tau.
    LeastSquaresProblem problem;
    problem.observations = obs;
    problem.model = [&](std::span<double const> p, std::span<double> out) {
        Complex const k0 = (p[p_ql] / p[p_qc]) * std::polar(1.0, p[p_phi]);
        for (std::size_t i = 0; i < n; ++i)
        {
            double const u = freqs[i] - f_ref;
            Complex const env = p[p_amplitude] * std::polar(1.0, p[p_alpha] - two_pi * u * p[p_tau]);
            Complex const dn(1.0, 2.0 * p[p_ql] * (freqs[i] / p[p_f0] - 1.0));
            Complex const s = env * (1.0 - k0 / dn);
            out[i] = s.real();
            out[n + i] = s.imag();
        }
    };
    problem.jacobian = [&](std::span<double const> p, Eigen::Ref<Eigen::MatrixXd> jac) {
        Complex const i1(0.0, 1.0);
        double const ql = p[p_ql];
        double const qc = p[p_qc];
        double const f0 = p[p_f0];
        Complex const k0 = (ql / qc) * std::polar(1.0, p[p_phi]);
        for (std::size_t i = 0; i < n; ++i)
        {
            double const f = freqs[i];
            double const u = f - f_ref;
            Complex const env = p[p_amplitude] * std::polar(1.0, p[p_alpha] - two_pi * u * p[p_tau]);
            double const detune = f / f0 - 1.0;
            Complex const dn(1.0, 2.0 * ql * detune);
            Complex const k = k0 / dn;
            Complex const s = env * (1.0 - k);

            std::array<Complex, n_params> d;
            d[p_amplitude] = env * (1.0 - k) / p[p_amplitude];
            d[p_alpha] = i1 * s;
            d[p_tau] = -two_pi * u * i1 * s;
            // K = (Ql/Qc) e^{i phi} / (1 + 2 i Ql detune)
            Complex const dk_dql = k / ql - k * (2.0 * i1 * detune) / dn;
            Complex const dk_df0 = k * (2.0 * i1 * ql * f / (f0 * f0)) / dn;
            d[p_f0] = -env * dk_df0;
            d[p_ql] = -env * dk_dql;
            d[p_qc] = env * k / qc;
            d[p_phi] = -env * i1 * k;
            for (std::size_t j = 0; j < n_params; ++j)
            {
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d[j].real();
                jac(static_cast<Eigen::Index>(n + i), static_cast<Eigen::Index>(j)) = d[j].imag();
            }
        }
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::array<ParameterSpec, n_params> specs{{
        {"amplitude", seed.p[p_amplitude], 0.0, inf, false},
        {"alpha", seed.p[p_alpha], -inf, inf, false},
        {"tau", seed.p[p_tau], -inf, inf, false},
        {"f0", seed.p[p_f0], freqs.front(), freqs.back(), false},
        {"q_loaded", seed.p[p_ql], 0.0, inf, false},
        {"q_coupling", seed.p[p_qc], 0.0, inf, false},
        {"phi", seed.p[p_phi], -std::numbers::pi / 2.0, std::numbers::pi / 2.0, false},
    }};
    // keep f0 strictly inside the span
    double const span = freqs.back() - freqs.front();
    specs[p_f0].initial = std::clamp(specs[p_f0].initial, freqs.front() + 1e-6 * span,
                                     freqs.back() - 1e-6 * span);

    FitResult const fit = least_squares(problem, specs, options.solver);
    auto const& p = fit.parameters;
    auto const& cov = fit.covariance;

    ResonatorFit out;
    out.amplitude_scale = p[p_amplitude];
    out.cable_delay = p[p_tau];
    out.phase_offset = wrap_angle(p[p_alpha] + two_pi * f_ref * p[p_tau]);
    out.f0 = p[p_f0];
    out.q_loaded = p[p_ql];
    out.q_coupling = p[p_qc];
    out.mismatch_angle = p[p_phi];
    double const qi_inverse = 1.0 / p[p_ql] - std::cos(p[p_phi]) / p[p_qc];
    out.q_internal = 1.0 / qi_inverse;

    auto var = [&](std::size_t a, std::size_t b) {
        return cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    out.uncertainties.amplitude_scale = fit.standard_errors[p_amplitude];
    out.uncertainties.cable_delay = fit.standard_errors[p_tau];
    out.uncertainties.f0 = fit.standard_errors[p_f0];
    out.uncertainties.q_loaded = fit.standard_errors[p_ql];
    out.uncertainties.q_coupling = fit.standard_errors[p_qc];
    out.uncertainties.mismatch_angle = fit.standard_errors[p_phi];
    double const c = two_pi * f_ref;
    out.uncertainties.phase_offset = std::sqrt(std::max(
        0.0, var(p_alpha, p_alpha) + c * c * var(p_tau, p_tau) + 2.0 * c * var(p_alpha, p_tau)));
    // d(1/Qi) with respect to (Ql, Qc, phi)
    std::array<double, 3> const grad{-1.0 / (p[p_ql] * p[p_ql]),
                                     std::cos(p[p_phi]) / (p[p_qc] * p[p_qc]),
                                     std::sin(p[p_phi]) / p[p_qc]};
    std::array<std::size_t, 3> const idx{p_ql, p_qc, p_phi};
    double v = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
    {
        for (std::size_t b = 0; b < 3; ++b)
        {
            v += grad[a] * grad[b] * var(idx[a], idx[b]);
        }
    }
    out.uncertainties.q_internal = out.q_internal * out.q_internal * std::sqrt(std::max(0.0, v));

    out.converged = fit.converged;
    out.chi_squared = fit.chi_squared;
    out.iterations = fit.iterations;
    if (!fit.converged)
    {
        out.warnings.push_back("fit did not converge: " + fit.message);
    }
    if (!fit.well_conditioned)
    {
        out.warnings.push_back("ill-conditioned covariance");
    }
    if (!(qi_inverse > 0.0))
    {
        out.converged = false;
        out.warnings.push_back("unphysical internal quality factor");
    }
    if (fit.at_bound[p_f0])
    {
        out.warnings.push_back("resonance frequency pinned at the trace edge");
    }
    return out;
}

//---------------------------------------------------------------------------//
void validate(EsrSpectrum const& spectrum)
{
    if (spectrum.fields.size() != spectrum.qb_inverse.size())
    {
        throw std::invalid_argument("spectrum field and loss lengths differ");
    }
    if (spectrum.fields.size() < 2)
    {
        throw std::invalid_argument("spectrum needs at least two points");
    }
    for (std::size_t i = 0; i < spectrum.fields.size(); ++i)
    {
        if (!std::isfinite(spectrum.fields[i]) || !std::isfinite(spectrum.qb_inverse[i]))
        {
            throw std::invalid_argument("spectrum contains non-finite values");
        }
        if (i > 0 && !(spectrum.fields[i] > spectrum.fields[i - 1]))
        {
            throw std::invalid_argument("spectrum fields must be strictly increasing");
        }
    }
}

EsrSpectrum build_esr_spectrum(std::span<std::pair<double, ResonatorFit> const> fits,
                               ReferencePolicy policy)
{
    if (fits.size() < 2)
    {
        throw std::invalid_argument("an ESR spectrum needs at least two field points");
    }
    std::vector<std::pair<double, ResonatorFit>> sorted(fits.begin(), fits.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](auto const& a, auto const& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < sorted.size(); ++i)
    {
        if (!std::isfinite(sorted[i].first))
        {
            throw std::invalid_argument("field values must be finite");
        }
        if (i > 0 && sorted[i].first == sorted[i - 1].first)
        {
            throw std::invalid_argument("duplicate field value in resonator fits");
        }
        if (!(sorted[i].second.q_internal > 0.0) || !std::isfinite(sorted[i].second.q_internal))
        {
            throw std::invalid_argument("resonator fit has a non-positive internal Q");
        }
    }

    EsrSpectrum spectrum;
    auto const zero = std::find_if(sorted.begin(), sorted.end(),
                                   [](auto const& e) { return e.first == 0.0; });
    std::pair<double, ResonatorFit> const* reference = nullptr;
    if (zero != sorted.end())
    {
        reference = &*zero;
    }
    else if (policy == ReferencePolicy::zero_field_only)
    {
        throw std::invalid_argument(
            "no zero-field reference trace: 1/Q_B is measured relative to B = 0; add a trace at "
            "zero field or allow the lowest-field reference");
    }
    else
    {
        reference = &sorted.front();
        spectrum.warnings.push_back("no zero-field trace; lowest field used as reference");
    }

    spectrum.reference_field = reference->first;
    spectrum.reference_qi_inverse = 1.0 / reference->second.q_internal;
    spectrum.resonator_f0 = reference->second.f0;
    for (auto const& [field, fit] : sorted)
    {
        spectrum.fields.push_back(field);
        spectrum.qb_inverse.push_back(1.0 / fit.q_internal - spectrum.reference_qi_inverse);
        if (!fit.converged)
        {
            spectrum.warnings.push_back("resonator fit at " + std::to_string(field)
                                        + " T did not converge");
        }
    }
    // the reference is exactly zero by construction
    for (std::size_t i = 0; i < sorted.size(); ++i)
    {
        if (&sorted[i] == reference)
        {
            spectrum.qb_inverse[i] = 0.0;
        }
    }
    return spectrum;
}

double photon_number(double drive_power, ResonatorFit const& fit)
{
    if (!(drive_power >= 0.0) || !std::isfinite(drive_power))
    {
        throw std::invalid_argument("drive power must be non-negative");
    }
    validate(fit);
    double const omega = 2.0 * std::numbers::pi * fit.f0;
    return circulating_power(drive_power, fit) / (constants::hbar * omega * omega);
}

double circulating_power(double drive_power, ResonatorFit const& fit)
{
    if (!(drive_power >= 0.0) || !std::isfinite(drive_power))
    {
        throw std::invalid_argument("drive power must be non-negative");
    }
    validate(fit);
    return 2.0 * fit.q_loaded * fit.q_loaded * drive_power / fit.q_coupling;
}

}  // namespace esr
