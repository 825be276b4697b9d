// SPDX-License-Identifier: Apache-2.0
#include "esrtk/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace esr
{
namespace
{
//---------------------------------------------------------------------------//
// Bound transformations between the external (physical) parameter x and the
// unconstrained internal coordinate z used by the solver.
//---------------------------------------------------------------------------//
enum class BoundKind
{
    none,
    lower,
    upper,
    both
};

struct Transform
{
    BoundKind kind = BoundKind::none;
    double lower = 0.0;
    double upper = 0.0;

    static Transform from(ParameterSpec const& s)
    {
        bool const has_lo = std::isfinite(s.lower);
        bool const has_hi = std::isfinite(s.upper);
        Transform t;
        t.lower = s.lower;
        t.upper = s.upper;
        t.kind = has_lo && has_hi ? BoundKind::both
                 : has_lo         ? BoundKind::lower
                 : has_hi         ? BoundKind::upper
                                  : BoundKind::none;
        return t;
    }

    double to_internal(double x) const
    {
        switch (kind)
        {
            case BoundKind::none:
                return x;
            case BoundKind::lower:
                return std::log(std::max(x - lower, gap(lower)));
            case BoundKind::upper:
                return std::log(std::max(upper - x, gap(upper)));
            case BoundKind::both: {
                double r = (x - lower) / (upper - lower);
                r = std::clamp(r, 1e-12, 1.0 - 1e-12);
                return std::log(r / (1.0 - r));
            }
        }
        return x;
    }

    double to_external(double z) const
    {
        switch (kind)
        {
            case BoundKind::none:
                return z;
            case BoundKind::lower:
                return lower + std::exp(z);
            case BoundKind::upper:
                return upper - std::exp(z);
            case BoundKind::both:
                return lower + (upper - lower) * logistic(z);
        }
        return z;
    }

    //! dx/dz
    double derivative(double z) const
    {
        switch (kind)
        {
            case BoundKind::none:
                return 1.0;
            case BoundKind::lower:
                return std::exp(z);
            case BoundKind::upper:
                return -std::exp(z);
            case BoundKind::both: {
                double const s = logistic(z);
                return (upper - lower) * s * (1.0 - s);
            }
        }
        return 1.0;
    }

  private:
    static double gap(double bound) { return 1e-12 * std::max(1.0, std::abs(bound)); }

    static double logistic(double z)
    {
        if (z >= 0.0)
        {
            return 1.0 / (1.0 + std::exp(-z));
        }
        double const e = std::exp(z);
        return e / (1.0 + e);
    }
};

void validate_specs(std::span<ParameterSpec const> specs)
{
    for (auto const& s : specs)
    {
        if (std::isnan(s.lower) || std::isnan(s.upper) || !std::isfinite(s.initial))
        {
            throw std::invalid_argument("parameter '" + s.name + "' has invalid bounds");
        }
        if (!(s.lower < s.upper))
        {
            throw std::invalid_argument("parameter '" + s.name
                                        + "' lower bound must be below upper bound");
        }
        if (s.initial < s.lower || s.initial > s.upper)
        {
            throw std::invalid_argument("parameter '" + s.name
                                        + "' initial value outside bounds");
        }
    }
}

bool all_finite(std::span<double const> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

//! Shared state for one solve.
class Solver
{
  public:
    Solver(LeastSquaresProblem const& problem,
           std::span<ParameterSpec const> specs,
           FitOptions const& options)
        : problem_(problem)
        , specs_(specs.begin(), specs.end())
        , options_(options)
        , n_obs_(problem.observations.size())
    {
        for (std::size_t j = 0; j < specs_.size(); ++j)
        {
            transforms_.push_back(Transform::from(specs_[j]));
            if (!specs_[j].frozen)
            {
                free_.push_back(j);
            }
        }
        sqrt_w_.assign(n_obs_, 1.0);
        if (!problem.weights.empty())
        {
            for (std::size_t i = 0; i < n_obs_; ++i)
            {
                sqrt_w_[i] = std::sqrt(problem.weights[i]);
            }
        }
        x_.resize(specs_.size());
        for (std::size_t j = 0; j < specs_.size(); ++j)
        {
            x_[j] = specs_[j].initial;
        }
        pred_.resize(n_obs_);
    }

    FitResult run();

  private:
    // External parameters for internal coordinates of the free subset.
    std::vector<double> external(Eigen::VectorXd const& z) const
    {
        std::vector<double> x = x_;
        for (std::size_t k = 0; k < free_.size(); ++k)
        {
            std::size_t const j = free_[k];
            x[j] = transforms_[j].to_external(z[k]);
        }
        // frozen parameters keep their exact initial values
        for (std::size_t j = 0; j < specs_.size(); ++j)
        {
            if (specs_[j].frozen)
            {
                x[j] = specs_[j].initial;
            }
        }
        return x;
    }

    // Weighted residuals; returns +inf chi-squared if the model misbehaves.
    double residuals(std::vector<double> const& x, Eigen::VectorXd& r)
    {
        problem_.model(x, pred_);
        r.resize(static_cast<Eigen::Index>(n_obs_));
        double chi = 0.0;
        for (std::size_t i = 0; i < n_obs_; ++i)
        {
            double const ri = sqrt_w_[i] * (problem_.observations[i] - pred_[i]);
            r[static_cast<Eigen::Index>(i)] = ri;
            chi += ri * ri;
        }
        return std::isfinite(chi) ? chi : std::numeric_limits<double>::infinity();
    }

    // Weighted model Jacobian with respect to the internal coordinates.
    Eigen::MatrixXd internal_jacobian(Eigen::VectorXd const& z)
    {
        auto const n = static_cast<Eigen::Index>(n_obs_);
        auto const m = static_cast<Eigen::Index>(free_.size());
        Eigen::MatrixXd jz(n, m);
        if (problem_.jacobian)
        {
            Eigen::MatrixXd full(n, static_cast<Eigen::Index>(specs_.size()));
            problem_.jacobian(external(z), full);
            for (Eigen::Index k = 0; k < m; ++k)
            {
                std::size_t const j = free_[static_cast<std::size_t>(k)];
                jz.col(k) = full.col(static_cast<Eigen::Index>(j))
                            * transforms_[j].derivative(z[k]);
            }
        }
        else
        {
            std::vector<double> plus(n_obs_);
            std::vector<double> minus(n_obs_);
            for (Eigen::Index k = 0; k < m; ++k)
            {
                double const h = 1e-6 * std::max(std::abs(z[k]), 1e-3);
                Eigen::VectorXd zp = z;
                Eigen::VectorXd zm = z;
                zp[k] += h;
                zm[k] -= h;
                problem_.model(external(zp), plus);
                problem_.model(external(zm), minus);
                for (Eigen::Index i = 0; i < n; ++i)
                {
                    jz(i, k) = (plus[static_cast<std::size_t>(i)]
                                - minus[static_cast<std::size_t>(i)])
                               / (zp[k] - zm[k]);
                }
            }
        }
        for (Eigen::Index i = 0; i < n; ++i)
        {
            jz.row(i) *= sqrt_w_[static_cast<std::size_t>(i)];
        }
        return jz;
    }

    // Weighted model Jacobian in external space at x, used for covariance.
    Eigen::MatrixXd external_jacobian(std::vector<double> const& x)
    {
        auto const n = static_cast<Eigen::Index>(n_obs_);
        Eigen::MatrixXd full(n, static_cast<Eigen::Index>(specs_.size()));
        if (problem_.jacobian)
        {
            problem_.jacobian(x, full);
        }
        else
        {
            std::vector<double> plus(n_obs_);
            std::vector<double> minus(n_obs_);
            for (std::size_t j : free_)
            {
                double const h = 1e-6 * (x[j] != 0.0 ? std::abs(x[j]) : 1.0);
                std::vector<double> xp = x;
                std::vector<double> xm = x;
                // one-sided near a bound
                xp[j] = std::min(x[j] + h, specs_[j].upper);
                xm[j] = std::max(x[j] - h, specs_[j].lower);
                problem_.model(xp, plus);
                problem_.model(xm, minus);
                for (Eigen::Index i = 0; i < n; ++i)
                {
                    full(i, static_cast<Eigen::Index>(j))
                        = (plus[static_cast<std::size_t>(i)]
                           - minus[static_cast<std::size_t>(i)])
                          / (xp[j] - xm[j]);
                }
            }
        }
        for (Eigen::Index i = 0; i < n; ++i)
        {
            full.row(i) *= sqrt_w_[static_cast<std::size_t>(i)];
        }
        return full;
    }

    void fill_covariance(FitResult& result);

    LeastSquaresProblem const& problem_;
    std::vector<ParameterSpec> specs_;
    FitOptions options_;
    std::size_t n_obs_;
    std::vector<Transform> transforms_;
    std::vector<std::size_t> free_;
    std::vector<double> sqrt_w_;
    std::vector<double> x_;
    std::vector<double> pred_;
};

FitResult Solver::run()
{
    FitResult result;
    for (auto const& s : specs_)
    {
        result.names.push_back(s.name);
    }
    result.n_data = static_cast<int>(n_obs_);
    result.n_free = static_cast<int>(free_.size());
    result.degrees_of_freedom = result.n_data - result.n_free;

    auto const m = static_cast<Eigen::Index>(free_.size());
    Eigen::VectorXd z(m);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        std::size_t const j = free_[static_cast<std::size_t>(k)];
        z[k] = transforms_[j].to_internal(x_[j]);
    }

    double data_scale = 0.0;
    for (std::size_t i = 0; i < n_obs_; ++i)
    {
        double const v = sqrt_w_[i] * problem_.observations[i];
        data_scale += v * v;
    }
    double const chi_floor = 1e-30 * data_scale;

    Eigen::VectorXd r;
    double chi = residuals(external(z), r);
    if (!std::isfinite(chi))
    {
        result.parameters = external(z);
        result.message = "model is not finite at the initial parameters";
        result.chi_squared = chi;
        result.standard_errors.assign(specs_.size(), 0.0);
        result.covariance = Eigen::MatrixXd::Zero(m, m);
        result.at_bound.assign(specs_.size(), false);
        return result;
    }

    double lambda = options_.initial_damping;
    double nu = 2.0;
    bool converged = m == 0 || chi <= chi_floor;
    std::string message = converged ? "exact fit" : "";
    int iterations = 0;

    while (!converged && iterations < options_.max_iterations)
    {
        ++iterations;
        Eigen::MatrixXd const jz = internal_jacobian(z);
        // model Jacobian J: r = sqrt(w)(y - f) so the Gauss-Newton step
        // solves (J^T J) dz = J^T r
        Eigen::MatrixXd const a = jz.transpose() * jz;
        Eigen::VectorXd const g = jz.transpose() * r;
        if (!a.allFinite() || !g.allFinite())
        {
            message = "non-finite Jacobian";
            break;
        }

        // scaled gradient test
        double const r_norm = std::sqrt(chi);
        double cos_max = 0.0;
        for (Eigen::Index k = 0; k < m; ++k)
        {
            double const col = std::sqrt(a(k, k));
            if (col > 0.0)
            {
                cos_max = std::max(cos_max, std::abs(g[k]) / (col * r_norm));
            }
        }
        if (cos_max <= 1e-12)
        {
            converged = true;
            message = "gradient vanished";
            break;
        }

        Eigen::VectorXd diag = a.diagonal();
        double const diag_max = diag.maxCoeff();
        for (Eigen::Index k = 0; k < m; ++k)
        {
            diag[k] = std::max(diag[k], 1e-15 * diag_max);
        }

        bool accepted = false;
        while (!accepted)
        {
            Eigen::MatrixXd damped = a;
            damped.diagonal() += lambda * diag;
            Eigen::VectorXd const step = damped.ldlt().solve(g);
            if (step.allFinite())
            {
                Eigen::VectorXd const z_new = z + step;
                Eigen::VectorXd r_new;
                double const chi_new = residuals(external(z_new), r_new);
                if (chi_new < chi)
                {
                    double const reduction = (chi - chi_new) / chi;
                    // gain ratio against the linearized model
                    double const predicted = step.dot(g + lambda * diag.cwiseProduct(step));
                    double const rho = predicted > 0.0 ? (chi - chi_new) / predicted : 0.0;
                    z = z_new;
                    r = r_new;
                    chi = chi_new;
                    result.chi_squared_history.push_back(chi);
                    double const t = 2.0 * rho - 1.0;
                    lambda = std::max(lambda * std::max(1.0 / 3.0, 1.0 - t * t * t), 1e-15);
                    nu = 2.0;
                    accepted = true;
                    if (chi <= chi_floor)
                    {
                        converged = true;
                        message = "exact fit";
                    }
                    else if (reduction < options_.tolerance)
                    {
                        converged = true;
                        message = "relative chi-squared reduction below tolerance";
                    }
                    else if (step.norm()
                             <= options_.step_tolerance * (z.norm() + options_.step_tolerance))
                    {
                        converged = true;
                        message = "step below tolerance";
                    }
                    continue;
                }
            }
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e16)
            {
                // No damped step reduces chi-squared: either a numerical
                // minimum or a degenerate Jacobian.
                converged = cos_max < 1e-4;
                message = converged ? "no further reduction possible"
                                    : "damping failed to recover a descent step";
                break;
            }
        }
        if (!accepted)
        {
            break;
        }
    }

    if (!converged && message.empty())
    {
        message = "maximum iterations reached";
    }

    result.parameters = external(z);
    result.converged = converged;
    result.iterations = iterations;
    result.message = message;
    result.chi_squared = chi;
    result.residuals.assign(r.data(), r.data() + r.size());

    result.at_bound.assign(specs_.size(), false);
    for (std::size_t j : free_)
    {
        double const x = result.parameters[j];
        auto const& s = specs_[j];
        double const scale_lo = std::max(std::abs(s.lower), std::abs(s.initial - s.lower));
        double const scale_hi = std::max(std::abs(s.upper), std::abs(s.upper - s.initial));
        if (std::isfinite(s.lower) && x - s.lower <= 1e-6 * scale_lo)
        {
            result.at_bound[j] = true;
        }
        if (std::isfinite(s.upper) && s.upper - x <= 1e-6 * scale_hi)
        {
            result.at_bound[j] = true;
        }
    }

    fill_covariance(result);
    return result;
}

void Solver::fill_covariance(FitResult& result)
{
    auto const np = static_cast<Eigen::Index>(specs_.size());
    result.covariance = Eigen::MatrixXd::Zero(np, np);
    result.standard_errors.assign(specs_.size(), 0.0);
    if (free_.empty())
    {
        return;
    }

    Eigen::MatrixXd const full = external_jacobian(result.parameters);
    auto const m = static_cast<Eigen::Index>(free_.size());
    Eigen::MatrixXd j(full.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        j.col(k) = full.col(static_cast<Eigen::Index>(free_[static_cast<std::size_t>(k)]));
    }
    if (!j.allFinite())
    {
        result.well_conditioned = false;
        return;
    }
    Eigen::MatrixXd const a = j.transpose() * j;

    // Jacobi scaling, then an eigen pseudo-inverse.
    Eigen::VectorXd scale(m);
    std::vector<bool> undetermined(static_cast<std::size_t>(m), false);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        if (a(k, k) > 0.0)
        {
            scale[k] = 1.0 / std::sqrt(a(k, k));
        }
        else
        {
            scale[k] = 0.0;
            undetermined[static_cast<std::size_t>(k)] = true;
        }
    }
    Eigen::MatrixXd const as = scale.asDiagonal() * a * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(as);
    Eigen::VectorXd const ev = eig.eigenvalues();
    double const ev_max = ev.cwiseAbs().maxCoeff();
    double const cutoff = 1e-13 * ev_max;
    Eigen::VectorXd inv(m);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        if (ev[k] > cutoff)
        {
            inv[k] = 1.0 / ev[k];
        }
        else
        {
            inv[k] = 0.0;
            result.well_conditioned = false;
        }
    }
    Eigen::MatrixXd const as_inv
        = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    double const s2 = result.degrees_of_freedom > 0 ? result.reduced_chi_squared() : 0.0;
    Eigen::MatrixXd const cov = s2 * (scale.asDiagonal() * as_inv * scale.asDiagonal());

    for (Eigen::Index a_idx = 0; a_idx < m; ++a_idx)
    {
        auto const ja = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(a_idx)]);
        for (Eigen::Index b_idx = 0; b_idx < m; ++b_idx)
        {
            auto const jb = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(b_idx)]);
            result.covariance(ja, jb) = cov(a_idx, b_idx);
        }
    }
    for (Eigen::Index k = 0; k < m; ++k)
    {
        std::size_t const jdx = free_[static_cast<std::size_t>(k)];
        auto const jj = static_cast<Eigen::Index>(jdx);
        if (undetermined[static_cast<std::size_t>(k)])
        {
            result.well_conditioned = false;
            result.covariance(jj, jj) = std::numeric_limits<double>::infinity();
        }
        result.covariance(jj, jj) = std::max(result.covariance(jj, jj), 0.0);
        result.standard_errors[jdx] = std::sqrt(result.covariance(jj, jj));
    }
}

}  // namespace

//---------------------------------------------------------------------------//
std::size_t FitResult::index_of(std::string const& name) const
{
    auto const it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
    {
        throw std::out_of_range("no fit parameter named '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

FitResult least_squares(LeastSquaresProblem const& problem,
                        std::span<ParameterSpec const> specs,
                        FitOptions const& options)
{
    if (!problem.model)
    {
        throw std::invalid_argument("least_squares requires a model function");
    }
    validate_specs(specs);
    if (!problem.weights.empty() && problem.weights.size() != problem.observations.size())
    {
        throw std::invalid_argument("weights and observations differ in length");
    }
    if (!all_finite(problem.observations))
    {
        throw std::invalid_argument("observations must be finite");
    }
    for (double w : problem.weights)
    {
        if (!(w >= 0.0) || !std::isfinite(w))
        {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
    }
    auto const n_free = static_cast<std::size_t>(
        std::count_if(specs.begin(), specs.end(), [](auto const& s) { return !s.frozen; }));
    if (problem.observations.size() < n_free + 1)
    {
        throw std::invalid_argument(
            "need at least one more observation than free parameters");
    }
    Solver solver(problem, specs, options);
    return solver.run();
}

FitResult curve_fit(CurveFunction const& f,
                    std::span<double const> xs,
                    std::span<double const> ys,
                    std::span<double const> weights,
                    std::span<ParameterSpec const> specs,
                    FitOptions const& options)
{
    if (xs.size() != ys.size())
    {
        throw std::invalid_argument("inputs and observations differ in length");
    }
    if (!weights.empty() && weights.size() != xs.size())
    {
        throw std::invalid_argument("weights and observations differ in length");
    }
    std::size_t const n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto weight_at = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(xs[a], ys[a], weight_at(a))
               < std::make_tuple(xs[b], ys[b], weight_at(b));
    });

    std::vector<double> sx(n);
    std::vector<double> sy(n);
    std::vector<double> sw;
    for (std::size_t k = 0; k < n; ++k)
    {
        sx[k] = xs[order[k]];
        sy[k] = ys[order[k]];
    }
    if (!weights.empty())
    {
        sw.resize(n);
        for (std::size_t k = 0; k < n; ++k)
        {
            sw[k] = weights[order[k]];
        }
    }

    LeastSquaresProblem problem;
    problem.model = [&](std::span<double const> p, std::span<double> out) {
        for (std::size_t k = 0; k < n; ++k)
        {
            out[k] = f(sx[k], p);
        }
    };
    problem.observations = sy;
    problem.weights = sw;

    FitResult result = least_squares(problem, specs, options);
    if (result.residuals.size() == n)
    {
        std::vector<double> original(n);
        for (std::size_t k = 0; k < n; ++k)
        {
            original[order[k]] = result.residuals[k];
        }
        result.residuals = std::move(original);
    }
    return result;
}

Eigen::MatrixXd finite_difference_jacobian(ModelFunction const& model,
                                           std::span<double const> params,
                                           std::size_t n_observations,
                                           double relative_step)
{
    auto const n = static_cast<Eigen::Index>(n_observations);
    Eigen::MatrixXd jac(n, static_cast<Eigen::Index>(params.size()));
    std::vector<double> plus(n_observations);
    std::vector<double> minus(n_observations);
    std::vector<double> p(params.begin(), params.end());
    for (std::size_t j = 0; j < params.size(); ++j)
    {
        double const h = relative_step * (params[j] != 0.0 ? std::abs(params[j]) : 1.0);
        p[j] = params[j] + h;
        model(p, plus);
        p[j] = params[j] - h;
        model(p, minus);
        p[j] = params[j];
        for (Eigen::Index i = 0; i < n; ++i)
        {
            auto const ii = static_cast<std::size_t>(i);
            jac(i, static_cast<Eigen::Index>(j)) = (plus[ii] - minus[ii]) / (2.0 * h);
        }
    }
    return jac;
}

double akaike(FitResult const& fit)
{
    double const n = static_cast<double>(fit.n_data);
    double const chi = std::max(fit.chi_squared, n * std::numeric_limits<double>::min());
    return n * std::log(chi / n) + 2.0 * static_cast<double>(fit.n_free);
}

std::vector<ModelRanking> compare_models(std::span<FitResult const> fits)
{
    if (fits.empty())
    {
        throw std::invalid_argument("compare_models needs at least one fit");
    }
    std::vector<ModelRanking> ranking;
    for (std::size_t i = 0; i < fits.size(); ++i)
    {
        ranking.push_back({i, akaike(fits[i]), 0.0, fits[i].n_free});
    }
    std::stable_sort(ranking.begin(), ranking.end(), [](auto const& a, auto const& b) {
        if (a.aic != b.aic)
        {
            return a.aic < b.aic;
        }
        return a.n_parameters < b.n_parameters;
    });
    double const best = ranking.front().aic;
    for (auto& r : ranking)
    {
        r.delta_aic = r.aic - best;
    }
    return ranking;
}

}  // namespace esr
