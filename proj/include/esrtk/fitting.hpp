// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file fitting.hpp
//! Bounded Levenberg-Marquardt least squares and AIC model comparison.
//---------------------------------------------------------------------------//
#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace esr
{
//---------------------------------------------------------------------------//
struct ParameterSpec
{
    std::string name;
    double initial = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool frozen = false;
};

struct FitOptions
{
    double tolerance = 1e-10;       //!< relative chi-squared reduction
    double step_tolerance = 1e-12;  //!< internal-space step norm
    int max_iterations = 500;
    double initial_damping = 1e-3;
};

struct FitResult
{
    std::vector<std::string> names;
    std::vector<double> parameters;
    std::vector<double> standard_errors;
    Eigen::MatrixXd covariance;  //!< full size; frozen rows/cols are zero
    std::vector<double> residuals;  //!< sqrt(w) * (observed - model)
    double chi_squared = 0.0;
    int degrees_of_freedom = 0;
    int n_data = 0;
    int n_free = 0;
    bool converged = false;
    bool well_conditioned = true;
    int iterations = 0;
    std::vector<double> chi_squared_history;  //!< one entry per accepted step
    std::vector<bool> at_bound;
    std::string message;

    double reduced_chi_squared() const
    {
        return chi_squared / static_cast<double>(degrees_of_freedom);
    }
    //! Index of a named parameter; throws std::out_of_range when missing.
    std::size_t index_of(std::string const& name) const;
    double value(std::string const& name) const { return parameters[index_of(name)]; }
    double error(std::string const& name) const
    {
        return standard_errors[index_of(name)];
    }
};

//---------------------------------------------------------------------------//
//! Evaluates predictions for all observations at the given parameters.
using ModelFunction
    = std::function<void(std::span<double const> params, std::span<double> predictions)>;

//! Fills d(prediction_i)/d(param_j), observations by parameters, in the
//! external (bounded) parameter space.
using JacobianFunction
    = std::function<void(std::span<double const> params, Eigen::Ref<Eigen::MatrixXd> jac)>;

struct LeastSquaresProblem
{
    ModelFunction model;
    JacobianFunction jacobian;  //!< optional; central differences otherwise
    std::span<double const> observations;
    std::span<double const> weights;  //!< optional; empty means unit weights
};

/*!
 * Minimize sum_i w_i (y_i - f_i(p))^2 subject to box bounds.
 *
 * Bounds are enforced by reparameterization: logistic for two-sided
 * bounds, exponential for one-sided ones. Frozen parameters are carried
 * through unchanged. Non-convergence is reported in the result rather than
 * thrown; invalid specifications throw std::invalid_argument.
 */
FitResult least_squares(LeastSquaresProblem const& problem,
                        std::span<ParameterSpec const> specs,
                        FitOptions const& options = {});

//! Scalar curve model y = f(x; p).
using CurveFunction = std::function<double(double x, std::span<double const> params)>;

/*!
 * Fit y = f(x; p) to samples. Points are canonically ordered by (x, y, w)
 * before fitting, so the result does not depend on input order; residuals
 * are returned in the caller's order.
 */
FitResult curve_fit(CurveFunction const& f,
                    std::span<double const> xs,
                    std::span<double const> ys,
                    std::span<double const> weights,
                    std::span<ParameterSpec const> specs,
                    FitOptions const& options = {});

//! Central-difference Jacobian in external parameter space with steps of
//! `relative_step` times the parameter magnitude.
Eigen::MatrixXd finite_difference_jacobian(ModelFunction const& model,
                                           std::span<double const> params,
                                           std::size_t n_observations,
                                           double relative_step = 1e-6);

//---------------------------------------------------------------------------//
struct ModelRanking
{
    std::size_t index = 0;  //!< position in the input sequence
    double aic = 0.0;
    double delta_aic = 0.0;
    int n_parameters = 0;
};

//! AIC = n ln(chi2 / n) + 2k for one fit.
double akaike(FitResult const& fit);

//! Rank fits of the same data ascending by AIC; ties go to fewer
//! parameters, then to input order.
std::vector<ModelRanking> compare_models(std::span<FitResult const> fits);

//! Difference in AIC above which one model is preferred outright.
inline constexpr double decisive_delta_aic = 10.0;

}  // namespace esr
