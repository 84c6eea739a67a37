#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geophoto::stats {

enum class Goodness { r_squared, log_likelihood };

struct FitDiagnostics {
    int iterations{0};
    double gradient_norm{0.0}; // infinity norm at the returned point
    double last_step{0.0};
    std::string note;
};

/// Outcome of any fitting routine. Parameter names depend on the model:
/// truncated_lognormal (mu, sigma2), power_law (q, c), exponential (A, beta),
/// linear (slope, intercept).
struct FitResult {
    std::string model;
    std::vector<std::pair<std::string, double>> params;
    Goodness goodness_kind{Goodness::r_squared};
    double goodness{0.0};
    std::size_t n_points{0};
    bool converged{true};
    FitDiagnostics diagnostics;

    double param(std::string_view name) const;
};

void to_json(nlohmann::json& j, const FitResult& f);

inline constexpr std::size_t kMinLognormalSamples = 30;
inline constexpr double kGradientTolerance = 1e-8;
inline constexpr int kMaxNewtonIterations = 200;

/// Left-truncated log-normal MLE. Damped Newton on (mu, ln sigma); if Newton
/// stalls, 50 bisection steps on the profile likelihood in ln sigma, then a
/// Newton polish. truncation_point == 0 means no truncation (closed form).
/// Throws InsufficientDataError (< 30 samples), DataError (sample below the
/// truncation point), DegenerateDataError (all samples equal) and
/// ConvergenceError.
FitResult fit_truncated_lognormal(std::span<const double> samples, double truncation_point = 1.0);

/// Same model for integer counts k >= 1, each read as a latent value in
/// [k, k+1) with the law truncated at 1.
FitResult fit_truncated_lognormal_binned(std::span<const std::int64_t> counts);

struct Gradient2 {
    double d_mu{0.0};
    double d_log_sigma{0.0};
};

/// Log-likelihood of the continuous truncated model including the 1/x Jacobian.
double truncated_lognormal_loglik(std::span<const double> samples, double truncation_point, double mu,
                                  double sigma);
Gradient2 truncated_lognormal_gradient(std::span<const double> samples, double truncation_point, double mu,
                                       double sigma);

/// ln y = ln c - q ln x by ordinary least squares; R^2 on the log scale.
FitResult fit_power_law(std::span<const double> xs, std::span<const double> ys);

/// ln y = ln A - beta x by ordinary least squares; R^2 on the log scale.
FitResult fit_exponential(std::span<const double> xs, std::span<const double> ys);

/// y = slope x + intercept. R^2 is 1 when ys are constant.
FitResult linear_regression_r2(std::span<const double> xs, std::span<const double> ys);

/// Standard normal helpers with tail-safe evaluation.
double normal_pdf(double z);
double normal_log_survival(double z); // ln(1 - Phi(z))
double normal_mills(double z);        // phi(z) / (1 - Phi(z))

} // namespace geophoto::stats
