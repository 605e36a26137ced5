#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace granulometer {

/// Swebrec cumulative size distribution
///   P(x) = 1 / (1 + (ln(x_max/x) / ln(x_max/x_50))^b),  0 < x < x_max
///   P(x) = 1,                                             x >= x_max
struct SwebrecParams {
  double x_max = 0.0;  // mm
  double x_50 = 0.0;   // mm
  double b = 0.0;

  /// x_max > x_50 > 0 and b > 0.
  bool valid() const noexcept;

  friend bool operator==(const SwebrecParams&, const SwebrecParams&) = default;
};

/// Fraction passing in [0, 1]. Throws DomainError for x <= 0 or invalid params.
double swebrec_eval(const SwebrecParams& params, double x);

/// Inverse CDF: the size whose passing fraction is u, for u in (0, 1).
double swebrec_quantile(const SwebrecParams& params, double u);

struct SizeFraction {
  double size_mm = 0.0;
  double fraction = 0.0;  // in (0, 1]
};

struct SwebrecFitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-14;
  double step_tolerance = 1e-13;
  double cost_tolerance = 1e-30;
  /// When false a non-converged fit is returned with converged == false
  /// instead of throwing NoConvergence.
  bool require_convergence = true;
};

struct SwebrecFit {
  SwebrecParams params;
  /// sqrt(mean squared residual) in fraction units at the solution.
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Data-driven starting point: x_50 from the 50 % crossing (log-linear
/// interpolation), x_max = 1.5 x largest size, b = 2.
SwebrecParams swebrec_initial_guess(std::span<const SizeFraction> points);

/// Damped Gauss-Newton (Levenberg-Marquardt) least squares in the
/// unconstrained coordinates (ln x_50, ln ln(x_max/x_50), ln b), so every
/// iterate satisfies x_max > x_50 > 0, b > 0.
///
/// Throws TooFewPoints for fewer than 3 points or fewer than 3 distinct
/// sizes, DomainError for sizes <= 0 or fractions outside (0, 1], and
/// NoConvergence when the iteration budget is exhausted (unless
/// options.require_convergence is false).
SwebrecFit swebrec_fit(std::span<const SizeFraction> points, std::optional<SwebrecParams> init = std::nullopt,
                       const SwebrecFitOptions& options = {});

}  // namespace granulometer
