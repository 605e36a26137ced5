#include "granulometer/swebrec.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "granulometer/error.hpp"

namespace granulometer {
namespace {

// Unconstrained coordinates: a = ln x_50, g = ln(ln(x_max / x_50)), c = ln b.
Eigen::Vector3d to_internal(const SwebrecParams& p) {
  return {std::log(p.x_50), std::log(std::log(p.x_max / p.x_50)), std::log(p.b)};
}

SwebrecParams from_internal(const Eigen::Vector3d& t) {
  SwebrecParams p;
  p.x_50 = std::exp(t[0]);
  p.x_max = p.x_50 * std::exp(std::exp(t[1]));
  p.b = std::exp(t[2]);
  return p;
}

// Box on the internal coordinates so a diverging fit stays representable:
// x_50 in [1e-6, 1e6] mm, ln(x_max / x_50) in [e^-20, e^5], b in [1e-3, 1e3].
Eigen::Vector3d project(Eigen::Vector3d t) {
  static const Eigen::Vector3d lo{std::log(1e-6), -20.0, std::log(1e-3)};
  static const Eigen::Vector3d hi{std::log(1e6), 5.0, std::log(1e3)};
  return t.cwiseMax(lo).cwiseMin(hi);
}

// Model value and gradient with respect to (a, g, c).
double eval_with_gradient(const Eigen::Vector3d& t, double x, Eigen::Vector3d& grad) {
  const double log_gap = std::exp(t[1]);           // ln(x_max / x_50)
  const double log_xmax = t[0] + log_gap;
  const double b = std::exp(t[2]);
  const double span = log_xmax - std::log(x);      // ln(x_max / x)
  if (span <= 0.0) {
    grad.setZero();
    return 1.0;
  }
  const double z = span / log_gap;
  const double zb = std::pow(z, b);
  const double denom = 1.0 + zb;
  const double value = 1.0 / denom;
  const double dvalue_dz = -b * zb / (z * denom * denom);
  grad[0] = dvalue_dz / log_gap;
  grad[1] = dvalue_dz * (log_gap - span) / log_gap;
  grad[2] = -zb * std::log(z) / (denom * denom) * b;
  return value;
}

double interpolate_crossing(std::span<const SizeFraction> sorted, double level) {
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& lo = sorted[i - 1];
    const auto& hi = sorted[i];
    if (lo.fraction <= level && hi.fraction >= level && hi.fraction > lo.fraction) {
      const double w = (level - lo.fraction) / (hi.fraction - lo.fraction);
      return std::exp(std::log(lo.size_mm) + w * (std::log(hi.size_mm) - std::log(lo.size_mm)));
    }
  }
  return sorted.front().fraction > level ? sorted.front().size_mm : sorted.back().size_mm;
}

}  // namespace

bool SwebrecParams::valid() const noexcept {
  return std::isfinite(x_max) && std::isfinite(x_50) && std::isfinite(b) && x_50 > 0.0 && x_max > x_50 && b > 0.0;
}

double swebrec_eval(const SwebrecParams& params, double x) {
  if (!params.valid()) throw Error(ErrorCode::DomainError, "invalid Swebrec parameters");
  if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "size must be > 0");
  if (x >= params.x_max) return 1.0;
  const double z = std::log(params.x_max / x) / std::log(params.x_max / params.x_50);
  return 1.0 / (1.0 + std::pow(z, params.b));
}

double swebrec_quantile(const SwebrecParams& params, double u) {
  if (!params.valid()) throw Error(ErrorCode::DomainError, "invalid Swebrec parameters");
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorCode::DomainError, "quantile level must lie in (0, 1)");
  const double z = std::pow((1.0 - u) / u, 1.0 / params.b);
  return params.x_max * std::exp(-z * std::log(params.x_max / params.x_50));
}

SwebrecParams swebrec_initial_guess(std::span<const SizeFraction> points) {
  std::vector<SizeFraction> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.size_mm < b.size_mm; });
  SwebrecParams p;
  p.x_max = 1.5 * sorted.back().size_mm;
  p.x_50 = std::clamp(interpolate_crossing(sorted, 0.5), 1e-9, p.x_max / 1.01);
  p.b = 2.0;
  return p;
}

SwebrecFit swebrec_fit(std::span<const SizeFraction> points, std::optional<SwebrecParams> init,
                       const SwebrecFitOptions& options) {
  if (points.size() < 3) throw Error(ErrorCode::TooFewPoints, "need at least 3 points, got " + std::to_string(points.size()));
  std::vector<double> sizes;
  for (const auto& pt : points) {
    if (!(pt.size_mm > 0.0)) throw Error(ErrorCode::DomainError, "sizes must be > 0");
    if (!(pt.fraction > 0.0 && pt.fraction <= 1.0)) throw Error(ErrorCode::DomainError, "fractions must lie in (0, 1]");
    sizes.push_back(pt.size_mm);
  }
  std::sort(sizes.begin(), sizes.end());
  if (std::unique(sizes.begin(), sizes.end()) - sizes.begin() < 3) {
    throw Error(ErrorCode::TooFewPoints, "need at least 3 distinct sizes");
  }

  SwebrecParams start = init.value_or(swebrec_initial_guess(points));
  if (!start.valid()) throw Error(ErrorCode::DomainError, "invalid initial parameters");

  const auto n = static_cast<Eigen::Index>(points.size());
  auto evaluate = [&](const Eigen::Vector3d& t, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    Eigen::Vector3d g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pt = points[static_cast<std::size_t>(i)];
      r[i] = eval_with_gradient(t, pt.size_mm, g) - pt.fraction;
      if (jac != nullptr) jac->row(i) = g.transpose();
    }
    return 0.5 * r.squaredNorm();
  };

  Eigen::Vector3d t = project(to_internal(start));
  Eigen::VectorXd r(n), r_trial(n);
  Eigen::MatrixXd J(n, 3);
  double cost = evaluate(t, r, &J);
  double lambda = 1e-3;
  SwebrecFit result;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d grad = J.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance || cost <= options.cost_tolerance) {
      result.converged = true;
      break;
    }

    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::Matrix3d A = JtJ;
      for (int k = 0; k < 3; ++k) A(k, k) += lambda * std::max(JtJ(k, k), 1e-12);
      const Eigen::Vector3d step = A.ldlt().solve(-grad);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::Vector3d trial = project(t + step);
      const double trial_cost = evaluate(trial, r_trial, nullptr);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double step_norm = step.norm();
        const double rel_decrease = (cost - trial_cost) / std::max(cost, std::numeric_limits<double>::min());
        t = trial;
        cost = evaluate(t, r, &J);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (step_norm <= options.step_tolerance * (t.norm() + options.step_tolerance) || rel_decrease < 1e-15) {
          result.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // No descent direction left at machine precision: the current point is stationary.
      result.converged = true;
    }
    if (result.converged) break;
  }

  result.params = from_internal(t);
  if (!result.params.valid()) {
    throw Error(ErrorCode::NoConvergence, "Swebrec fit left the representable parameter range");
  }
  result.rms_residual = std::sqrt(2.0 * cost / static_cast<double>(n));
  if (!result.converged && options.require_convergence) {
    throw Error(ErrorCode::NoConvergence, "Swebrec fit did not converge in " + std::to_string(options.max_iterations) +
                                              " iterations");
  }
  return result;
}

}  // namespace granulometer
