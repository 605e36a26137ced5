#include "granulometer/granulometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace granulometer {

SieveSeries::SieveSeries(std::vector<double> sizes_mm) : sizes_(std::move(sizes_mm)) {
  if (sizes_.empty()) throw Error(ErrorCode::InvalidArgument, "sieve series is empty");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (!(sizes_[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "sieve sizes must be > 0");
    if (i > 0 && !(sizes_[i] > sizes_[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "sieve sizes must be strictly increasing");
    }
  }
}

SieveSeries SieveSeries::default_series() { return SieveSeries({4.0, 9.5, 12.5, 19.0}); }

double SizeDistribution::percent_at(double size_mm) const {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "distribution has no points");
  if (!(size_mm > 0.0)) throw Error(ErrorCode::DomainError, "size must be > 0");
  if (size_mm <= points.front().size_mm) return points.front().percent_passing;
  if (size_mm >= points.back().size_mm) return points.back().percent_passing;
  auto hi = std::lower_bound(points.begin(), points.end(), size_mm,
                             [](const DistributionPoint& p, double s) { return p.size_mm < s; });
  if (hi->size_mm == size_mm) return hi->percent_passing;
  auto lo = hi - 1;
  const double w = (std::log(size_mm) - std::log(lo->size_mm)) / (std::log(hi->size_mm) - std::log(lo->size_mm));
  return lo->percent_passing + w * (hi->percent_passing - lo->percent_passing);
}

bool SizeDistribution::is_monotone() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = points[i].percent_passing;
    if (!(v >= 0.0 && v <= 100.0)) return false;
    if (i > 0 && (v < points[i - 1].percent_passing || points[i].size_mm <= points[i - 1].size_mm)) return false;
  }
  return true;
}

double equivalent_sieve_size(const Particle& particle, const ScaleCalibration& calibration) {
  return particle.ellipse_minor * calibration.mm_per_px;
}

SizeDistribution distribution_from_sizes(std::span<const WeightedSize> sizes, double fines_volume_mm3,
                                         const SieveSeries& sieves, DistributionSource source) {
  if (sieves.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty sieve series");
  std::vector<std::pair<double, double>> volumes;
  volumes.reserve(sizes.size());
  double total = std::max(fines_volume_mm3, 0.0);
  for (const auto& s : sizes) {
    const double v = s.weight * s.size_mm * s.size_mm * s.size_mm;
    volumes.emplace_back(s.size_mm, v);
    total += v;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyNet, "no particle or fines volume");
  std::sort(volumes.begin(), volumes.end());

  SizeDistribution dist;
  dist.basis = DistributionBasis::VolumeProxy;
  dist.source = source;
  double passing = std::max(fines_volume_mm3, 0.0);
  std::size_t next = 0;
  for (double sieve : sieves.sizes()) {
    while (next < volumes.size() && volumes[next].first <= sieve) passing += volumes[next++].second;
    dist.points.push_back({sieve, std::min(100.0, 100.0 * passing / total)});
  }
  return dist;
}

double fines_volume(const DelineationNet& net, const ScaleCalibration& calibration, const FinesPolicy& policy) {
  if (policy.kind == FinesPolicy::Kind::Ignore || net.unresolved_px == 0) return 0.0;
  const double thickness =
      policy.thickness_px > 0.0 ? policy.thickness_px : 2.0 * std::sqrt(net.min_particle_area / std::numbers::pi);
  const double scale = calibration.mm_per_px;
  return static_cast<double>(net.unresolved_px) * thickness * scale * scale * scale;
}

SizeDistribution build_distribution(const DelineationNet& net, const ScaleCalibration& calibration,
                                    const SieveSeries& sieves, const FinesPolicy& policy) {
  const CalibratedNet one{&net, calibration};
  return combine_distributions(std::span(&one, 1), sieves, policy);
}

SizeDistribution combine_distributions(std::span<const CalibratedNet> nets, const SieveSeries& sieves,
                                       const FinesPolicy& policy) {
  if (nets.empty()) throw Error(ErrorCode::EmptyInput, "no nets to combine");
  std::vector<WeightedSize> sizes;
  double fines = 0.0;
  for (const auto& item : nets) {
    if (item.net == nullptr) throw Error(ErrorCode::InvalidArgument, "null net");
    if (!(item.calibration.mm_per_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "mm_per_px must be > 0");
    for (const auto& p : item.net->particles) {
      sizes.push_back({equivalent_sieve_size(p, item.calibration), p.edge_weight});
    }
    fines += fines_volume(*item.net, item.calibration, policy);
  }
  if (sizes.empty() && fines <= 0.0) throw Error(ErrorCode::EmptyNet, "no particles and no unresolved area");
  return distribution_from_sizes(sizes, fines, sieves, DistributionSource::ImageAnalysis);
}

std::vector<ResidualRow> percent_error_residuals(const SizeDistribution& image_analysis,
                                                 const SizeDistribution& sieve_analysis, const SieveSeries& sieves) {
  std::vector<ResidualRow> rows;
  for (double s : sieves.sizes()) {
    ResidualRow row;
    row.size_mm = s;
    row.p_ia = image_analysis.percent_at(s);
    row.p_sa = sieve_analysis.percent_at(s);
    if (row.p_sa == 0.0) throw Error(ErrorCode::ZeroReference, "reference passing is 0 at " + std::to_string(s) + " mm");
    row.residual_pct = (row.p_ia - row.p_sa) / row.p_sa * 100.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> two_norm_sizes(double range_min, double range_max, int k) {
  if (!(range_min > 0.0 && range_max > range_min)) throw Error(ErrorCode::DomainError, "invalid size range");
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 samples");
  const double log_lo = std::log(range_min), log_hi = std::log(range_max);
  std::vector<double> sizes(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) sizes[static_cast<std::size_t>(i)] = std::exp(log_lo + (log_hi - log_lo) * i / (k - 1));
  return sizes;
}

double rms_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "sample counts differ");
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double two_norm_error(const SwebrecParams& fitted, const SwebrecParams& reference, double range_min, double range_max,
                      int k) {
  const auto sizes = two_norm_sizes(range_min, range_max, k);
  std::vector<double> f, r;
  for (double x : sizes) {
    f.push_back(100.0 * swebrec_eval(fitted, x));
    r.push_back(100.0 * swebrec_eval(reference, x));
  }
  return rms_difference(f, r);
}

std::pair<double, double> default_two_norm_range(const SieveSeries& sieves, const SwebrecParams& reference) {
  return {sieves.smallest() / 2.0, reference.x_max};
}

bool envelope_check(std::span<const ResidualRow> rows, double limit) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no residual rows");
  return std::all_of(rows.begin(), rows.end(), [&](const ResidualRow& r) { return std::abs(r.residual_pct) <= limit; });
}

std::vector<SizeFraction> fit_points(const SizeDistribution& distribution) {
  std::vector<SizeFraction> out;
  for (const auto& p : distribution.points) {
    if (p.percent_passing > 0.0) out.push_back({p.size_mm, std::min(p.percent_passing / 100.0, 1.0)});
  }
  return out;
}

}  // namespace granulometer
