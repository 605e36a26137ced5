#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granulometer/delineation.hpp"
#include "granulometer/swebrec.hpp"

namespace granulometer {

/// Strictly ascending sieve apertures in mm.
class SieveSeries {
 public:
  SieveSeries() = default;
  explicit SieveSeries(std::vector<double> sizes_mm);

  /// {4, 9.5, 12.5, 19} mm: gravel-to-sand screens for the lab pile.
  static SieveSeries default_series();

  std::span<const double> sizes() const noexcept { return sizes_; }
  double smallest() const { return sizes_.front(); }
  double largest() const { return sizes_.back(); }
  std::size_t size() const noexcept { return sizes_.size(); }

 private:
  std::vector<double> sizes_;
};

enum class DistributionBasis { VolumeProxy, Count };
enum class DistributionSource { ImageAnalysis, SieveAnalysis, SwebrecModel };

struct DistributionPoint {
  double size_mm = 0.0;
  double percent_passing = 0.0;
};

struct SizeDistribution {
  std::vector<DistributionPoint> points;
  DistributionBasis basis = DistributionBasis::VolumeProxy;
  DistributionSource source = DistributionSource::ImageAnalysis;

  /// Percent passing at `size_mm`, linear in (ln size, percent) between
  /// points and held constant beyond the first/last point.
  double percent_at(double size_mm) const;

  /// Non-decreasing in size with every value in [0, 100].
  bool is_monotone() const;
};

/// Fines handling for unresolved (label 0) area inside the analysis region.
struct FinesPolicy {
  enum class Kind { Ignore, BelowSmallestSieve };
  Kind kind = Kind::BelowSmallestSieve;
  /// Layer thickness in px given to unresolved area; <= 0 selects the
  /// equivalent-circle diameter of the net's min_particle_area.
  double thickness_px = 0.0;
};

/// A particle size with its volume weight (edge correction), mm.
struct WeightedSize {
  double size_mm = 0.0;
  double weight = 1.0;
};

/// Ellipse minor axis times the image scale.
double equivalent_sieve_size(const Particle& particle, const ScaleCalibration& calibration);

/// Percent passing from sizes with volume proxy weight * d^3, plus an
/// optional fines volume (mm^3) counted below every sieve.
SizeDistribution distribution_from_sizes(std::span<const WeightedSize> sizes, double fines_volume_mm3,
                                         const SieveSeries& sieves,
                                         DistributionSource source = DistributionSource::ImageAnalysis);

/// Fines volume of one net in mm^3 under the policy.
double fines_volume(const DelineationNet& net, const ScaleCalibration& calibration, const FinesPolicy& policy);

SizeDistribution build_distribution(const DelineationNet& net, const ScaleCalibration& calibration,
                                    const SieveSeries& sieves, const FinesPolicy& policy = {});

struct CalibratedNet {
  const DelineationNet* net = nullptr;
  ScaleCalibration calibration;
};

/// Pools particles and fines over an image set, then computes percent passing.
SizeDistribution combine_distributions(std::span<const CalibratedNet> nets, const SieveSeries& sieves,
                                       const FinesPolicy& policy = {});

struct ResidualRow {
  double size_mm = 0.0;
  double p_ia = 0.0;
  double p_sa = 0.0;
  double residual_pct = 0.0;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  double two_norm = 0.0;
  double envelope_limit = 30.0;
  bool pass = false;
};

/// (P_IA - P_SA) / P_SA * 100 at each sieve. Throws ZeroReference if P_SA is 0.
std::vector<ResidualRow> percent_error_residuals(const SizeDistribution& image_analysis,
                                                 const SizeDistribution& sieve_analysis, const SieveSeries& sieves);

/// k log-spaced sizes spanning [range_min, range_max], ends included.
std::vector<double> two_norm_sizes(double range_min, double range_max, int k = 50);

/// sqrt(mean((a_i - b_i)^2)) over paired samples.
double rms_difference(std::span<const double> a, std::span<const double> b);

/// RMS of percent-passing differences (percentage points) over k
/// log-spaced sizes in [range_min, range_max].
double two_norm_error(const SwebrecParams& fitted, const SwebrecParams& reference, double range_min, double range_max,
                      int k = 50);

/// [smallest sieve / 2, reference x_max].
std::pair<double, double> default_two_norm_range(const SieveSeries& sieves, const SwebrecParams& reference);

/// |residual| <= limit at every row, boundary inclusive.
bool envelope_check(std::span<const ResidualRow> rows, double limit = 30.0);

/// Fraction points (percent / 100) of a distribution, dropping zero values,
/// ready for swebrec_fit.
std::vector<SizeFraction> fit_points(const SizeDistribution& distribution);

}  // namespace granulometer
