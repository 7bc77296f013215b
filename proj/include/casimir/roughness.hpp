#pragma once

// Geometrical averaging of a smooth-surface force over the height
// histograms of both surfaces:
//
//   F_rough(a) = sum_i sum_k v_i w_k F(a + H0 + G0 - h_i - g_k)
//
// with (v_i, h_i) and (w_k, g_k) the area fractions and heights of the two
// surfaces and H0, G0 their zero roughness levels.

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

namespace casimir {

struct RoughnessBin {
  double v;     // area fraction
  double h_nm;  // height above the lowest point
};

/// Height histogram. Fractions sum to 1, heights ascend from 0.
class RoughnessProfile {
 public:
  explicit RoughnessProfile(std::vector<RoughnessBin> bins);

  static RoughnessProfile load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

  /// A single bin at height 0: a flat surface.
  static RoughnessProfile flat() { return RoughnessProfile({{1.0, 0.0}}); }

  const std::vector<RoughnessBin>& bins() const { return bins_; }
  double max_height() const { return bins_.back().h_nm; }

 private:
  std::vector<RoughnessBin> bins_;
};

/// H0 = sum v_i h_i.
double zero_roughness_level(const RoughnessProfile& p);

using SmoothForce = std::function<double(double a_nm)>;

/// Smallest separation at which rough_force is defined.
double min_rough_separation(const RoughnessProfile& p1, const RoughnessProfile& p2);

/// Geometrically averaged force. Throws std::domain_error if any bin pair
/// gives a non-positive effective separation.
double rough_force(const SmoothForce& f_smooth, const RoughnessProfile& p1, const RoughnessProfile& p2,
                   double a_nm);

/// (rough_force - F(a)) / |F(a)|. Negative when roughness strengthens attraction.
double roughness_correction(const SmoothForce& f_smooth, const RoughnessProfile& p1,
                            const RoughnessProfile& p2, double a_nm);

/// A smooth force sampled on a logarithmic grid and interpolated with a
/// cubic B-spline in (ln a, ln |F|). Built once per curve so the 450-odd bin
/// pairs per output point do not each need a Lifshitz evaluation.
class ForceInterpolant {
 public:
  /// `sample` must be callable on the whole grid; it receives all grid points
  /// at once so callers can evaluate them in parallel.
  ForceInterpolant(double a_min_nm, double a_max_nm, double log_step,
                   const std::function<std::vector<double>(std::span<const double>)>& sample);

  double operator()(double a_nm) const;
  double a_min() const { return a_min_; }
  double a_max() const { return a_max_; }
  const std::vector<double>& grid() const { return grid_; }

 private:
  double a_min_;
  double a_max_;
  double log_min_;
  double log_step_;
  double sign_ = -1.0;
  std::vector<double> grid_;
  std::vector<double> log_abs_;
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

}  // namespace casimir
