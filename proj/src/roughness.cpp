#include "casimir/roughness.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "casimir/csv.hpp"
#include "casimir/errors.hpp"

namespace casimir {

RoughnessProfile::RoughnessProfile(std::vector<RoughnessBin> bins) : bins_(std::move(bins)) {
  if (bins_.empty()) throw DataError("roughness profile: no bins");
  double total = 0.0;
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    const auto& b = bins_[i];
    if (!(b.v >= 0.0)) throw DataError(fmt::format("roughness bin {}: fraction must be >= 0", i));
    if (!std::isfinite(b.h_nm)) throw DataError(fmt::format("roughness bin {}: height not finite", i));
    if (i > 0 && !(b.h_nm > bins_[i - 1].h_nm)) {
      throw DataError(fmt::format("roughness bin {}: heights must ascend", i));
    }
    total += b.v;
  }
  if (bins_.front().h_nm != 0.0) throw DataError("roughness profile: first height must be 0");
  if (std::abs(total - 1.0) > 1e-6) {
    throw DataError(fmt::format("roughness profile: fractions sum to {}, expected 1", total));
  }
}

RoughnessProfile RoughnessProfile::load_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, {"v", "h_nm"});
  std::vector<RoughnessBin> bins;
  for (const auto& r : t.rows) bins.push_back({r[0], r[1]});
  try {
    return RoughnessProfile(std::move(bins));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void RoughnessProfile::save_csv(const std::filesystem::path& path) const {
  std::vector<std::vector<double>> rows;
  for (const auto& b : bins_) rows.push_back({b.v, b.h_nm});
  csv::write(path, {"v", "h_nm"}, rows);
}

double zero_roughness_level(const RoughnessProfile& p) {
  double h0 = 0.0;
  for (const auto& b : p.bins()) h0 += b.v * b.h_nm;
  return h0;
}

double min_rough_separation(const RoughnessProfile& p1, const RoughnessProfile& p2) {
  return p1.max_height() + p2.max_height() - zero_roughness_level(p1) - zero_roughness_level(p2);
}

double rough_force(const SmoothForce& f_smooth, const RoughnessProfile& p1, const RoughnessProfile& p2,
                   double a_nm) {
  const double base = a_nm + zero_roughness_level(p1) + zero_roughness_level(p2);
  if (!(base - p1.max_height() - p2.max_height() > 0.0)) {
    throw std::domain_error(fmt::format(
        "roughness averaging at a = {} nm reaches a non-positive separation (need a > {} nm)", a_nm,
        min_rough_separation(p1, p2)));
  }
  double sum = 0.0;
  for (const auto& bi : p1.bins()) {
    if (bi.v == 0.0) continue;
    double inner = 0.0;
    for (const auto& bk : p2.bins()) {
      if (bk.v == 0.0) continue;
      inner += bk.v * f_smooth(base - bi.h_nm - bk.h_nm);
    }
    sum += bi.v * inner;
  }
  return sum;
}

double roughness_correction(const SmoothForce& f_smooth, const RoughnessProfile& p1,
                            const RoughnessProfile& p2, double a_nm) {
  const double smooth = f_smooth(a_nm);
  return (rough_force(f_smooth, p1, p2, a_nm) - smooth) / std::abs(smooth);
}

ForceInterpolant::ForceInterpolant(
    double a_min_nm, double a_max_nm, double log_step,
    const std::function<std::vector<double>(std::span<const double>)>& sample)
    : a_min_(a_min_nm), a_max_(a_max_nm), log_min_(std::log(a_min_nm)) {
  if (!(a_min_nm > 0.0 && a_max_nm > a_min_nm && log_step > 0.0)) {
    throw std::invalid_argument("ForceInterpolant: need 0 < a_min < a_max and a positive step");
  }
  const double span = std::log(a_max_nm) - log_min_;
  const auto n = static_cast<std::size_t>(std::ceil(span / log_step)) + 1;
  log_step_ = span / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) grid_.push_back(std::exp(log_min_ + log_step_ * static_cast<double>(i)));
  grid_.back() = a_max_nm;
  const auto f = sample(grid_);
  if (f.size() != grid_.size()) throw std::logic_error("ForceInterpolant: sampler returned wrong size");
  sign_ = f.front() < 0.0 ? -1.0 : 1.0;
  for (double v : f) {
    if (!(v * sign_ > 0.0)) throw std::domain_error("ForceInterpolant: force changes sign or vanishes");
    log_abs_.push_back(std::log(std::abs(v)));
  }
  spline_ = boost::math::interpolators::cardinal_cubic_b_spline<double>(log_abs_.data(), log_abs_.size(),
                                                                         log_min_, log_step_);
}

double ForceInterpolant::operator()(double a_nm) const {
  // Small overshoots from rounding at the grid ends are allowed.
  if (a_nm < a_min_ * (1.0 - 1e-12) || a_nm > a_max_ * (1.0 + 1e-12)) {
    throw std::domain_error(fmt::format("separation {} nm outside interpolation range [{}, {}]", a_nm,
                                        a_min_, a_max_));
  }
  const double x = std::clamp(std::log(a_nm), log_min_, log_min_ + log_step_ * static_cast<double>(grid_.size() - 1));
  return sign_ * std::exp(spline_(x));
}

}  // namespace casimir
