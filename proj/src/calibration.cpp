#include "casimir/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "casimir/csv.hpp"
#include "casimir/errors.hpp"

namespace casimir {
namespace {

// pN per (nN/V * V)
constexpr double kPnPerNn = 1e3;

double student_t_975(double dof) {
  if (dof < 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::students_t(dof), 0.975);
}

double two_sided_quantile(double confidence, double dof) {
  const double p = 0.5 + 0.5 * confidence;
  if (dof > 1000.0) return boost::math::quantile(boost::math::normal(), p);
  return boost::math::quantile(boost::math::students_t(std::max(dof, 1.0)), p);
}

struct Sample {
  double a;
  double value;
};

// Value at `at` of the least-squares straight line through the samples with
// |a - at| <= half_window. `sorted` must be ascending in a.
std::optional<double> local_fit(std::span<const Sample> sorted, double at, double half_window) {
  auto lo = std::lower_bound(sorted.begin(), sorted.end(), at - half_window,
                             [](const Sample& s, double v) { return s.a < v; });
  auto hi = std::upper_bound(lo, sorted.end(), at + half_window,
                             [](double v, const Sample& s) { return v < s.a; });
  if (hi - lo < 3) return std::nullopt;
  double n = 0, st = 0, stt = 0, sy = 0, sty = 0;
  for (auto it = lo; it != hi; ++it) {
    const double t = (it->a - at) / half_window;
    n += 1, st += t, stt += t * t, sy += it->value, sty += t * it->value;
  }
  const double det = n * stt - st * st;
  if (!(det > 1e-9 * n * stt)) return std::nullopt;
  // Noisy separations can bunch the points on one side; the intercept is then
  // an extrapolation noisier than a single sample. Skip such windows.
  const double tbar = st / n, var = stt / n - tbar * tbar;
  if (1.0 / n + tbar * tbar / (n * var) > 1.0) return std::nullopt;
  return (sy * stt - sty * st) / det;
}

// A curve after grouping repetitions: effective piezo positions (drift removed).
struct PreparedCurve {
  double voltage_mv;
  std::vector<double> z;
  std::vector<double> s;
};

std::vector<double> effective_z(const ForceDistanceCurve& c, const std::optional<double>& drift) {
  std::vector<double> z = c.z_piezo_nm;
  if (drift) {
    for (double& v : z) v += *drift * c.repetition;
  }
  return z;
}

// Averages repetitions that share a voltage and an identical piezo grid;
// since a is linear in S this is the same as averaging separations.
std::vector<PreparedCurve> prepare(std::span<const ForceDistanceCurve> curves, const std::optional<double>& drift) {
  std::vector<PreparedCurve> out;
  std::vector<int> counts;
  for (const auto& c : curves) {
    c.validate();
    auto z = effective_z(c, drift);
    bool merged = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].voltage_mv == c.voltage_mv && out[i].z == z) {
        for (std::size_t k = 0; k < z.size(); ++k) out[i].s[k] += c.s_def_v[k];
        ++counts[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.push_back({c.voltage_mv, std::move(z), c.s_def_v});
      counts.push_back(1);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (double& v : out[i].s) v /= counts[i];
  }
  return out;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw std::invalid_argument("analysis grid needs lo < hi and step > 0");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

// Calibration model on the (repetition-averaged) samples:
//
//   S_k = sum_l b_l B_l(ln a_k) + p X(a_k) V^2 + q X(a_k) V,   a_k = z0 + z_k + m S_k,
//
// with p = 1/k~ (in V/pN), q = -2 p V0 and the Casimir force, together with
// p V0^2 X(a), carried by a cubic B-spline in ln a. For fixed (m, z0) this is
// linear; the residual is a smooth function of (m, z0) because no resampling
// of noisy data is involved.
class CalibrationProblem {
 public:
  struct Row {
    std::uint32_t curve;
    std::uint32_t sample;
  };
  struct Linear {
    Eigen::VectorXd beta;  // spline coefficients, then p, q
    double rss = 0.0;
    std::size_t n = 0;
  };

  CalibrationProblem(std::vector<PreparedCurve> curves, const PolynomialX& x, const CalibrationOptions& opts)
      : curves_(std::move(curves)), x_(x), opts_(opts) {
    if (!x_.in_range(opts.a_min_nm) || !x_.in_range(opts.a_max_nm)) {
      throw ConfigError(fmt::format("calibration range [{}, {}] nm outside the X(a) range [{}, {}]", opts.a_min_nm,
                                    opts.a_max_nm, x_.a_min(), x_.a_max()));
    }
    a_lo_ = std::max(x_.a_min(), opts.a_min_nm - kDomainPad);
    a_hi_ = std::min(x_.a_max(), opts.a_max_nm + kDomainPad);
    u0_ = std::log(a_lo_);
    const auto cells = static_cast<std::size_t>(std::ceil((std::log(a_hi_) - u0_) / kKnotStep));
    du_ = (std::log(a_hi_) - u0_) / static_cast<double>(cells);
    cells_ = cells;
    nb_ = cells + 3;
  }

  const std::vector<PreparedCurve>& curves() const { return curves_; }
  std::size_t basis_size() const { return nb_; }

  double separation(const Row& r, double m, double z0) const {
    const auto& c = curves_[r.curve];
    return z0 + c.z[r.sample] + m * c.s[r.sample];
  }

  /// Samples whose separation lies in the calibration range, every `stride`-th.
  std::vector<Row> select(double m, double z0, std::size_t stride = 1) const {
    std::vector<Row> rows;
    for (std::size_t i = 0; i < curves_.size(); ++i) {
      for (std::size_t k = 0; k < curves_[i].z.size(); k += stride) {
        const Row r{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k)};
        const double a = separation(r, m, z0);
        if (a >= opts_.a_min_nm && a <= opts_.a_max_nm) rows.push_back(r);
      }
    }
    return rows;
  }

  /// Basis cell and the four cubic B-spline weights at separation a.
  std::pair<std::size_t, std::array<double, 4>> basis(double a) const {
    const double t = (std::log(std::clamp(a, a_lo_, a_hi_)) - u0_) / du_;
    const auto cell = std::min(cells_ - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t))));
    const double f = t - static_cast<double>(cell);
    const double g = 1.0 - f;
    return {cell, {g * g * g / 6.0, (3 * f * f * f - 6 * f * f + 4) / 6.0, (-3 * f * f * f + 3 * f * f + 3 * f + 1) / 6.0,
                   f * f * f / 6.0}};
  }

  double x_at(double a) const { return x_(std::clamp(a, a_lo_, a_hi_)); }

  Linear solve(double m, double z0, std::span<const Row> rows) const {
    const auto np = nb_ + 2;
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
    std::array<Eigen::Index, 6> idx{};
    std::array<double, 6> val{};
    for (const auto& r : rows) {
      fill(r, m, z0, idx, val);
      const double y = curves_[r.curve].s[r.sample];
      for (int p = 0; p < 6; ++p) {
        rhs(idx[p]) += val[p] * y;
        for (int q = 0; q < 6; ++q) normal(idx[p], idx[q]) += val[p] * val[q];
      }
    }
    // Basis functions without data get a zero coefficient.
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(nb_); ++k) {
      if (normal(k, k) == 0.0) normal(k, k) = 1.0;
    }
    Linear out;
    out.beta = normal.ldlt().solve(rhs);
    out.n = rows.size();
    for (const auto& r : rows) {
      const double e = residual(r, m, z0, out.beta, idx, val);
      out.rss += e * e;
    }
    return out;
  }

  double rss(double m, double z0, std::span<const Row> rows) const { return solve(m, z0, rows).rss; }

  /// Residuals with the linear parameters re-solved at (m, z0).
  std::vector<double> residuals(double m, double z0, std::span<const Row> rows) const {
    return residuals(m, z0, rows, solve(m, z0, rows).beta);
  }
  std::vector<double> residuals(double m, double z0, std::span<const Row> rows, const Eigen::VectorXd& beta) const {
    std::vector<double> out;
    out.reserve(rows.size());
    std::array<Eigen::Index, 6> idx{};
    std::array<double, 6> val{};
    for (const auto& r : rows) out.push_back(residual(r, m, z0, beta, idx, val));
    return out;
  }

  /// Design row of the linear part: indices and values.
  void fill(const Row& r, double m, double z0, std::array<Eigen::Index, 6>& idx, std::array<double, 6>& val) const {
    const double a = separation(r, m, z0);
    const auto [cell, w] = basis(a);
    const double v = curves_[r.curve].voltage_mv;
    const double xa = x_at(a);
    for (int p = 0; p < 4; ++p) {
      idx[p] = static_cast<Eigen::Index>(cell) + p;
      val[p] = w[p];
    }
    idx[4] = static_cast<Eigen::Index>(nb_);
    val[4] = xa * v * v;
    idx[5] = static_cast<Eigen::Index>(nb_ + 1);
    val[5] = xa * v;
  }

 private:
  // Knot spacing in ln a; the spline represents a^-3 to about 1e-7.
  static constexpr double kKnotStep = 0.025;
  // Room for the separations to move while (m, z0) are searched.
  static constexpr double kDomainPad = 20.0;

  double residual(const Row& r, double m, double z0, const Eigen::VectorXd& beta, std::array<Eigen::Index, 6>& idx,
                  std::array<double, 6>& val) const {
    fill(r, m, z0, idx, val);
    double model = 0.0;
    for (int p = 0; p < 6; ++p) model += val[p] * beta(idx[p]);
    return curves_[r.curve].s[r.sample] - model;
  }

  std::vector<PreparedCurve> curves_;
  const PolynomialX& x_;
  CalibrationOptions opts_;
  double a_lo_ = 0.0, a_hi_ = 0.0, u0_ = 0.0, du_ = 0.0;
  std::size_t cells_ = 0, nb_ = 0;
};

// Resamples one curve onto the grid by a local straight-line fit over
// +-half a grid step. NaN where the curve does not cover a grid point.
std::vector<double> resample_linear(std::span<const double> a, std::span<const double> values,
                                    std::span<const double> grid, double half_window) {
  std::vector<Sample> buf;
  buf.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) buf.push_back({a[k], values[k]});
  std::sort(buf.begin(), buf.end(), [](const Sample& p, const Sample& q) { return p.a < q.a; });
  std::vector<double> out(grid.size(), std::nan(""));
  if (buf.size() < 2) return out;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid[j] - half_window < buf.front().a || grid[j] + half_window > buf.back().a) continue;
    if (auto v = local_fit(buf, grid[j], half_window)) out[j] = *v;
  }
  return out;
}

}  // namespace

void CalibrationParams::validate() const {
  if (!(m_nm_per_v.value > 0.0)) throw std::invalid_argument("calibration: m must be positive");
  if (!(z0_nm.value > 0.0)) throw std::invalid_argument("calibration: z0 must be positive");
  if (!(k_tilde_nn_per_v.value > 0.0)) throw std::invalid_argument("calibration: k~ must be positive");
  for (const auto* e : {&v0_mv, &m_nm_per_v, &z0_nm, &k_tilde_nn_per_v}) {
    if (!(e->half_width >= 0.0)) throw std::invalid_argument("calibration: half-widths must be >= 0");
  }
}

void ForceDistanceCurve::validate() const {
  if (z_piezo_nm.size() != s_def_v.size()) throw DataError("force-distance curve: column length mismatch");
  if (z_piezo_nm.size() < 2) throw DataError("force-distance curve: fewer than 2 samples");
  for (std::size_t i = 0; i < z_piezo_nm.size(); ++i) {
    if (!std::isfinite(z_piezo_nm[i]) || !std::isfinite(s_def_v[i])) {
      throw DataError("force-distance curve: non-finite sample");
    }
    if (i > 0 && !(z_piezo_nm[i] > z_piezo_nm[i - 1])) {
      throw DataError("force-distance curve: z_piezo must be ascending");
    }
  }
}

ForceDistanceCurve ForceDistanceCurve::load_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, {"z_piezo_nm", "s_def_v"});
  ForceDistanceCurve c;
  const auto v = t.metadata.find("voltage_mv");
  if (v == t.metadata.end()) throw DataError(path.string() + ": missing '# voltage_mv=' header line");
  try {
    c.voltage_mv = std::stod(v->second);
    if (const auto r = t.metadata.find("repetition"); r != t.metadata.end()) c.repetition = std::stoi(r->second);
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed voltage_mv/repetition metadata");
  }
  c.z_piezo_nm = t.values("z_piezo_nm");
  c.s_def_v = t.values("s_def_v");
  try {
    c.validate();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return c;
}

void ForceDistanceCurve::save_csv(const std::filesystem::path& path) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(z_piezo_nm.size());
  for (std::size_t i = 0; i < z_piezo_nm.size(); ++i) rows.push_back({z_piezo_nm[i], s_def_v[i]});
  csv::write(path, {"z_piezo_nm", "s_def_v"}, rows,
             {{"repetition", std::to_string(repetition)}, {"voltage_mv", csv::format_number(voltage_mv)}});
}

double reconstruct_separation(double z_piezo_nm, double s_def_v, const CalibrationParams& calib) {
  return calib.z0_nm.value + z_piezo_nm + calib.m_nm_per_v.value * s_def_v;
}

double electrostatic_force(double a_nm, double v_mv, const CalibrationParams& calib, const PolynomialX& x) {
  const double dv = v_mv - calib.v0_mv.value;
  return x(a_nm) * dv * dv;
}

CalibrationResult fit_calibration(std::span<const ForceDistanceCurve> curves, const PolynomialX& x,
                                  const CalibrationOptions& opts) {
  std::set<double> volts;
  for (const auto& c : curves) volts.insert(c.voltage_mv);
  if (volts.size() < 3) {
    throw DataError(fmt::format("calibration needs at least 3 distinct voltages, got {}", volts.size()));
  }
  if (!(opts.m_max > opts.m_min) || !(opts.z0_max > opts.z0_min)) {
    throw ConfigError("calibration: search brackets need min < max");
  }
  const CalibrationProblem prob(prepare(curves, opts.drift_nm_per_repetition), x, opts);
  using Rows = std::vector<CalibrationProblem::Row>;
  const std::size_t nb = prob.basis_size();
  const auto enough = [&](const Rows& rows) { return rows.size() > 4 * (nb + 4); };

  // Stage 1: coarse scan on thinned data, coverage taken at each trial point.
  std::size_t total = 0;
  for (const auto& c : prob.curves()) total += c.z.size();
  const std::size_t stride = std::max<std::size_t>(1, total / 4000);
  constexpr int kScan = 9;
  double m = opts.m_min, z0 = opts.z0_min, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    for (int j = 0; j < kScan; ++j) {
      const double mi = opts.m_min + (opts.m_max - opts.m_min) * i / (kScan - 1);
      const double zj = opts.z0_min + (opts.z0_max - opts.z0_min) * j / (kScan - 1);
      const auto rows = prob.select(mi, zj, stride);
      if (!enough(rows)) continue;
      if (const double v = prob.rss(mi, zj, rows) / static_cast<double>(rows.size()); v < best) {
        best = v, m = mi, z0 = zj;
      }
    }
  }
  if (!std::isfinite(best)) throw DataError("calibration: too few samples in the calibration range");

  // Stage 2: Levenberg-Marquardt in (m, z0) with the linear parameters
  // projected out. The sample set is fixed during a run and refreshed after it.
  auto levenberg_marquardt = [&](const Rows& rows) {
    double lambda = 1e-3;
    auto r = prob.residuals(m, z0, rows);
    auto sq = [](const std::vector<double>& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); };
    double cost = sq(r);
    for (int it = 0; it < 100; ++it) {
      const double hm = 1e-6 * m, hz = 1e-6 * std::max(10.0, std::abs(z0));
      const auto mp = prob.residuals(m + hm, z0, rows), mm = prob.residuals(m - hm, z0, rows);
      const auto zp = prob.residuals(m, z0 + hz, rows), zm = prob.residuals(m, z0 - hz, rows);
      Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
      Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
      for (std::size_t k = 0; k < r.size(); ++k) {
        const Eigen::Vector2d g((mp[k] - mm[k]) / (2 * hm), (zp[k] - zm[k]) / (2 * hz));
        jtj += g * g.transpose();
        jtr += g * r[k];
      }
      bool accepted = false;
      for (int tries = 0; tries < 20 && !accepted; ++tries) {
        Eigen::Matrix2d a = jtj;
        a.diagonal() *= 1.0 + lambda;
        const Eigen::Vector2d step = -a.ldlt().solve(jtr);
        const double mn = std::clamp(m + step(0), opts.m_min, opts.m_max);
        const double zn = std::clamp(z0 + step(1), opts.z0_min, opts.z0_max);
        auto rn = prob.residuals(mn, zn, rows);
        const double cn = sq(rn);
        if (cn <= cost) {
          const bool done = cost - cn <= 1e-12 * cost || (std::abs(mn - m) <= 1e-9 * m && std::abs(zn - z0) <= 1e-9 * std::max(1.0, z0));
          m = mn, z0 = zn, r = std::move(rn), cost = cn;
          lambda = std::max(1e-9, lambda / 10.0);
          accepted = true;
          if (done) return true;
        } else {
          lambda *= 10.0;
        }
      }
      if (!accepted) return true;  // no downhill step left: at the minimum to working precision
    }
    return false;
  };

  // Separations move by a few nm while (m, z0) converge; the margin keeps
  // samples that drift across the range edges from flipping the sample set.
  Rows rows;
  bool converged = false;
  for (int pass = 0; pass < 8 && !converged; ++pass) {
    const std::size_t s = pass < 2 ? stride : 1;
    auto next = prob.select(m, z0, s);
    if (!enough(next)) throw DataError("calibration: too few samples in the calibration range");
    const bool same = s == 1 && next.size() == rows.size() &&
                      std::equal(next.begin(), next.end(), rows.begin(), [](const auto& p, const auto& q) {
                        return p.curve == q.curve && p.sample == q.sample;
                      });
    if (same) break;
    rows = std::move(next);
    converged = levenberg_marquardt(rows) && pass >= 2;
  }
  if (!converged) {
    const auto refreshed = prob.select(m, z0);
    if (refreshed.size() != rows.size()) {
      throw ConvergenceError("calibration: (m, z0) search did not settle on a sample set");
    }
  }

  // Covariance of all parameters (m, z0, spline, p, q) from the full Jacobian.
  const auto lin = prob.solve(m, z0, rows);
  const double hm = 1e-6 * m, hz = 1e-6 * std::max(10.0, std::abs(z0));
  const auto mp = prob.residuals(m + hm, z0, rows, lin.beta), mm = prob.residuals(m - hm, z0, rows, lin.beta);
  const auto zp = prob.residuals(m, z0 + hz, rows, lin.beta), zm = prob.residuals(m, z0 - hz, rows, lin.beta);
  const auto np = static_cast<Eigen::Index>(nb + 4);
  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(np, np);
  {
    std::array<Eigen::Index, 8> idx{};
    std::array<double, 8> val{};
    std::array<Eigen::Index, 6> li{};
    std::array<double, 6> lv{};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      prob.fill(rows[k], m, z0, li, lv);
      idx[0] = 0, val[0] = (mp[k] - mm[k]) / (2 * hm);
      idx[1] = 1, val[1] = (zp[k] - zm[k]) / (2 * hz);
      for (int p = 0; p < 6; ++p) idx[p + 2] = li[p] + 2, val[p + 2] = -lv[p];
      for (int p = 0; p < 8; ++p) {
        for (int q = 0; q < 8; ++q) jtj(idx[p], idx[q]) += val[p] * val[q];
      }
    }
  }
  for (Eigen::Index k = 2; k < np - 2; ++k) {
    if (jtj(k, k) == 0.0) jtj(k, k) = 1.0;
  }
  const double dof = static_cast<double>(rows.size()) - static_cast<double>(np);
  if (!(dof > 0.0)) throw DataError("calibration: too few samples for the model");
  const double sigma2 = lin.rss / dof;
  // Only the block of the four physical parameters is needed.
  const std::array<Eigen::Index, 4> keep{0, 1, np - 2, np - 1};
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(np, 4);
  for (int c = 0; c < 4; ++c) unit(keep[c], c) = 1.0;
  const Eigen::MatrixXd sol = jtj.ldlt().solve(unit);
  Eigen::Matrix4d cov;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) cov(r, c) = sigma2 * sol(keep[r], c);
  }
  if (!cov.allFinite()) throw ConvergenceError("calibration: singular Jacobian at the solution");

  const double p = lin.beta(static_cast<Eigen::Index>(nb)), qp = lin.beta(static_cast<Eigen::Index>(nb + 1));
  if (!(p > 0.0)) throw DataError("calibration: fitted curvature has the wrong sign");
  const double k_tilde = 1.0 / (kPnPerNn * p);
  const double v0 = -qp / (2.0 * p);
  const Eigen::Vector4d gk(0, 0, -1.0 / (kPnPerNn * p * p), 0);
  const Eigen::Vector4d gv(0, 0, qp / (2 * p * p), -1.0 / (2 * p));
  const double t = two_sided_quantile(0.95, dof);

  CalibrationResult out;
  out.params.v0_mv = {v0, t * std::sqrt(std::max(0.0, gv.dot(cov * gv)))};
  out.params.m_nm_per_v = {m, t * std::sqrt(std::max(0.0, cov(0, 0)))};
  out.params.z0_nm = {z0, t * std::sqrt(std::max(0.0, cov(1, 1)))};
  out.params.k_tilde_nn_per_v = {k_tilde, t * std::sqrt(std::max(0.0, gk.dot(cov * gk)))};
  out.points = rows.size();
  out.residual_rms_v = std::sqrt(lin.rss / static_cast<double>(rows.size()));

  // Per-separation parabolas S = c0 + c1 V + c2 V^2 on the resampled signals,
  // with the residual variance pooled over all separations, then a weighted
  // straight line through the vertices.
  const auto grid = make_grid(opts.a_min_nm, opts.a_max_nm, opts.grid_step_nm);
  const auto& pc = prob.curves();
  struct Trend {
    std::vector<SeparationVertex> vertices;
    double slope = 0.0;
    double sigma = 0.0;
    bool valid = false;
  };
  auto trend = [&](double m_, double z0_) {
    std::vector<std::vector<double>> on_grid;
    for (const auto& c : pc) {
      std::vector<double> a(c.z.size());
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = z0_ + c.z[k] + m_ * c.s[k];
      on_grid.push_back(resample_linear(a, c.s, grid, 0.5 * opts.grid_step_nm));
    }
    struct Parabola {
      double a;
      Eigen::Vector3d c;
      Eigen::Matrix3d inv;
    };
    std::vector<Parabola> fits;
    double pooled_rss = 0.0, pooled_dof = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      std::vector<double> y, v;
      for (std::size_t i = 0; i < pc.size(); ++i) {
        if (!std::isnan(on_grid[i][j])) y.push_back(on_grid[i][j]), v.push_back(pc[i].voltage_mv);
      }
      if (std::set<double>(v.begin(), v.end()).size() < 4) continue;
      Eigen::MatrixXd d(static_cast<Eigen::Index>(y.size()), 3);
      for (std::size_t k = 0; k < y.size(); ++k) d.row(static_cast<Eigen::Index>(k)) << 1.0, v[k], v[k] * v[k];
      const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
      const Eigen::Matrix3d dtd = d.transpose() * d;
      const Eigen::Vector3d c = dtd.ldlt().solve(d.transpose() * yv);
      pooled_rss += (yv - d * c).squaredNorm();
      pooled_dof += static_cast<double>(y.size()) - 3.0;
      fits.push_back({grid[j], c, dtd.inverse()});
    }
    Trend t;
    const double s2 = pooled_dof > 0 ? pooled_rss / pooled_dof : 0.0;
    for (const auto& f : fits) {
      if (!(std::abs(f.c(2)) > 0.0)) continue;
      const Eigen::Vector3d g(0, -1.0 / (2 * f.c(2)), f.c(1) / (2 * f.c(2) * f.c(2)));
      const double sj = std::sqrt(std::max(0.0, s2 * g.dot(f.inv * g)));
      t.vertices.push_back({f.a, -f.c(1) / (2 * f.c(2)), sj, f.c(2)});
    }
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& v : t.vertices) {
      if (!(v.v0_sigma_mv > 0.0)) continue;
      const double w = 1.0 / (v.v0_sigma_mv * v.v0_sigma_mv);
      sw += w, sx += w * v.a_nm, sy += w * v.v0_mv, sxx += w * v.a_nm * v.a_nm, sxy += w * v.a_nm * v.v0_mv;
    }
    const double det = sw * sxx - sx * sx;
    if (t.vertices.size() >= 3 && det > 0.0) {
      t.slope = (sw * sxy - sx * sy) / det;
      t.sigma = std::sqrt(sw / det);
      // Scale by the observed scatter about the line when it exceeds the
      // propagated vertex errors.
      double chi2 = 0.0;
      for (const auto& v : t.vertices) {
        if (!(v.v0_sigma_mv > 0.0)) continue;
        const double r = (v.v0_mv - (sy - t.slope * sx) / sw - t.slope * v.a_nm) / v.v0_sigma_mv;
        chi2 += r * r;
      }
      t.sigma *= std::sqrt(std::max(1.0, chi2 / (static_cast<double>(t.vertices.size()) - 2.0)));
      t.valid = true;
    }
    return t;
  };

  auto fitted = trend(m, z0);
  out.vertices = std::move(fitted.vertices);
  if (fitted.valid) {
    // Errors in (m, z0) shift every vertex coherently; add their share of the
    // slope variance, differencing over one standard deviation.
    const double sm = std::sqrt(std::max(cov(0, 0), 0.0)), sz = std::sqrt(std::max(cov(1, 1), 0.0));
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    if (sm > 0.0) g(0) = (trend(m + sm, z0).slope - trend(m - sm, z0).slope) / (2 * sm);
    if (sz > 0.0) g(1) = (trend(m, z0 + sz).slope - trend(m, z0 - sz).slope) / (2 * sz);
    const double shared = g.dot(cov.topLeftCorner<2, 2>() * g);
    out.v0_slope_mv_per_nm = fitted.slope;
    out.v0_slope_sigma = std::sqrt(fitted.sigma * fitted.sigma + std::max(0.0, shared));
    const double crit = two_sided_quantile(opts.trend_confidence, static_cast<double>(out.vertices.size()) - 2.0);
    out.v0_trend = std::abs(out.v0_slope_mv_per_nm) > crit * out.v0_slope_sigma;
  }
  if (opts.check_v0_trend && out.v0_trend) {
    throw V0TrendError(fmt::format(
        "residual potential depends on separation: slope {:.4g} +- {:.2g} mV/nm (anomalous electrostatics)",
        out.v0_slope_mv_per_nm, out.v0_slope_sigma));
  }
  return out;
}

ExtractionResult extract_casimir(std::span<const ForceDistanceCurve> curves, const CalibrationParams& calib,
                                 const PolynomialX& x, const ExtractionOptions& opts) {
  calib.validate();
  const auto grid = make_grid(opts.a_min_nm, opts.a_max_nm, opts.grid_step_nm);
  const double half = 0.5 * opts.grid_step_nm;
  const double kt = calib.k_tilde_nn_per_v.value * kPnPerNn;
  std::vector<std::vector<double>> per_grid(grid.size()), volts(grid.size());
  std::vector<Sample> buf;
  for (const auto& c : curves) {
    c.validate();
    const auto z = effective_z(c, opts.drift_nm_per_repetition);
    buf.clear();
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double a = calib.z0_nm.value + z[k] + calib.m_nm_per_v.value * c.s_def_v[k];
      if (!x.in_range(a)) continue;
      buf.push_back({a, kt * c.s_def_v[k] - electrostatic_force(a, c.voltage_mv, calib, x)});
    }
    if (buf.size() < 2) continue;
    std::sort(buf.begin(), buf.end(), [](const Sample& p, const Sample& q) { return p.a < q.a; });
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (grid[j] - half < buf.front().a || grid[j] + half > buf.back().a) continue;
      if (auto v = local_fit(buf, grid[j], half)) {
        per_grid[j].push_back(*v);
        volts[j].push_back(c.voltage_mv);
      }
    }
  }
  ExtractionResult out;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (per_grid[j].size() < opts.min_samples) continue;
    out.a_nm.push_back(grid[j]);
    out.mean_pn.push_back(std::accumulate(per_grid[j].begin(), per_grid[j].end(), 0.0) /
                          static_cast<double>(per_grid[j].size()));
    out.samples.push_back(std::move(per_grid[j]));
    out.voltages.push_back(std::move(volts[j]));
  }
  if (out.a_nm.empty()) {
    throw DataError(fmt::format("no separation in [{}, {}] nm is covered by {} or more curves", opts.a_min_nm,
                                opts.a_max_nm, opts.min_samples));
  }
  return out;
}

ErrorBudget error_budget(const ExtractionResult& samples, const CalibrationParams& calib, const PolynomialX& x,
                         const ErrorBudgetOptions& opts) {
  ErrorBudget out;
  const double dk_rel = calib.k_tilde_nn_per_v.half_width / calib.k_tilde_nn_per_v.value;
  const double dz0 = calib.z0_nm.half_width;
  const double dv0 = calib.v0_mv.half_width;
  out.separation_error_nm = dz0;
  for (std::size_t j = 0; j < samples.a_nm.size(); ++j) {
    const auto& s = samples.samples[j];
    if (s.size() < 2) throw DataError("error budget needs at least 2 samples per separation");
    const double n = static_cast<double>(s.size());
    const double mean = samples.mean_pn[j];
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    const double random = student_t_975(n - 1.0) * std::sqrt(var / n);

    // Calibration and electric-force errors depend on the applied voltage;
    // use their means over the distinct voltages at this separation.
    const double a = samples.a_nm[j];
    const double xa = x(a), dxa = x.derivative(a);
    std::set<double> distinct(samples.voltages[j].begin(), samples.voltages[j].end());
    double cal = 0.0, el = 0.0;
    for (double v : distinct) {
      const double dv = v - calib.v0_mv.value;
      const double f_el = xa * dv * dv;
      cal += dk_rel * std::abs(mean + f_el);
      el += std::hypot(dxa * dz0 * dv * dv, 2.0 * xa * dv * dv0);
    }
    cal /= static_cast<double>(distinct.size());
    el /= static_cast<double>(distinct.size());
    const double systematic = std::sqrt(opts.noise_floor_pn * opts.noise_floor_pn + cal * cal + el * el);
    out.a_nm.push_back(a);
    out.random_pn.push_back(random);
    out.systematic_pn.push_back(systematic);
    out.total_pn.push_back(std::hypot(random, systematic));
  }
  return out;
}

GaussianStats gaussian_stats(std::span<const double> samples, double bin_width) {
  if (samples.size() < 30) throw std::invalid_argument("gaussian_stats needs at least 30 samples");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  GaussianStats g;
  g.count = samples.size();
  const double n = static_cast<double>(samples.size());
  g.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double v : samples) var += (v - g.mean) * (v - g.mean);
  g.sigma = std::sqrt(var / (n - 1.0));
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double start = std::floor(*lo_it / bin_width) * bin_width;
  const auto nbins = static_cast<std::size_t>(std::floor((*hi_it - start) / bin_width)) + 1;
  std::vector<double> counts(nbins, 0.0);
  for (double v : samples) {
    const auto b = std::min(nbins - 1, static_cast<std::size_t>(std::floor((v - start) / bin_width)));
    counts[b] += 1.0;
  }
  for (std::size_t b = 0; b < nbins; ++b) {
    const double lo = start + bin_width * static_cast<double>(b);
    g.histogram.push_back({lo, lo + bin_width, counts[b] / n});
  }
  return g;
}

bool distributions_overlap(const GaussianStats& a, const GaussianStats& b) {
  constexpr double k95 = 1.959963984540054;
  const double a_lo = a.mean - k95 * a.sigma, a_hi = a.mean + k95 * a.sigma;
  const double b_lo = b.mean - k95 * b.sigma, b_hi = b.mean + k95 * b.sigma;
  return a_lo <= b_hi && b_lo <= a_hi;
}

std::vector<ForceDistanceCurve> synthesize_curves(const SynthesisSpec& spec,
                                                  const std::function<double(double)>& casimir_pn,
                                                  const PolynomialX& x) {
  spec.truth.validate();
  if (spec.voltages_mv.empty() || spec.repetitions < 1) throw std::invalid_argument("synthesis needs voltages and repetitions");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double kt = spec.truth.k_tilde_nn_per_v.value * kPnPerNn;
  const double m = spec.truth.m_nm_per_v.value;
  const double z0 = spec.truth.z0_nm.value;
  const auto nz = static_cast<std::size_t>(std::floor((spec.z_end_nm - spec.z_start_nm) / spec.z_step_nm + 1e-9)) + 1;

  std::vector<ForceDistanceCurve> out;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    for (double v : spec.voltages_mv) {
      auto total = [&](double a) {
        const double v0 = spec.truth.v0_mv.value + spec.v0_slope_mv_per_nm * (a - 100.0);
        const double dv = v - v0;
        return casimir_pn(a) + x(a) * dv * dv;
      };
      ForceDistanceCurve c;
      c.voltage_mv = v;
      c.repetition = rep;
      // Approach from the far end; stop at the jump to contact.
      std::vector<double> zs, ss;
      double s = 0.0;
      for (std::size_t k = nz; k-- > 0;) {
        const double z = spec.z_start_nm + spec.z_step_nm * static_cast<double>(k);
        const double base = z0 + z + spec.drift_nm_per_repetition * rep;
        bool ok = false;
        for (int it = 0; it < 60; ++it) {
          const double a = base + m * s;
          if (!x.in_range(a) || !x.in_range(a - 1e-3) || !x.in_range(a + 1e-3)) break;
          const double f = total(a);
          const double df = (total(a + 1e-3) - total(a - 1e-3)) / 2e-3;
          const double g = kt * s - f;
          const double dg = kt - m * df;
          if (!(dg > 0.0)) break;
          const double step = g / dg;
          s -= step;
          if (std::abs(step) <= 1e-12) {
            ok = true;
            break;
          }
        }
        if (!ok) break;
        zs.push_back(z);
        ss.push_back(s);
      }
      std::reverse(zs.begin(), zs.end());
      std::reverse(ss.begin(), ss.end());
      for (double& val : ss) val += spec.noise_sigma_v * noise(rng);
      c.z_piezo_nm = std::move(zs);
      c.s_def_v = std::move(ss);
      if (c.z_piezo_nm.size() >= 2) out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<double> default_voltages(double v0_mv) {
  static constexpr double kOffsets[] = {-68.2, -58.2, -48.2, -43.2, -33.2, -23.2, -3.2, 16.8, 36.8, 61.8};
  std::vector<double> out;
  for (double o : kOffsets) out.push_back(v0_mv + o);
  return out;
}

}  // namespace casimir
