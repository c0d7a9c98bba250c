#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "uwqsim/errors.hpp"
#include "uwqsim/photonics.hpp"

namespace uwq {

/// One analyzer setting of a polarization-correlation scan. `value` is
/// either a raw count or a normalized probability; the fit does not care
/// which as long as the whole scan is consistent.
struct ScanPoint {
  double angle_rad = 0.0;
  double value = 0.0;
};

/// Correlation scan: counts (or normalized counts) versus analyzer angle.
struct CorrelationScan {
  std::vector<ScanPoint> points;
};

inline void validate(const CorrelationScan& scan) {
  if (scan.points.size() < 6)
    throw InvalidInput("correlation scan needs at least 6 points");
  std::vector<double> angles;
  double lo = scan.points.front().angle_rad;
  double hi = lo;
  for (const ScanPoint& p : scan.points) {
    if (p.value < 0.0) throw InvalidInput("scan values must be >= 0");
    if (!std::isfinite(p.angle_rad) || !std::isfinite(p.value))
      throw InvalidInput("scan entries must be finite");
    lo = std::min(lo, p.angle_rad);
    hi = std::max(hi, p.angle_rad);
    bool seen = false;
    for (double a : angles)
      if (std::abs(a - p.angle_rad) < 1e-12) seen = true;
    if (!seen) angles.push_back(p.angle_rad);
  }
  if (angles.size() < 6)
    throw InvalidInput("correlation scan needs at least 6 distinct angles");
  if (hi - lo < M_PI - 1e-9)
    throw InvalidInput("scan angles must span at least half a turn");
}

/// Pick one detector port out of a set of analyzer CountRecords.
inline CorrelationScan scan_from_records(const std::vector<CountRecord>& recs,
                                         bool transmitted_port) {
  CorrelationScan scan;
  scan.points.reserve(recs.size());
  for (const CountRecord& r : recs) {
    validate(r);
    scan.points.push_back(
        {r.setting_angle_rad,
         static_cast<double>(transmitted_port ? r.counts_t : r.counts_r)});
  }
  return scan;
}

/// Result of fitting C(theta) = amplitude * cos(2 (theta - phase)) + offset.
/// `covariance` is of the linearized parameters (a, b, offset) with
/// a = amplitude cos(2 phase), b = amplitude sin(2 phase).
struct SinusoidFit {
  double amplitude = 0.0;
  double offset = 0.0;
  double phase_rad = 0.0;   // folded into [0, pi)
  double visibility = 0.0;  // amplitude / offset, clamped to [0, 1]
  double rms_residual = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

/// Least-squares Malus fit. The frequency is fixed at 2 theta: a projective
/// polarization analyzer cannot produce anything else, so it is not a free
/// parameter. Linearizes as a cos(2t) + b sin(2t) + offset. With
/// `poisson_weighted` each point is weighted by 1/max(value, 1).
inline SinusoidFit fit_malus(const CorrelationScan& scan,
                             bool poisson_weighted = false) {
  validate(scan);
  const auto n = static_cast<Eigen::Index>(scan.points.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ScanPoint& p = scan.points[static_cast<size_t>(i)];
    design(i, 0) = std::cos(2.0 * p.angle_rad);
    design(i, 1) = std::sin(2.0 * p.angle_rad);
    design(i, 2) = 1.0;
    y[i] = p.value;
    if (poisson_weighted) w[i] = 1.0 / std::max(p.value, 1.0);
  }

  const Eigen::VectorXd sqrt_w = w.cwiseSqrt();
  const Eigen::MatrixXd xw = sqrt_w.asDiagonal() * design;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      xw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()[2] < 1e-9 * svd.singularValues()[0])
    throw InvalidInput(
        "degenerate scan design: analyzer angles coincide modulo pi/2");
  const Eigen::Vector3d beta = svd.solve((sqrt_w.asDiagonal() * y).eval());

  SinusoidFit fit;
  fit.amplitude = std::hypot(beta[0], beta[1]);
  fit.offset = beta[2];
  fit.phase_rad = 0.5 * std::atan2(beta[1], beta[0]);
  if (fit.phase_rad < 0.0) fit.phase_rad += M_PI;
  if (fit.phase_rad >= M_PI) fit.phase_rad -= M_PI;

  const Eigen::VectorXd resid = y - design * beta;
  fit.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  const double dof = static_cast<double>(n) - 3.0;
  const double s2 =
      dof > 0.0 ? (sqrt_w.asDiagonal() * resid).squaredNorm() / dof : 0.0;
  const Eigen::Matrix3d xtwx = design.transpose() * w.asDiagonal() * design;
  fit.covariance = s2 * xtwx.inverse();

  if (fit.offset <= 0.0)
    throw InvalidInput("fitted offset is not positive; cannot define visibility");
  fit.visibility = std::clamp(fit.amplitude / fit.offset, 0.0, 1.0);
  return fit;
}

/// Classic contrast reduction (max - min) / (max + min), consistent with
/// amplitude/offset of the fitted sinusoid.
inline double visibility(double max_count, double min_count) {
  if (!(max_count >= min_count) || min_count < 0.0 || max_count <= 0.0)
    throw InvalidInput("visibility requires max >= min >= 0 and max > 0");
  return (max_count - min_count) / (max_count + min_count);
}

inline double average_visibility(const std::vector<double>& values) {
  if (values.empty())
    throw InvalidInput("cannot average an empty visibility list");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

inline double average_visibility(const std::vector<SinusoidFit>& fits) {
  std::vector<double> values;
  values.reserve(fits.size());
  for (const SinusoidFit& f : fits) values.push_back(f.visibility);
  return average_visibility(values);
}

}  // namespace uwq
