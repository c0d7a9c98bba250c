#pragma once

// Random objects for property tests. Distributional logic lives here, in
// the tests, so library behavior is checked against an independent
// construction rather than against itself.

#include <cmath>

#include <Eigen/Dense>

#include "uwqsim/channel.hpp"
#include "uwqsim/qstate.hpp"
#include "uwqsim/rng.hpp"

namespace testsupport {

inline double gaussian(uwq::Rng& rng) {
  const double u1 = std::max(rng.uniform(), 1e-300);
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Uniform over the solid Bloch ball.
inline uwq::BlochVector random_bloch_in_ball(uwq::Rng& rng) {
  const double x = gaussian(rng);
  const double y = gaussian(rng);
  const double z = gaussian(rng);
  const double n = std::sqrt(x * x + y * y + z * z);
  if (n < 1e-12) return {0.0, 0.0, 0.0};
  const double r = std::cbrt(rng.uniform());
  return {r * x / n, r * y / n, r * z / n};
}

inline uwq::DensityMatrix random_density(uwq::Rng& rng) {
  return uwq::density_from_bloch(random_bloch_in_ball(rng));
}

inline uwq::QubitState random_pure(uwq::Rng& rng) {
  const uwq::Complex a(gaussian(rng), gaussian(rng));
  const uwq::Complex b(gaussian(rng), gaussian(rng));
  const double n = std::sqrt(std::norm(a) + std::norm(b));
  return uwq::QubitState(a / n, b / n);
}

/// Random CPTP channel as `k` Kraus operators: the rows of a Haar-ish
/// random isometry from C^2 into C^(2k), obtained by QR of a complex
/// Gaussian matrix. Completeness holds by construction.
inline uwq::KrausSet random_kraus_set(uwq::Rng& rng, int k) {
  Eigen::MatrixXcd g(2 * k, 2);
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < 2; ++c)
      g(r, c) = uwq::Complex(gaussian(rng), gaussian(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  const Eigen::MatrixXcd q =
      qr.householderQ() * Eigen::MatrixXcd::Identity(2 * k, 2);
  uwq::KrausSet ks;
  for (int i = 0; i < k; ++i) ks.operators.push_back(q.block<2, 2>(2 * i, 0));
  return ks;
}

inline uwq::ProcessMatrix random_cptp_chi(uwq::Rng& rng, int k) {
  return uwq::chi_from_kraus(random_kraus_set(rng, k));
}

}  // namespace testsupport
