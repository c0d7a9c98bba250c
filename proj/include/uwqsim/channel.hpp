#pragma once

#include <cmath>
#include <vector>

#include "uwqsim/qstate.hpp"

namespace uwq {

inline constexpr double kChiHermitianTol = 1e-10;
inline constexpr double kTracePreservingTol = 1e-8;
inline constexpr double kKrausCompletenessTol = 1e-8;

namespace detail {

/// Coefficients of a 2x2 operator in the Pauli basis: K = sum_m c_m E_m,
/// c_m = tr(E_m K) / 2.
inline Eigen::Vector4cd pauli_coefficients(const Mat2& k) {
  Eigen::Vector4cd c;
  for (int m = 0; m < 4; ++m) c(m) = 0.5 * (pauli(m) * k).trace();
  return c;
}

/// sum_mn chi_mn E_n^dag E_m; equals the identity iff the channel preserves
/// trace.
inline Mat2 trace_preservation_operator(const Mat4& chi) {
  Mat2 acc = Mat2::Zero();
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      acc += chi(m, n) * (pauli(n).adjoint() * pauli(m));
  return acc;
}

}  // namespace detail

/// Channel in the chi (process matrix) representation over the fixed
/// operator basis E0=I, E1=X, E2=Y, E3=Z:
///
///   eps(rho) = sum_mn E_m rho E_n^dag chi_mn
///
/// Invariants checked at construction: Hermitian (1e-10), positive
/// semidefinite (eigenvalue floor -1e-9), trace preserving (1e-8).
class ProcessMatrix {
 public:
  explicit ProcessMatrix(const Mat4& chi) {
    if ((chi - chi.adjoint()).cwiseAbs().maxCoeff() > kChiHermitianTol)
      throw InvalidInput("process matrix is not Hermitian within 1e-10");
    chi_ = 0.5 * (chi + chi.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Mat4> es(chi_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kEigenFloor)
      throw InvalidInput("process matrix has eigenvalue below -1e-9: " +
                         std::to_string(es.eigenvalues().minCoeff()));
    const Mat2 tp = detail::trace_preservation_operator(chi_);
    if ((tp - Mat2::Identity()).cwiseAbs().maxCoeff() > kTracePreservingTol)
      throw InvalidInput(
          "process matrix does not preserve trace within 1e-8");
  }

  const Mat4& chi() const { return chi_; }

  /// The identity process: a single unit entry at (0, 0).
  static ProcessMatrix ideal() {
    Mat4 chi = Mat4::Zero();
    chi(0, 0) = 1.0;
    return ProcessMatrix(chi);
  }

  /// eps(rho) = (1-w) rho + w I/2, i.e. diag(1-3w/4, w/4, w/4, w/4).
  static ProcessMatrix depolarizing(double weight) {
    if (weight < 0.0 || weight > 1.0)
      throw InvalidInput("depolarizing weight must be in [0, 1]");
    Mat4 chi = Mat4::Zero();
    chi(0, 0) = 1.0 - 0.75 * weight;
    chi(1, 1) = chi(2, 2) = chi(3, 3) = 0.25 * weight;
    return ProcessMatrix(chi);
  }

  static ProcessMatrix of_unitary(const Mat2& u);

 private:
  Mat4 chi_;
};

/// Operator-sum (Kraus) representation of a channel.
struct KrausSet {
  std::vector<Mat2> operators;
};

inline void validate_complete(const KrausSet& k) {
  if (k.operators.empty()) throw InvalidInput("empty Kraus set");
  Mat2 acc = Mat2::Zero();
  for (const Mat2& op : k.operators) acc += op.adjoint() * op;
  if ((acc - Mat2::Identity()).cwiseAbs().maxCoeff() > kKrausCompletenessTol)
    throw InvalidInput("Kraus set is not complete: sum K^dag K != I");
}

inline DensityMatrix apply_channel(const ProcessMatrix& chi,
                                   const DensityMatrix& rho) {
  Mat2 out = Mat2::Zero();
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      out += chi.chi()(m, n) * (pauli(m) * rho.matrix() * pauli(n).adjoint());
  return DensityMatrix(out);
}

/// chi_mn = sum_i c_im conj(c_in) where K_i = sum_m c_im E_m.
inline ProcessMatrix chi_from_kraus(const KrausSet& k) {
  validate_complete(k);
  Mat4 chi = Mat4::Zero();
  for (const Mat2& op : k.operators) {
    const Eigen::Vector4cd c = detail::pauli_coefficients(op);
    chi += c * c.adjoint();
  }
  return ProcessMatrix(chi);
}

/// Kraus operators from the eigendecomposition of chi; eigenvalues below
/// 1e-12 are dropped.
inline KrausSet kraus_from_chi(const ProcessMatrix& chi) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(chi.chi());
  KrausSet out;
  for (int k = 3; k >= 0; --k) {
    const double lambda = es.eigenvalues()(k);
    if (lambda < 1e-12) continue;
    const Eigen::Vector4cd v = std::sqrt(lambda) * es.eigenvectors().col(k);
    Mat2 op = Mat2::Zero();
    for (int m = 0; m < 4; ++m) op += v(m) * pauli(m);
    out.operators.push_back(op);
  }
  return out;
}

inline ProcessMatrix ProcessMatrix::of_unitary(const Mat2& u) {
  if ((u.adjoint() * u - Mat2::Identity()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidInput("matrix is not unitary");
  return chi_from_kraus({{u}});
}

/// chi of the composite channel second(first(rho)), via pairwise Kraus
/// products.
inline ProcessMatrix compose(const ProcessMatrix& second,
                             const ProcessMatrix& first) {
  const KrausSet a = kraus_from_chi(second);
  const KrausSet b = kraus_from_chi(first);
  KrausSet prod;
  for (const Mat2& ka : a.operators)
    for (const Mat2& kb : b.operators) prod.operators.push_back(ka * kb);
  return chi_from_kraus(prod);
}

// ---------------------------------------------------------------------------
// Waveplates (Jones calculus)

enum class WaveplateKind { Half, Quarter };

/// Waveplate with its fast axis at `angle_rad` from horizontal. The angle is
/// folded into [0, pi), the physical period of a waveplate orientation.
struct WaveplateSetting {
  WaveplateKind kind = WaveplateKind::Half;
  double angle_rad = 0.0;

  WaveplateSetting(WaveplateKind k, double angle) : kind(k) {
    const double pi = M_PI;
    angle_rad = std::fmod(angle, pi);
    if (angle_rad < 0.0) angle_rad += pi;
  }
};

/// Jones matrix of the waveplate (HWP retardance pi, QWP retardance pi/2).
///
/// Global phase convention: the first nonzero element in row-major order is
/// made real and non-negative, which keeps serialized matrices
/// deterministic. Under this convention HWP(pi/8) maps |H> to |D>, and
/// QWP(pi/4) maps |H> to |L>.
inline Mat2 waveplate_unitary(const WaveplateSetting& s) {
  const double theta = s.angle_rad;
  const double c = std::cos(theta), sn = std::sin(theta);
  Mat2 rot;
  rot << c, -sn, sn, c;
  const Complex retard =
      (s.kind == WaveplateKind::Half) ? Complex(-1.0, 0.0) : Complex(0.0, 1.0);
  Mat2 diag = Mat2::Zero();
  diag(0, 0) = 1.0;
  diag(1, 1) = retard;
  Mat2 u = rot * diag * rot.transpose();
  for (int r = 0; r < 2; ++r) {
    for (int col = 0; col < 2; ++col) {
      const Complex a = u(r, col);
      if (std::abs(a) > 1e-14) return u * (std::conj(a) / std::abs(a));
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Attenuation (Beer-Lambert)

/// Fraction of light surviving `length_m` of medium with attenuation
/// coefficient `alpha_per_m`: exp(-alpha * L).
inline double transmittance(double alpha_per_m, double length_m) {
  if (alpha_per_m < 0.0) throw InvalidInput("attenuation coefficient < 0");
  if (length_m < 0.0) throw InvalidInput("channel length < 0");
  return std::exp(-alpha_per_m * length_m);
}

inline double loss_db(double transmittance_fraction) {
  if (transmittance_fraction <= 0.0 || transmittance_fraction > 1.0)
    throw InvalidInput("transmittance must be in (0, 1]");
  return -10.0 * std::log10(transmittance_fraction);
}

inline double db_to_transmittance(double db) {
  return std::pow(10.0, -db / 10.0);
}

}  // namespace uwq
