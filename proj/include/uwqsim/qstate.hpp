#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <string_view>

#include "uwqsim/errors.hpp"

namespace uwq {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr double kNormTol = 1e-12;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kEigenFloor = -1e-9;

/// The six polarization states prepared at the sending terminal.
enum class StateLabel { H, V, D, A, R, L };

inline const char* to_string(StateLabel s) {
  switch (s) {
    case StateLabel::H: return "H";
    case StateLabel::V: return "V";
    case StateLabel::D: return "D";
    case StateLabel::A: return "A";
    case StateLabel::R: return "R";
    case StateLabel::L: return "L";
  }
  return "?";
}

inline StateLabel parse_state_label(std::string_view s) {
  if (s.size() == 1) {
    switch (s[0]) {
      case 'H': return StateLabel::H;
      case 'V': return StateLabel::V;
      case 'D': return StateLabel::D;
      case 'A': return StateLabel::A;
      case 'R': return StateLabel::R;
      case 'L': return StateLabel::L;
      default: break;
    }
  }
  throw InvalidInput("unknown state label '" + std::string(s) +
                     "' (expected one of H, V, D, A, R, L)");
}

inline constexpr std::array<StateLabel, 6> kAllStates = {
    StateLabel::H, StateLabel::V, StateLabel::D,
    StateLabel::A, StateLabel::R, StateLabel::L};

/// Pure polarization qubit, amplitudes over the |H>,|V> basis.
class QubitState {
 public:
  QubitState(Complex amp_h, Complex amp_v) : amp_(amp_h, amp_v) {
    const double n = std::norm(amp_h) + std::norm(amp_v);
    if (std::abs(n - 1.0) > kNormTol)
      throw InvalidInput("qubit state is not normalized: |h|^2+|v|^2 = " +
                         std::to_string(n));
  }

  Complex amp_h() const { return amp_(0); }
  Complex amp_v() const { return amp_(1); }
  const Vec2& vector() const { return amp_; }

 private:
  Vec2 amp_;
};

inline QubitState universal_state(StateLabel label) {
  const double s = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  switch (label) {
    case StateLabel::H: return {1.0, 0.0};
    case StateLabel::V: return {0.0, 1.0};
    case StateLabel::D: return {s, s};
    case StateLabel::A: return {s, -s};
    case StateLabel::R: return {s, i * s};
    case StateLabel::L: return {s, -i * s};
  }
  throw InvalidInput("unknown state label");
}

/// Pauli operators; index 0 is the identity. This ordering (I, X, Y, Z) is
/// the operator basis used for all process matrices and serializations.
inline const Mat2& pauli(int index) {
  static const std::array<Mat2, 4> ops = [] {
    std::array<Mat2, 4> p;
    const Complex i(0.0, 1.0);
    p[0] << 1, 0, 0, 1;
    p[1] << 0, 1, 1, 0;
    p[2] << 0, -i, i, 0;
    p[3] << 1, 0, 0, -1;
    return p;
  }();
  if (index < 0 || index > 3)
    throw InvalidInput("pauli index out of range: " + std::to_string(index));
  return ops[static_cast<std::size_t>(index)];
}

inline const char* pauli_name(int index) {
  static constexpr std::array<const char*, 4> names = {"I", "X", "Y", "Z"};
  if (index < 0 || index > 3)
    throw InvalidInput("pauli index out of range: " + std::to_string(index));
  return names[static_cast<std::size_t>(index)];
}

/// Cartesian coordinates on/inside the Bloch sphere.
///
/// Convention used throughout: |H> -> +z, |D> -> +x, |R> -> +y.
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

/// 2x2 Hermitian, unit-trace, positive-semidefinite operator.
///
/// The constructor validates all three invariants (Hermitian to 1e-12
/// elementwise, trace 1 to 1e-9, eigenvalues >= -1e-9) and stores the
/// exactly-Hermitian part so downstream eigendecompositions are clean.
class DensityMatrix {
 public:
  explicit DensityMatrix(const Mat2& m) {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
      throw InvalidInput("density matrix is not Hermitian within 1e-12");
    if (std::abs(m.trace().real() - 1.0) > kTraceTol ||
        std::abs(m.trace().imag()) > kTraceTol)
      throw InvalidInput("density matrix trace differs from 1 beyond 1e-9");
    m_ = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Mat2> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kEigenFloor)
      throw InvalidInput("density matrix has eigenvalue below -1e-9: " +
                         std::to_string(es.eigenvalues().minCoeff()));
  }

  const Mat2& matrix() const { return m_; }

  static DensityMatrix maximally_mixed() {
    return DensityMatrix(0.5 * Mat2::Identity());
  }

 private:
  Mat2 m_;
};

inline DensityMatrix density_of(const QubitState& psi) {
  return DensityMatrix(psi.vector() * psi.vector().adjoint());
}

inline DensityMatrix density_from_bloch(const BlochVector& r) {
  if (r.norm() > 1.0 + 1e-9)
    throw InvalidInput("Bloch vector has norm > 1: " + std::to_string(r.norm()));
  Mat2 m = 0.5 * (pauli(0) + r.x * pauli(1) + r.y * pauli(2) + r.z * pauli(3));
  return DensityMatrix(m);
}

inline BlochVector bloch_of(const DensityMatrix& rho) {
  BlochVector r;
  r.x = (rho.matrix() * pauli(1)).trace().real();
  r.y = (rho.matrix() * pauli(2)).trace().real();
  r.z = (rho.matrix() * pauli(3)).trace().real();
  return r;
}

inline double purity(const DensityMatrix& rho) {
  return (rho.matrix() * rho.matrix()).trace().real();
}

namespace detail {

/// Hermitian square root via eigendecomposition. Eigenvalues in [-floor, 0)
/// are clamped to 0 so reconstruction round-off does not turn into NaNs;
/// anything below the floor is rejected by the callers' type invariants.
template <typename Matrix>
Matrix sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  auto evals = es.eigenvalues();
  Matrix d = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < evals.size(); ++k)
    d(k, k) = std::sqrt(std::max(0.0, evals(k)));
  return es.eigenvectors() * d * es.eigenvectors().adjoint();
}

/// tr sqrt(sqrt(a) b sqrt(a)) for Hermitian PSD a, b — shared by the state
/// and process fidelities, which the analysis applies in the same form.
template <typename Matrix>
double uhlmann_fidelity(const Matrix& a, const Matrix& b) {
  const Matrix sa = sqrt_psd(a);
  Matrix inner = sa * b * sa;
  inner = 0.5 * (inner + inner.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Matrix> es(inner, Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    f += std::sqrt(std::max(0.0, es.eigenvalues()(k)));
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace detail

/// Fidelity between the sent and received states, square-root (Uhlmann)
/// convention: tr sqrt(sqrt(rho_received) rho_sent sqrt(rho_received)).
/// Reports elsewhere also carry its square, since both conventions are in
/// common use.
inline double state_fidelity(const DensityMatrix& sent,
                             const DensityMatrix& received) {
  return detail::uhlmann_fidelity(received.matrix(), sent.matrix());
}

/// Half the trace norm of the difference; standard distinguishability metric.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Mat2 d = a.matrix() - b.matrix();
  Eigen::SelfAdjointEigenSolver<Mat2> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace uwq
