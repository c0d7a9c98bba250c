#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uwqsim/channel.hpp"
#include "uwqsim/photonics.hpp"
#include "uwqsim/qstate.hpp"

namespace uwq {

/// Dual-port counts in the three Pauli bases for one unknown state.
struct TomographyDataset {
  CountRecord z;  // H/V
  CountRecord x;  // D/A
  CountRecord y;  // R/L
};

inline void validate(const TomographyDataset& d) {
  validate(d.z);
  validate(d.x);
  validate(d.y);
}

struct Expectations {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Pauli expectation from a dual-port record, 2 p_t - 1.
inline double expectation_from_counts(const CountRecord& rec) {
  return 2.0 * normalized_probability(rec) - 1.0;
}

inline Expectations expectations_from(const TomographyDataset& d) {
  return {expectation_from_counts(d.x), expectation_from_counts(d.y),
          expectation_from_counts(d.z)};
}

/// Direct inversion rho = (I + <X> X + <Y> Y + <Z> Z) / 2. The result can
/// leave the physical set when counts are noisy, so the raw matrix is
/// returned alongside its minimum eigenvalue.
struct LinearInversion {
  Mat2 rho;
  BlochVector bloch;
  double min_eigenvalue = 0.0;
  bool physical = false;
};

inline LinearInversion reconstruct_linear(const TomographyDataset& d) {
  validate(d);
  const Expectations e = expectations_from(d);
  LinearInversion out;
  out.bloch = {e.x, e.y, e.z};
  out.rho = 0.5 * (pauli(0) + e.x * pauli(1) + e.y * pauli(2) + e.z * pauli(3));
  Eigen::SelfAdjointEigenSolver<Mat2> es(out.rho);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.physical = out.min_eigenvalue >= 0.0;
  return out;
}

/// Mean log-likelihood of dual-port Pauli counts under `rho`, one binomial
/// term per basis. Per-setting fluxes enter the full Poisson likelihood
/// only through factors independent of rho, so maximizing this binomial
/// form is equivalent to maximizing the Poisson likelihood with the fluxes
/// profiled out.
inline double mean_log_likelihood(const TomographyDataset& d, const Mat2& rho) {
  validate(d);
  const CountRecord* recs[3] = {&d.z, &d.x, &d.y};
  const Basis bases[3] = {Basis::Z, Basis::X, Basis::Y};
  double total = 0.0;
  for (const CountRecord* r : recs)
    total += static_cast<double>(r->counts_t + r->counts_r);
  if (total <= 0.0) throw InvalidInput("dataset has zero total counts");
  double ll = 0.0;
  for (int b = 0; b < 3; ++b) {
    const Mat2 proj = Measurement::pauli_basis(bases[b]).projector_plus();
    double p = (proj * rho).trace().real();
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    ll += static_cast<double>(recs[b]->counts_t) / total * std::log(p) +
          static_cast<double>(recs[b]->counts_r) / total * std::log(1.0 - p);
  }
  return ll;
}

struct MleOptions {
  int max_iterations = 10000;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-12;
};

struct MleResult {
  DensityMatrix rho;
  int iterations = 0;
  double gradient_norm = 0.0;
  double mean_log_likelihood = 0.0;
};

/// Thrown when the likelihood optimizer hits its iteration cap; carries the
/// best physical iterate found so callers can still inspect it.
class TomographyNonconvergence : public Error {
 public:
  TomographyNonconvergence(std::string msg, DensityMatrix best, int iterations,
                           double gradient_norm)
      : Error(std::move(msg)),
        best_iterate_(std::move(best)),
        iterations_(iterations),
        gradient_norm_(gradient_norm) {}
  const DensityMatrix& best_iterate() const { return best_iterate_; }
  int iterations() const { return iterations_; }
  double gradient_norm() const { return gradient_norm_; }

 private:
  DensityMatrix best_iterate_;
  int iterations_;
  double gradient_norm_;
};

namespace detail {

/// rho(t) = T^dag T / tr(T^dag T) with T = [[t0, t2 + i t3], [0, t1]].
/// The parametrization keeps every iterate Hermitian PSD by construction.
inline Mat2 mle_m_of(const Eigen::Vector4d& t) {
  Mat2 m;
  const Complex off(t[2], t[3]);
  m(0, 0) = t[0] * t[0];
  m(0, 1) = t[0] * off;
  m(1, 0) = std::conj(m(0, 1));
  m(1, 1) = t[1] * t[1] + t[2] * t[2] + t[3] * t[3];
  return m;
}

inline void mle_m_derivatives(const Eigen::Vector4d& t, Mat2 dm[4]) {
  const Complex i(0.0, 1.0);
  dm[0] << 2.0 * t[0], Complex(t[2], t[3]), Complex(t[2], -t[3]), 0.0;
  dm[1] << 0.0, 0.0, 0.0, 2.0 * t[1];
  dm[2] << 0.0, t[0], t[0], 2.0 * t[2];
  dm[3] << 0.0, i * t[0], -i * t[0], 2.0 * t[3];
}

struct MleObjective {
  Mat2 proj[3];
  double frac_t[3];  // per-basis count fractions of the grand total
  double frac_r[3];

  explicit MleObjective(const TomographyDataset& d) {
    const CountRecord* recs[3] = {&d.z, &d.x, &d.y};
    const Basis bases[3] = {Basis::Z, Basis::X, Basis::Y};
    double total = 0.0;
    for (const CountRecord* r : recs)
      total += static_cast<double>(r->counts_t + r->counts_r);
    if (total <= 0.0) throw InvalidInput("dataset has zero total counts");
    for (int b = 0; b < 3; ++b) {
      proj[b] = Measurement::pauli_basis(bases[b]).projector_plus();
      frac_t[b] = static_cast<double>(recs[b]->counts_t) / total;
      frac_r[b] = static_cast<double>(recs[b]->counts_r) / total;
    }
  }

  /// Negative mean log-likelihood plus (tr M - 1)^2 / 2. The penalty pins
  /// the otherwise scale-invariant parametrization to tr M = 1 so the
  /// gradient has an isolated root.
  double value_and_gradient(const Eigen::Vector4d& t,
                            Eigen::Vector4d& grad) const {
    const Mat2 m = mle_m_of(t);
    const double tau = m.trace().real();
    if (!(tau > 1e-30)) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    const Mat2 rho = m / tau;

    double ll = 0.0;
    Mat2 g = Mat2::Zero();
    for (int b = 0; b < 3; ++b) {
      double p = (proj[b] * rho).trace().real();
      p = std::clamp(p, 1e-12, 1.0 - 1e-12);
      ll += frac_t[b] * std::log(p) + frac_r[b] * std::log(1.0 - p);
      g += (frac_t[b] / p) * proj[b] +
           (frac_r[b] / (1.0 - p)) * (Mat2::Identity() - proj[b]);
    }

    Mat2 dm[4];
    mle_m_derivatives(t, dm);
    const double g_rho = (g * rho).trace().real();
    for (int k = 0; k < 4; ++k) {
      const double dtau = dm[k].trace().real();
      const double dll = ((g * dm[k]).trace().real() - g_rho * dtau) / tau;
      grad[k] = -dll + (tau - 1.0) * dtau;
    }
    return -ll + 0.5 * (tau - 1.0) * (tau - 1.0);
  }
};

/// Clamp negative eigenvalues to zero and renormalize the trace.
inline DensityMatrix project_physical(const Mat2& rho) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (rho + rho.adjoint()));
  Eigen::Vector2d lam = es.eigenvalues().cwiseMax(0.0);
  const double sum = lam.sum();
  if (sum <= 0.0) return DensityMatrix::maximally_mixed();
  lam /= sum;
  const Mat2 out = es.eigenvectors() * lam.asDiagonal() *
                   es.eigenvectors().adjoint();
  return DensityMatrix(out);
}

inline Eigen::Vector4d mle_initial_guess(const TomographyDataset& d) {
  const DensityMatrix start = project_physical(reconstruct_linear(d).rho);
  const Mat2 blended =
      0.999 * start.matrix() + 0.001 * Mat2::Identity() / 2.0;
  Eigen::LLT<Mat2> llt(blended);
  const Mat2 t_upper = Mat2(llt.matrixL()).adjoint();
  return {t_upper(0, 0).real(), t_upper(1, 1).real(), t_upper(0, 1).real(),
          t_upper(0, 1).imag()};
}

}  // namespace detail

/// Maximum-likelihood state reconstruction. BFGS over the 4-parameter
/// Cholesky factorization, so every iterate and the returned state are
/// physical (eigenvalues >= 0, unit trace) even for adversarial counts.
inline MleResult reconstruct_mle(const TomographyDataset& d,
                                 const MleOptions& opt = {}) {
  validate(d);
  if (opt.max_iterations <= 0)
    throw InvalidInput("max_iterations must be > 0");
  const detail::MleObjective obj(d);

  Eigen::Vector4d t = detail::mle_initial_guess(d);
  Eigen::Vector4d grad;
  double f = obj.value_and_gradient(t, grad);

  Eigen::Vector4d best_t = t;
  double best_f = f;

  Eigen::Matrix4d h_inv = Eigen::Matrix4d::Identity();
  int iter = 0;
  bool converged = grad.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance;

  while (!converged && iter < opt.max_iterations) {
    ++iter;
    Eigen::Vector4d dir = -h_inv * grad;
    if (dir.dot(grad) >= 0.0) {  // not a descent direction, reset curvature
      h_inv.setIdentity();
      dir = -grad;
    }

    const double slope = grad.dot(dir);
    double alpha = 1.0;
    Eigen::Vector4d t_new;
    Eigen::Vector4d grad_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool stepped = false;
    while (alpha > 1e-20) {
      t_new = t + alpha * dir;
      f_new = obj.value_and_gradient(t_new, grad_new);
      if (f_new <= f + 1e-4 * alpha * slope) {
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) {
      converged = true;  // no measurable descent left at step_tolerance scale
      break;
    }

    const Eigen::Vector4d s = alpha * dir;
    const Eigen::Vector4d y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::Matrix4d eye = Eigen::Matrix4d::Identity();
      const double rho_bfgs = 1.0 / sy;
      h_inv = (eye - rho_bfgs * s * y.transpose()) * h_inv *
                  (eye - rho_bfgs * y * s.transpose()) +
              rho_bfgs * s * s.transpose();
    }

    t = t_new;
    f = f_new;
    grad = grad_new;
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
    if (grad.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance ||
        s.lpNorm<Eigen::Infinity>() <= opt.step_tolerance)
      converged = true;
  }

  const Mat2 m = detail::mle_m_of(best_t);
  const double tau = m.trace().real();
  const DensityMatrix rho = detail::project_physical(m / tau);
  const double gnorm = grad.lpNorm<Eigen::Infinity>();

  if (!converged)
    throw TomographyNonconvergence(
        "likelihood maximization hit the iteration cap (" +
            std::to_string(opt.max_iterations) + ") with gradient norm " +
            std::to_string(gnorm),
        rho, iter, gnorm);

  MleResult out{rho, iter, gnorm, mean_log_likelihood(d, rho.matrix())};
  return out;
}

// ---------------------------------------------------------------------------
// Process tomography

/// One probe: the state sent into the channel and the state reconstructed
/// at the output.
struct ProcessPair {
  DensityMatrix input;
  DensityMatrix output;
};

using ProcessDataset = std::vector<ProcessPair>;

struct ProcessTomographyResult {
  ProcessMatrix chi;
  double ls_residual = 0.0;   // ||A x - b|| of the unconstrained fit
  int projection_cycles = 0;  // CPTP alternating-projection cycles
};

namespace detail {

/// Hermitian basis for the 16 real chi degrees of freedom: 4 diagonal
/// entries, then (re, im) per off-diagonal pair in row-major order.
inline Mat4 chi_param_basis(int k) {
  Mat4 b = Mat4::Zero();
  if (k < 4) {
    b(k, k) = 1.0;
    return b;
  }
  static constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                       {1, 2}, {1, 3}, {2, 3}};
  const int j = (k - 4) / 2;
  const int m = kPairs[j][0];
  const int n = kPairs[j][1];
  if ((k - 4) % 2 == 0) {
    b(m, n) = 1.0;
    b(n, m) = 1.0;
  } else {
    b(m, n) = Complex(0.0, 1.0);
    b(n, m) = Complex(0.0, -1.0);
  }
  return b;
}

inline Mat4 chi_from_params(const Eigen::Matrix<double, 16, 1>& x) {
  Mat4 chi = Mat4::Zero();
  for (int k = 0; k < 16; ++k) chi += x[k] * chi_param_basis(k);
  return chi;
}

inline Eigen::Matrix<double, 16, 1> params_from_chi(const Mat4& chi) {
  Eigen::Matrix<double, 16, 1> x;
  for (int k = 0; k < 4; ++k) x[k] = chi(k, k).real();
  static constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                       {1, 2}, {1, 3}, {2, 3}};
  for (int j = 0; j < 6; ++j) {
    x[4 + 2 * j] = chi(kPairs[j][0], kPairs[j][1]).real();
    x[5 + 2 * j] = chi(kPairs[j][0], kPairs[j][1]).imag();
  }
  return x;
}

/// Real 4-vector view of a Hermitian 2x2 matrix: (a00, re a01, im a01, a11).
inline Eigen::Vector4d hermitian_components(const Mat2& m) {
  return {m(0, 0).real(), m(0, 1).real(), m(0, 1).imag(), m(1, 1).real()};
}

inline Mat2 apply_chi_matrix(const Mat4& chi, const Mat2& rho) {
  Mat2 out = Mat2::Zero();
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      out += chi(m, n) * pauli(m) * rho * pauli(n).adjoint();
  return out;
}

}  // namespace detail

/// Fit a chi matrix to input/output pairs: unconstrained Hermitian least
/// squares first, then alternating projections onto the PSD cone and the
/// trace-preservation affine subspace until the Frobenius step falls below
/// 1e-10. The final projection is the TP one, so the result satisfies
/// sum chi_mn E_n^dag E_m = I to machine precision.
inline ProcessTomographyResult reconstruct_process(const ProcessDataset& data) {
  if (data.size() < 4)
    throw InvalidInput("process tomography needs at least 4 probe states");

  // The probes must span the operator space, otherwise chi is not
  // identifiable. Rank of their Pauli-component matrix must be 4.
  Eigen::MatrixXd span(static_cast<Eigen::Index>(data.size()), 4);
  for (Eigen::Index i = 0; i < span.rows(); ++i)
    for (int m = 0; m < 4; ++m)
      span(i, m) = (pauli(m) * data[static_cast<size_t>(i)].input.matrix())
                       .trace()
                       .real();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_span(span);
  const auto& sv = svd_span.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-9 * sv[0]) ++rank;
  if (rank < 4)
    throw InvalidInput("probe states span only a rank-" +
                       std::to_string(rank) +
                       " subspace; 4 independent states are required");

  Eigen::MatrixXd a(4 * static_cast<Eigen::Index>(data.size()), 16);
  Eigen::VectorXd b(a.rows());
  for (size_t i = 0; i < data.size(); ++i) {
    const Mat2& rho_in = data[i].input.matrix();
    for (int k = 0; k < 16; ++k) {
      const Mat2 pred =
          detail::apply_chi_matrix(detail::chi_param_basis(k), rho_in);
      a.block<4, 1>(4 * static_cast<Eigen::Index>(i), k) =
          detail::hermitian_components(pred);
    }
    b.segment<4>(4 * static_cast<Eigen::Index>(i)) =
        detail::hermitian_components(data[i].output.matrix());
  }

  Eigen::Matrix<double, 16, 1> x =
      a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  const double residual = (a * x - b).norm();

  // Trace preservation as a linear system phi x = (1, 0, 0, 1).
  Eigen::Matrix<double, 4, 16> phi;
  for (int k = 0; k < 16; ++k)
    phi.col(k) = detail::hermitian_components(
        detail::trace_preservation_operator(detail::chi_param_basis(k)));
  const Eigen::Vector4d tp_target(1.0, 0.0, 0.0, 1.0);
  const Eigen::Matrix4d gram = phi * phi.transpose();
  const auto tp_solver = gram.colPivHouseholderQr();
  const auto project_tp = [&](const Eigen::Matrix<double, 16, 1>& v) {
    return (v - phi.transpose() * tp_solver.solve(phi * v - tp_target)).eval();
  };

  constexpr int kMaxCycles = 10000;
  int cycles = 0;
  Mat4 chi = detail::chi_from_params(project_tp(x));
  for (; cycles < kMaxCycles; ++cycles) {
    const Mat4 prev = chi;
    Eigen::SelfAdjointEigenSolver<Mat4> es(chi);
    const Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0);
    const Mat4 psd = es.eigenvectors() * lam.asDiagonal().toDenseMatrix() *
                     es.eigenvectors().adjoint();
    chi = detail::chi_from_params(project_tp(detail::params_from_chi(psd)));
    if ((chi - prev).norm() < 1e-10) {
      ++cycles;
      break;
    }
  }
  if (cycles >= kMaxCycles)
    throw Error("CPTP projection did not converge within " +
                std::to_string(kMaxCycles) + " cycles");

  return {ProcessMatrix(chi), residual, cycles};
}

/// Fidelity between two processes: both chi matrices are normalized to unit
/// trace and compared with the same square-root fidelity used for states.
/// Against the identity process this reduces to sqrt(chi_00 / tr chi).
inline double process_fidelity(const ProcessMatrix& a, const ProcessMatrix& b) {
  const Mat4 an = a.chi() / a.chi().trace().real();
  const Mat4 bn = b.chi() / b.chi().trace().real();
  return detail::uhlmann_fidelity(an, bn);
}

}  // namespace uwq
