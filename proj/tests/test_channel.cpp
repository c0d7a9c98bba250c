#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support/test_rand.hpp"
#include "uwqsim/channel.hpp"

using namespace uwq;

TEST_CASE("ideal chi has a single unit entry", "[channel]") {
  Mat4 expected = Mat4::Zero();
  expected(0, 0) = 1.0;
  REQUIRE((ProcessMatrix::ideal().chi() - expected).norm() == 0.0);
}

TEST_CASE("applying the ideal chi is the identity map", "[channel]") {
  Rng rng(1001);
  const ProcessMatrix ideal = ProcessMatrix::ideal();
  for (int i = 0; i < 50; ++i) {
    const DensityMatrix rho = testsupport::random_density(rng);
    const DensityMatrix out = apply_channel(ideal, rho);
    REQUIRE((out.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("depolarizing chi diagonal", "[channel]") {
  const ProcessMatrix d = ProcessMatrix::depolarizing(0.3);
  REQUIRE(d.chi()(0, 0).real() == Catch::Approx(0.775).margin(1e-15));
  for (int m = 1; m < 4; ++m)
    REQUIRE(d.chi()(m, m).real() == Catch::Approx(0.075).margin(1e-15));
  REQUIRE_THROWS_AS(ProcessMatrix::depolarizing(-0.1), InvalidInput);
  REQUIRE_THROWS_AS(ProcessMatrix::depolarizing(1.1), InvalidInput);
}

TEST_CASE("depolarizing shrinks the bloch vector", "[channel]") {
  const double w = 0.4;
  const DensityMatrix h = density_of(universal_state(StateLabel::H));
  const BlochVector out = bloch_of(apply_channel(ProcessMatrix::depolarizing(w), h));
  REQUIRE(out.z == Catch::Approx(1.0 - w).margin(1e-12));
  REQUIRE(std::abs(out.x) < 1e-12);
  REQUIRE(std::abs(out.y) < 1e-12);
}

TEST_CASE("chi of the explicit depolarizing kraus set", "[channel]") {
  // {sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z} at p = 0.3:
  // the Pauli coefficients square to (0.7, 0.1, 0.1, 0.1).
  const double p = 0.3;
  KrausSet ks;
  ks.operators.push_back(std::sqrt(1.0 - p) * pauli(0));
  for (int m = 1; m < 4; ++m)
    ks.operators.push_back(std::sqrt(p / 3.0) * pauli(m));
  const Mat4 chi = chi_from_kraus(ks).chi();
  REQUIRE(chi(0, 0).real() == Catch::Approx(0.7).margin(1e-12));
  for (int m = 1; m < 4; ++m)
    REQUIRE(chi(m, m).real() == Catch::Approx(0.1).margin(1e-12));
  double off = 0.0;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      if (m != n) off += std::abs(chi(m, n));
  REQUIRE(off < 1e-12);
}

TEST_CASE("kraus completeness validation", "[channel]") {
  KrausSet ok;
  ok.operators.push_back(pauli(0));
  REQUIRE_NOTHROW(validate_complete(ok));

  KrausSet scaled;
  scaled.operators.push_back(0.9 * pauli(0));
  REQUIRE_THROWS_AS(validate_complete(scaled), InvalidInput);

  KrausSet empty;
  REQUIRE_THROWS_AS(validate_complete(empty), InvalidInput);
}

TEST_CASE("kraus to chi round trip on random channels", "[channel]") {
  Rng rng(42);
  for (int i = 0; i < 25; ++i) {
    const int k = 1 + static_cast<int>(rng.uniform(0.0, 4.0));
    const ProcessMatrix chi = testsupport::random_cptp_chi(rng, k);
    const KrausSet back = kraus_from_chi(chi);
    const ProcessMatrix chi2 = chi_from_kraus(back);
    REQUIRE((chi.chi() - chi2.chi()).norm() < 1e-9);
  }
}

TEST_CASE("channel composition multiplies depolarizing survivals",
          "[channel]") {
  const ProcessMatrix a = ProcessMatrix::depolarizing(0.2);
  const ProcessMatrix b = ProcessMatrix::depolarizing(0.5);
  const ProcessMatrix ab = compose(a, b);
  const double w = 1.0 - (1.0 - 0.2) * (1.0 - 0.5);
  REQUIRE((ab.chi() - ProcessMatrix::depolarizing(w).chi()).norm() < 1e-9);
}

TEST_CASE("process matrix construction rejects bad chi", "[channel]") {
  Mat4 not_tp = Mat4::Zero();
  not_tp(0, 0) = 0.5;
  REQUIRE_THROWS_AS(ProcessMatrix(not_tp), InvalidInput);

  Mat4 not_psd = Mat4::Zero();
  not_psd(0, 0) = 1.25;
  not_psd(1, 1) = -0.25;
  REQUIRE_THROWS_AS(ProcessMatrix(not_psd), InvalidInput);

  Mat4 not_hermitian = Mat4::Zero();
  not_hermitian(0, 0) = 1.0;
  not_hermitian(0, 1) = 0.5;
  REQUIRE_THROWS_AS(ProcessMatrix(not_hermitian), InvalidInput);
}

TEST_CASE("trace preservation operator of a valid chi is identity",
          "[channel]") {
  Rng rng(7);
  const ProcessMatrix chi = testsupport::random_cptp_chi(rng, 3);
  REQUIRE((detail::trace_preservation_operator(chi.chi()) - Mat2::Identity())
              .norm() < 1e-9);
}

TEST_CASE("half waveplate at 0 is diag(1, -1)", "[channel]") {
  const Mat2 u = waveplate_unitary({WaveplateKind::Half, 0.0});
  Mat2 expected;
  expected << 1.0, 0.0, 0.0, -1.0;
  REQUIRE((u - expected).norm() < 1e-12);
}

TEST_CASE("half waveplate at pi/8 maps H to D", "[channel]") {
  const Mat2 u = waveplate_unitary({WaveplateKind::Half, M_PI / 8.0});
  const Vec2 out = u * universal_state(StateLabel::H).vector();
  const Vec2 d = universal_state(StateLabel::D).vector();
  REQUIRE((out - d).norm() < 1e-12);
}

TEST_CASE("quarter waveplate at pi/4 maps H to L", "[channel]") {
  const Mat2 u = waveplate_unitary({WaveplateKind::Quarter, M_PI / 4.0});
  const Vec2 out = u * universal_state(StateLabel::H).vector();
  const Vec2 l = universal_state(StateLabel::L).vector();
  REQUIRE((out - l).norm() < 1e-12);
}

TEST_CASE("waveplate angles fold modulo pi", "[channel]") {
  const Mat2 a = waveplate_unitary({WaveplateKind::Half, 0.3});
  const Mat2 b = waveplate_unitary({WaveplateKind::Half, 0.3 + M_PI});
  const Mat2 c = waveplate_unitary({WaveplateKind::Half, 0.3 - M_PI});
  REQUIRE((a - b).norm() < 1e-12);
  REQUIRE((a - c).norm() < 1e-12);
}

TEST_CASE("waveplates are unitary and involutive as physical maps",
          "[channel]") {
  Rng rng(8);
  for (double angle : {0.0, 0.2, 0.7, 1.4, 3.0}) {
    for (WaveplateKind kind : {WaveplateKind::Half, WaveplateKind::Quarter}) {
      const Mat2 u = waveplate_unitary({kind, angle});
      REQUIRE((u * u.adjoint() - Mat2::Identity()).norm() < 1e-12);
    }
    // a half waveplate applied twice restores every polarization state
    const Mat2 h = waveplate_unitary({WaveplateKind::Half, angle});
    const DensityMatrix rho = testsupport::random_density(rng);
    const Mat2 twice = h * (h * rho.matrix() * h.adjoint()) * h.adjoint();
    REQUIRE((twice - rho.matrix()).norm() < 1e-12);
  }
}

TEST_CASE("of_unitary rejects non-unitary matrices", "[channel]") {
  Mat2 m;
  m << 1.0, 0.0, 0.0, 0.5;
  REQUIRE_THROWS_AS(ProcessMatrix::of_unitary(m), InvalidInput);
}

TEST_CASE("unitary chi acts like the unitary", "[channel]") {
  Rng rng(9);
  const Mat2 u = waveplate_unitary({WaveplateKind::Quarter, 0.6});
  const ProcessMatrix chi = ProcessMatrix::of_unitary(u);
  for (int i = 0; i < 20; ++i) {
    const DensityMatrix rho = testsupport::random_density(rng);
    const Mat2 direct = u * rho.matrix() * u.adjoint();
    REQUIRE((apply_channel(chi, rho).matrix() - direct).norm() < 1e-12);
  }
}

TEST_CASE("beer-lambert attenuation closed forms", "[channel]") {
  REQUIRE(transmittance(0.16, 55.0) ==
          Catch::Approx(0.0001507330750954765).epsilon(1e-12));
  REQUIRE(loss_db(transmittance(0.16, 55.0)) ==
          Catch::Approx(38.217914407486163).margin(1e-9));
  REQUIRE(transmittance(0.0, 55.0) == 1.0);
  REQUIRE(db_to_transmittance(10.0) == Catch::Approx(0.1).margin(1e-15));
  REQUIRE(db_to_transmittance(loss_db(0.42)) ==
          Catch::Approx(0.42).margin(1e-12));
  REQUIRE_THROWS_AS(transmittance(-0.1, 1.0), InvalidInput);
  REQUIRE_THROWS_AS(transmittance(0.1, -1.0), InvalidInput);
  REQUIRE_THROWS_AS(loss_db(0.0), InvalidInput);
  REQUIRE_THROWS_AS(loss_db(1.5), InvalidInput);
}
