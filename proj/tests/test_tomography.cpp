#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support/grid_oracle.hpp"
#include "support/test_rand.hpp"
#include "uwqsim/tomography.hpp"

using namespace uwq;
using testsupport::grid_mle_exhaustive;
using testsupport::grid_mle_fast;

namespace {

TomographyDataset dataset(std::int64_t zt, std::int64_t zr, std::int64_t xt,
                          std::int64_t xr, std::int64_t yt, std::int64_t yr) {
  TomographyDataset d;
  d.z = {0.0, zt, zr, 1.0};
  d.x = {M_PI / 8.0, xt, xr, 1.0};
  d.y = {M_PI / 4.0, yt, yr, 1.0};
  return d;
}

TomographyDataset exact_counts(const DensityMatrix& rho, double n) {
  const BlochVector b = bloch_of(rho);
  const auto split = [n](double v) {
    const auto t = static_cast<std::int64_t>(std::llround(n * 0.5 * (1.0 + v)));
    return std::pair<std::int64_t, std::int64_t>(
        t, static_cast<std::int64_t>(std::llround(n)) - t);
  };
  const auto [zt, zr] = split(b.z);
  const auto [xt, xr] = split(b.x);
  const auto [yt, yr] = split(b.y);
  return dataset(zt, zr, xt, xr, yt, yr);
}

double bloch_distance(const BlochVector& a, const BlochVector& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

}  // namespace

TEST_CASE("expectation from counts", "[tomography]") {
  REQUIRE(expectation_from_counts({0.0, 750, 250, 1.0}) == Catch::Approx(0.5));
  REQUIRE(expectation_from_counts({0.0, 250, 750, 1.0}) == Catch::Approx(-0.5));
}

TEST_CASE("linear inversion recovers exact count fractions", "[tomography]") {
  const auto d = dataset(700000, 300000, 600000, 400000, 350000, 650000);
  const LinearInversion inv = reconstruct_linear(d);
  REQUIRE(inv.bloch.z == Catch::Approx(0.4).margin(1e-12));
  REQUIRE(inv.bloch.x == Catch::Approx(0.2).margin(1e-12));
  REQUIRE(inv.bloch.y == Catch::Approx(-0.3).margin(1e-12));
  REQUIRE(inv.physical);
  REQUIRE(inv.min_eigenvalue > 0.0);
}

TEST_CASE("linear inversion flags unphysical outcomes", "[tomography]") {
  const auto d = dataset(999, 1, 980, 20, 500, 500);
  const LinearInversion inv = reconstruct_linear(d);
  REQUIRE_FALSE(inv.physical);
  REQUIRE(inv.min_eigenvalue < 0.0);
}

TEST_CASE("mean log-likelihood of the maximally mixed state", "[tomography]") {
  // Every basis sees p = 1/2, so the value is log(1/2) for any counts.
  const auto d = dataset(823, 97, 41, 5, 12345, 678);
  REQUIRE(mean_log_likelihood(d, DensityMatrix::maximally_mixed().matrix()) ==
          Catch::Approx(std::log(0.5)).margin(1e-12));
}

TEST_CASE("maximum likelihood recovers states from noiseless counts",
          "[tomography]") {
  Rng rng(42);
  std::vector<DensityMatrix> states;
  for (auto label : {StateLabel::H, StateLabel::V, StateLabel::D,
                     StateLabel::A, StateLabel::R, StateLabel::L})
    states.push_back(density_of(universal_state(label)));
  for (int i = 0; i < 20; ++i) states.push_back(testsupport::random_density(rng));

  for (const DensityMatrix& truth : states) {
    const MleResult res = reconstruct_mle(exact_counts(truth, 1e6));
    REQUIRE(trace_distance(res.rho, truth) < 1e-4);
    REQUIRE(res.iterations < 10000);
  }
}

TEST_CASE("maximum likelihood equals linear inversion inside the ball",
          "[tomography]") {
  const auto d = dataset(700000, 300000, 600000, 400000, 350000, 650000);
  const LinearInversion inv = reconstruct_linear(d);
  REQUIRE(inv.physical);
  const MleResult res = reconstruct_mle(d);
  REQUIRE(bloch_distance(bloch_of(res.rho), inv.bloch) < 1e-5);
}

TEST_CASE("maximum likelihood stays physical on adversarial counts",
          "[tomography]") {
  const auto d = dataset(999999, 1, 999998, 2, 990000, 10000);
  REQUIRE_FALSE(reconstruct_linear(d).physical);
  const MleResult res = reconstruct_mle(d);
  Eigen::SelfAdjointEigenSolver<Mat2> es(res.rho.matrix());
  REQUIRE(es.eigenvalues().minCoeff() >= -1e-12);
  REQUIRE(res.rho.matrix().trace().real() == Catch::Approx(1.0).margin(1e-12));
  const BlochVector b = bloch_of(res.rho);
  REQUIRE(b.x * b.x + b.y * b.y + b.z * b.z <= 1.0 + 1e-9);
}

TEST_CASE("grid oracle fast and exhaustive forms agree", "[tomography]") {
  const TomographyDataset sets[] = {
      dataset(999, 1, 980, 20, 500, 500),
      dataset(900, 100, 850, 150, 700, 300),
      dataset(520, 480, 510, 490, 505, 495),
      dataset(7, 3, 5, 5, 2, 8),
  };
  for (const auto& d : sets) {
    const auto fast = grid_mle_fast(d, 50);
    const auto full = grid_mle_exhaustive(d, 50);
    REQUIRE(fast.log_likelihood ==
            Catch::Approx(full.log_likelihood).margin(1e-12));
    REQUIRE(fast.bloch.x == Catch::Approx(full.bloch.x).margin(1e-12));
    REQUIRE(fast.bloch.y == Catch::Approx(full.bloch.y).margin(1e-12));
    REQUIRE(fast.bloch.z == Catch::Approx(full.bloch.z).margin(1e-12));
  }
}

TEST_CASE("maximum likelihood matches an exhaustive grid search",
          "[tomography]") {
  const TomographyDataset sets[] = {
      dataset(999, 1, 980, 20, 500, 500),
      dataset(900, 100, 850, 150, 700, 300),
      dataset(100, 900, 950, 50, 800, 200),
      dataset(1000, 0, 1000, 0, 1000, 0),
      dataset(520, 480, 510, 490, 505, 495),
  };
  for (const auto& d : sets) {
    const MleResult res = reconstruct_mle(d);
    const auto oracle = grid_mle_fast(d, 1000);
    // Per-component agreement is not guaranteed at the grid resolution: on
    // the sphere boundary the likelihood is flat along the constraint
    // surface, so the grid argmax can slide a few cells along the ridge.
    // Trace distance (half the Euclidean Bloch distance) is the stable
    // comparison.
    REQUIRE(trace_distance(res.rho, density_from_bloch(oracle.bloch)) <= 2e-3);

    double total = 0.0;
    for (const CountRecord* r : {&d.z, &d.x, &d.y})
      total += static_cast<double>(r->counts_t + r->counts_r);
    REQUIRE(mean_log_likelihood(d, res.rho.matrix()) >=
            oracle.log_likelihood / total - 1e-9);
  }
}

TEST_CASE("optimizer reports nonconvergence with its best iterate",
          "[tomography]") {
  const auto d = dataset(900, 100, 950, 50, 500, 500);
  MleOptions opt;
  opt.max_iterations = 1;
  opt.gradient_tolerance = 0.0;
  opt.step_tolerance = 0.0;
  try {
    reconstruct_mle(d, opt);
    FAIL("expected TomographyNonconvergence");
  } catch (const TomographyNonconvergence& e) {
    REQUIRE(e.iterations() == 1);
    REQUIRE(e.gradient_norm() > 0.0);
    const DensityMatrix& best = e.best_iterate();
    REQUIRE(best.matrix().trace().real() == Catch::Approx(1.0).margin(1e-12));
    Eigen::SelfAdjointEigenSolver<Mat2> es(best.matrix());
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("optimizer option validation", "[tomography]") {
  MleOptions opt;
  opt.max_iterations = 0;
  REQUIRE_THROWS_AS(reconstruct_mle(dataset(1, 1, 1, 1, 1, 1), opt),
                    InvalidInput);
}

namespace {

ProcessDataset six_state_pairs(const ProcessMatrix& chi) {
  ProcessDataset data;
  for (auto label : {StateLabel::H, StateLabel::V, StateLabel::D,
                     StateLabel::A, StateLabel::R, StateLabel::L}) {
    const DensityMatrix in = density_of(universal_state(label));
    data.push_back({in, apply_channel(chi, in)});
  }
  return data;
}

}  // namespace

TEST_CASE("process tomography round trip on exact data", "[tomography]") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const ProcessMatrix truth = testsupport::random_cptp_chi(rng, 1 + trial % 4);
    const ProcessTomographyResult res =
        reconstruct_process(six_state_pairs(truth));
    REQUIRE((res.chi.chi() - truth.chi()).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(res.ls_residual < 1e-10);
  }
}

TEST_CASE("reconstructed processes are trace preserving", "[tomography]") {
  Rng rng(11);
  // Perturb the outputs so projections actually have to do work.
  const ProcessMatrix truth = testsupport::random_cptp_chi(rng, 3);
  ProcessDataset data = six_state_pairs(truth);
  for (size_t i = 0; i < data.size(); ++i) {
    BlochVector b = bloch_of(data[i].output);
    b.x = 0.97 * b.x + (i % 2 ? 0.01 : -0.01);
    b.y = 0.97 * b.y;
    b.z = 0.97 * b.z + 0.005;
    data[i].output = density_from_bloch(b);
  }
  const ProcessTomographyResult res = reconstruct_process(data);
  REQUIRE((detail::trace_preservation_operator(res.chi.chi()) -
           Mat2::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat4> es(res.chi.chi());
  REQUIRE(es.eigenvalues().minCoeff() >= -1e-12);
  REQUIRE(res.ls_residual > 0.0);
  REQUIRE((res.chi.chi() - truth.chi()).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("process tomography requires informationally complete probes",
          "[tomography]") {
  const DensityMatrix h = density_of(universal_state(StateLabel::H));
  const DensityMatrix v = density_of(universal_state(StateLabel::V));
  ProcessDataset rank_deficient = {{h, h}, {v, v}, {h, h}, {v, v}};
  REQUIRE_THROWS_WITH(reconstruct_process(rank_deficient),
                      Catch::Matchers::ContainsSubstring("rank"));

  ProcessDataset too_few = {{h, h}, {v, v}, {h, h}};
  REQUIRE_THROWS_WITH(reconstruct_process(too_few),
                      Catch::Matchers::ContainsSubstring("at least 4"));
}

TEST_CASE("process fidelity", "[tomography]") {
  const ProcessMatrix ideal = ProcessMatrix::ideal();
  REQUIRE(process_fidelity(ideal, ideal) == Catch::Approx(1.0).margin(1e-12));
  const ProcessMatrix depol = ProcessMatrix::depolarizing(0.3);
  REQUIRE(process_fidelity(ideal, depol) ==
          Catch::Approx(0.88034084308295046).margin(1e-9));
  REQUIRE(process_fidelity(depol, ideal) ==
          Catch::Approx(process_fidelity(ideal, depol)).margin(1e-12));
}
