#include <catch2/catch_amalgamated.hpp>

#include "uwqsim/analysis.hpp"
#include "uwqsim/channel.hpp"
#include "uwqsim/config.hpp"
#include "uwqsim/errors.hpp"
#include "uwqsim/experiment.hpp"
#include "uwqsim/photonics.hpp"
#include "uwqsim/qstate.hpp"
#include "uwqsim/rng.hpp"
#include "uwqsim/serialize.hpp"
#include "uwqsim/tomography.hpp"
#include "uwqsim/version.hpp"

TEST_CASE("headers are self-contained and link", "[smoke]") {
  REQUIRE(std::string(uwq::kVersion) == "0.1.0");
  REQUIRE(uwq::purity(uwq::DensityMatrix::maximally_mixed()) ==
          Catch::Approx(0.5));
}
