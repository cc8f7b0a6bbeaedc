#include <gtest/gtest.h>

#include "properties.hpp"

namespace {

constexpr std::size_t kCases = 500;

void expect_ok(const props::Report& r) {
  EXPECT_EQ(r.cases, kCases);
  EXPECT_EQ(r.failures, 0u) << "worst deviation " << r.worst;
}

}  // namespace

TEST(Properties, CdEqualsTimeAggregated) { expect_ok(props::cd_identity(kCases, 101)); }
TEST(Properties, CdWMatchesTripleLoop) { expect_ok(props::cd_w_oracle(kCases, 102)); }
TEST(Properties, SignFlipInvariance) { expect_ok(props::sign_flip_invariance(kCases, 103)); }
TEST(Properties, CdScaleEquivariance) { expect_ok(props::cd_scale_equivariance(kCases, 104)); }
TEST(Properties, ProjectionIdempotence) { expect_ok(props::projection_idempotence(kCases, 105)); }
TEST(Properties, NormalizationIdentities) { expect_ok(props::normalization_identities(kCases, 106)); }
TEST(Properties, CdStarCollapseAndDecision) { expect_ok(props::collapse_and_decision(kCases, 107)); }
TEST(Properties, CorrelationPathsAndDemean) { expect_ok(props::correlation_paths(kCases, 108)); }
