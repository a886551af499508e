#include <gtest/gtest.h>

#include "oracles.hpp"
#include "zoloto/inequalities.hpp"

using namespace zoloto;
using oracle::line;
using oracle::p1;

TEST(CheckBounds, DilationPairSaturatesTheUpperBound) {
  const auto [mu, nu] = dilation_pair(2.0);
  const auto r = check_bounds(mu, nu);
  EXPECT_TRUE(r.certified);
  EXPECT_NEAR(r.z2, 1.5, 1e-8);
  EXPECT_NEAR(r.w2, 1.0, 1e-12);
  EXPECT_NEAR(r.upper_bound_rhs_sigma, 1.5, 1e-12);
  EXPECT_TRUE(r.eq_upper_sigma);
  EXPECT_FALSE(r.eq_lower);
  EXPECT_FALSE(r.eq_upper_var);
}

TEST(CheckBounds, IdenticalMeasures) {
  const auto m = random_measure(2, 5, 3, {.centre = true});
  const auto r = check_bounds(m, m);
  EXPECT_EQ(r.w2, 0.0);
  EXPECT_NEAR(r.z2, 0.0, 1e-12);
  EXPECT_TRUE(r.eq_lower);
  EXPECT_TRUE(lower_flag_consistent(m, m, r, 1e-9));
}

TEST(CheckBounds, NearlyEqualTwoAtomRatio) {
  const auto [mu, nu] = two_atom_pair(1.0, 1.01);
  const auto r = check_bounds(mu, nu);
  const double w2sq = r.w2 * r.w2;
  EXPECT_GE(r.z2_lower / w2sq, 0.25 - 1e-7);
  EXPECT_LE(r.z2_upper / w2sq, 1.01 / 4.02 + 1e-7);
}

TEST(CheckBounds, BarycentreMismatchIsReported) {
  const auto r = check_bounds(DiscreteMeasure::dirac(p1(0.0)), line({0.0, 2.0}, {0.5, 0.5}));
  EXPECT_TRUE(r.barycentre_mismatch);
  EXPECT_TRUE(std::isinf(r.z2));
  EXPECT_GT(r.slack_lower, 0.0);
  EXPECT_FALSE(r.note.empty());
}

TEST(CheckBounds, SlackInvariantsOnRandomPairs) {
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto [mu, nu] = random_centred_pair(s);
    const auto r = check_bounds(mu, nu);
    ASSERT_TRUE(r.certified) << "seed " << s;
    EXPECT_GE(r.slack_lower, -(r.gap + 1e-9));
    EXPECT_GE(r.slack_upper_sigma, -(r.gap + 1e-9));
    EXPECT_GE(r.slack_upper_var, -(r.gap + 1e-9));
    // Arithmetic mean never exceeds the quadratic mean.
    EXPECT_LE(0.5 * (r.sigma_mu + r.sigma_nu), std::sqrt(0.5 * (r.var_mu + r.var_nu)));
    EXPECT_TRUE(lower_flag_consistent(mu, nu, r, 1e-6));
  }
}

TEST(ClassifyLowerEquality, Examples) {
  const auto m = random_measure(1, 4, 2, {.centre = true});
  EXPECT_TRUE(classify_lower_equality(m, m, 1e-9));
  const auto [mu, nu] = dilation_pair(2.0);
  EXPECT_FALSE(classify_lower_equality(mu, nu, 1e-6));

  const auto ca = center(line({-1.0, 0.5, 2.0}, {0.3, 0.5, 0.2}));
  std::vector<Atom> moved;
  for (const auto& at : ca.atoms()) moved.push_back({at.x + p1(at.x[0] > 0 ? 1e-3 : -1e-3), at.w});
  const auto b = center(DiscreteMeasure(1, moved));
  EXPECT_FALSE(classify_lower_equality(ca, b, 1e-6));
  EXPECT_GT(check_bounds(ca, b).slack_lower, 0.0);
}

TEST(ClassifyUpperEquality, Examples) {
  const auto [mu, nu] = dilation_pair(2.0);
  const auto d = classify_upper_equality(mu, nu, 1e-9);
  EXPECT_TRUE(d.is_dilation);
  ASSERT_TRUE(d.lambda.has_value());
  EXPECT_NEAR(*d.lambda, 2.0, 1e-12);

  const auto [a, b] = two_atom_pair(1.0, 2.0);
  const auto n = classify_upper_equality(a, b, 1e-9);
  EXPECT_FALSE(n.is_dilation);
  EXPECT_FALSE(n.lambda.has_value());

  const auto m = random_measure(3, 5, 19);
  const auto s = classify_upper_equality(m, m, 1e-9);
  EXPECT_TRUE(s.is_dilation);
  EXPECT_NEAR(s.lambda.value_or(0.0), 1.0, 1e-12);
}

TEST(ClassifyUpperEquality, PointMasses) {
  const auto d0 = DiscreteMeasure::dirac(p1(0.0));
  EXPECT_TRUE(classify_upper_equality(d0, d0, 1e-9).is_dilation);
  EXPECT_FALSE(classify_upper_equality(d0, line({-1.0, 1.0}, {0.5, 0.5}), 1e-9).is_dilation);
}

TEST(ClassifyUpperEquality, OffCentreDilation) {
  const auto m = random_measure(2, 4, 23);
  const Point c = barycentre(m);
  const auto nu = translate(dilate(center(m), 1.7), c);
  const auto r = classify_upper_equality(m, nu, 1e-9);
  EXPECT_TRUE(r.is_dilation);
  EXPECT_NEAR(r.lambda.value_or(0.0), 1.7, 1e-12);
}

TEST(ScanRatio, NoReverseFamily) {
  FamilySpec spec;
  spec.family = Family::noreverse;
  spec.steps = 100;
  const auto rows = scan_ratio(spec, 0, 1);
  ASSERT_EQ(rows.size(), 100u);
  for (const auto& r : rows) {
    const double n = r.param1;
    EXPECT_NEAR(r.ratio_sq, (2 * n + 1) / 2, 1e-6) << "n = " << n;
    EXPECT_NEAR(r.w2 * r.w2, 1.0 / (n * n), 1e-12);
  }
}

TEST(ScanRatio, TwoAtomFamilyStaysInTheBracket) {
  FamilySpec spec;
  spec.family = Family::two_atom;
  spec.a = 1.0;
  spec.from = 1.001;
  spec.to = 2.0;
  spec.steps = 8;
  const auto rows = scan_ratio(spec, 0, 2);
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) {
    const double b = r.param2;
    const double w2sq = r.w2 * r.w2;
    EXPECT_GE(r.z2_lower / w2sq, 0.25 - 1e-7);
    EXPECT_LE(r.z2_upper / w2sq, b / (2 * (1 + b)) + 1e-7);
  }
  EXPECT_LT(rows.front().ratio_sq, rows.back().ratio_sq);
}

TEST(ScanRatio, DilationFamilySaturates) {
  FamilySpec spec;
  spec.family = Family::dilation;
  spec.from = 1.1;
  spec.to = 3.0;
  spec.steps = 6;
  for (const auto& r : scan_ratio(spec, 0, 1)) {
    EXPECT_TRUE(r.eq_upper);
    EXPECT_NEAR(r.ratio_lin, r.bound_sigma, 1e-8);
  }
}

TEST(ScanRatio, RandomFamilyIsDeterministicAcrossThreadCounts) {
  FamilySpec spec;
  spec.family = Family::random;
  spec.dim = 2;
  spec.atoms = 5;
  spec.steps = 12;
  const auto a = scan_ratio(spec, 7, 1);
  const auto b = scan_ratio(spec, 7, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].w2, b[i].w2);
    EXPECT_EQ(a[i].z2_lower, b[i].z2_lower);
    EXPECT_EQ(a[i].z2_upper, b[i].z2_upper);
  }
}

TEST(ScanRatio, ScaleInvarianceOfTheRatio) {
  for (std::uint64_t s = 0; s < 15; ++s) {
    const auto [mu, nu] = random_centred_pair(s, 5);
    const auto r = check_bounds(mu, nu);
    if (r.w2 < 1e-6) continue;
    for (double lambda : {0.5, 3.0}) {
      const auto q = check_bounds(dilate(mu, lambda), dilate(nu, lambda));
      const double ratio = r.z2 / (r.w2 * r.w2), scaled = q.z2 / (q.w2 * q.w2);
      EXPECT_NEAR(scaled, ratio, 1e-7 * ratio) << "seed " << s;
    }
  }
}

TEST(EstimateH, PointMassEdge) {
  const auto h = estimate_h(0.0, 1.5, 4, 1);
  EXPECT_NEAR(h.estimate, 0.75, 1e-8);
  EXPECT_DOUBLE_EQ(h.cap, 0.75);
}

TEST(EstimateH, NeverExceedsTheCapAndApproachesIt) {
  const auto h = estimate_h(1.0, 1.0, 6, 3);
  EXPECT_LE(h.estimate, h.cap + 1e-8);
  EXPECT_GE(h.estimate, 1.0 - 1e-3);
  const auto g = estimate_h(0.7, 1.3, 6, 3);
  EXPECT_LE(g.estimate, g.cap + 1e-8);
  EXPECT_GT(g.estimate, 0.5 * g.cap);
}

TEST(EstimateH, Homogeneity) {
  const auto h1 = estimate_h(0.5, 1.0, 5, 11);
  const auto h2 = estimate_h(1.0, 2.0, 5, 11);
  EXPECT_NEAR(h2.estimate, 2.0 * h1.estimate, 1e-6);
}
