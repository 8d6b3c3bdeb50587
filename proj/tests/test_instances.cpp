#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sampalloc/instances.hpp"

using namespace sampalloc;

TEST(ErrorTable, PrintedRowsAndStdDevs) {
  const auto a = error_table("A");
  ASSERT_EQ(a.size(), 3u);
  const double row1[] = {0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020};
  for (int e = -3; e <= 3; ++e) EXPECT_NEAR(a[0](e), row1[e + 3] / 1.001, 1e-15);
  const double sd_a[] = {1.31, 1.68, 1.99};
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_NEAR(a[r].std_dev(), sd_a[r], 0.005) << "A row " << r + 1;
    EXPECT_NEAR(a[r].std_dev(), a[r].documented_std_dev(), 0.01);
  }
  const auto b = error_table("B");
  ASSERT_EQ(b.size(), 4u);
  const double row3[] = {0.100, 0.133, 0.167, 0.200, 0.167, 0.133, 0.100};
  double printed = 0.0;
  for (double q : row3) printed += q;
  for (int e = -3; e <= 3; ++e) EXPECT_NEAR(b[2](e), row3[e + 3] / printed, 1e-15);
  const double sd_b[] = {1.31, 1.57, 1.79, 1.99};
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(b[r].std_dev(), sd_b[r], 0.005) << "B row " << r + 1;
}

TEST(ErrorTable, RowsRenormalized) {
  for (const char* s : {"A", "B"}) {
    for (const auto& e : error_table(s)) {
      double t = 0.0;
      for (double q : e.pmf().probs()) t += q;
      EXPECT_NEAR(t, 1.0, 1e-12);
      for (int x = 1; x <= 3; ++x) EXPECT_EQ(e(x), e(-x));
    }
  }
  EXPECT_THROW(error_table("C"), UnknownSet);
  EXPECT_THROW(problem_set(""), UnknownSet);
}

TEST(ProblemSet, Shapes) {
  const auto a = problem_set("A");
  EXPECT_EQ(a.m, 12u);
  EXPECT_EQ(a.k, 3u);
  const auto b = problem_set("B");
  EXPECT_EQ(b.m, 9u);
  EXPECT_EQ(b.k, 4u);
  EXPECT_EQ(b.max_magnitude, 15);
}

TEST(GenerateInstance, InvariantsOverManySeeds) {
  for (const char* s : {"A", "B"}) {
    const auto spec = problem_set(s);
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto inst = generate_instance(spec, ValueKind::Additive, UtilityKind::Exponential, seed);
      ASSERT_EQ(inst.mu.size(), spec.m * spec.k);
      for (int x : inst.mu) {
        EXPECT_GE(x, 1);
        EXPECT_LE(x, 15);
      }
      std::set<std::size_t> rows(inst.error_assignment.begin(), inst.error_assignment.end());
      EXPECT_EQ(rows.size(), spec.k);
      EXPECT_EQ(*rows.rbegin(), spec.k - 1);
      EXPECT_GE(inst.alpha, 1.0);
      EXPECT_LE(inst.alpha, 3.0);
      EXPECT_GE(inst.gamma, 1.0);
      EXPECT_LE(inst.gamma, 10.0);
      EXPECT_LT(inst.anchor_attr, spec.k);
      EXPECT_EQ(inst.weights[inst.anchor_attr], 0.0);
      double d = 0.0;
      for (double w : inst.weights) d += w;
      EXPECT_NEAR(d, 1.0, 1e-12);
    }
  }
}

TEST(GenerateInstance, Deterministic) {
  const auto spec = problem_set("B");
  const auto x = generate_instance(spec, ValueKind::Compensating, UtilityKind::RiskNeutral, 42);
  const auto y = generate_instance(spec, ValueKind::Compensating, UtilityKind::RiskNeutral, 42);
  EXPECT_EQ(x.mu, y.mu);
  EXPECT_EQ(x.error_assignment, y.error_assignment);
  EXPECT_EQ(x.gamma, y.gamma);
  const auto z = generate_instance(spec, ValueKind::Compensating, UtilityKind::RiskNeutral, 43);
  EXPECT_NE(x.mu, z.mu);
}

TEST(GenerateInstance, MagnitudesIndependentOfPreferenceKinds) {
  const auto spec = problem_set("A");
  const auto x = generate_instance(spec, ValueKind::Additive, UtilityKind::RiskNeutral, 9);
  const auto y = generate_instance(spec, ValueKind::Compensating, UtilityKind::Exponential, 9);
  EXPECT_EQ(x.mu, y.mu);
  EXPECT_EQ(x.error_assignment, y.error_assignment);
  EXPECT_EQ(x.gamma, y.gamma);
}

TEST(GenerateInstance, AnchorTradesOffAgainstOthers) {
  // x_h = 1 - sum d_j x_j^alpha lies in (0, 1], so the anchor magnitude is
  // large exactly when the other attributes are small.
  const auto spec = problem_set("A");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = generate_instance(spec, ValueKind::Additive, UtilityKind::RiskNeutral, seed);
    for (std::size_t i = 0; i < inst.m(); ++i) {
      bool all_one = true;
      for (std::size_t j = 0; j < inst.k(); ++j) {
        if (j != inst.anchor_attr && inst.magnitude(i, j) != 1) all_one = false;
      }
      // With every other x_j < 1/15 the anchor keeps x_h > 1 - (1/15)^alpha >= 14/15.
      if (all_one) { EXPECT_GE(inst.magnitude(i, inst.anchor_attr), 15); }
    }
  }
}

TEST(DrawSample, PointMassError) {
  auto spec = problem_set("A");
  spec.errors.assign(spec.k, ErrorModel::exact());
  const auto inst = generate_instance(spec, ValueKind::Additive, UtilityKind::RiskNeutral, 3);
  Rng rng(1);
  for (int n = 0; n < 100; ++n) EXPECT_EQ(draw_sample(inst, 2, 1, rng), inst.magnitude(2, 1));
}

TEST(DrawSample, EmpiricalPmfMatchesTableRow) {
  auto spec = problem_set("A");
  auto inst = generate_instance(spec, ValueKind::Additive, UtilityKind::RiskNeutral, 5);
  inst.mu[0] = 8;
  inst.error_assignment = {0, 1, 2};
  Rng rng(2024);
  const int n = 1'000'000;
  std::map<int, int> hits;
  for (int s = 0; s < n; ++s) ++hits[draw_sample(inst, 0, 0, rng)];
  const auto& err = inst.error_model(0);
  for (int w = 5; w <= 11; ++w) {
    const double p = err(w - 8);
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(hits[w] / static_cast<double>(n), p, 3 * se) << "w=" << w;
  }
  EXPECT_EQ(hits.size(), 7u);
}

TEST(DrawSample, CanLeaveMagnitudeRange) {
  auto inst = generate_instance(problem_set("A"), ValueKind::Additive, UtilityKind::RiskNeutral, 5);
  inst.mu[0] = 15;
  Rng rng(7);
  int lo = 100, hi = -100;
  for (int s = 0; s < 20000; ++s) {
    const int w = draw_sample(inst, 0, 0, rng);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  EXPECT_EQ(lo, 12);
  EXPECT_EQ(hi, 18);
}
