#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lipattn;

namespace {

RegularityStats stats(double eps, double sup, double left, double right) {
  const Provenance p{ProvenanceKind::UserSupplied, 0, 0, "test"};
  return {{eps, p}, {sup, p}, {left, p}, {right, p}, {std::max(left, right), p}};
}

}  // namespace

TEST(TauPi, Examples) {
  EXPECT_EQ(tau_pi(1), 1.0);
  EXPECT_EQ(tau_pi(3), 3.0);
  EXPECT_EQ(tau_pi(64), 64.0);
  EXPECT_THROW(tau_pi(0), Error);
}

TEST(TauLookup, Examples) {
  EXPECT_EQ(tau_lookup(Lookup::identity()), 1.0);
  EXPECT_EQ(tau_lookup(Lookup::linear(Matrix::identity(3, 2.0))), 2.0);
  Rng rng(51);
  const auto w = oracle::random_matrix(rng, 3, 3);
  double colmax = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    colmax = std::max(colmax, std::abs(w(0, c)) + std::abs(w(1, c)) + std::abs(w(2, c)));
  EXPECT_EQ(tau_lookup(Lookup::linear(w)), colmax);
  // Sampled ratios approach the column norm from below; axis steps attain it.
  double sampled = 0.0;
  for (int t = 0; t < 2000; ++t) {
    Vec dx(3, 0.0);
    if (t % 2) dx[static_cast<std::size_t>(t / 2 % 3)] = rng.uniform(-1, 1);
    else for (auto& v : dx) v = rng.uniform(-1, 1);
    sampled = std::max(sampled, norm_l1(w.apply(dx)) / norm_l1(dx));
  }
  EXPECT_LE(sampled, colmax + 1e-12);
  EXPECT_NEAR(sampled, colmax, 1e-12);
}

TEST(TauSoftmatch, Examples) {
  const auto box = DomainBox::cube(2, 0.0, 1.0);
  EXPECT_EQ(tau_softmatch_bounded(regularity_stats(Potential::constant(2), box), box), 0.0);

  const auto unit = DomainBox::cube(1, 0.0, 1.0);
  const double s = gaussian_gradient_bound(), eps = std::exp(-1.0);
  EXPECT_DOUBLE_EQ(tau_softmatch_bounded(regularity_stats(Potential::gaussian(1), unit), unit),
                   2.0 * (2.0 * s) * 1.0 / eps);

  const auto st = stats(0.5, 2.0, 1.0, 3.0);
  EXPECT_EQ(tau_softmatch_bounded(st, DomainBox::cube(2, 0.0, 2.0)),
            2.0 * tau_softmatch_bounded(st, DomainBox::cube(2, 0.0, 1.0)));
  EXPECT_THROW(tau_softmatch_bounded(st, DomainBox::unbounded(2)), Error);
  EXPECT_THROW(tau_softmatch_bounded(stats(0.0, 1.0, 1.0, 1.0), box), Error);
}

TEST(BoundedContraction, Examples) {
  // tau(Psi) = 2 (1.25 + 1.25) * 1 / 1 = 5 on the unit square with diam_1 = 2 -> scale.
  const auto box = DomainBox::cube(2, 0.0, 0.5);  // diam_1 = 1
  const auto cfg = AttentionConfig(Potential::gaussian(2), Lookup::identity());
  const auto r = bound_bounded_contraction(cfg, box, stats(1.0, 1.0, 1.25, 1.25));
  EXPECT_EQ(r.ingredient("tau_softmatch"), 5.0);
  EXPECT_EQ(r.value, 10.0);

  const auto flat = bound_bounded_contraction(AttentionConfig(Potential::constant(2), Lookup::identity()),
                                              DomainBox::cube(2, -1.0, 1.0));
  EXPECT_TRUE(flat.applicable());
  EXPECT_EQ(flat.value, 0.0);

  const auto unb = bound_bounded_contraction(cfg, DomainBox::unbounded(2));
  EXPECT_FALSE(unb.applicable());
}

TEST(BoundedContraction, ValueEqualsProductOfIngredients) {
  Rng rng(52);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + t % 4;
    const auto box = DomainBox::cube(d, -rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0));
    const AttentionConfig cfg(t % 2 ? Potential::gaussian(d) : Potential::dot_product(d, rng.uniform(0.1, 1.0)),
                              Lookup::linear(oracle::random_matrix(rng, d, d)));
    const auto r = bound_bounded_contraction(cfg, box);
    ASSERT_TRUE(r.applicable());
    EXPECT_EQ(r.value, r.ingredient("tau_pi") * r.ingredient("tau_softmatch") * r.ingredient("tau_lookup"));
    EXPECT_EQ(r.value, recompute(r));
  }
}

TEST(BoundedContraction, LinearInDiameterAndLookup) {
  const auto st = stats(0.25, 4.0, 0.5, 0.75);
  const auto cfg1 = AttentionConfig(Potential::gaussian(3), Lookup::linear(Matrix::identity(3, 1.5)));
  const auto cfg2 = AttentionConfig(Potential::gaussian(3), Lookup::linear(Matrix::identity(3, 3.0)));
  const auto small = DomainBox::cube(3, 0.0, 1.0), big = DomainBox::cube(3, 0.0, 2.0);
  EXPECT_EQ(bound_bounded_contraction(cfg1, big, st).value,
            2.0 * bound_bounded_contraction(cfg1, small, st).value);
  EXPECT_EQ(bound_bounded_contraction(cfg2, small, st).value,
            2.0 * bound_bounded_contraction(cfg1, small, st).value);
}

TEST(PointwiseQuery, Examples) {
  const auto st = stats(0.5, 1.0, 0.3, 0.3);
  const auto b1 = DomainBox::cube(1, 0.0, 2.0);
  const auto r1 = bound_pointwise_query(AttentionConfig(Potential::gaussian(1), Lookup::identity()), b1, st);
  EXPECT_DOUBLE_EQ(r1.value, 2.0 * 0.3 * 2.0 / 0.5);

  const auto b4 = DomainBox::cube(4, 0.0, 1.0);
  const auto r4 = bound_pointwise_query(AttentionConfig(Potential::gaussian(4), Lookup::identity()), b4, st);
  EXPECT_DOUBLE_EQ(r4.value, 8.0 * (2.0 * 0.3 * 4.0 / 0.5));
  EXPECT_EQ(r4.value, recompute(r4));

  const auto flat = bound_pointwise_query(AttentionConfig(Potential::constant(2), Lookup::identity()),
                                          DomainBox::cube(2, 0.0, 1.0));
  EXPECT_EQ(flat.value, 0.0);
}

TEST(UnboundedGaussian, Examples) {
  const auto one = bound_unbounded_gaussian(Lookup::identity(), 2, 1, 9);
  EXPECT_NEAR(one.ingredient("ratio_lemma"), 0.428881942, 1e-9);
  const double sd = std::sqrt(2.0);
  EXPECT_DOUBLE_EQ(one.value, 2.0 * 2.0 * (1.0 + sd + 2.0 + sd * std::sqrt(1.0 / (2.0 * std::numbers::e)) *
                                                              std::sqrt(2.0 / std::numbers::e)));
  EXPECT_EQ(one.value, recompute(one));

  for (std::size_t d : {1u, 2u, 5u})
    for (std::size_t n : {1u, 2u, 8u, 16u, 1000u}) {
      const double th = bound_unbounded_gaussian(Lookup::identity(), d, n, n).value;
      const double co = bound_unbounded_equal_n(Lookup::identity(), d, n).value;
      EXPECT_NEAR(th, co, 1e-14 * th);
    }

  EXPECT_LE(bound_unbounded_gaussian(Lookup::identity(), 3, 4, 4).value,
            bound_unbounded_gaussian(Lookup::identity(), 3, 16, 16).value);
  EXPECT_EQ(bound_unbounded_gaussian(Lookup::identity(), 3, 4, 30).value,
            bound_unbounded_gaussian(Lookup::identity(), 3, 30, 4).value);
}

TEST(UnboundedGaussian, AffineInRatioLemmaTerm) {
  auto value = [](std::size_t n) { return bound_unbounded_gaussian(Lookup::identity(), 2, n, n).value; };
  auto x = [](std::size_t n) { return ratio_lemma_bound(static_cast<double>(n)); };
  const double slope = (value(100) - value(2)) / (x(100) - x(2));
  EXPECT_NEAR(value(10), value(2) + slope * (x(10) - x(2)), 1e-12 * value(10));
}

TEST(UnboundedGaussian, NumericConstantReported) {
  for (std::size_t d : {1u, 2u, 4u, 8u}) {
    const auto r = bound_unbounded_gaussian(Lookup::identity(), d, 4, 4);
    EXPECT_GT(r.ingredient("C_numeric"), 0.0);
    EXPECT_EQ(r.ingredient("C_verbatim"), std::sqrt(static_cast<double>(d)) + 2.0);
  }
  // d = 1: the constant is max over a >= 0 of 2 (2 + a) a exp(-a^2).
  double best = 0.0;
  for (int i = 0; i <= 1000000; ++i) {
    const double a = 4.0 * i / 1000000.0;
    best = std::max(best, 2.0 * (2.0 + a) * a * std::exp(-a * a));
  }
  EXPECT_NEAR(gaussian_cross_constant(1), best, 1e-9);
}

TEST(CrossAttention, Examples) {
  const auto box = DomainBox::cube(1, -1.0, 1.0);
  const Vec q{0.25};
  EXPECT_EQ(bound_cross_attention(AttentionConfig(Potential::constant(1), Lookup::identity()), box, q).value,
            0.0);
  const auto cfg = AttentionConfig(Potential::dot_product(1, 1.0), Lookup::identity());
  const auto r = bound_cross_attention(cfg, box, q);
  // |G(q,.)|_Lip = max_y e^{qy} |q| = e^{0.25} 0.25, eps = e^{-1}, diam = 2.
  EXPECT_DOUBLE_EQ(r.value, 2.0 * std::exp(0.25) * 0.25 * 2.0 / std::exp(-1.0));
  EXPECT_EQ(r.value, recompute(r));
  const auto big = bound_cross_attention(cfg, DomainBox::cube(1, -2.0, 2.0), q);
  EXPECT_GT(big.value, r.value);
  EXPECT_FALSE(bound_cross_attention(cfg, box, Vec{3.0}).applicable());
}

TEST(RatioLemmaBound, Examples) {
  EXPECT_NEAR(ratio_lemma_bound(1), 0.42888194248, 1e-10);
  EXPECT_NEAR(ratio_lemma_bound(7), std::sqrt(std::log(7.0) + 0.18393972058572117), 1e-15);
  EXPECT_NEAR(ratio_lemma_bound(std::exp(2.0)), std::sqrt(2.18393972058572117), 1e-14);
  for (int n = 1; n < 100; ++n) EXPECT_LT(ratio_lemma_bound(n), ratio_lemma_bound(n + 1));
}

TEST(ComponentTaus, ProductMatchesBoundedTheorem) {
  const auto box = DomainBox::cube(2, -1.0, 1.0);
  const AttentionConfig cfg(Potential::dot_product(2, 0.5), Lookup::linear(Matrix::identity(2, 0.5)));
  const auto st = regularity_stats(cfg.potential, box);
  const auto c = component_taus(cfg, box, st);
  EXPECT_EQ(c.value, bound_bounded_contraction(cfg, box, st).value);
  EXPECT_DOUBLE_EQ(c.ingredient("tau_softmatch"),
            c.ingredient("tau_softmatch_in_x") + c.ingredient("tau_softmatch_in_measure"));
  EXPECT_EQ(c.value, recompute(c));
}
