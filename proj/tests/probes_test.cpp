#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lipattn;

namespace {

ProbeConfig boxed(std::size_t d, std::size_t trials, std::uint64_t seed = 7) {
  ProbeConfig p;
  p.dim = d;
  p.trials = trials;
  p.seed = seed;
  p.domain = DomainBox::cube(d, -1.0, 1.0);
  p.n_max = 8;
  return p;
}

}  // namespace

TEST(ProbeContraction, ConstantPotentialCollapsesToBarycenter) {
  for (std::size_t d : {1u, 2u, 3u}) {
    const AttentionConfig cfg(Potential::constant(d), Lookup::identity());
    const auto r = probe_contraction(cfg, boxed(d, 300), ProbeTheorem::None);
    EXPECT_LE(r.max_ratio, tau_pi(d) + 1e-12);
    EXPECT_GT(r.max_ratio, 0.0);
    EXPECT_FALSE(r.bound.has_value());
  }
}

// A constant potential has zero Lipschitz seminorms, so the bounded theorem
// evaluates to 0, yet self-attention still moves every point to the input
// barycenter and the sampled ratios are positive. The bound is therefore not
// valid for (near-)constant potentials; the probe reports the violations.
TEST(ProbeContraction, ConstantPotentialExceedsZeroBound) {
  const AttentionConfig cfg(Potential::constant(2), Lookup::identity());
  const auto r = probe_contraction(cfg, boxed(2, 100), ProbeTheorem::Bounded);
  ASSERT_TRUE(r.bound.has_value());
  EXPECT_EQ(*r.bound, 0.0);
  EXPECT_GT(*r.violations, 0u);
}

TEST(ProbeContraction, IdenticalMeasuresAreSkipped) {
  const AttentionConfig cfg(Potential::gaussian(2), Lookup::identity());
  auto p = boxed(2, 20);
  p.perturbation = Perturbation::Jitter;
  p.jitter_sigma = 0.0;
  const auto r = probe_contraction(cfg, p, ProbeTheorem::Bounded);
  EXPECT_EQ(r.skipped, 20u);
  EXPECT_EQ(r.evaluated, 0u);
}

TEST(ProbeContraction, UnboundedGaussianHasNoViolations) {
  const AttentionConfig cfg(Potential::gaussian(2), Lookup::identity());
  ProbeConfig p;
  p.dim = 2;
  p.trials = 1000;
  p.n_min = p.n_max = 8;
  p.sampling_radius = 5.0;
  const auto r = probe_contraction(cfg, p, ProbeTheorem::UnboundedGaussian);
  ASSERT_TRUE(r.violations.has_value());
  EXPECT_EQ(*r.violations, 0u);
  EXPECT_LE(r.max_ratio, bound_unbounded_gaussian(Lookup::identity(), 2, 8, 8).value);
}

TEST(ProbeContraction, BoundedTheoremHoldsForGaussianAndDotProduct) {
  for (std::size_t d : {1u, 2u}) {
    for (const auto& g : {Potential::gaussian(d), Potential::dot_product(d, 1.0)}) {
      const AttentionConfig cfg(g, Lookup::identity());
      const auto r = probe_contraction(cfg, boxed(d, 300), ProbeTheorem::Bounded);
      ASSERT_TRUE(r.violations.has_value());
      EXPECT_EQ(*r.violations, 0u) << g.name() << " d=" << d;
      EXPECT_LT(r.max_ratio_over_bound, 1.0);
    }
  }
}

TEST(ProbeContraction, BitReproducibleAndMonotoneInTrials) {
  const AttentionConfig cfg(Potential::gaussian(2), Lookup::identity());
  const auto a = probe_contraction(cfg, boxed(2, 120, 99), ProbeTheorem::Bounded);
  const auto b = probe_contraction(cfg, boxed(2, 120, 99), ProbeTheorem::Bounded);
  EXPECT_EQ(a.ratios, b.ratios);
  EXPECT_EQ(a.max_ratio, b.max_ratio);
  double prev = 0.0;
  for (std::size_t t : {10u, 40u, 80u, 120u}) {
    const auto r = probe_contraction(cfg, boxed(2, t, 99), ProbeTheorem::Bounded);
    EXPECT_GE(r.max_ratio, prev);
    prev = r.max_ratio;
    // Each prefix reproduces the first ratios of the longer run.
    for (std::size_t i = 0; i < r.ratios.size(); ++i) EXPECT_EQ(r.ratios[i], a.ratios[i]);
  }
  EXPECT_EQ(prev, a.max_ratio);
}

TEST(ProbeComponent, ProjectionInOneDimension) {
  const AttentionConfig cfg(Potential::gaussian(1), Lookup::identity());
  const auto r = probe_component(Component::Projection, cfg, boxed(1, 300));
  EXPECT_EQ(*r.bound, 1.0);
  EXPECT_EQ(*r.violations, 0u);
  EXPECT_LE(r.max_ratio, 1.0 + 1e-12);
}

TEST(ProbeComponent, LookupScaling) {
  const AttentionConfig cfg(Potential::gaussian(2), Lookup::linear(Matrix::identity(2, 2.0)));
  auto p = boxed(2, 200);
  const auto r = probe_component(Component::Lookup, cfg, p);
  EXPECT_LE(r.max_ratio, 2.0 + 1e-9);
  EXPECT_EQ(*r.violations, 0u);
  // Dirac pairs give exactly 2.
  p.n_min = p.n_max = 1;
  p.perturbation = Perturbation::Resample;
  const auto diracs = probe_component(Component::Lookup, cfg, p);
  EXPECT_NEAR(diracs.max_ratio, 2.0, 1e-9);
  EXPECT_NEAR(diracs.quantiles.front().second, 2.0, 1e-9);
}

TEST(ProbeComponent, SoftmatchInXWithConstantPotentialIsZero) {
  const AttentionConfig cfg(Potential::constant(2), Lookup::identity());
  const auto r = probe_component(Component::SoftmatchInX, cfg, boxed(2, 100));
  EXPECT_EQ(r.max_ratio, 0.0);
}

TEST(ProbeComponent, SoftmatchBoundsHold) {
  for (const auto& g : {Potential::gaussian(2), Potential::dot_product(2, 1.0)}) {
    const AttentionConfig cfg(g, Lookup::identity());
    for (auto kind : {Component::SoftmatchInX, Component::SoftmatchInMeasure}) {
      const auto r = probe_component(kind, cfg, boxed(2, 200));
      ASSERT_TRUE(r.bound.has_value());
      EXPECT_EQ(*r.violations, 0u) << to_string(kind);
    }
  }
}

// With G == 1 the softmatch step is the identity on measures, so its
// contraction coefficient in the measure argument is 1, while the per-component
// constant 2 |G|_{inf,Lip} diam / eps evaluates to 0.
TEST(ProbeComponent, SoftmatchInMeasureConstantPotentialCounterexample) {
  const AttentionConfig cfg(Potential::constant(2), Lookup::identity());
  const auto r = probe_component(Component::SoftmatchInMeasure, cfg, boxed(2, 50));
  EXPECT_EQ(*r.bound, 0.0);
  EXPECT_NEAR(r.max_ratio, 1.0, 1e-9);
}

TEST(CompositionLaw, LinearLookupsThroughProjection) {
  // Phi = L2 o Pi o L1 on measures, with exactly known component constants.
  Rng rng(61);
  const auto w1m = oracle::random_matrix(rng, 2, 2), w2m = oracle::random_matrix(rng, 2, 2);
  const Lookup l1 = Lookup::linear(w1m), l2 = Lookup::linear(w2m);
  const double product = l1.lip() * tau_pi(2) * l2.lip();
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const auto mu = random_measure(rng, 1 + t % 6, 2, t % 2 == 0, 1.0);
    const auto nu = random_measure(rng, 1 + t % 5, 2, false, 1.0);
    auto phi = [&](const EmpiricalMeasure& m) { return apply_lookup(l2, project_dirac(apply_lookup(l1, m))); };
    const double din = w1(mu, nu).value;
    if (din < 1e-12) continue;
    worst = std::max(worst, w1(phi(mu), phi(nu)).value / din);
  }
  EXPECT_LE(worst, product + 1e-9);
}

// The stated constant is not valid in general (see the next test), but these
// two potentials on [-1,1]^2 stay well inside it.
TEST(CrossAttentionProbe, StatedBoundHoldsOnTheseSamples) {
  for (const auto& g : {Potential::gaussian(2), Potential::dot_product(2, 0.7)}) {
    const AttentionConfig cfg(g, Lookup::identity());
    const auto r = probe_cross_attention(cfg, boxed(2, 200));
    ASSERT_TRUE(r.violations.has_value());
    EXPECT_EQ(*r.violations, 0u);
  }
}

TEST(CrossAttentionProbe, WorstInstanceReplaysAndRepairedBoundHolds) {
  // One-dimensional dot product: for q near 0 the slice G(q, .) is almost
  // flat, its Lipschitz constant (and the stated bound) nearly vanishes, yet
  // the output still moves with the key barycenter.
  const AttentionConfig cfg(Potential::dot_product(1, 1.0), Lookup::identity());
  const ProbeConfig p = boxed(1, 1000);
  const auto stated = probe_cross_attention(cfg, p);
  ASSERT_TRUE(stated.worst_trial && stated.worst_x && stated.worst_y && stated.worst_query);
  EXPECT_GT(*stated.violations, 0u);
  EXPECT_GT(stated.worst_ratio, stated.worst_bound);

  const Vec ax = attention_kernel(cfg, *stated.worst_query, empirical(*stated.worst_x));
  const Vec ay = attention_kernel(cfg, *stated.worst_query, empirical(*stated.worst_y));
  const double replay = std::abs(ax[0] - ay[0]) / w1(*stated.worst_x, *stated.worst_y).value;
  EXPECT_NEAR(replay, stated.worst_ratio, 1e-12 * stated.worst_ratio);

  const auto repaired = probe_cross_attention(cfg, p, {}, CrossBound::Repaired);
  EXPECT_EQ(*repaired.violations, 0u);
}

TEST(RatioLemma, SmallN) {
  const auto rep = check_ratio_lemma(50, 2048, 2, 3);
  EXPECT_TRUE(rep.pass);
  // n = 1: max of z e^{-z^2} / (1 + e^{-z^2}) by a fine grid.
  double best = 0.0;
  for (int i = 0; i <= 2000000; ++i) {
    const double z = 4.0 * i / 2000000.0;
    best = std::max(best, z * std::exp(-z * z) / (1 + std::exp(-z * z)));
  }
  EXPECT_NEAR(rep.rows[0].max_reduced, best, 1e-10);
  EXPECT_LE(rep.rows[0].max_reduced, 0.42888194248 + 1e-9);
  for (const auto& row : rep.rows) EXPECT_NEAR(row.max_full, row.max_reduced, 1e-6) << row.n;
}

TEST(RatioLemma, LargeN) {
  const double m = ratio_lemma_reduced_max(1000, 4096);
  EXPECT_LE(m, std::sqrt(std::log(1000.0) + 1.0 / (2.0 * std::numbers::e)));
  const double full = ratio_lemma_full_max(1000, 1, Rng(4));
  EXPECT_LE(full, m + 1e-6);
  EXPECT_NEAR(full, m, 1e-6);
}

TEST(ProductLemma, Holds) {
  const auto rep = check_product_lemma(200, 4, 9);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.max_excess, 1e-9);
  EXPECT_GT(rep.mean_tightness, 0.0);
  EXPECT_LE(rep.mean_tightness, 1.0 + 1e-9);
}

TEST(LocalLipLemma, KnownSeminorms) {
  Rng rng(71);
  auto cone = [](std::span<const double> x) { return norm_l1(x); };
  Rng r1 = rng.split(1), r2 = rng.split(2);
  EXPECT_NEAR(estimate_seminorm(cone, 3, 2.0, 20000, r1), 1.0, 1e-9);
  EXPECT_NEAR(estimate_seminorm(cone, 3, 2.0, 20000, r2, 1.0), 1.0, 1e-9);

  const Vec g{0.5, -1.5, 0.25};
  auto affine = [&](std::span<const double> x) { return dot(g, x) + 4.0; };
  Rng r3 = rng.split(3), r4 = rng.split(4);
  EXPECT_NEAR(estimate_seminorm(affine, 3, 2.0, 20000, r3), 1.5, 1e-9);
  EXPECT_NEAR(estimate_seminorm(affine, 3, 2.0, 20000, r4, 1.0), 1.5, 1e-9);

  auto constant = [](std::span<const double>) { return 2.0; };
  Rng r5 = rng.split(5);
  EXPECT_EQ(estimate_seminorm(constant, 2, 2.0, 1000, r5, 1.0), 0.0);

  const auto rep = check_local_lip_lemma(30, 20000, 5);
  EXPECT_TRUE(rep.pass) << rep.max_rel_error_unrestricted << " " << rep.max_rel_error_restricted;
}
