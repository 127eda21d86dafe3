#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lipattn;

namespace {

// Dot-product attention on [-1.5, 1.5]^2 with a shrunken linear lookup whose
// certified bounded contraction constant is well below 1.
AttentionConfig contractive(double alpha) {
  return AttentionConfig(Potential::dot_product(2, 0.5), Lookup::linear(Matrix::identity(2, alpha)));
}

const DomainBox kDeqBox = DomainBox::cube(2, -1.5, 1.5);

SetMap zero_map() {
  return [](const PointCloud& x) { return PointCloud(x.dim(), std::vector<double>(x.flat().size(), 0.0)); };
}

}  // namespace

TEST(Particles, ZeroStepsKeepsInput) {
  Rng rng(81);
  const auto x = oracle::random_cloud(rng, 5, 2);
  const auto t = run_particles(AttentionConfig(Potential::gaussian(2), Lookup::identity()), x, 0);
  ASSERT_EQ(t.states.size(), 1u);
  EXPECT_EQ(t.states[0], x);
  EXPECT_TRUE(t.per_step_w1.empty());
}

TEST(Particles, ConstantPotentialCollapses) {
  Rng rng(82);
  const auto x = oracle::random_cloud(rng, 6, 3);
  const auto t = run_particles(AttentionConfig(Potential::constant(3), Lookup::identity()), x, 4);
  ASSERT_EQ(t.states.size(), 5u);
  const Vec bar = barycenter(empirical(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(t.states[1].point_vec(i), bar);
  // The first step moves the cloud by W1(m(X), delta_bar) > 0; afterwards nothing moves.
  EXPECT_NEAR(t.per_step_w1[0], w1(empirical(x), dirac(bar)).value, 1e-9);
  for (std::size_t h = 1; h < t.per_step_w1.size(); ++h) EXPECT_EQ(t.per_step_w1[h], 0.0);
}

TEST(Particles, EquivariantAndDeterministic) {
  Rng rng(83);
  const auto x = oracle::random_cloud(rng, 7, 2);
  const auto perm = oracle::random_permutation(rng, 7);
  const AttentionConfig cfg(Potential::dot_product(2, 1.0), Lookup::linear(oracle::random_matrix(rng, 2, 2)));
  const auto a = run_particles(cfg, x, 5);
  const auto b = run_particles(cfg, oracle::permute(x, perm), 5);
  const auto c = run_particles(cfg, x, 5);
  for (std::size_t h = 0; h < a.states.size(); ++h) {
    EXPECT_LE(oracle::max_abs_diff(oracle::permute(a.states[h], perm), b.states[h]), 1e-14);
    EXPECT_EQ(a.states[h], c.states[h]);
  }
  EXPECT_EQ(a.per_step_w1, c.per_step_w1);
}

TEST(Particles, DistinctLayersPerStep) {
  Rng rng(84);
  const auto x = oracle::random_cloud(rng, 4, 2);
  const std::vector<AttentionConfig> layers{
      AttentionConfig(Potential::gaussian(2), Lookup::identity()),
      AttentionConfig(Potential::dot_product(2, 1.0), Lookup::linear(Matrix::identity(2, 0.5)))};
  const auto t = run_particles(layers, x);
  ASSERT_EQ(t.states.size(), 3u);
  EXPECT_EQ(t.states[1], self_attention(layers[0], x));
  EXPECT_EQ(t.states[2], self_attention(layers[1], t.states[1]));
  EXPECT_EQ(t.layer_names.size(), 2u);
}

TEST(Deq, CertifiedConfigIsContractive) {
  const double bound = bound_bounded_contraction(contractive(2e-4), kDeqBox).value;
  EXPECT_LT(bound, 0.9);
}

TEST(Deq, UniqueFixedPointAndGeometricSteps) {
  Rng rng(85);
  const auto cfg = contractive(2e-4);
  const double bound = bound_bounded_contraction(cfg, kDeqBox).value;
  const auto x = oracle::random_cloud(rng, 8, 2);
  const auto a = deq_solve(cfg, x, oracle::random_cloud(rng, 8, 2, -0.2, 0.2), 1e-13, 500);
  const auto b = deq_solve(cfg, x, oracle::random_cloud(rng, 8, 2, -0.2, 0.2), 1e-13, 500);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_LE(sup_l1(a.h_star, b.h_star), 1e-8);
  EXPECT_LE(a.contraction_estimate, bound + 0.05);
  for (std::size_t k = 4; k < a.steps.size(); ++k) {
    if (a.steps[k - 1] > 1e-15) {
      EXPECT_LE(a.steps[k], (a.contraction_estimate + 0.05) * a.steps[k - 1]);
    }
  }
  // Fixed point: H* = g(H* + X).
  EXPECT_LE(sup_l1(a.h_star, self_attention(cfg, add(a.h_star, x))), 1e-12);
}

TEST(Deq, InputInjectionMakesFixedPointDataDependent) {
  Rng rng(86);
  const auto cfg = contractive(2e-4);
  const auto h0 = oracle::random_cloud(rng, 6, 2, -0.1, 0.1);
  const auto a = deq_solve(cfg, oracle::random_cloud(rng, 6, 2), h0, 1e-13, 500);
  const auto b = deq_solve(cfg, oracle::random_cloud(rng, 6, 2), h0, 1e-13, 500);
  EXPECT_GT(sup_l1(a.h_star, b.h_star), 1e-6);
}

TEST(Deq, ZeroMapAndAffineInjection) {
  Rng rng(87);
  const auto x = oracle::random_cloud(rng, 5, 2);
  const auto zero = PointCloud(2, std::vector<double>(10, 0.0));
  const auto r = deq_solve(zero_map(), x, zero, injection::AddInput{}, 1e-12, 10);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.h_star, zero);

  const injection::Affine s{Matrix::identity(2, 2.0), Vec{1.0, -1.0}};
  const auto inj = inject(s, x);
  EXPECT_EQ(inj.point(0)[0], 2.0 * x.point(0)[0] + 1.0);
  const auto a = deq_solve(attention_layer(contractive(2e-4)), x, zero, s, 1e-13, 500);
  EXPECT_TRUE(a.converged);
}

TEST(Deq, NonConvergenceIsReported) {
  Rng rng(88);
  const auto x = oracle::random_cloud(rng, 4, 2);
  // l(k) = 3k on a Gaussian layer: no contraction, and two iterations are not enough.
  const AttentionConfig cfg(Potential::gaussian(2), Lookup::linear(Matrix::identity(2, 3.0)));
  const auto r = deq_solve(cfg, x, oracle::random_cloud(rng, 4, 2), 1e-12, 2);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2u);
  EXPECT_GT(r.residual, 1e-12);
}

TEST(Invert, ZeroMapIsIdentity) {
  Rng rng(89);
  const auto y = oracle::random_cloud(rng, 5, 3);
  const auto r = invert_residual(zero_map(), y, 1e-12, 10);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.x, y);
}

TEST(Invert, RoundTrip) {
  Rng rng(90);
  const AttentionConfig cfg(Potential::dot_product(2, 1.0), Lookup::linear(Matrix::identity(2, 0.1)));
  const auto g = attention_layer(cfg);
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_cloud(rng, 2 + t % 10, 2);
    const auto r = invert_residual(g, residual_forward(g, x), 1e-12, 500);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(sup_l1(r.x, x), 1e-8);
  }
}

TEST(Invert, IterationCountFollowsGeometricRate) {
  Rng rng(91);
  const auto box = DomainBox::cube(2, -1.0, 1.0);
  // Scale the lookup so the sampled set-map constant sits near 0.9.
  const AttentionConfig unit(Potential::dot_product(2, 1.0), Lookup::identity());
  const double lip1 = estimate_set_map_lip(attention_layer(unit), box, 6, 400, 3).estimate;
  const double alpha = 0.9 / lip1;
  const AttentionConfig cfg(Potential::dot_product(2, 1.0), Lookup::linear(Matrix::identity(2, alpha)));
  const auto g = attention_layer(cfg);
  const double lip = estimate_set_map_lip(g, box, 6, 400, 3).estimate;
  EXPECT_NEAR(lip, 0.9, 1e-9);

  const auto x = oracle::random_cloud(rng, 6, 2);
  const auto y = residual_forward(g, x);
  const double tol = 1e-10;
  const auto r = invert_residual(g, y, tol, 5000);
  ASSERT_TRUE(r.converged);
  const double predicted = std::log(tol / r.residuals.front()) / std::log(lip);
  EXPECT_LE(static_cast<double>(r.iterations), 2.0 * predicted);
  EXPECT_GE(static_cast<double>(r.iterations), predicted / 2.0 - 1.0);
  const auto fast = invert_residual(attention_layer(AttentionConfig(Potential::dot_product(2, 1.0),
                                                                    Lookup::linear(Matrix::identity(2, 0.1)))),
                                    y, tol, 5000);
  EXPECT_LT(fast.iterations, r.iterations);
}
