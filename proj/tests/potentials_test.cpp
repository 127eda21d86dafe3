#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lipattn;

TEST(Evaluate, Examples) {
  const auto gauss = Potential::gaussian(2);
  EXPECT_EQ(gauss.evaluate(Vec{0.3, -1.0}, Vec{0.3, -1.0}), 1.0);
  EXPECT_NEAR(Potential::gaussian(1).evaluate(Vec{0.0}, Vec{1.0}), 0.367879441171, 1e-12);
  const auto dp = Potential::dot_product(2, 1.0 / std::sqrt(2.0));
  EXPECT_NEAR(dp.evaluate(Vec{1.0, 0.0}, Vec{1.0, 0.0}), 2.0281149816, 1e-9);
}

TEST(Evaluate, ErrorsOnOverflowAndDimension) {
  const auto dp = Potential::dot_product(1, 1.0);
  EXPECT_THROW(dp.evaluate(Vec{30.0}, Vec{30.0}), Error);  // a = 900 > 709
  EXPECT_THROW(dp.evaluate(Vec{1.0, 2.0}, Vec{1.0}), Error);
  try {
    dp.evaluate(Vec{30.0}, Vec{30.0});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PotentialOverflow);
  }
}

TEST(Evaluate, Symmetry) {
  Rng rng(21);
  const auto gauss = Potential::gaussian(3);
  const auto w = oracle::random_matrix(rng, 3, 3);
  const auto tied = Potential::scaled_dot_product(w, w, 0.7);
  for (int t = 0; t < 200; ++t) {
    const Vec x = oracle::random_cloud(rng, 1, 3).point_vec(0);
    const Vec y = oracle::random_cloud(rng, 1, 3).point_vec(0);
    EXPECT_EQ(gauss.evaluate(x, y), gauss.evaluate(y, x));
    EXPECT_NEAR(tied.evaluate(x, y), tied.evaluate(y, x), 1e-15 * tied.evaluate(x, y));
    EXPECT_GT(gauss.evaluate(x, y), 0.0);
  }
}

TEST(Regularity, GaussianClosedForms) {
  const auto st = regularity_stats(Potential::gaussian(2), DomainBox::cube(2, 0.0, 1.0));
  EXPECT_EQ(st.sup_G.value, 1.0);
  EXPECT_NEAR(st.lip_left.value, 0.857763884960707, 1e-12);
  EXPECT_EQ(st.eps_G.value, std::exp(-2.0));
  EXPECT_EQ(st.lip_left.provenance.kind, ProvenanceKind::AnalyticUpperBound);

  // 1-d maximization oracle for 2t exp(-t^2).
  double best = 0.0;
  for (int i = 0; i <= 2000000; ++i) {
    const double t = 3.0 * i / 2000000.0;
    best = std::max(best, 2.0 * t * std::exp(-t * t));
  }
  EXPECT_NEAR(best, gaussian_gradient_bound(), 1e-11);

  const auto unb = regularity_stats(Potential::gaussian(2), DomainBox::unbounded(2));
  EXPECT_EQ(unb.eps_G.value, 0.0);
}

TEST(Regularity, DotProductCornersOnSquare) {
  const auto box = DomainBox::cube(2, -1.0, 1.0);
  const auto st = regularity_stats(Potential::dot_product(2, 1.0), box);
  EXPECT_DOUBLE_EQ(st.eps_G.value, std::exp(-2.0));
  EXPECT_DOUBLE_EQ(st.sup_G.value, std::exp(2.0));

  // Corner enumeration oracle over both arguments.
  double lo = 1e300, hi = -1e300;
  for (int mx = 0; mx < 4; ++mx)
    for (int my = 0; my < 4; ++my) {
      const Vec x{mx & 1 ? 1.0 : -1.0, mx & 2 ? 1.0 : -1.0};
      const Vec y{my & 1 ? 1.0 : -1.0, my & 2 ? 1.0 : -1.0};
      lo = std::min(lo, dot(x, y));
      hi = std::max(hi, dot(x, y));
    }
  EXPECT_EQ(std::log(st.eps_G.value), lo);
  EXPECT_EQ(std::log(st.sup_G.value), hi);
}

TEST(Regularity, BilinearSeminormBoundDominatesSampling) {
  Rng rng(22);
  const auto box = DomainBox::cube(2, -1.0, 1.0);
  const auto g = Potential::scaled_dot_product(oracle::random_matrix(rng, 2, 2),
                                               oracle::random_matrix(rng, 2, 2), 0.8);
  const auto st = regularity_stats(g, box);
  SamplingConfig cfg;
  cfg.n_pairs = 20000;
  const double sampled_left = estimate_lipschitz(g, box, LipArgument::Left, cfg);
  const double sampled_right = estimate_lipschitz(g, box, LipArgument::Right, cfg);
  EXPECT_LE(sampled_left, st.lip_left.value * (1 + 1e-12));
  EXPECT_LE(sampled_right, st.lip_right.value * (1 + 1e-12));
  EXPECT_GT(sampled_left, 0.2 * st.lip_left.value);
}

TEST(Regularity, SampledGaussianNeverExceedsAnalytic) {
  const auto box = DomainBox::cube(2, -1.5, 1.5);
  SamplingConfig cfg;
  cfg.n_pairs = 20000;
  std::vector<LipSample> trace;
  const auto g = Potential::gaussian(2);
  const double est = estimate_lipschitz(g, box, LipArgument::Left, cfg, &trace);
  const double analytic = regularity_stats(g, box).lip_joint.value;
  EXPECT_LE(est, analytic);
  EXPECT_GT(est, 0.95 * analytic);  // the max of |grad|_inf is attained on an axis
  ASSERT_FALSE(trace.empty());
  for (const auto& s : trace) EXPECT_LE(s.delta_g, est * s.displacement + 1e-9);
}

TEST(Regularity, CustomPotentialIsSampledAndFlagged) {
  const auto box = DomainBox::cube(1, -1.0, 1.0);
  const auto g = Potential::custom(1, {[](std::span<const double> x, std::span<const double> y) {
                                         return 0.5 * std::sin(x[0] - y[0]);
                                       },
                                       "sine"});
  SamplingConfig cfg;
  cfg.n_pairs = 5000;
  const auto st = regularity_stats(g, box, cfg);
  EXPECT_EQ(st.lip_left.provenance.kind, ProvenanceKind::Sampled);
  EXPECT_EQ(st.lip_left.provenance.seed, cfg.seed);
  EXPECT_THROW(regularity_stats(g, DomainBox::unbounded(1)), Error);
  // G = exp(0.5 sin(x - y)); max |dG/dx| = 0.5 max cos(t) exp(0.5 sin t) over |t| <= 2.
  double truth = 0.0;
  for (int i = 0; i <= 400000; ++i) {
    const double t = -2.0 + 4.0 * i / 400000.0;
    truth = std::max(truth, std::abs(0.5 * std::cos(t) * std::exp(0.5 * std::sin(t))));
  }
  EXPECT_LE(st.lip_left.value, truth + 1e-9);
  EXPECT_GT(st.lip_left.value, 0.98 * truth);
}

TEST(Regularity, ConstantPotential) {
  const auto st = regularity_stats(Potential::constant(2), DomainBox::cube(2, 0.0, 1.0));
  EXPECT_EQ(st.lip_left.value, 0.0);
  EXPECT_EQ(st.lip_right.value, 0.0);
  EXPECT_EQ(st.eps_G.value, 1.0);
}
