#pragma once

// Randomized checks of the contraction bounds: sampled W1 ratios for the full
// self-attention map and for each component kernel, plus numerical checks of
// the auxiliary lemmas (ratio lemma, product-measure lemma, local Lipschitz
// lemma). Every trial draws from its own stream Rng(seed).split(trial).

#include <algorithm>
#include <optional>

#include "lipattn/bounds.hpp"
#include "lipattn/kernels.hpp"
#include "lipattn/measures.hpp"
#include "lipattn/transport.hpp"

namespace lipattn {

enum class Perturbation { Resample, Jitter, DropPoint, DuplicatePoint, Mixed };

inline const char* to_string(Perturbation p) {
  switch (p) {
    case Perturbation::Resample: return "resample";
    case Perturbation::Jitter: return "jitter";
    case Perturbation::DropPoint: return "drop_point";
    case Perturbation::DuplicatePoint: return "duplicate_point";
    case Perturbation::Mixed: return "mixed";
  }
  return "unknown";
}

struct ProbeConfig {
  std::uint64_t seed = 7;
  std::size_t trials = 1000;
  std::size_t dim = 2;
  std::size_t n_min = 2;
  std::size_t n_max = 16;
  DomainBox domain = DomainBox::unbounded(2);
  double sampling_radius = 5.0;  // used when the domain is unbounded
  Perturbation perturbation = Perturbation::Mixed;
  double jitter_sigma = 0.1;
  bool keep_ratios = true;

  void validate() const {
    if (trials == 0) throw Error(ErrorCode::ConfigError, "trials must be >= 1");
    if (dim == 0) throw Error(ErrorCode::ConfigError, "dim must be >= 1");
    if (n_min == 0 || n_min > n_max) throw Error(ErrorCode::ConfigError, "invalid n_range");
    if (domain.dim() != dim) throw Error(ErrorCode::ConfigError, "domain dim differs from dim");
    if (!(sampling_radius > 0.0)) throw Error(ErrorCode::ConfigError, "sampling radius <= 0");
  }
};

inline constexpr double kDegenerateW1 = 1e-12;
inline constexpr double kViolationTolerance = 1e-7;

struct ProbeResult {
  double max_ratio = 0.0;
  std::optional<double> bound;  // absent when the bound is inapplicable
  std::optional<std::size_t> violations;
  double max_ratio_over_bound = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // W1(mu, nu) < 1e-12
  std::optional<PointCloud> argmax_x;
  std::optional<PointCloud> argmax_y;
  // Largest ratio / bound; replayable from (seed, worst_trial) alone.
  std::optional<std::size_t> worst_trial;
  std::optional<PointCloud> worst_x;
  std::optional<PointCloud> worst_y;
  std::optional<Vec> worst_query;
  double worst_ratio = 0.0;
  double worst_bound = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (q, ratio)
  std::vector<double> ratios;                        // in trial order, when kept
};

inline bool exceeds(double ratio, double bound) {
  return ratio > bound + kViolationTolerance * std::max(1.0, bound);
}

namespace detail {

inline Vec sample_point(Rng& rng, const ProbeConfig& cfg) {
  Vec p(cfg.dim);
  for (std::size_t k = 0; k < cfg.dim; ++k) {
    if (cfg.domain.bounded()) p[k] = rng.uniform(cfg.domain.lower()[k], cfg.domain.upper()[k]);
    else p[k] = rng.uniform(-cfg.sampling_radius, cfg.sampling_radius);
  }
  return p;
}

inline PointCloud sample_cloud(Rng& rng, const ProbeConfig& cfg, std::size_t n) {
  std::vector<double> flat;
  flat.reserve(n * cfg.dim);
  for (std::size_t i = 0; i < n; ++i) {
    Vec p = sample_point(rng, cfg);
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return PointCloud(cfg.dim, std::move(flat));
}

inline std::size_t sample_size(Rng& rng, const ProbeConfig& cfg, std::size_t at_least = 1) {
  const std::size_t lo = std::max(cfg.n_min, at_least);
  const std::size_t hi = std::max(cfg.n_max, lo);
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo),
                                                  static_cast<std::int64_t>(hi)));
}

/// A pair of point clouds drawn according to the perturbation mode.
inline std::pair<PointCloud, PointCloud> sample_pair(Rng& rng, const ProbeConfig& cfg,
                                                     std::size_t trial) {
  Perturbation mode = cfg.perturbation;
  if (mode == Perturbation::Mixed) mode = static_cast<Perturbation>(trial % 4);
  switch (mode) {
    case Perturbation::Resample: {
      PointCloud x = sample_cloud(rng, cfg, sample_size(rng, cfg));
      PointCloud y = sample_cloud(rng, cfg, sample_size(rng, cfg));
      return {std::move(x), std::move(y)};
    }
    case Perturbation::Jitter: {
      PointCloud x = sample_cloud(rng, cfg, sample_size(rng, cfg));
      std::vector<double> flat = x.flat();
      for (std::size_t i = 0; i < x.size(); ++i) {
        Vec p = x.point_vec(i);
        for (auto& c : p) c += cfg.jitter_sigma * rng.normal();
        p = cfg.domain.clamp(p);
        std::copy(p.begin(), p.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * cfg.dim));
      }
      return {std::move(x), PointCloud(cfg.dim, std::move(flat))};
    }
    case Perturbation::DropPoint: {
      PointCloud x = sample_cloud(rng, cfg, sample_size(rng, cfg, 2));
      const auto drop = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1));
      std::vector<double> flat;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (i != drop) flat.insert(flat.end(), x.point(i).begin(), x.point(i).end());
      return {std::move(x), PointCloud(cfg.dim, std::move(flat))};
    }
    case Perturbation::DuplicatePoint:
    default: {
      PointCloud x = sample_cloud(rng, cfg, sample_size(rng, cfg));
      const auto dup = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1));
      std::vector<double> flat = x.flat();
      flat.insert(flat.end(), x.point(dup).begin(), x.point(dup).end());
      return {std::move(x), PointCloud(cfg.dim, std::move(flat))};
    }
  }
}

inline std::vector<std::pair<double, double>> quantiles(std::vector<double> r) {
  std::vector<std::pair<double, double>> out;
  if (r.empty()) return out;
  std::sort(r.begin(), r.end());
  for (double q : {0.5, 0.9, 0.99, 1.0}) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(r.size()))) - 1;
    out.emplace_back(q, r[std::min(idx, r.size() - 1)]);
  }
  return out;
}

// Accumulates ratios against a (possibly per-trial) bound.
struct Aggregator {
  ProbeResult res;
  std::vector<double> all;
  bool has_bound = false;

  void add(std::size_t trial, double ratio, std::optional<double> bound, const PointCloud* x,
           const PointCloud* y, const Vec* q = nullptr) {
    ++res.evaluated;
    all.push_back(ratio);
    if (ratio > res.max_ratio || res.evaluated == 1) {
      res.max_ratio = std::max(res.max_ratio, ratio);
      if (x) res.argmax_x = *x;
      if (y) res.argmax_y = *y;
    }
    if (bound) {
      has_bound = true;
      res.bound = std::max(res.bound.value_or(0.0), *bound);
      double score = 0.0;
      if (*bound > 0) score = ratio / *bound;
      else if (ratio > 0) score = std::numeric_limits<double>::infinity();
      if (!res.worst_trial || score > res.max_ratio_over_bound) {
        res.worst_trial = trial;
        res.worst_x = x ? std::optional<PointCloud>(*x) : std::nullopt;
        res.worst_y = y ? std::optional<PointCloud>(*y) : std::nullopt;
        res.worst_query = q ? std::optional<Vec>(*q) : std::nullopt;
        res.worst_ratio = ratio;
        res.worst_bound = *bound;
      }
      res.max_ratio_over_bound = std::max(res.max_ratio_over_bound, score);
      if (!res.violations) res.violations = 0;
      if (exceeds(ratio, *bound)) ++*res.violations;
    }
  }

  ProbeResult finish(bool keep) {
    res.quantiles = quantiles(all);
    if (keep) res.ratios = std::move(all);
    if (!has_bound) {
      res.bound.reset();
      res.violations.reset();
    }
    return std::move(res);
  }
};

}  // namespace detail

/// mu A_mu for mu = m(X): the self-attention outputs carrying X's weights.
inline EmpiricalMeasure self_attention_measure(const AttentionConfig& cfg, const PointCloud& x) {
  return with_support(empirical(x), self_attention(cfg, x));
}

enum class ProbeTheorem { Bounded, UnboundedGaussian, None };

/// Sampled ratios W1(mu A_mu, nu A_nu) / W1(mu, nu) against the bounded
/// (compact box) or unbounded (Gaussian on R^d) theorem.
inline ProbeResult probe_contraction(const AttentionConfig& cfg, const ProbeConfig& probe,
                                     ProbeTheorem theorem,
                                     const SamplingConfig& sampling = {}) {
  probe.validate();
  if (probe.dim != cfg.key_dim()) throw Error(ErrorCode::DimMismatch, "probe dim != key dim");
  std::optional<double> fixed_bound;
  bool per_trial_bound = false;
  if (theorem == ProbeTheorem::Bounded) {
    const BoundReport r = bound_bounded_contraction(cfg, probe.domain, sampling);
    if (r.applicable()) fixed_bound = r.value;
  } else if (theorem == ProbeTheorem::UnboundedGaussian) {
    per_trial_bound = cfg.potential.is_gaussian();
  }

  detail::Aggregator agg;
  const Rng root(probe.seed);
  for (std::size_t t = 0; t < probe.trials; ++t) {
    Rng rng = root.split(t);
    auto [x, y] = detail::sample_pair(rng, probe, t);
    const double din = w1(empirical(x), empirical(y)).value;
    if (din < kDegenerateW1) {
      ++agg.res.skipped;
      continue;
    }
    const double dout = w1(self_attention_measure(cfg, x), self_attention_measure(cfg, y)).value;
    std::optional<double> bound = fixed_bound;
    if (per_trial_bound)
      bound = bound_unbounded_gaussian(cfg.lookup, probe.dim, x.size(), y.size()).value;
    agg.add(t, dout / din, bound, &x, &y);
  }
  return agg.finish(probe.keep_ratios);
}

enum class Component { SoftmatchInX, SoftmatchInMeasure, Projection, Lookup };

inline const char* to_string(Component c) {
  switch (c) {
    case Component::SoftmatchInX: return "softmatch_in_x";
    case Component::SoftmatchInMeasure: return "softmatch_in_measure";
    case Component::Projection: return "projection";
    case Component::Lookup: return "lookup";
  }
  return "unknown";
}

/// Sampled ratios for a single component kernel against its own constant:
///   softmatch in x:        W1(Psi_x(mu), Psi_y(mu)) / |x - y|_1   <= 2 |G|_{Lip,inf} diam/eps
///   softmatch in measure:  W1(Psi_x(mu), Psi_x(nu)) / W1(mu, nu)  <= 2 |G|_{inf,Lip} diam/eps
///   projection:            W1(Pi mu, Pi nu) / W1(mu, nu)          <= d
///   lookup:                W1(mu L, nu L) / W1(mu, nu)            <= |l|_Lip
inline ProbeResult probe_component(Component kind, const AttentionConfig& cfg,
                                   const ProbeConfig& probe, const SamplingConfig& sampling = {}) {
  probe.validate();
  std::optional<double> bound;
  const bool needs_stats = kind == Component::SoftmatchInX || kind == Component::SoftmatchInMeasure;
  if (needs_stats && probe.domain.bounded()) {
    const RegularityStats st = regularity_stats(cfg.potential, probe.domain, sampling);
    const BoundReport r = component_taus(cfg, probe.domain, st);
    if (r.applicable())
      bound = r.ingredient(kind == Component::SoftmatchInX ? "tau_softmatch_in_x"
                                                           : "tau_softmatch_in_measure");
  } else if (kind == Component::Projection) {
    bound = tau_pi(probe.dim);
  } else if (kind == Component::Lookup) {
    bound = tau_lookup(cfg.lookup);
  }

  detail::Aggregator agg;
  const Rng root(probe.seed);
  for (std::size_t t = 0; t < probe.trials; ++t) {
    Rng rng = root.split(t);
    if (kind == Component::SoftmatchInX) {
      const PointCloud keys = detail::sample_cloud(rng, probe, detail::sample_size(rng, probe));
      const EmpiricalMeasure mu = empirical(keys);
      const Vec x = detail::sample_point(rng, probe);
      Vec y = x;
      if (t % 2 == 0) {
        y = detail::sample_point(rng, probe);
      } else {
        for (auto& c : y) c += probe.jitter_sigma * rng.normal();
        y = probe.domain.clamp(y);
      }
      const double din = dist_l1(x, y);
      if (din < kDegenerateW1) {
        ++agg.res.skipped;
        continue;
      }
      const double dout =
          w1(softmatch_measure(cfg.potential, x, mu), softmatch_measure(cfg.potential, y, mu)).value;
      const PointCloud qs = PointCloud::from_rows({x, y});  // the two queries, as a cloud
      agg.add(t, dout / din, bound, &keys, &qs);
      continue;
    }
    auto [a, b] = detail::sample_pair(rng, probe, t);
    const EmpiricalMeasure mu = empirical(a), nu = empirical(b);
    const double din = w1(mu, nu).value;
    if (din < kDegenerateW1) {
      ++agg.res.skipped;
      continue;
    }
    double dout = 0.0;
    Vec q;
    switch (kind) {
      case Component::SoftmatchInMeasure: {
        q = detail::sample_point(rng, probe);
        dout = w1(softmatch_measure(cfg.potential, q, mu), softmatch_measure(cfg.potential, q, nu)).value;
        break;
      }
      case Component::Projection:
        dout = dist_l1(barycenter(mu), barycenter(nu));
        break;
      case Component::Lookup:
        dout = w1(apply_lookup(cfg.lookup, mu), apply_lookup(cfg.lookup, nu)).value;
        break;
      case Component::SoftmatchInX: break;
    }
    agg.add(t, dout / din, bound, &a, &b, q.empty() ? nullptr : &q);
  }
  return agg.finish(probe.keep_ratios);
}

enum class CrossBound { Stated, Repaired };

/// Cross-attention: |Attention(q,X,X) - Attention(q,Y,Y)|_2 against
/// bound_cross_attention(q) * W1(m(X), m(Y)), or against the repaired
/// constant. Ratios are deviation / W1.
inline ProbeResult probe_cross_attention(const AttentionConfig& cfg, const ProbeConfig& probe,
                                         const SamplingConfig& sampling = {},
                                         CrossBound which = CrossBound::Stated) {
  probe.validate();
  if (!probe.domain.bounded())
    throw Error(ErrorCode::RequiresCompactDomain, "cross-attention probe needs a box");
  const RegularityStats st = regularity_stats(cfg.potential, probe.domain, sampling);
  detail::Aggregator agg;
  const Rng root(probe.seed);
  for (std::size_t t = 0; t < probe.trials; ++t) {
    Rng rng = root.split(t);
    auto [x, y] = detail::sample_pair(rng, probe, t);
    const Vec q = detail::sample_point(rng, probe);
    const double din = w1(empirical(x), empirical(y)).value;
    if (din < kDegenerateW1) {
      ++agg.res.skipped;
      continue;
    }
    const Vec ax = attention_kernel(cfg, q, empirical(x));
    const Vec ay = attention_kernel(cfg, q, empirical(y));
    Vec diff(ax.size());
    for (std::size_t k = 0; k < ax.size(); ++k) diff[k] = ax[k] - ay[k];
    std::optional<double> bound;
    if (which == CrossBound::Repaired) {
      bound = repaired_cross_attention(cfg, probe.domain, q, st, sampling);
    } else {
      const BoundReport r = bound_cross_attention(cfg, probe.domain, q, st, sampling);
      if (r.applicable()) bound = r.value;
    }
    agg.add(t, norm_l2(diff) / din, bound, &x, &y, &q);
  }
  return agg.finish(probe.keep_ratios);
}

// ---------------------------------------------------------------------------
// Ratio lemma: f(z) = sum z_i e^{-z_i^2} / (1 + sum e^{-z_i^2}) <= sqrt(ln n + 1/2e)

struct RatioLemmaRow {
  std::size_t n = 0;
  double max_reduced = 0.0;  // max of the equal-coordinate reduction g
  double max_full = 0.0;     // multi-start coordinate ascent on f in R^n_+
  double bound = 0.0;
  bool within_bound = false;
  bool full_not_above_reduced = false;
};

struct RatioLemmaReport {
  std::vector<RatioLemmaRow> rows;
  bool pass = true;
  double worst_bound_gap = -std::numeric_limits<double>::infinity();  // max(value - bound)
  double worst_excess = -std::numeric_limits<double>::infinity();     // max(full - reduced)
};

namespace detail {

template <typename F>
double golden_max(F&& f, double lo, double hi, double* arg = nullptr) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
    if (fc < fd) {
      a = c; c = d; fc = fd;
      d = a + r * (b - a); fd = f(d);
    } else {
      b = d; d = c; fd = fc;
      c = b - r * (b - a); fc = f(c);
    }
  }
  const double x = fc > fd ? c : d;
  if (arg) *arg = x;
  return std::max(fc, fd);
}

template <typename F>
double grid_then_golden(F&& f, double lo, double hi, std::size_t grid, double* arg = nullptr) {
  grid = std::max<std::size_t>(grid, 3);
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  const double h = (hi - lo) / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i) {
    const double v = f(lo + h * static_cast<double>(i));
    if (v > best_v) { best_v = v; best = i; }
  }
  const double a = lo + h * static_cast<double>(best == 0 ? 0 : best - 1);
  const double b = lo + h * static_cast<double>(std::min(best + 1, grid - 1));
  double x = lo + h * static_cast<double>(best);
  const double v = golden_max(f, a, b, &x);
  if (v >= best_v) {
    if (arg) *arg = x;
    return v;
  }
  if (arg) *arg = lo + h * static_cast<double>(best);
  return best_v;
}

}  // namespace detail

inline double ratio_lemma_f(std::span<const double> z) {
  double num = 0.0, den = 1.0;
  for (double v : z) {
    const double e = std::exp(-v * v);
    num += v * e;
    den += e;
  }
  return num / den;
}

/// max over x >= 0 of n x e^{-x^2} / (1 + n e^{-x^2})
inline double ratio_lemma_reduced_max(std::size_t n, std::size_t grid) {
  const double nn = static_cast<double>(n);
  auto g = [nn](double x) {
    const double e = std::exp(-x * x);
    return nn * x * e / (1.0 + nn * e);
  };
  return detail::grid_then_golden(g, 0.0, std::sqrt(std::log(nn)) + 4.0, grid);
}

/// Multi-start coordinate ascent on the full n-dimensional f.
inline double ratio_lemma_full_max(std::size_t n, std::size_t restarts, Rng rng,
                                   std::size_t max_sweeps = 60) {
  double best = 0.0;
  const double hi = std::sqrt(std::log(static_cast<double>(n)) + 1.0) + 4.0;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Vec z(n);
    for (auto& v : z) v = rng.uniform(0.0, hi);
    double num = 0.0, den = 1.0;
    for (double v : z) {
      const double e = std::exp(-v * v);
      num += v * e;
      den += e;
    }
    double value = num / den;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      const double before = value;
      for (std::size_t i = 0; i < n; ++i) {
        const double ei = std::exp(-z[i] * z[i]);
        const double a = num - z[i] * ei, b = den - ei;
        auto h = [a, b](double t) {
          const double e = std::exp(-t * t);
          return (a + t * e) / (b + e);
        };
        double arg = z[i];
        const double v = detail::grid_then_golden(h, 0.0, hi, 16, &arg);
        if (v > value) {
          z[i] = arg;
          const double e = std::exp(-arg * arg);
          num = a + arg * e;
          den = b + e;
          value = num / den;
        }
      }
      if (value - before < 1e-15) break;
    }
    best = std::max(best, ratio_lemma_f(z));
  }
  return best;
}

inline RatioLemmaReport check_ratio_lemma(std::size_t n_max, std::size_t grid = 2048,
                                          std::size_t restarts = 2, std::uint64_t seed = 1) {
  RatioLemmaReport rep;
  const Rng root(seed);
  for (std::size_t n = 1; n <= n_max; ++n) {
    RatioLemmaRow row;
    row.n = n;
    row.bound = ratio_lemma_bound(static_cast<double>(n));
    row.max_reduced = ratio_lemma_reduced_max(n, grid);
    row.max_full = ratio_lemma_full_max(n, restarts, root.split(n));
    row.within_bound = std::max(row.max_reduced, row.max_full) <= row.bound + 1e-9;
    row.full_not_above_reduced = row.max_full <= row.max_reduced + 1e-6;
    rep.pass = rep.pass && row.within_bound && row.full_not_above_reduced;
    rep.worst_bound_gap =
        std::max(rep.worst_bound_gap, std::max(row.max_reduced, row.max_full) - row.bound);
    rep.worst_excess = std::max(rep.worst_excess, row.max_full - row.max_reduced);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Product-measure lemma: W1(mu1 (x) mu2, nu1 (x) nu2) <= W1(mu1, nu1) + W1(mu2, nu2)

struct ProductLemmaReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // lhs - rhs
  double mean_tightness = 0.0;                                    // mean lhs / rhs
  bool pass = true;
};

inline EmpiricalMeasure random_measure(Rng& rng, std::size_t n, std::size_t d, bool uniform,
                                       double radius = 2.0) {
  std::vector<double> flat(n * d);
  for (auto& c : flat) c = rng.uniform(-radius, radius);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (!uniform) {
    double s = 0.0;
    for (auto& v : w) s += (v = 0.05 + rng.uniform());
    for (auto& v : w) v /= s;
  }
  return EmpiricalMeasure(PointCloud(d, std::move(flat)), std::move(w));
}

inline ProductLemmaReport check_product_lemma(std::size_t trials, std::size_t max_size = 4,
                                              std::uint64_t seed = 3) {
  ProductLemmaReport rep;
  const Rng root(seed);
  double tight_sum = 0.0;
  std::size_t tight_n = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.split(t);
    auto size = [&] { return static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_size))); };
    const auto d1 = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto d2 = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const bool uniform = t % 2 == 0;
    const auto mu1 = random_measure(rng, size(), d1, uniform);
    const auto nu1 = random_measure(rng, size(), d1, uniform);
    const auto mu2 = random_measure(rng, size(), d2, uniform);
    const auto nu2 = random_measure(rng, size(), d2, uniform);
    const ProductW1 r = w1_product(mu1, nu1, mu2, nu2);
    const double rhs = r.first + r.second;
    rep.max_excess = std::max(rep.max_excess, r.product - rhs);
    if (r.product > rhs + 1e-9) ++rep.violations;
    if (rhs > 0) {
      tight_sum += r.product / rhs;
      ++tight_n;
    }
    ++rep.trials;
  }
  rep.mean_tightness = tight_n ? tight_sum / static_cast<double>(tight_n) : 0.0;
  rep.pass = rep.violations == 0;
  return rep;
}

// ---------------------------------------------------------------------------
// Local Lipschitz lemma: the l1 seminorm is already attained on pairs with
// |x - y|_1 <= 1.

/// f(x) = sum_k alpha_k |x_k - t_k| + beta_k x_k; its l1 seminorm is
/// max_k (alpha_k + |beta_k|) for alpha_k >= 0.
struct SeparablePl {
  Vec alpha, kink, beta;
  double operator()(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += alpha[k] * std::abs(x[k] - kink[k]) + beta[k] * x[k];
    return s;
  }
  double seminorm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) s = std::max(s, alpha[k] + std::abs(beta[k]));
    return s;
  }
};

/// Sampled l1 seminorm of f on [-r, r]^d. With max_step > 0, only pairs with
/// |x - y|_1 <= max_step are used.
template <typename F>
double estimate_seminorm(const F& f, std::size_t d, double radius, std::size_t samples, Rng& rng,
                         double max_step = 0.0) {
  double best = 0.0;
  Vec x(d), y(d);
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& c : x) c = rng.uniform(-radius, radius);
    if (s % 2 == 0) {
      // Axis-aligned displacement: the extreme directions of the l1 ball.
      y = x;
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(d) - 1));
      const double len = max_step > 0 ? max_step * rng.uniform() : 2.0 * radius * rng.uniform();
      y[k] += rng.uniform() < 0.5 ? -len : len;
    } else {
      for (auto& c : y) c = rng.uniform(-radius, radius);
      if (max_step > 0) {
        const double l1 = dist_l1(x, y);
        if (l1 > max_step) {
          const double shrink = max_step * rng.uniform() / l1;
          for (std::size_t k = 0; k < d; ++k) y[k] = x[k] + shrink * (y[k] - x[k]);
        }
      }
    }
    const double dist = dist_l1(x, y);
    if (dist <= 0.0) continue;
    best = std::max(best, std::abs(f(x) - f(y)) / dist);
  }
  return best;
}

struct LocalLipReport {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_rel_error_unrestricted = 0.0;
  double max_rel_error_restricted = 0.0;
  bool pass = true;
};

inline LocalLipReport check_local_lip_lemma(std::size_t trials, std::size_t samples = 100000,
                                            std::uint64_t seed = 5, double rel_tol = 1e-2) {
  LocalLipReport rep;
  const Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.split(t);
    const auto d = static_cast<std::size_t>(rng.uniform_int(1, 4));
    SeparablePl f{Vec(d), Vec(d), Vec(d)};
    const int family = static_cast<int>(t % 3);  // 0: general, 1: affine, 2: constant
    for (std::size_t k = 0; k < d; ++k) {
      f.alpha[k] = family == 0 ? rng.uniform(0.0, 2.0) : 0.0;
      f.kink[k] = rng.uniform(-1.0, 1.0);
      f.beta[k] = family == 2 ? 0.0 : rng.uniform(-2.0, 2.0);
    }
    const double truth = f.seminorm();
    Rng r1 = rng.split(1), r2 = rng.split(2);
    const double full = estimate_seminorm(f, d, 2.0, samples, r1);
    const double local = estimate_seminorm(f, d, 2.0, samples, r2, 1.0);
    auto rel = [truth](double est) {
      return truth > 0 ? std::abs(est - truth) / truth : std::abs(est);
    };
    rep.max_rel_error_unrestricted = std::max(rep.max_rel_error_unrestricted, rel(full));
    rep.max_rel_error_restricted = std::max(rep.max_rel_error_restricted, rel(local));
    if (rel(full) > rel_tol || rel(local) > rel_tol) ++rep.failures;
    ++rep.trials;
  }
  rep.pass = rep.failures == 0;
  return rep;
}

}  // namespace lipattn
