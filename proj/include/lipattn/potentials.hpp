#pragma once

// Interaction potentials G(x, y) = exp(a(x, y)) and their regularity
// constants on a domain E: inf/sup of G and Lipschitz seminorms in each
// argument. All seminorms are with respect to the l1 metric on R^d.

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <variant>

#include "lipattn/core.hpp"
#include "lipattn/measures.hpp"

namespace lipattn {

/// Largest similarity whose exponential is a finite double.
inline constexpr double kMaxExponent = 709.0;

namespace potential_kind {

/// a(x, y) = scale * <x, y>
struct DotProduct {
  double scale = 1.0;
};

/// a(x, y) = scale * <W_Q x, W_K y>
struct ScaledDotProduct {
  Matrix w_q;
  Matrix w_k;
  double scale = 1.0;
};

/// G(x, y) = exp(-|x - y|_2^2)
struct Gaussian {};

struct Custom {
  std::function<double(std::span<const double>, std::span<const double>)> similarity;
  std::string name = "custom";
};

}  // namespace potential_kind

class Potential {
 public:
  using Kind = std::variant<potential_kind::DotProduct, potential_kind::ScaledDotProduct,
                            potential_kind::Gaussian, potential_kind::Custom>;

  Potential(std::size_t dim, Kind kind) : dim_(dim), kind_(std::move(kind)) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidInput, "potential dimension must be >= 1");
    if (auto* s = std::get_if<potential_kind::ScaledDotProduct>(&kind_)) {
      if (s->w_q.cols() != dim_ || s->w_k.cols() != dim_ || s->w_q.rows() != s->w_k.rows())
        throw Error(ErrorCode::DimMismatch, "W_Q and W_K must both be d' x d");
    }
    if (auto* c = std::get_if<potential_kind::Custom>(&kind_); c && !c->similarity)
      throw Error(ErrorCode::InvalidInput, "custom potential without a similarity");
  }

  static Potential gaussian(std::size_t dim) { return {dim, potential_kind::Gaussian{}}; }
  static Potential dot_product(std::size_t dim, double scale) {
    return {dim, potential_kind::DotProduct{scale}};
  }
  static Potential scaled_dot_product(Matrix w_q, Matrix w_k, double scale) {
    const std::size_t d = w_q.cols();
    return {d, potential_kind::ScaledDotProduct{std::move(w_q), std::move(w_k), scale}};
  }
  static Potential custom(std::size_t dim, potential_kind::Custom c) { return {dim, std::move(c)}; }
  /// a == 0, i.e. G == 1: every query attends uniformly.
  static Potential constant(std::size_t dim) {
    return custom(dim, {[](std::span<const double>, std::span<const double>) { return 0.0; },
                        "constant"});
  }

  std::size_t dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }
  bool is_gaussian() const noexcept { return std::holds_alternative<potential_kind::Gaussian>(kind_); }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, potential_kind::DotProduct>) return "dot_product";
          else if constexpr (std::is_same_v<K, potential_kind::ScaledDotProduct>)
            return "scaled_dot_product";
          else if constexpr (std::is_same_v<K, potential_kind::Gaussian>) return "gaussian";
          else return k.name;
        },
        kind_);
  }

  /// M with a(x, y) = x^T M y, when the similarity is bilinear.
  std::optional<Matrix> bilinear_form() const {
    if (auto* k = std::get_if<potential_kind::DotProduct>(&kind_))
      return Matrix::identity(dim_, k->scale);
    if (auto* k = std::get_if<potential_kind::ScaledDotProduct>(&kind_))
      return (k->w_q.transpose() * k->w_k).scaled(k->scale);
    return std::nullopt;
  }

  /// The similarity a(x, y) = log G(x, y).
  double similarity(std::span<const double> x, std::span<const double> y) const {
    if (x.size() != dim_ || y.size() != dim_)
      throw Error(ErrorCode::DimMismatch, "potential evaluated on wrong dimension");
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, potential_kind::DotProduct>) {
            return k.scale * dot(x, y);
          } else if constexpr (std::is_same_v<K, potential_kind::ScaledDotProduct>) {
            const Vec qx = k.w_q.apply(x);
            const Vec ky = k.w_k.apply(y);
            return k.scale * dot(qx, ky);
          } else if constexpr (std::is_same_v<K, potential_kind::Gaussian>) {
            return -dist_l2_squared(x, y);
          } else {
            return k.similarity(x, y);
          }
        },
        kind_);
  }

  /// G(x, y) > 0. Throws PotentialOverflow rather than returning inf.
  double evaluate(std::span<const double> x, std::span<const double> y) const {
    const double a = similarity(x, y);
    if (std::isnan(a)) throw Error(ErrorCode::InvalidInput, "similarity is NaN");
    if (a > kMaxExponent)
      throw Error(ErrorCode::PotentialOverflow,
                  "a(x,y) = " + std::to_string(a) + " at x=" + format_point(x) +
                      ", y=" + format_point(y));
    return std::exp(a);
  }

 private:
  static std::string format_point(std::span<const double> p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(p[i]);
    }
    return s + ")";
  }

  std::size_t dim_;
  Kind kind_;
};

// ---------------------------------------------------------------------------
// Regularity statistics

enum class ProvenanceKind {
  Analytic,            // exact closed form
  AnalyticUpperBound,  // closed-form bound, valid but possibly loose
  Sampled,             // estimate from sampling; a lower bound for sups
  DataEmpirical,       // extremum over the given data points only
  UserSupplied,
};

inline const char* to_string(ProvenanceKind k) {
  switch (k) {
    case ProvenanceKind::Analytic: return "analytic";
    case ProvenanceKind::AnalyticUpperBound: return "analytic-upper-bound";
    case ProvenanceKind::Sampled: return "sampled";
    case ProvenanceKind::DataEmpirical: return "data-empirical";
    case ProvenanceKind::UserSupplied: return "user-supplied";
  }
  return "unknown";
}

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::Analytic;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string note;
};

struct Quantity {
  double value = 0.0;
  Provenance provenance;
};

struct RegularityStats {
  Quantity eps_G;      // inf of G on E x E
  Quantity sup_G;      // sup of G on E x E
  Quantity lip_left;   // sup_y |G(., y)|_Lip
  Quantity lip_right;  // sup_x |G(x, .)|_Lip
  Quantity lip_joint;  // |G|_Lip on E x E, l1 product metric
};

struct SamplingConfig {
  std::uint64_t seed = 0x5eed;
  std::size_t n_pairs = 100000;
  std::size_t refine_top = 16;
  std::size_t refine_steps = 200;
};

/// sqrt(2/e) = max_t 2 t exp(-t^2): bound on |grad_x G|_2 for the Gaussian.
inline double gaussian_gradient_bound() { return std::sqrt(2.0 / std::numbers::e); }

namespace detail {

// max / min over y in [lo, hi] of <c, y>.
inline double linear_max(std::span<const double> c, const Vec& lo, const Vec& hi) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) s += std::max(c[j] * lo[j], c[j] * hi[j]);
  return s;
}
inline double linear_min(std::span<const double> c, const Vec& lo, const Vec& hi) {
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) s += std::min(c[j] * lo[j], c[j] * hi[j]);
  return s;
}

// max over y in box of |M y|_inf (rows of M as linear functionals).
inline double max_abs_image_linf(const Matrix& m, const DomainBox& box) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double hi = linear_max(m.row(r), box.lower(), box.upper());
    const double lo = linear_min(m.row(r), box.lower(), box.upper());
    best = std::max({best, std::abs(hi), std::abs(lo)});
  }
  return best;
}

inline constexpr std::size_t kMaxCornerDim = 20;

// Extremes of x^T M y over box x box. For fixed x the inner extreme is a
// closed form in x that is convex (max) or concave (min), so the outer
// extreme is attained at a corner of the x-box.
inline std::pair<double, double> bilinear_extrema(const Matrix& m, const DomainBox& box) {
  const std::size_t d = box.dim();
  double lo_val = std::numeric_limits<double>::infinity();
  double hi_val = -std::numeric_limits<double>::infinity();
  const Matrix mt = m.transpose();
  Vec x(d);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
    for (std::size_t i = 0; i < d; ++i) x[i] = (mask >> i) & 1 ? box.upper()[i] : box.lower()[i];
    const Vec c = mt.apply(x);  // a(x, y) = <M^T x, y>
    hi_val = std::max(hi_val, linear_max(c, box.lower(), box.upper()));
    lo_val = std::min(lo_val, linear_min(c, box.lower(), box.upper()));
  }
  return {lo_val, hi_val};
}

inline Vec latin_hypercube_point(Rng& rng, const DomainBox& box, std::size_t stratum,
                                 std::size_t n, const std::vector<std::vector<std::size_t>>& perm) {
  Vec p(box.dim());
  for (std::size_t k = 0; k < box.dim(); ++k) {
    const double u = (static_cast<double>(perm[k][stratum]) + rng.uniform()) / static_cast<double>(n);
    p[k] = box.lower()[k] + u * (box.upper()[k] - box.lower()[k]);
  }
  return p;
}

inline std::vector<std::vector<std::size_t>> lhs_permutations(Rng& rng, std::size_t dim,
                                                              std::size_t n) {
  std::vector<std::vector<std::size_t>> perm(dim, std::vector<std::size_t>(n));
  for (auto& p : perm) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(0, i - 1)]);
  }
  return perm;
}

}  // namespace detail

/// One finite-difference probe of a Lipschitz seminorm: G evaluated at two
/// argument pairs, with the l1 displacement between them.
struct LipSample {
  Vec x0, y0, x1, y1;
  double delta_g = 0.0;
  double displacement = 0.0;
  double ratio() const { return displacement > 0 ? delta_g / displacement : 0.0; }
};

enum class LipArgument { Left, Right, Joint };

/// Sampled lower estimate of a Lipschitz seminorm of G on E x E with respect
/// to the l1 (product) metric. Latin-hypercube base points, axis-aligned and
/// random displacements (the l1 unit ball's extreme points are the axis
/// directions), then hill-climbing refinement around the best pairs.
/// If `trace` is non-null every evaluated pair is appended to it.
inline double estimate_lipschitz(const Potential& g, const DomainBox& box, LipArgument which,
                                 const SamplingConfig& cfg, std::vector<LipSample>* trace = nullptr) {
  if (!box.bounded())
    throw Error(ErrorCode::UnboundedDomainUnsupported, "sampling requires a bounded domain");
  const std::size_t d = box.dim();
  const std::size_t n = std::max<std::size_t>(cfg.n_pairs, 1);
  Rng rng = Rng(cfg.seed).split(static_cast<std::uint64_t>(which) + 11);
  auto perm_x = detail::lhs_permutations(rng, d, n);
  auto perm_y = detail::lhs_permutations(rng, d, n);

  auto probe = [&](const Vec& x0, const Vec& y0, const Vec& x1, const Vec& y1) {
    const double disp = dist_l1(x0, x1) + dist_l1(y0, y1);
    if (disp <= 0.0) return 0.0;
    const double dg = std::abs(g.evaluate(x0, y0) - g.evaluate(x1, y1));
    if (trace) trace->push_back({x0, y0, x1, y1, dg, disp});
    return dg / disp;
  };

  struct Candidate {
    double ratio;
    Vec x0, y0, x1, y1;
  };
  std::vector<Candidate> best;
  const std::size_t keep = std::max<std::size_t>(cfg.refine_top, 1);
  auto offer = [&](double r, const Vec& x0, const Vec& y0, const Vec& x1, const Vec& y1) {
    if (best.size() < keep) {
      best.push_back({r, x0, y0, x1, y1});
    } else {
      auto worst = std::min_element(best.begin(), best.end(),
                                    [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
      if (r > worst->ratio) *worst = {r, x0, y0, x1, y1};
    }
  };

  auto displace = [&](Vec p, bool axis) {
    if (axis) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(d) - 1));
      const double width = box.upper()[k] - box.lower()[k];
      const double h = width * std::pow(10.0, -4.0 * rng.uniform()) * (rng.uniform() < 0.5 ? -1 : 1);
      p[k] += h;
    } else {
      for (std::size_t k = 0; k < d; ++k)
        p[k] += 0.25 * (box.upper()[k] - box.lower()[k]) * rng.normal();
    }
    return box.clamp(p);
  };

  double best_ratio = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x0 = detail::latin_hypercube_point(rng, box, i, n, perm_x);
    const Vec y0 = detail::latin_hypercube_point(rng, box, i, n, perm_y);
    const bool axis = (i % 4) != 3;
    Vec x1 = x0, y1 = y0;
    switch (which) {
      case LipArgument::Left: x1 = displace(x0, axis); break;
      case LipArgument::Right: y1 = displace(y0, axis); break;
      case LipArgument::Joint:
        if (rng.uniform() < 0.5) x1 = displace(x0, axis);
        else y1 = displace(y0, axis);
        if (!axis) y1 = displace(y0, false);
        break;
    }
    const double r = probe(x0, y0, x1, y1);
    best_ratio = std::max(best_ratio, r);
    offer(r, x0, y0, x1, y1);
  }

  // Local refinement: jointly perturb both endpoints of the best pairs with a
  // shrinking step, keeping improvements.
  for (auto& c : best) {
    double step = 0.1;
    for (std::size_t s = 0; s < cfg.refine_steps; ++s) {
      auto jitter = [&](const Vec& p) {
        Vec q = p;
        for (std::size_t k = 0; k < d; ++k) q[k] += step * (box.upper()[k] - box.lower()[k]) * rng.normal();
        return box.clamp(q);
      };
      Vec x0 = jitter(c.x0), y0 = jitter(c.y0);
      Vec x1 = x0, y1 = y0;
      // Keep the displacement direction of the candidate.
      for (std::size_t k = 0; k < d; ++k) {
        x1[k] += c.x1[k] - c.x0[k];
        y1[k] += c.y1[k] - c.y0[k];
      }
      x1 = box.clamp(x1);
      y1 = box.clamp(y1);
      const double r = probe(x0, y0, x1, y1);
      if (r > c.ratio) {
        c = {r, x0, y0, x1, y1};
        best_ratio = std::max(best_ratio, r);
      } else if (s % 20 == 19) {
        step *= 0.5;
      }
    }
  }
  return best_ratio;
}

/// Sampled (min, max) of the similarity a over E x E, with hill-climbing on the extremes.
inline std::pair<double, double> estimate_similarity_range(const Potential& g, const DomainBox& box,
                                                           const SamplingConfig& cfg) {
  const std::size_t d = box.dim();
  const std::size_t n = std::max<std::size_t>(cfg.n_pairs, 1);
  Rng rng = Rng(cfg.seed).split(101);
  auto perm_x = detail::lhs_permutations(rng, d, n);
  auto perm_y = detail::lhs_permutations(rng, d, n);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  Vec lo_x, lo_y, hi_x, hi_y;
  for (std::size_t i = 0; i < n; ++i) {
    Vec x = detail::latin_hypercube_point(rng, box, i, n, perm_x);
    Vec y = detail::latin_hypercube_point(rng, box, i, n, perm_y);
    const double a = g.similarity(x, y);
    if (a < lo) { lo = a; lo_x = x; lo_y = y; }
    if (a > hi) { hi = a; hi_x = x; hi_y = y; }
  }
  // Corners often hold the extremes.
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 256); ++i) {
    Vec x(d), y(d);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = rng.uniform() < 0.5 ? box.lower()[k] : box.upper()[k];
      y[k] = rng.uniform() < 0.5 ? box.lower()[k] : box.upper()[k];
    }
    const double a = g.similarity(x, y);
    if (a < lo) { lo = a; lo_x = x; lo_y = y; }
    if (a > hi) { hi = a; hi_x = x; hi_y = y; }
  }
  for (std::size_t s = 0; s < cfg.refine_steps * 4; ++s) {
    const double step = 0.05 * std::pow(0.5, static_cast<double>(s) / 100.0);
    auto jitter = [&](const Vec& p) {
      Vec q = p;
      for (std::size_t k = 0; k < d; ++k) q[k] += step * (box.upper()[k] - box.lower()[k]) * rng.normal();
      return box.clamp(q);
    };
    Vec x = jitter(lo_x), y = jitter(lo_y);
    if (double a = g.similarity(x, y); a < lo) { lo = a; lo_x = x; lo_y = y; }
    x = jitter(hi_x);
    y = jitter(hi_y);
    if (double a = g.similarity(x, y); a > hi) { hi = a; hi_x = x; hi_y = y; }
  }
  return {lo, hi};
}

inline double checked_exp(double a, const char* what) {
  if (a > kMaxExponent)
    throw Error(ErrorCode::PotentialOverflow, std::string(what) + ": exponent " + std::to_string(a));
  return std::exp(a);
}

/// Regularity constants of G on E. Gaussian: closed forms on any E.
/// Bilinear similarities: inf/sup exact from box corners, seminorms as
/// closed-form upper bounds. Anything else: sampled estimates, flagged.
inline RegularityStats regularity_stats(const Potential& g, const DomainBox& box,
                                        const SamplingConfig& sampling = {}) {
  if (box.dim() != g.dim()) throw Error(ErrorCode::DimMismatch, "domain and potential dims differ");
  RegularityStats st;
  const Provenance analytic{ProvenanceKind::Analytic, 0, 0, ""};

  if (g.is_gaussian()) {
    const double lip = gaussian_gradient_bound();
    const Provenance conv{ProvenanceKind::AnalyticUpperBound, 0, 0,
                          "max_t 2t exp(-t^2) = sqrt(2/e) bounds |grad G|_2 >= |grad G|_inf; "
                          "valid for the l1 metric since |.|_2 <= |.|_1"};
    st.sup_G = {1.0, analytic};
    st.lip_left = {lip, conv};
    st.lip_right = {lip, conv};
    st.lip_joint = {lip, conv};
    if (box.bounded()) {
      double sq = 0.0;
      for (std::size_t k = 0; k < box.dim(); ++k) {
        const double w = box.upper()[k] - box.lower()[k];
        sq += w * w;
      }
      st.eps_G = {std::exp(-sq), {ProvenanceKind::Analytic, 0, 0, "exp(-diam_2(E)^2)"}};
    } else {
      st.eps_G = {0.0, {ProvenanceKind::Analytic, 0, 0, "inf over R^d"}};
    }
    return st;
  }

  if (!box.bounded())
    throw Error(ErrorCode::UnboundedDomainUnsupported,
                "potential '" + g.name() + "' needs a bounded domain");

  if (auto m = g.bilinear_form(); m && box.dim() <= detail::kMaxCornerDim) {
    const auto [a_min, a_max] = detail::bilinear_extrema(*m, box);
    const Provenance corners{ProvenanceKind::Analytic, 0, 0, "bilinear extremum over box corners"};
    st.eps_G = {std::exp(a_min), corners};
    st.sup_G = {checked_exp(a_max, "sup of G"), corners};
    // grad_x a = M y, grad_y a = M^T x; |grad G|_inf <= sup G * |grad a|_inf.
    const double gl = detail::max_abs_image_linf(*m, box);
    const double gr = detail::max_abs_image_linf(m->transpose(), box);
    const Provenance ub{ProvenanceKind::AnalyticUpperBound, 0, 0,
                        "sup_G * max_E |grad a|_inf (dual of l1)"};
    st.lip_left = {st.sup_G.value * gl, ub};
    st.lip_right = {st.sup_G.value * gr, ub};
    st.lip_joint = {std::max(st.lip_left.value, st.lip_right.value), ub};
    return st;
  }

  const Provenance sampled{ProvenanceKind::Sampled, sampling.n_pairs, sampling.seed,
                           "sampled estimate: lower bound for sups, upper bound for infs"};
  const auto [a_min, a_max] = estimate_similarity_range(g, box, sampling);
  st.eps_G = {std::exp(a_min), sampled};
  st.sup_G = {checked_exp(a_max, "sup of G"), sampled};
  st.lip_left = {estimate_lipschitz(g, box, LipArgument::Left, sampling), sampled};
  st.lip_right = {estimate_lipschitz(g, box, LipArgument::Right, sampling), sampled};
  st.lip_joint = {std::max({estimate_lipschitz(g, box, LipArgument::Joint, sampling),
                            st.lip_left.value, st.lip_right.value}),
                  sampled};
  return st;
}

/// |G(q, .)|_Lip on E for a fixed query q.
inline Quantity lip_of_query_slice(const Potential& g, std::span<const double> q,
                                   const DomainBox& box, const SamplingConfig& sampling = {}) {
  if (g.is_gaussian())
    return {gaussian_gradient_bound(),
            {ProvenanceKind::AnalyticUpperBound, 0, 0, "sqrt(2/e), l2 bound valid for l1"}};
  if (!box.bounded())
    throw Error(ErrorCode::UnboundedDomainUnsupported, "query slice needs a bounded domain");
  if (auto m = g.bilinear_form()) {
    const Vec c = m->transpose().apply(q);  // grad_y a(q, y)
    const double a_max = detail::linear_max(c, box.lower(), box.upper());
    return {checked_exp(a_max, "G(q,.)") * norm_linf(c),
            {ProvenanceKind::AnalyticUpperBound, 0, 0, "max_y G(q,y) * |M^T q|_inf"}};
  }
  // Sample the one-argument slice through a wrapper potential.
  Potential slice = Potential::custom(
      g.dim(), {[&g, qv = Vec(q.begin(), q.end())](std::span<const double>, std::span<const double> y) {
                  return g.similarity(qv, y);
                },
                "slice"});
  return {estimate_lipschitz(slice, box, LipArgument::Right, sampling),
          {ProvenanceKind::Sampled, sampling.n_pairs, sampling.seed, "sampled lower estimate"}};
}

}  // namespace lipattn
