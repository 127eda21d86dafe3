#pragma once

// Closed-form Lipschitz / contraction constants for attention in W1, each
// returned as a BoundReport that carries every ingredient with its provenance
// so the value can be re-derived from the report alone.

#include <map>
#include <string>

#include "lipattn/core.hpp"
#include "lipattn/kernels.hpp"
#include "lipattn/measures.hpp"
#include "lipattn/potentials.hpp"

namespace lipattn {

enum class Theorem {
  BoundedContraction,         // tau(A) <= tau(Pi) tau(Psi_G) tau(L) on compact E
  BoundedPointwiseCorollary,  // q -> Attention(q, K, V), l2 -> l2
  UnboundedGaussian,          // Gaussian potential on R^d, N and M atoms
  UnboundedEqualN,            // the same with N = M
  CrossAttention,             // (X, Y) -> Attention(q, X, X) for a fixed q
  ComponentTaus,
};

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::BoundedContraction: return "bounded-contraction";
    case Theorem::BoundedPointwiseCorollary: return "bounded-pointwise-query";
    case Theorem::UnboundedGaussian: return "unbounded-gaussian";
    case Theorem::UnboundedEqualN: return "unbounded-equal-n";
    case Theorem::CrossAttention: return "cross-attention";
    case Theorem::ComponentTaus: return "component-taus";
  }
  return "unknown";
}

enum class BoundStatus { Ok, Inapplicable };

struct AssumptionCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct BoundReport {
  Theorem theorem = Theorem::ComponentTaus;
  BoundStatus status = BoundStatus::Ok;
  double value = 0.0;
  std::string formula;
  std::map<std::string, Quantity> ingredients;
  std::vector<AssumptionCheck> assumptions;

  double ingredient(const std::string& name) const {
    auto it = ingredients.find(name);
    if (it == ingredients.end()) throw Error(ErrorCode::InvalidInput, "missing ingredient " + name);
    return it->second.value;
  }

  bool applicable() const { return status == BoundStatus::Ok; }

  void check(std::string name, bool pass, std::string detail = {}) {
    assumptions.push_back({std::move(name), pass, std::move(detail)});
    if (!pass) status = BoundStatus::Inapplicable;
  }
};

inline double tau_pi(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::InvalidInput, "dimension must be >= 1");
  return static_cast<double>(d);
}

inline double tau_lookup(const Lookup& l) { return l.lip(); }

/// 2 (|G|_{Lip,inf} + |G|_{inf,Lip}) diam_1(E) / eps(G)
inline double tau_softmatch_bounded(const RegularityStats& st, const DomainBox& box) {
  if (!box.bounded()) throw Error(ErrorCode::RequiresCompactDomain, "tau(Psi_G) needs compact E");
  if (!(st.eps_G.value > 0.0)) throw Error(ErrorCode::DegeneratePotential, "eps(G) <= 0");
  return 2.0 * (st.lip_left.value + st.lip_right.value) * box.diam_l1() / st.eps_G.value;
}

/// sqrt(ln n + 1/(2e))
inline double ratio_lemma_bound(double n) {
  if (!(n >= 1.0)) throw Error(ErrorCode::InvalidInput, "ratio lemma needs n >= 1");
  return std::sqrt(std::log(n) + 1.0 / (2.0 * std::numbers::e));
}

namespace detail {

inline Quantity analytic(double v, std::string note = {}) {
  return {v, {ProvenanceKind::Analytic, 0, 0, std::move(note)}};
}

inline void add_stats(BoundReport& r, const RegularityStats& st) {
  r.ingredients["eps_G"] = st.eps_G;
  r.ingredients["sup_G"] = st.sup_G;
  r.ingredients["lip_left"] = st.lip_left;
  r.ingredients["lip_right"] = st.lip_right;
  r.ingredients["lip_joint"] = st.lip_joint;
}

inline void check_regularity(BoundReport& r, const DomainBox& box, const RegularityStats& st) {
  r.check("compact domain", box.bounded(), box.bounded() ? "axis-aligned box" : "E unbounded");
  r.check("convex domain", true, "axis-aligned box");
  r.check("eps(G) > 0", st.eps_G.value > 0.0, std::to_string(st.eps_G.value));
  r.check("finite seminorms",
          std::isfinite(st.lip_left.value) && std::isfinite(st.lip_right.value));
}

}  // namespace detail

inline BoundReport bound_bounded_contraction(const AttentionConfig& cfg, const DomainBox& box,
                                             const RegularityStats& st) {
  BoundReport r;
  r.theorem = Theorem::BoundedContraction;
  r.formula = "tau_pi * tau_softmatch * tau_lookup";
  detail::check_regularity(r, box, st);
  detail::add_stats(r, st);
  const std::size_t d = cfg.key_dim();
  r.ingredients["d"] = detail::analytic(static_cast<double>(d));
  r.ingredients["diam_E"] = detail::analytic(box.diam_l1(), "l1 diameter of the box");
  r.ingredients["tau_pi"] = detail::analytic(tau_pi(d));
  r.ingredients["tau_lookup"] = {tau_lookup(cfg.lookup),
                                 {std::holds_alternative<lookup_kind::Function>(cfg.lookup.kind())
                                      ? ProvenanceKind::UserSupplied
                                      : ProvenanceKind::Analytic,
                                  0, 0, cfg.lookup.name()}};
  if (!r.applicable()) return r;
  const double tpsi = tau_softmatch_bounded(st, box);
  // Inherits the weakest provenance of its inputs.
  Provenance p = st.lip_left.provenance;
  if (st.eps_G.provenance.kind == ProvenanceKind::Sampled) p = st.eps_G.provenance;
  r.ingredients["tau_softmatch"] = {tpsi, p};
  r.value = r.ingredient("tau_pi") * tpsi * r.ingredient("tau_lookup");
  return r;
}

inline BoundReport bound_bounded_contraction(const AttentionConfig& cfg, const DomainBox& box,
                                             const SamplingConfig& sampling = {}) {
  if (!box.bounded()) {
    BoundReport r;
    r.theorem = Theorem::BoundedContraction;
    r.check("compact domain", false, "E unbounded");
    return r;
  }
  return bound_bounded_contraction(cfg, box, regularity_stats(cfg.potential, box, sampling));
}

/// l2 -> l2 Lipschitz constant of q -> Attention(q, K, V):
/// d^{3/2} |l|_Lip 2 |G|_{Lip,inf} diam(E) / eps(G).
inline BoundReport bound_pointwise_query(const AttentionConfig& cfg, const DomainBox& box,
                                         const RegularityStats& st) {
  BoundReport r;
  r.theorem = Theorem::BoundedPointwiseCorollary;
  r.formula = "d^(3/2) * tau_lookup * 2 * lip_left * diam_E / eps_G";
  detail::check_regularity(r, box, st);
  detail::add_stats(r, st);
  const double d = static_cast<double>(cfg.key_dim());
  r.ingredients["d"] = detail::analytic(d);
  r.ingredients["diam_E"] = detail::analytic(box.diam_l1(), "l1 diameter of the box");
  r.ingredients["tau_lookup"] = detail::analytic(tau_lookup(cfg.lookup), cfg.lookup.name());
  if (!r.applicable()) return r;
  r.value = std::pow(d, 1.5) * r.ingredient("tau_lookup") * 2.0 * st.lip_left.value *
            box.diam_l1() / st.eps_G.value;
  return r;
}

inline BoundReport bound_pointwise_query(const AttentionConfig& cfg, const DomainBox& box,
                                         const SamplingConfig& sampling = {}) {
  if (!box.bounded()) {
    BoundReport r;
    r.theorem = Theorem::BoundedPointwiseCorollary;
    r.check("compact domain", false, "E unbounded");
    return r;
  }
  return bound_pointwise_query(cfg, box, regularity_stats(cfg.potential, box, sampling));
}

/// sup over t in R^d of 2 (2 + |t|_1) |t|_inf exp(-|t|_2^2), the constant the
/// unbounded estimate replaces by sqrt(d) + 2. With a = max |t_i| fixed and the
/// l1 mass of the other coordinates fixed, |t|_2 is smallest when those
/// coordinates are equal, so the search reduces to (a, b) with 0 <= b <= a.
inline double gaussian_cross_constant(std::size_t d) {
  const double k = static_cast<double>(d) - 1.0;
  auto f = [&](double a, double b) {
    return 2.0 * (2.0 + a + k * b) * a * std::exp(-(a * a + k * b * b));
  };
  double best = 0.0, ba = 0.0, bb = 0.0;
  constexpr int kGrid = 400;
  for (int i = 0; i <= kGrid; ++i) {
    const double a = 4.0 * i / kGrid;
    for (int j = 0; j <= (d > 1 ? i : 0); ++j) {
      const double b = 4.0 * j / kGrid;
      if (double v = f(a, b); v > best) { best = v; ba = a; bb = b; }
    }
  }
  double step = 4.0 / kGrid;
  while (step > 1e-12) {
    bool moved = false;
    for (auto [da, db] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}}) {
      const double a = ba + da * step, b = d > 1 ? bb + db * step : 0.0;
      if (a < 0 || b < 0 || b > a) continue;
      if (double v = f(a, b); v > best) { best = v; ba = a; bb = b; moved = true; }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

namespace detail {

inline void unbounded_ingredients(BoundReport& r, const Lookup& l, std::size_t d, double n_eff) {
  r.ingredients["d"] = analytic(static_cast<double>(d));
  r.ingredients["tau_pi"] = analytic(tau_pi(d));
  r.ingredients["tau_lookup"] = analytic(tau_lookup(l), l.name());
  r.ingredients["sup_G"] = analytic(1.0, "Gaussian maximum");
  r.ingredients["lip_G"] = {gaussian_gradient_bound(),
                            {ProvenanceKind::AnalyticUpperBound, 0, 0,
                             "sqrt(2/e); l2 gradient bound, valid for l1"}};
  r.ingredients["n_eff"] = analytic(n_eff, "min(N, M)");
  r.ingredients["ratio_lemma"] = analytic(ratio_lemma_bound(n_eff), "sqrt(ln n + 1/(2e))");
  r.ingredients["C_verbatim"] = analytic(std::sqrt(static_cast<double>(d)) + 2.0, "sqrt(d) + 2");
  r.ingredients["C_numeric"] = {gaussian_cross_constant(d),
                                {ProvenanceKind::Analytic, 0, 0,
                                 "numerically maximized constant; informational, not used"}};
}

}  // namespace detail

/// 2 tau(Pi) tau(L) [|G|_inf + sqrt(d) + 2 + sqrt(d) sqrt(ln min(N,M) + 1/2e) |G|_Lip]
inline BoundReport bound_unbounded_gaussian(const Lookup& l, std::size_t d, std::size_t n,
                                            std::size_t m) {
  if (n == 0 || m == 0) throw Error(ErrorCode::EmptySupport, "N, M must be >= 1");
  BoundReport r;
  r.theorem = Theorem::UnboundedGaussian;
  r.formula =
      "2 * tau_pi * tau_lookup * (sup_G + C_verbatim + sqrt(d) * ratio_lemma * lip_G)";
  r.check("Gaussian potential", true, "exp(-|x-y|_2^2) on R^d");
  detail::unbounded_ingredients(r, l, d, static_cast<double>(std::min(n, m)));
  const double sd = std::sqrt(static_cast<double>(d));
  r.value = 2.0 * r.ingredient("tau_pi") * r.ingredient("tau_lookup") *
            (r.ingredient("sup_G") + sd + 2.0 +
             sd * r.ingredient("ratio_lemma") * r.ingredient("lip_G"));
  return r;
}

/// 2 d tau(L) [sqrt(d) sqrt(ln N + 1/2e) |G|_Lip + |G|_inf + sqrt(d) + 2]
inline BoundReport bound_unbounded_equal_n(const Lookup& l, std::size_t d, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::EmptySupport, "N must be >= 1");
  BoundReport r;
  r.theorem = Theorem::UnboundedEqualN;
  r.formula = "2 * d * tau_lookup * (sqrt(d) * ratio_lemma * lip_G + sup_G + sqrt(d) + 2)";
  r.check("Gaussian potential", true, "exp(-|x-y|_2^2) on R^d");
  detail::unbounded_ingredients(r, l, d, static_cast<double>(n));
  const double sd = std::sqrt(static_cast<double>(d));
  r.value = 2.0 * static_cast<double>(d) * r.ingredient("tau_lookup") *
            (sd * r.ingredient("ratio_lemma") * r.ingredient("lip_G") + r.ingredient("sup_G") +
             sd + 2.0);
  return r;
}

/// d tau(L) 2 |G(q, .)|_Lip diam(E) / eps(G): multiplies W1(m(X), m(Y)).
inline BoundReport bound_cross_attention(const AttentionConfig& cfg, const DomainBox& box,
                                         std::span<const double> q, const RegularityStats& st,
                                         const SamplingConfig& sampling = {}) {
  BoundReport r;
  r.theorem = Theorem::CrossAttention;
  r.formula = "d * tau_lookup * 2 * lip_query * diam_E / eps_G";
  detail::check_regularity(r, box, st);
  r.ingredients["eps_G"] = st.eps_G;
  const double d = static_cast<double>(cfg.key_dim());
  r.ingredients["d"] = detail::analytic(d);
  r.ingredients["diam_E"] = detail::analytic(box.diam_l1(), "l1 diameter of the box");
  r.ingredients["tau_lookup"] = detail::analytic(tau_lookup(cfg.lookup), cfg.lookup.name());
  if (!r.applicable()) return r;
  r.check("query in E", box.contains(q), "eps(G) is an infimum over E x E");
  const Quantity lq = lip_of_query_slice(cfg.potential, q, box, sampling);
  r.ingredients["lip_query"] = lq;
  r.value = d * r.ingredient("tau_lookup") * 2.0 * lq.value * box.diam_l1() / st.eps_G.value;
  return r;
}

inline BoundReport bound_cross_attention(const AttentionConfig& cfg, const DomainBox& box,
                                         std::span<const double> q,
                                         const SamplingConfig& sampling = {}) {
  if (!box.bounded()) {
    BoundReport r;
    r.theorem = Theorem::CrossAttention;
    r.check("compact domain", false, "E unbounded");
    return r;
  }
  return bound_cross_attention(cfg, box, q, regularity_stats(cfg.potential, box, sampling),
                               sampling);
}

/// Not the stated constant: the measure-argument softmatch step also needs a
/// sup_y G(q, y) W1 / eps(G) term (|int G f dmu - int G f dnu| is bounded by
/// |G f|_Lip W1, not by |f|_inf |mu(G) - nu(G)|). With it the deviation is at
/// most d tau(L) (2 |G(q, .)|_Lip diam(E) + sup_y G(q, y)) / eps(G) * W1.
inline double repaired_cross_attention(const AttentionConfig& cfg, const DomainBox& box,
                                       std::span<const double> q, const RegularityStats& st,
                                       const SamplingConfig& sampling = {}) {
  if (!box.bounded()) throw Error(ErrorCode::RequiresCompactDomain, "needs a box");
  const double lq = lip_of_query_slice(cfg.potential, q, box, sampling).value;
  double sup_q = st.sup_G.value;
  if (auto m = cfg.potential.bilinear_form())
    sup_q = std::exp(detail::linear_max(m->transpose().apply(q), box.lower(), box.upper()));
  return static_cast<double>(cfg.key_dim()) * tau_lookup(cfg.lookup) *
         (2.0 * lq * box.diam_l1() + sup_q) / st.eps_G.value;
}

/// Each component constant on its own: tau(Pi), tau(L), tau(Psi_G) and the
/// two one-sided softmatch constants used by the component probes.
inline BoundReport component_taus(const AttentionConfig& cfg, const DomainBox& box,
                                  const RegularityStats& st) {
  BoundReport r;
  r.theorem = Theorem::ComponentTaus;
  r.formula = "tau_pi * tau_softmatch * tau_lookup";
  detail::check_regularity(r, box, st);
  detail::add_stats(r, st);
  r.ingredients["d"] = detail::analytic(static_cast<double>(cfg.key_dim()));
  r.ingredients["diam_E"] = detail::analytic(box.diam_l1());
  r.ingredients["tau_pi"] = detail::analytic(tau_pi(cfg.key_dim()));
  r.ingredients["tau_lookup"] = detail::analytic(tau_lookup(cfg.lookup));
  if (!r.applicable()) return r;
  const double scale = 2.0 * box.diam_l1() / st.eps_G.value;
  r.ingredients["tau_softmatch_in_x"] = {scale * st.lip_left.value, st.lip_left.provenance};
  r.ingredients["tau_softmatch_in_measure"] = {scale * st.lip_right.value, st.lip_right.provenance};
  r.ingredients["tau_softmatch"] = {tau_softmatch_bounded(st, box), st.lip_left.provenance};
  r.value = r.ingredient("tau_pi") * r.ingredient("tau_softmatch") * r.ingredient("tau_lookup");
  return r;
}

/// Re-evaluates the report's formula from its ingredient map alone.
inline double recompute(const BoundReport& r) {
  auto g = [&](const char* k) { return r.ingredient(k); };
  switch (r.theorem) {
    case Theorem::BoundedContraction:
      return g("tau_pi") * (2.0 * (g("lip_left") + g("lip_right")) * g("diam_E") / g("eps_G")) *
             g("tau_lookup");
    case Theorem::ComponentTaus:
      return g("tau_pi") * g("tau_softmatch") * g("tau_lookup");
    case Theorem::BoundedPointwiseCorollary:
      return std::pow(g("d"), 1.5) * g("tau_lookup") * 2.0 * g("lip_left") * g("diam_E") /
             g("eps_G");
    case Theorem::UnboundedGaussian: {
      const double sd = std::sqrt(g("d"));
      return 2.0 * g("tau_pi") * g("tau_lookup") *
             (g("sup_G") + sd + 2.0 + sd * g("ratio_lemma") * g("lip_G"));
    }
    case Theorem::UnboundedEqualN: {
      const double sd = std::sqrt(g("d"));
      return 2.0 * g("d") * g("tau_lookup") *
             (sd * g("ratio_lemma") * g("lip_G") + g("sup_G") + sd + 2.0);
    }
    case Theorem::CrossAttention:
      return g("d") * g("tau_lookup") * 2.0 * g("lip_query") * g("diam_E") / g("eps_G");
  }
  return 0.0;
}

/// min over data pairs of G, flagged as data-empirical.
inline Quantity eps_on_data(const Potential& g, const PointCloud& queries, const PointCloud& keys) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < queries.size(); ++i)
    for (std::size_t j = 0; j < keys.size(); ++j)
      best = std::min(best, std::exp(g.similarity(queries.point(i), keys.point(j))));
  return {best, {ProvenanceKind::DataEmpirical, queries.size() * keys.size(), 0, "min over data pairs"}};
}

}  // namespace lipattn
