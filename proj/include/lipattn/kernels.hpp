#pragma once

// Attention as a composition of Markov kernels on empirical measures:
//   softmatch  Psi_{G(q,.)}(nu)   reweight nu by G(q, .) and renormalize
//   lookup     L(k, dv) = delta_{l(k)}
//   projection Pi(mu) = delta_{barycenter(mu)}
// plus multi-head mixtures, a pointwise FFN, and the textbook matrix-form
// attention used as an independent reference.

#include <functional>
#include <variant>

#include "lipattn/core.hpp"
#include "lipattn/measures.hpp"
#include "lipattn/potentials.hpp"

namespace lipattn {

namespace lookup_kind {
struct Identity {};
/// l(k) = W_V k, with W_V of shape d_v x d_k.
struct Linear {
  Matrix w_v;
};
struct Function {
  std::function<Vec(std::span<const double>)> fn;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  double lip = 0.0;  // |l|_Lip in l1, supplied by the caller
};
}  // namespace lookup_kind

/// Deterministic lookup l: keys -> values.
class Lookup {
 public:
  using Kind = std::variant<lookup_kind::Identity, lookup_kind::Linear, lookup_kind::Function>;

  Lookup() : kind_(lookup_kind::Identity{}) {}
  explicit Lookup(Kind kind) : kind_(std::move(kind)) {
    if (auto* f = std::get_if<lookup_kind::Function>(&kind_)) {
      if (!f->fn) throw Error(ErrorCode::InvalidInput, "function lookup without a function");
      if (!(f->lip >= 0.0)) throw Error(ErrorCode::InvalidInput, "lookup Lipschitz constant < 0");
    }
  }

  static Lookup identity() { return Lookup(); }
  static Lookup linear(Matrix w_v) { return Lookup(lookup_kind::Linear{std::move(w_v)}); }
  static Lookup function(std::function<Vec(std::span<const double>)> fn, std::size_t in_dim,
                         std::size_t out_dim, double lip) {
    return Lookup(lookup_kind::Function{std::move(fn), in_dim, out_dim, lip});
  }

  const Kind& kind() const noexcept { return kind_; }

  std::string name() const {
    switch (kind_.index()) {
      case 0: return "identity";
      case 1: return "linear";
      default: return "function";
    }
  }

  /// Input dimension, or 0 if any (identity).
  std::size_t in_dim() const {
    if (auto* l = std::get_if<lookup_kind::Linear>(&kind_)) return l->w_v.cols();
    if (auto* f = std::get_if<lookup_kind::Function>(&kind_)) return f->in_dim;
    return 0;
  }

  std::size_t out_dim(std::size_t in) const {
    if (auto* l = std::get_if<lookup_kind::Linear>(&kind_)) return l->w_v.rows();
    if (auto* f = std::get_if<lookup_kind::Function>(&kind_)) return f->out_dim;
    return in;
  }

  /// |l|_Lip in the l1 metric; exact for identity and linear maps.
  double lip() const {
    if (auto* l = std::get_if<lookup_kind::Linear>(&kind_)) return l->w_v.norm_l1_induced();
    if (auto* f = std::get_if<lookup_kind::Function>(&kind_)) return f->lip;
    return 1.0;
  }

  Vec operator()(std::span<const double> k) const {
    if (std::holds_alternative<lookup_kind::Identity>(kind_)) return {k.begin(), k.end()};
    if (auto* l = std::get_if<lookup_kind::Linear>(&kind_)) return l->w_v.apply(k);
    const auto& f = std::get<lookup_kind::Function>(kind_);
    if (k.size() != f.in_dim) throw Error(ErrorCode::DimMismatch, "function lookup input");
    Vec out = f.fn(k);
    if (out.size() != f.out_dim) throw Error(ErrorCode::DimMismatch, "function lookup output");
    return out;
  }

 private:
  Kind kind_;
};

struct AttentionConfig {
  Potential potential;
  Lookup lookup;

  AttentionConfig(Potential g, Lookup l) : potential(std::move(g)), lookup(std::move(l)) {
    if (lookup.in_dim() != 0 && lookup.in_dim() != potential.dim())
      throw Error(ErrorCode::DimMismatch, "lookup input dim differs from key dim");
  }

  std::size_t key_dim() const { return potential.dim(); }
  std::size_t value_dim() const { return lookup.out_dim(potential.dim()); }
};

struct Head {
  AttentionConfig attention;
  Matrix w_o;  // d_v x d, applied on the right: y W_O
};

struct MultiHeadConfig {
  std::vector<Head> heads;

  explicit MultiHeadConfig(std::vector<Head> h) : heads(std::move(h)) {
    if (heads.empty()) throw Error(ErrorCode::InvalidInput, "multi-head config needs H >= 1");
    const std::size_t d = heads.front().attention.key_dim();
    const std::size_t d_out = heads.front().w_o.cols();
    for (const auto& head : heads) {
      if (head.attention.key_dim() != d)
        throw Error(ErrorCode::DimMismatch, "heads disagree on input dim");
      if (head.w_o.rows() != head.attention.value_dim() || head.w_o.cols() != d_out)
        throw Error(ErrorCode::DimMismatch, "W_O shape must be d_v x d");
    }
  }

  std::size_t input_dim() const { return heads.front().attention.key_dim(); }
  std::size_t output_dim() const { return heads.front().w_o.cols(); }
};

enum class Activation { Identity, Relu, Tanh };

struct FfnLayer {
  Matrix weight;  // out x in, applied as W x + b
  Vec bias;
  Activation activation = Activation::Identity;
};

struct FfnConfig {
  std::vector<FfnLayer> layers;

  explicit FfnConfig(std::vector<FfnLayer> l = {}) : layers(std::move(l)) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].bias.size() != layers[i].weight.rows())
        throw Error(ErrorCode::DimMismatch, "FFN bias length");
      if (i > 0 && layers[i].weight.cols() != layers[i - 1].weight.rows())
        throw Error(ErrorCode::DimMismatch, "FFN layer shapes do not chain");
    }
    if (!layers.empty() && layers.front().weight.cols() != layers.back().weight.rows())
      throw Error(ErrorCode::DimMismatch, "FFN must map R^d to R^d");
  }

  Vec operator()(std::span<const double> x) const {
    Vec h(x.begin(), x.end());
    for (const auto& layer : layers) {
      Vec z = layer.weight.apply(h);
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += layer.bias[i];
        switch (layer.activation) {
          case Activation::Relu: z[i] = std::max(0.0, z[i]); break;
          case Activation::Tanh: z[i] = std::tanh(z[i]); break;
          case Activation::Identity: break;
        }
      }
      h = std::move(z);
    }
    return h;
  }

  /// Upper bound: product of induced l1 norms; ReLU and tanh are 1-Lipschitz.
  double lip() const {
    double l = 1.0;
    for (const auto& layer : layers) l *= layer.weight.norm_l1_induced();
    return l;
  }
};

// ---------------------------------------------------------------------------

/// w_i = nu_i G(q, k_i) / sum_j nu_j G(q, k_j), evaluated as a log-sum-exp
/// with the maximum shifted out.
inline std::vector<double> softmatch_weights(const Potential& g, std::span<const double> q,
                                             const EmpiricalMeasure& nu) {
  if (q.size() != g.dim() || nu.dim() != g.dim())
    throw Error(ErrorCode::DimMismatch, "softmatch query/key dimension");
  if (!all_finite(q)) throw Error(ErrorCode::InvalidInput, "non-finite query");
  const std::size_t n = nu.size();
  std::vector<double> logw(n);
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g.similarity(q, nu.support().point(i));
    if (std::isnan(a)) throw Error(ErrorCode::InvalidInput, "similarity is NaN");
    const double w = nu.weights()[i];
    logw[i] = w > 0.0 ? std::log(w) + a : -std::numeric_limits<double>::infinity();
    shift = std::max(shift, logw[i]);
  }
  double total = 0.0;
  for (auto& l : logw) {
    l = std::exp(l - shift);
    total += l;
  }
  for (auto& l : logw) l /= total;
  return logw;
}

/// delta_q Psi_{G(q,.)}(nu): same support as nu, softmatch weights.
inline EmpiricalMeasure softmatch_measure(const Potential& g, std::span<const double> q,
                                          const EmpiricalMeasure& nu) {
  return EmpiricalMeasure(nu.support(), softmatch_weights(g, q, nu));
}

/// mu L: support pushed through l, weights unchanged.
inline EmpiricalMeasure apply_lookup(const Lookup& l, const EmpiricalMeasure& mu) {
  if (l.in_dim() != 0 && l.in_dim() != mu.dim())
    throw Error(ErrorCode::DimMismatch, "lookup input dimension");
  if (std::holds_alternative<lookup_kind::Identity>(l.kind())) return mu;
  const std::size_t out = l.out_dim(mu.dim());
  std::vector<double> flat;
  flat.reserve(mu.size() * out);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Vec v = l(mu.support().point(i));
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return EmpiricalMeasure(PointCloud(out, std::move(flat)), mu.weights());
}

/// Location of the Dirac A_mu(q, .) = Pi[Psi_{G(q,.)}(mu) L].
inline Vec attention_kernel(const AttentionConfig& cfg, std::span<const double> q,
                            const EmpiricalMeasure& mu) {
  return barycenter(apply_lookup(cfg.lookup, softmatch_measure(cfg.potential, q, mu)));
}

/// Matrix-form attention: sum_i softmax_i(a(q, K)) v_i, computed directly in
/// index order. Shares nothing with the kernel pipeline except a(., .).
inline Vec reference_attention(const Potential& a, std::span<const double> q, const PointCloud& keys,
                               const PointCloud& values) {
  if (keys.size() != values.size())
    throw Error(ErrorCode::KeyValueMismatch, "|K| != |V|");
  const std::size_t n = keys.size();
  std::vector<double> s(n);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = a.similarity(q, keys.point(i));
    m = std::max(m, s[i]);
  }
  double z = 0.0;
  for (auto& v : s) {
    v = std::exp(v - m);
    z += v;
  }
  Vec out(values.dim(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (s[i] / z) * values.point(i)[k];
  return out;
}

/// x_i -> A_{m(X)}(x_i, .) for every point of X.
inline PointCloud self_attention(const AttentionConfig& cfg, const PointCloud& x) {
  const EmpiricalMeasure mu = empirical(x);
  std::vector<double> flat;
  flat.reserve(x.size() * cfg.value_dim());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec y = attention_kernel(cfg, x.point(i), mu);
    flat.insert(flat.end(), y.begin(), y.end());
  }
  return PointCloud(cfg.value_dim(), std::move(flat));
}

/// Mixture (1/H) sum_h A^h O^h with O^h(y, .) = delta_{H y W_O^h}, projected
/// to its barycenter: equals sum_h y^h W_O^h.
inline PointCloud multi_head(const MultiHeadConfig& cfg, const PointCloud& x) {
  if (x.dim() != cfg.input_dim()) throw Error(ErrorCode::DimMismatch, "multi-head input");
  const EmpiricalMeasure mu = empirical(x);
  const std::size_t h_count = cfg.heads.size();
  const double h = static_cast<double>(h_count);
  const std::size_t d_out = cfg.output_dim();
  std::vector<double> flat;
  flat.reserve(x.size() * d_out);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> atoms;
    atoms.reserve(h_count * d_out);
    for (const auto& head : cfg.heads) {
      Vec y = attention_kernel(head.attention, x.point(i), mu);
      for (auto& v : y) v *= h;
      Vec o = head.w_o.apply_left(y);
      atoms.insert(atoms.end(), o.begin(), o.end());
    }
    const EmpiricalMeasure mixture(PointCloud(d_out, std::move(atoms)),
                                   std::vector<double>(h_count, 1.0 / h));
    Vec out = barycenter(mixture);
    flat.insert(flat.end(), out.begin(), out.end());
  }
  return PointCloud(d_out, std::move(flat));
}

inline PointCloud apply_ffn(const FfnConfig& ffn, const PointCloud& x) {
  if (ffn.layers.empty()) return x;
  std::vector<double> flat;
  flat.reserve(x.flat().size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec y = ffn(x.point(i));
    flat.insert(flat.end(), y.begin(), y.end());
  }
  return PointCloud(ffn.layers.back().weight.rows(), std::move(flat));
}

/// FFN applied pointwise to the multi-head output (T = A F).
inline PointCloud transformer_layer(const MultiHeadConfig& mh, const FfnConfig& ffn,
                                    const PointCloud& x) {
  return apply_ffn(ffn, multi_head(mh, x));
}

/// Concat-and-matmul multi-head attention [y^1 ... y^H] W_O, computed from
/// reference_attention with V_h = l_h(X). Independent of the mixture pipeline.
inline PointCloud reference_multi_head(const MultiHeadConfig& cfg, const PointCloud& x) {
  std::vector<PointCloud> values;
  std::size_t concat_dim = 0;
  for (const auto& head : cfg.heads) {
    std::vector<Vec> rows;
    for (std::size_t i = 0; i < x.size(); ++i) rows.push_back(head.attention.lookup(x.point(i)));
    values.push_back(PointCloud::from_rows(rows));
    concat_dim += head.w_o.rows();
  }
  Matrix stacked(concat_dim, cfg.output_dim());
  std::size_t r0 = 0;
  for (const auto& head : cfg.heads) {
    for (std::size_t r = 0; r < head.w_o.rows(); ++r)
      for (std::size_t c = 0; c < head.w_o.cols(); ++c) stacked(r0 + r, c) = head.w_o(r, c);
    r0 += head.w_o.rows();
  }
  std::vector<Vec> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec concat;
    for (std::size_t h = 0; h < cfg.heads.size(); ++h) {
      Vec y = reference_attention(cfg.heads[h].attention.potential, x.point(i), x, values[h]);
      concat.insert(concat.end(), y.begin(), y.end());
    }
    out.push_back(stacked.apply_left(concat));
  }
  return PointCloud::from_rows(out);
}

}  // namespace lipattn
