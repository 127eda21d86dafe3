#pragma once

// Layers iterated as interacting particle systems, deep-equilibrium fixed
// points with input injection, and inversion of residual blocks x + g(x).
// Distances between clouds of equal size use the sup over particles of the
// per-particle l1 distance.

#include <functional>
#include <optional>

#include "lipattn/kernels.hpp"
#include "lipattn/transport.hpp"

namespace lipattn {

/// A set-to-set map on point clouds (one layer).
using SetMap = std::function<PointCloud(const PointCloud&)>;

inline SetMap attention_layer(AttentionConfig cfg) {
  return [cfg = std::move(cfg)](const PointCloud& x) { return self_attention(cfg, x); };
}

inline SetMap transformer_block(MultiHeadConfig mh, FfnConfig ffn) {
  return [mh = std::move(mh), ffn = std::move(ffn)](const PointCloud& x) {
    return transformer_layer(mh, ffn, x);
  };
}

/// max_i |a_i - b_i|_1 for clouds of equal size and dimension.
inline double sup_l1(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.dim() != b.dim())
    throw Error(ErrorCode::SizeMismatch, "clouds differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, dist_l1(a.point(i), b.point(i)));
  return s;
}

inline PointCloud add(const PointCloud& a, const PointCloud& b, double sb = 1.0) {
  if (a.size() != b.size() || a.dim() != b.dim())
    throw Error(ErrorCode::SizeMismatch, "clouds differ in shape");
  std::vector<double> flat = a.flat();
  for (std::size_t k = 0; k < flat.size(); ++k) flat[k] += sb * b.flat()[k];
  return PointCloud(a.dim(), std::move(flat));
}

// ---------------------------------------------------------------------------

struct Trajectory {
  std::vector<PointCloud> states;  // H + 1 entries
  std::vector<double> per_step_w1;  // W1(m(states[h]), m(states[h+1]))
  std::vector<std::string> layer_names;
};

/// states[h+1] = layers[h](states[h]); a single layer is weight-tied.
inline Trajectory run_particles(const std::vector<SetMap>& layers, const PointCloud& x0,
                                std::size_t steps, std::vector<std::string> names = {}) {
  if (layers.empty() && steps > 0) throw Error(ErrorCode::InvalidInput, "no layers");
  if (layers.size() > 1 && layers.size() != steps)
    throw Error(ErrorCode::InvalidInput, "need one layer per step or one shared layer");
  Trajectory t;
  t.states.reserve(steps + 1);
  t.states.push_back(x0);
  for (std::size_t h = 0; h < steps; ++h) {
    const SetMap& layer = layers.size() == 1 ? layers.front() : layers[h];
    PointCloud next = layer(t.states.back());
    if (next.dim() == t.states.back().dim())
      t.per_step_w1.push_back(w1(t.states.back(), next).value);
    else
      t.per_step_w1.push_back(std::numeric_limits<double>::quiet_NaN());
    t.states.push_back(std::move(next));
  }
  t.layer_names = std::move(names);
  return t;
}

inline Trajectory run_particles(const AttentionConfig& cfg, const PointCloud& x0, std::size_t steps) {
  return run_particles({attention_layer(cfg)}, x0, steps,
                       {cfg.potential.name() + "/" + cfg.lookup.name()});
}

inline Trajectory run_particles(const std::vector<AttentionConfig>& cfgs, const PointCloud& x0) {
  std::vector<SetMap> layers;
  std::vector<std::string> names;
  for (const auto& c : cfgs) {
    layers.push_back(attention_layer(c));
    names.push_back(c.potential.name() + "/" + c.lookup.name());
  }
  if (layers.size() == 1) return run_particles(layers, x0, 1, names);
  return run_particles(layers, x0, layers.size(), names);
}

// ---------------------------------------------------------------------------

namespace injection {
struct AddInput {};
/// s(x) = A x + b per particle.
struct Affine {
  Matrix a;
  Vec b;
};
}  // namespace injection

using Injection = std::variant<injection::AddInput, injection::Affine>;

inline PointCloud inject(const Injection& s, const PointCloud& x) {
  if (std::holds_alternative<injection::AddInput>(s)) return x;
  const auto& aff = std::get<injection::Affine>(s);
  if (aff.a.cols() != x.dim() || aff.b.size() != aff.a.rows())
    throw Error(ErrorCode::DimMismatch, "affine injection shape");
  std::vector<double> flat;
  flat.reserve(x.size() * aff.a.rows());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec v = aff.a.apply(x.point(i));
    for (std::size_t k = 0; k < v.size(); ++k) flat.push_back(v[k] + aff.b[k]);
  }
  return PointCloud(aff.a.rows(), std::move(flat));
}

struct DeqResult {
  PointCloud h_star;
  std::size_t iterations = 0;
  double residual = 0.0;  // last step size
  double contraction_estimate = 0.0;
  bool converged = false;
  std::vector<double> steps;
};

/// Picard iteration H <- g(H + s(X)) from H0, stopping when the step drops
/// below tol. Non-convergence is reported, not thrown.
inline DeqResult deq_solve(const SetMap& g, const PointCloud& x, const PointCloud& h0,
                           const Injection& s, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidInput, "tol must be > 0");
  const PointCloud sx = inject(s, x);
  if (sx.size() != h0.size() || sx.dim() != h0.dim())
    throw Error(ErrorCode::DimMismatch, "H0 and s(X) differ in shape");
  DeqResult r{h0, 0, 0.0, 0.0, false, {}};
  for (std::size_t k = 0; k < max_iter; ++k) {
    PointCloud next = g(add(r.h_star, sx));
    if (next.size() != h0.size() || next.dim() != h0.dim())
      throw Error(ErrorCode::DimMismatch, "layer changes the cloud shape");
    const double step = sup_l1(next, r.h_star);
    if (!r.steps.empty() && r.steps.back() > 0.0)
      r.contraction_estimate = std::max(r.contraction_estimate, step / r.steps.back());
    r.steps.push_back(step);
    r.h_star = std::move(next);
    r.iterations = k + 1;
    r.residual = step;
    if (step < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

inline DeqResult deq_solve(const AttentionConfig& cfg, const PointCloud& x, const PointCloud& h0,
                           double tol, std::size_t max_iter) {
  return deq_solve(attention_layer(cfg), x, h0, injection::AddInput{}, tol, max_iter);
}

// ---------------------------------------------------------------------------

struct InvertResult {
  PointCloud x;
  std::size_t iterations = 0;
  double residual = 0.0;  // max_i |x_i + g(x)_i - y_i|_1
  bool converged = false;
  std::vector<double> residuals;
};

/// Solves x + g(x) = y by x <- y - g(x) starting from x = y.
inline InvertResult invert_residual(const SetMap& g, const PointCloud& y, double tol,
                                    std::size_t max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidInput, "tol must be > 0");
  InvertResult r{y, 0, 0.0, false, {}};
  for (std::size_t k = 0;; ++k) {
    const PointCloud gx = g(r.x);
    const PointCloud fx = add(r.x, gx);
    r.residual = sup_l1(fx, y);
    r.residuals.push_back(r.residual);
    r.iterations = k;
    if (r.residual <= tol) {
      r.converged = true;
      break;
    }
    if (k == max_iter) break;
    r.x = add(y, gx, -1.0);
  }
  return r;
}

inline InvertResult invert_residual(const AttentionConfig& cfg, const PointCloud& y, double tol,
                                    std::size_t max_iter) {
  return invert_residual(attention_layer(cfg), y, tol, max_iter);
}

/// F(x) = x + g(x)
inline PointCloud residual_forward(const SetMap& g, const PointCloud& x) { return add(x, g(x)); }

struct SetMapLip {
  double estimate = 0.0;
  std::size_t pairs = 0;
  Provenance provenance;
};

/// Sampled Lipschitz constant of a set map in the sup-l1 norm over clouds of
/// n points in the box. Half the pairs are small perturbations of each other.
inline SetMapLip estimate_set_map_lip(const SetMap& g, const DomainBox& box, std::size_t n,
                                      std::size_t pairs, std::uint64_t seed) {
  if (!box.bounded()) throw Error(ErrorCode::RequiresCompactDomain, "set-map estimate needs a box");
  SetMapLip out;
  out.provenance = {ProvenanceKind::Sampled, pairs, seed, "sup-l1 ratio over random cloud pairs"};
  const Rng root(seed);
  const std::size_t d = box.dim();
  auto draw = [&](Rng& rng) {
    std::vector<double> flat(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) flat[i * d + k] = rng.uniform(box.lower()[k], box.upper()[k]);
    return PointCloud(d, std::move(flat));
  };
  for (std::size_t t = 0; t < pairs; ++t) {
    Rng rng = root.split(t);
    const PointCloud a = draw(rng);
    PointCloud b = draw(rng);
    if (t % 2 == 1) {
      const double scale = std::pow(10.0, rng.uniform(-4.0, -1.0));
      std::vector<double> flat = a.flat();
      for (std::size_t i = 0; i < n; ++i) {
        Vec p = a.point_vec(i);
        for (auto& c : p) c += scale * rng.normal();
        p = box.clamp(p);
        std::copy(p.begin(), p.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * d));
      }
      b = PointCloud(d, std::move(flat));
    }
    const double din = sup_l1(a, b);
    if (din < 1e-12) continue;
    out.estimate = std::max(out.estimate, sup_l1(g(a), g(b)) / din);
    ++out.pairs;
  }
  return out;
}

}  // namespace lipattn
