#pragma once

// Finitely supported probability measures on R^d, the empirical-measure map
// X -> m(X), and the projection of a measure onto the Dirac at its barycenter.

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "lipattn/core.hpp"

namespace lipattn {

/// Ordered list of N >= 1 points in R^d, stored row-major.
class PointCloud {
 public:
  PointCloud() = default;

  PointCloud(std::size_t dim, std::vector<double> flat) : dim_(dim), coords_(std::move(flat)) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidInput, "point dimension must be >= 1");
    if (coords_.empty()) throw Error(ErrorCode::EmptySupport, "point cloud has no points");
    if (coords_.size() % dim_ != 0)
      throw Error(ErrorCode::DimMismatch, "coordinate count is not a multiple of dim");
    if (!all_finite(coords_)) throw Error(ErrorCode::InvalidInput, "non-finite coordinate");
  }

  static PointCloud from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptySupport, "point cloud has no points");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw Error(ErrorCode::DimMismatch, "points of differing dimension");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return PointCloud(d, std::move(flat));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  Vec point_vec(std::size_t i) const {
    auto p = point(i);
    return {p.begin(), p.end()};
  }
  const std::vector<double>& flat() const noexcept { return coords_; }

  std::vector<Vec> rows() const {
    std::vector<Vec> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(point_vec(i));
    return out;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

inline constexpr double kWeightTolerance = 1e-12;

/// Weighted point cloud whose weights are nonnegative and sum to one.
/// Repeated support points are kept as separate atoms.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(PointCloud support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (weights_.size() != support_.size())
      throw Error(ErrorCode::InvalidWeights, "weight count differs from support size");
    for (double w : weights_)
      if (!std::isfinite(w) || w < 0.0)
        throw Error(ErrorCode::InvalidWeights, "weights must be finite and nonnegative");
    // Summed in sorted order so the renormalization ignores atom order.
    std::vector<double> sorted = weights_;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double w : sorted) total += w;
    if (std::abs(total - 1.0) > kWeightTolerance)
      throw Error(ErrorCode::InvalidWeights,
                  "weights sum to " + std::to_string(total) + ", expected 1");
    if (total != 1.0)
      for (double& w : weights_) w /= total;
  }

  const PointCloud& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return support_.size(); }
  std::size_t dim() const noexcept { return support_.dim(); }

  bool is_uniform() const {
    return std::all_of(weights_.begin(), weights_.end(),
                       [&](double w) { return w == weights_.front(); });
  }

 private:
  PointCloud support_;
  std::vector<double> weights_;
};

/// Axis-aligned box E = [lower, upper], or all of R^d when unbounded.
class DomainBox {
 public:
  static DomainBox unbounded(std::size_t dim) {
    DomainBox b;
    b.dim_ = dim;
    return b;
  }

  static DomainBox box(Vec lower, Vec upper) {
    if (lower.size() != upper.size() || lower.empty())
      throw Error(ErrorCode::DimMismatch, "box bounds of differing dimension");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw Error(ErrorCode::InvalidInput, "box requires finite lower <= upper");
    DomainBox b;
    b.dim_ = lower.size();
    b.lower_ = std::move(lower);
    b.upper_ = std::move(upper);
    return b;
  }

  /// [lo, hi]^d
  static DomainBox cube(std::size_t dim, double lo, double hi) {
    return box(Vec(dim, lo), Vec(dim, hi));
  }

  /// Coordinate-wise (l-infinity) bounding box of one or more clouds.
  static DomainBox bounding(std::initializer_list<const PointCloud*> clouds) {
    Vec lo, hi;
    for (const PointCloud* c : clouds) {
      if (lo.empty()) {
        lo.assign(c->dim(), std::numeric_limits<double>::infinity());
        hi.assign(c->dim(), -std::numeric_limits<double>::infinity());
      }
      if (c->dim() != lo.size()) throw Error(ErrorCode::DimMismatch, "bounding box");
      for (std::size_t i = 0; i < c->size(); ++i)
        for (std::size_t k = 0; k < lo.size(); ++k) {
          lo[k] = std::min(lo[k], c->point(i)[k]);
          hi[k] = std::max(hi[k], c->point(i)[k]);
        }
    }
    return box(std::move(lo), std::move(hi));
  }

  bool bounded() const noexcept { return !lower_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const Vec& lower() const noexcept { return lower_; }
  const Vec& upper() const noexcept { return upper_; }

  bool contains(std::span<const double> x, double slack = 0.0) const {
    if (!bounded()) return true;
    for (std::size_t i = 0; i < dim_; ++i)
      if (x[i] < lower_[i] - slack || x[i] > upper_[i] + slack) return false;
    return true;
  }

  /// l1 diameter: sum of side lengths.
  double diam_l1() const {
    if (!bounded()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += upper_[i] - lower_[i];
    return s;
  }

  double diam_l2() const {
    if (!bounded()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += (upper_[i] - lower_[i]) * (upper_[i] - lower_[i]);
    return std::sqrt(s);
  }

  double diam_linf() const {
    if (!bounded()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s = std::max(s, upper_[i] - lower_[i]);
    return s;
  }

  Vec clamp(std::span<const double> x) const {
    Vec out(x.begin(), x.end());
    if (!bounded()) return out;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = std::clamp(out[i], lower_[i], upper_[i]);
    return out;
  }

 private:
  std::size_t dim_ = 0;
  Vec lower_;
  Vec upper_;
};

/// m(X): uniform weights 1/N on X, order preserved.
inline EmpiricalMeasure empirical(const PointCloud& points) {
  if (points.size() == 0) throw Error(ErrorCode::EmptySupport, "empirical measure of no points");
  const std::size_t n = points.size();
  return EmpiricalMeasure(points, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

inline EmpiricalMeasure dirac(std::span<const double> x) {
  return EmpiricalMeasure(PointCloud(x.size(), Vec(x.begin(), x.end())), {1.0});
}

namespace detail {

// Atoms sorted lexicographically by (point, weight); this fixes the summation
// order so that jointly permuting support and weights is bit-for-bit neutral.
inline std::vector<std::size_t> canonical_order(const PointCloud& pts,
                                                std::span<const double> weights) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto pa = pts.point(a);
    auto pb = pts.point(b);
    for (std::size_t k = 0; k < pts.dim(); ++k) {
      if (pa[k] < pb[k]) return true;
      if (pb[k] < pa[k]) return false;
    }
    if (weights[a] != weights[b]) return weights[a] < weights[b];
    return a < b;
  });
  return idx;
}

}  // namespace detail

/// Sum_i w_i x_i in canonical order.
inline Vec barycenter(const EmpiricalMeasure& mu) {
  const auto& pts = mu.support();
  Vec out(pts.dim(), 0.0);
  for (std::size_t i : detail::canonical_order(pts, mu.weights())) {
    const double w = mu.weights()[i];
    auto p = pts.point(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * p[k];
  }
  return out;
}

/// Dirac at the barycenter.
inline EmpiricalMeasure project_dirac(const EmpiricalMeasure& mu) {
  if (mu.size() == 1 && mu.weights()[0] == 1.0) return mu;
  return dirac(barycenter(mu));
}

/// Pushforward of the weights of `weighted` onto a new support of equal size.
inline EmpiricalMeasure with_support(const EmpiricalMeasure& weighted, PointCloud support) {
  if (support.size() != weighted.size())
    throw Error(ErrorCode::SizeMismatch, "replacement support has a different size");
  return EmpiricalMeasure(std::move(support), weighted.weights());
}

}  // namespace lipattn
