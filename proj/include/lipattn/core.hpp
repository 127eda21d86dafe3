#pragma once

// Shared vocabulary: error type, dense vectors/matrices, norms, and the
// counter-based random stream used by every randomized routine.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lipattn {

inline constexpr const char* kVersion = "0.3.0";

enum class ErrorCode {
  EmptySupport,
  DimMismatch,
  InvalidInput,
  InvalidWeights,
  PotentialOverflow,
  UnboundedDomainUnsupported,
  RequiresCompactDomain,
  DegeneratePotential,
  KeyValueMismatch,
  SizeMismatch,
  OracleTooLarge,
  SupportTooLarge,
  NonFiniteCost,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::PotentialOverflow: return "PotentialOverflow";
    case ErrorCode::UnboundedDomainUnsupported: return "UnboundedDomainUnsupported";
    case ErrorCode::RequiresCompactDomain: return "RequiresCompactDomain";
    case ErrorCode::DegeneratePotential: return "DegeneratePotential";
    case ErrorCode::KeyValueMismatch: return "KeyValueMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::OracleTooLarge: return "OracleTooLarge";
    case ErrorCode::SupportTooLarge: return "SupportTooLarge";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using Vec = std::vector<double>;

/// Row-major dense matrix. Points are treated as row vectors when multiplied
/// on the left (x W) and as column vectors when multiplied on the right (W x).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  static Matrix from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) throw Error(ErrorCode::InvalidInput, "matrix with no rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_)
        throw Error(ErrorCode::DimMismatch, "ragged matrix rows");
      for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  /// W x for a column vector x of length cols().
  Vec apply(std::span<const double> x) const {
    if (x.size() != cols_) throw Error(ErrorCode::DimMismatch, "matrix-vector product");
    Vec out(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * x[c];
      out[r] = acc;
    }
    return out;
  }

  /// x W for a row vector x of length rows().
  Vec apply_left(std::span<const double> x) const {
    if (x.size() != rows_) throw Error(ErrorCode::DimMismatch, "vector-matrix product");
    Vec out(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out[c] += x[r] * (*this)(r, c);
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw Error(ErrorCode::DimMismatch, "matrix product");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  Matrix scaled(double s) const {
    Matrix out = *this;
    for (auto& v : out.data_) v *= s;
    return out;
  }

  /// Induced l1 -> l1 operator norm of x |-> W x: the largest column l1 norm.
  double norm_l1_induced() const {
    double best = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) s += std::abs((*this)(r, c));
      best = std::max(best, s);
    }
    return best;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double norm_l1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double norm_l2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double norm_linf(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

inline double dist_l1(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s;
}

inline double dist_l2_squared(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return s;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// Norm equivalences on R^d: |x|_2 <= |x|_1 <= sqrt(d) |x|_2.
inline double l1_to_l2_factor(std::size_t d) { return std::sqrt(static_cast<double>(d)); }

/// SplitMix64 finalizer; used both as the stream generator and to derive
/// independent child streams from (seed, index).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: output k of stream s is mix64(s + k * gamma).
/// Streams are split deterministically, so per-trial draws do not depend on
/// scheduling or on how many values earlier trials consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed)) {}

  Rng split(std::uint64_t index) const {
    Rng child(0);
    child.key_ = mix64(key_ ^ mix64(index + 0x632be59bd9b4e019ULL));
    return child;
  }

  std::uint64_t next_u64() noexcept {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix64(key_ + counter_);
  }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  /// Standard normal via Box-Muller (no cached second value, so the stream
  /// position is a pure function of the number of calls).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lipattn
