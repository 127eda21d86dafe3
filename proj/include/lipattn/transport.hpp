#pragma once

// Exact 1-Wasserstein distance between empirical measures.
//
// The transportation LP is solved as an integer min-cost flow: masses are
// scaled to integers that sum to the same total S on both sides, costs are
// scaled by a power of two and rounded, and successive shortest paths (Dijkstra on
// reduced costs) run on the dense bipartite residual graph. The final node
// potentials are an exact dual certificate for the integer problem.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>

#include "lipattn/core.hpp"
#include "lipattn/measures.hpp"

namespace lipattn {

enum class GroundMetric { L1, L2 };

inline double ground_cost(std::span<const double> x, std::span<const double> y, GroundMetric m) {
  return m == GroundMetric::L1 ? dist_l1(x, y) : std::sqrt(dist_l2_squared(x, y));
}

struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> gamma;  // rows x cols, row-major
  std::vector<double> u;      // dual potentials, u_i + v_j <= c_ij
  std::vector<double> v;
  double cost = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return gamma[i * cols + j]; }
};

struct W1Result {
  double value = 0.0;
  TransportPlan plan;
  double dual_gap = 0.0;
};

/// Largest problem the dense LP path accepts on either side.
inline constexpr std::size_t kMaxLpSupport = 512;

namespace detail {

inline std::vector<double> cost_matrix(const PointCloud& x, const PointCloud& y, GroundMetric m) {
  if (x.dim() != y.dim()) throw Error(ErrorCode::DimMismatch, "W1 between different dimensions");
  std::vector<double> c(x.size() * y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      c[i * y.size() + j] = ground_cost(x.point(i), y.point(j), m);
      if (!std::isfinite(c[i * y.size() + j]))
        throw Error(ErrorCode::NonFiniteCost, "non-finite ground cost");
    }
  return c;
}

// Integer masses with sum exactly `total`, by largest remainder.
inline std::vector<std::int64_t> integer_masses(const std::vector<double>& w, std::int64_t total) {
  const std::size_t n = w.size();
  std::vector<std::int64_t> out(n);
  std::vector<std::pair<double, std::size_t>> frac(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = w[i] * static_cast<double>(total);
    out[i] = static_cast<std::int64_t>(std::floor(exact));
    frac[i] = {exact - static_cast<double>(out[i]), i};
    assigned += out[i];
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::int64_t rest = total - assigned;
  for (std::size_t k = 0; rest > 0; k = (k + 1) % n, --rest) ++out[frac[k].second];
  for (std::size_t k = n; rest < 0; ++rest) {  // float floor overshoot, vanishingly rare
    k = (k == 0 ? n : k) - 1;
    if (out[frac[k].second] > 0) --out[frac[k].second];
    else ++rest;
  }
  return out;
}

struct FlowSolution {
  std::vector<std::int64_t> flow;  // N x M
  std::vector<std::int64_t> pot;   // node potentials: [s, sources..., sinks..., t]
};

// Successive shortest paths on the bipartite transportation network.
inline FlowSolution transport_flow(const std::vector<std::int64_t>& cost, std::size_t n,
                                   std::size_t m, const std::vector<std::int64_t>& supply,
                                   const std::vector<std::int64_t>& demand) {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  const std::size_t nodes = n + m + 2;
  const std::size_t s = 0, t = n + m + 1;
  auto src = [](std::size_t i) { return 1 + i; };
  auto snk = [n](std::size_t j) { return 1 + n + j; };

  FlowSolution sol{std::vector<std::int64_t>(n * m, 0), std::vector<std::int64_t>(nodes, 0)};
  std::vector<std::int64_t> sent(n, 0), received(m, 0);
  std::vector<std::int64_t> dist(nodes);
  std::vector<std::size_t> parent(nodes);
  std::vector<char> done(nodes);
  auto& pot = sol.pot;
  const std::int64_t total = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
  std::int64_t shipped = 0;

  while (shipped < total) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[s] = 0;
    auto relax = [&](std::size_t from, std::size_t to, std::int64_t c) {
      const std::int64_t nd = dist[from] + c + pot[from] - pot[to];
      if (nd < dist[to]) {
        dist[to] = nd;
        parent[to] = from;
      }
    };
    for (;;) {
      std::size_t u = nodes;
      for (std::size_t k = 0; k < nodes; ++k)
        if (!done[k] && dist[k] < kInf && (u == nodes || dist[k] < dist[u])) u = k;
      if (u == nodes) break;
      done[u] = 1;
      if (u == t) break;
      if (u == s) {
        for (std::size_t i = 0; i < n; ++i)
          if (sent[i] < supply[i]) relax(s, src(i), 0);
      } else if (u <= n) {
        const std::size_t i = u - 1;
        for (std::size_t j = 0; j < m; ++j) relax(u, snk(j), cost[i * m + j]);
      } else {
        const std::size_t j = u - 1 - n;
        for (std::size_t i = 0; i < n; ++i)
          if (sol.flow[i * m + j] > 0) relax(u, src(i), -cost[i * m + j]);
        if (received[j] < demand[j]) relax(u, t, 0);
      }
    }
    if (dist[t] >= kInf) throw Error(ErrorCode::InvalidInput, "transport network infeasible");

    const std::int64_t dt = dist[t];
    for (std::size_t k = 0; k < nodes; ++k) pot[k] += std::min(dist[k], dt);

    // Bottleneck along the path t <- ... <- s.
    std::int64_t push = kInf;
    for (std::size_t v = t; v != s; v = parent[v]) {
      const std::size_t u = parent[v];
      if (u == s) push = std::min(push, supply[v - 1] - sent[v - 1]);
      else if (v == t) push = std::min(push, demand[u - 1 - n] - received[u - 1 - n]);
      else if (u > n) push = std::min(push, sol.flow[(v - 1) * m + (u - 1 - n)]);
    }
    for (std::size_t v = t; v != s; v = parent[v]) {
      const std::size_t u = parent[v];
      if (u == s) sent[v - 1] += push;
      else if (v == t) received[u - 1 - n] += push;
      else if (u <= n) sol.flow[(u - 1) * m + (v - 1 - n)] += push;
      else sol.flow[(v - 1) * m + (u - 1 - n)] -= push;
    }
    shipped += push;
  }
  return sol;
}

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) { return b == 0 ? a : gcd64(b, a % b); }

}  // namespace detail

/// Exact W1(mu, nu) with an optimal plan and a dual certificate.
inline W1Result w1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   GroundMetric metric = GroundMetric::L1) {
  const std::size_t n = mu.size(), m = nu.size();
  if (n > kMaxLpSupport || m > kMaxLpSupport)
    throw Error(ErrorCode::SupportTooLarge, "LP path supports at most 512 atoms per side");
  const std::vector<double> c = detail::cost_matrix(mu.support(), nu.support(), metric);

  // Uniform measures get an exact integer representation of their masses;
  // other weights are rounded to multiples of 2^-50.
  std::int64_t total = std::int64_t{1} << 50;
  if (mu.is_uniform() && nu.is_uniform()) {
    const auto nn = static_cast<std::int64_t>(n), mm = static_cast<std::int64_t>(m);
    const std::int64_t l = nn / detail::gcd64(nn, mm) * mm;
    total = l * (total / l);
  }
  const auto supply = detail::integer_masses(mu.weights(), total);
  const auto demand = detail::integer_masses(nu.weights(), total);

  // Power-of-two cost scale keeping any path length below 2^52, so integer
  // costs stay exact and shortest-path sums cannot overflow.
  const double max_cost = c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
  double scale = 1.0;
  if (max_cost > 0.0) {
    const double limit = std::ldexp(1.0, 52) / static_cast<double>(n + m + 2);
    scale = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(limit / max_cost))));
  }
  std::vector<std::int64_t> ic(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) ic[k] = std::llround(c[k] * scale);

  const auto sol = detail::transport_flow(ic, n, m, supply, demand);

  W1Result res;
  auto& plan = res.plan;
  plan.rows = n;
  plan.cols = m;
  plan.gamma.resize(n * m);
  const double inv_total = 1.0 / static_cast<double>(total);
  double value = 0.0;
  for (std::size_t k = 0; k < n * m; ++k) {
    plan.gamma[k] = static_cast<double>(sol.flow[k]) * inv_total;
    value += plan.gamma[k] * c[k];
  }
  plan.cost = value;

  // u_i = -pot(source i), v_j = pot(sink j), shifted so that u_0 = 0.
  const std::int64_t base = sol.pot[1];
  plan.u.resize(n);
  plan.v.resize(m);
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    plan.u[i] = static_cast<double>(base - sol.pot[1 + i]) / scale;
    dual += static_cast<double>(supply[i]) * inv_total * plan.u[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    plan.v[j] = static_cast<double>(sol.pot[1 + n + j] - base) / scale;
    dual += static_cast<double>(demand[j]) * inv_total * plan.v[j];
  }
  res.value = value;
  res.dual_gap = std::abs(value - dual);
  return res;
}

inline W1Result w1(const PointCloud& x, const PointCloud& y, GroundMetric metric = GroundMetric::L1) {
  return w1(empirical(x), empirical(y), metric);
}

// ---------------------------------------------------------------------------
// Assignment

struct Assignment {
  std::vector<std::size_t> target;  // row i -> column target[i]
  std::vector<double> u, v;         // u_i + v_j <= c_ij, tight on the assignment
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a dense n x n matrix (Hungarian method
/// with potentials, O(n^3)).
inline Assignment solve_assignment(const std::vector<double>& cost, std::size_t n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.target.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.target[p[j] - 1] = j - 1;
  a.u.assign(u.begin() + 1, u.end());
  a.v.assign(v.begin() + 1, v.end());
  for (std::size_t i = 0; i < n; ++i) a.cost += cost[i * n + a.target[i]];
  return a;
}

/// W1(m(X), m(Y)) for |X| = |Y| via the optimal permutation.
inline W1Result w1_equal_size_assignment(const PointCloud& x, const PointCloud& y,
                                         GroundMetric metric = GroundMetric::L1) {
  if (x.size() != y.size()) throw Error(ErrorCode::SizeMismatch, "assignment needs |X| = |Y|");
  const std::size_t n = x.size();
  const auto c = detail::cost_matrix(x, y, metric);
  const Assignment a = solve_assignment(c, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  W1Result res;
  res.plan.rows = res.plan.cols = n;
  res.plan.gamma.assign(n * n, 0.0);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.plan.gamma[i * n + a.target[i]] = inv_n;
    value += c[i * n + a.target[i]];
  }
  value *= inv_n;
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) dual += (a.u[i] + a.v[i]) * inv_n;
  res.plan.u = a.u;
  res.plan.v = a.v;
  res.plan.cost = value;
  res.value = value;
  res.dual_gap = std::abs(value - dual);
  return res;
}

inline constexpr std::size_t kMaxOracleLcm = 12;

/// Test oracle for uniform measures: replicate both supports to L = lcm(N, M)
/// points and solve the assignment problem.
inline double w1_oracle_lcm(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (!mu.is_uniform() || !nu.is_uniform())
    throw Error(ErrorCode::InvalidWeights, "lcm oracle needs uniform weights");
  const auto n = static_cast<std::int64_t>(mu.size()), m = static_cast<std::int64_t>(nu.size());
  const std::int64_t l = n / detail::gcd64(n, m) * m;
  if (l > static_cast<std::int64_t>(kMaxOracleLcm))
    throw Error(ErrorCode::OracleTooLarge, "lcm(N, M) = " + std::to_string(l) + " > 12");
  auto replicate = [l](const PointCloud& pc) {
    std::vector<double> flat;
    const std::int64_t reps = l / static_cast<std::int64_t>(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i)
      for (std::int64_t r = 0; r < reps; ++r)
        flat.insert(flat.end(), pc.point(i).begin(), pc.point(i).end());
    return PointCloud(pc.dim(), std::move(flat));
  };
  return w1_equal_size_assignment(replicate(mu.support()), replicate(nu.support())).value;
}

inline constexpr std::size_t kMaxProductSupport = 64;

/// mu1 (x) mu2 on R^{d1 + d2}.
inline EmpiricalMeasure product_measure(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() * b.size() > kMaxProductSupport)
    throw Error(ErrorCode::SupportTooLarge, "product support exceeds 64 atoms");
  const std::size_t d = a.dim() + b.dim();
  std::vector<double> flat, w;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      flat.insert(flat.end(), a.support().point(i).begin(), a.support().point(i).end());
      flat.insert(flat.end(), b.support().point(j).begin(), b.support().point(j).end());
      w.push_back(a.weights()[i] * b.weights()[j]);
    }
  return EmpiricalMeasure(PointCloud(d, std::move(flat)), std::move(w));
}

struct ProductW1 {
  double product = 0.0;  // W1(mu1 (x) mu2, nu1 (x) nu2)
  double first = 0.0;    // W1(mu1, nu1)
  double second = 0.0;   // W1(mu2, nu2)
};

inline ProductW1 w1_product(const EmpiricalMeasure& mu1, const EmpiricalMeasure& nu1,
                            const EmpiricalMeasure& mu2, const EmpiricalMeasure& nu2) {
  ProductW1 r;
  r.product = w1(product_measure(mu1, mu2), product_measure(nu1, nu2)).value;
  r.first = w1(mu1, nu1).value;
  r.second = w1(mu2, nu2).value;
  return r;
}

}  // namespace lipattn
