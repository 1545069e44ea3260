#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "functions.hpp"
#include "numerics.hpp"
#include "protocol.hpp"

namespace sbacc {

/// R = (S+1)(S+4) pi^2 / 8
inline double r_factor(std::size_t s) {
  const double sp = static_cast<double>(s);
  return (sp + 1.0) * (sp + 4.0) * std::numbers::pi * std::numbers::pi / 8.0;
}

/// Upper bound on the Lebesgue constant of Berrut's interpolant over the
/// N - S first-kind points left after S stragglers.
inline double lebesgue_bound(std::size_t n, std::size_t s) {
  if (s >= n || n - s < 2)
    throw std::invalid_argument("lebesgue_bound: need N - S >= 2 (N=" + std::to_string(n) +
                                ", S=" + std::to_string(s) + ")");
  const double sp = static_cast<double>(s);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return (r_factor(s) + 1.0) * (1.0 + pi2 * (sp + 1.0) * std::log(static_cast<double>(n - s)));
}

/// Delta: ||g''|| when the node count is odd, ||g'|| + ||g''|| when even.
inline double delta_for(std::size_t node_count, double d1, double d2) {
  return node_count % 2 == 1 ? d2 : d1 + d2;
}

/// Sup-norm bound on the Berrut reconstruction error with S stragglers.
inline double theorem1_bound(std::size_t n, std::size_t s, double d1, double d2) {
  if (s + 2 >= n)
    throw std::invalid_argument("theorem1_bound: need S < N - 2 (N=" + std::to_string(n) + ", S=" +
                                std::to_string(s) + ")");
  if (d1 < 0 || d2 < 0) throw std::invalid_argument("theorem1_bound: derivative norms must be >= 0");
  const double delta = delta_for(n - s, d1, d2);
  return 2.0 * delta * (1.0 + r_factor(s)) *
         std::sin(static_cast<double>(s + 1) * std::numbers::pi / (2.0 * static_cast<double>(n)));
}

struct DerivativeNorms {
  double d1 = 0.0;  ///< max over grid and entries of |g'|
  double d2 = 0.0;  ///< max over grid and entries of |g''|
};

/// ||g'||, ||g''|| for g(z) = f(u(z)) by central differences on `points`
/// equispaced samples of [-1, 1].
inline DerivativeNorms estimate_derivative_norms(const Dataset& ds, const TargetFunction& f,
                                                 std::size_t points = 4001) {
  if (points < 3) throw std::invalid_argument("estimate_derivative_norms: need >= 3 grid points");
  const BerrutInterpolant u(ds.alpha, ds.blocks);
  const auto grid = uniform_grid(points);
  const double h = 2.0 / static_cast<double>(points - 1);
  DerivativeNorms out;
  Matrix prev = f(u(grid[0]));
  Matrix cur = f(u(grid[1]));
  for (std::size_t k = 1; k + 1 < points; ++k) {
    Matrix next = f(u(grid[k + 1]));
    out.d1 = std::max(out.d1, ((next - prev) / (2.0 * h)).cwiseAbs().maxCoeff());
    out.d2 = std::max(out.d2, ((next - 2.0 * cur + prev) / (h * h)).cwiseAbs().maxCoeff());
    prev = std::move(cur);
    cur = std::move(next);
  }
  return out;
}

/// max over r and z of |prod_{i != r}(z - z_i)|^2 / |sum_k (-1)^k prod_{i != k}(z - z_i)|^2,
/// i.e. the largest squared Berrut weight. Grid points within `exclusion` of
/// a node are skipped.
inline double max_weight_ratio(std::span<const double> nodes, std::span<const double> grid,
                               double exclusion = 1e-6) {
  if (nodes.empty()) throw std::invalid_argument("max_weight_ratio: empty node set");
  double best = 0.0;
  for (const double z : grid) {
    bool near = false;
    for (const double x : nodes) near = near || std::abs(z - x) < exclusion;
    if (near) continue;
    const auto w = berrut_weights(nodes, z);
    for (const double v : w) best = std::max(best, v * v);
  }
  return best;
}

struct BoundTerms {
  double delta = 0.0;
  double R = 0.0;
  double lebesgue_bound = 0.0;
  double weight_ratio = 0.0;  ///< the maximized weight ratio shared by t2..t4
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double t4 = 0.0;
  double total = 0.0;
};

/// Default reconstruction points for a bound evaluated without a run:
/// the N first-kind points thinned to N1 (or N - S) as the simulator would.
inline std::vector<double> default_reconstruction_nodes(const ExperimentConfig& cfg) {
  const NodeSet z = cheb_first_kind(cfg.N);
  const NodeSet alpha = cheb_first_kind(cfg.K);
  const std::size_t n1 = cfg.N1 == 0 ? cfg.M() : cfg.N1;
  std::vector<double> out;
  for (const auto q : detail::thin_for_targets(z.points(), alpha.points(), n1)) out.push_back(z[q]);
  return out;
}

/// Four-term bound on the mean squared reconstruction error with adversaries.
///
/// The first term treats the N - N1 unused points as stragglers. p_loc is the
/// probability of imperfect localization (default 0) and sigma_q2 the
/// residual noise variance after correction (default 0). Without adversaries
/// the adversarial terms vanish.
inline BoundTerms theorem2_bound(const ExperimentConfig& cfg, double d1, double d2,
                                 std::span<const double> z_grid, std::span<const double> nodes) {
  cfg.validate();
  if (d1 < 0 || d2 < 0) throw std::invalid_argument("theorem2_bound: derivative norms must be >= 0");
  const std::size_t n1 = cfg.N1 == 0 ? cfg.M() : cfg.N1;
  if (cfg.A > n1)
    throw std::invalid_argument("theorem2_bound: A=" + std::to_string(cfg.A) + " > N1=" +
                                std::to_string(n1));
  if (nodes.size() != n1)
    throw std::invalid_argument("theorem2_bound: " + std::to_string(nodes.size()) +
                                " reconstruction nodes for N1=" + std::to_string(n1));
  BoundTerms b;
  const std::size_t s_eff = cfg.N - n1;
  b.delta = delta_for(n1, d1, d2);
  b.R = r_factor(s_eff);
  b.lebesgue_bound = lebesgue_bound(cfg.N, s_eff);
  b.weight_ratio = max_weight_ratio(nodes, z_grid);
  const double first = 2.0 * b.delta * (1.0 + b.R) *
                       std::sin(static_cast<double>(s_eff + 1) * std::numbers::pi /
                                (2.0 * static_cast<double>(cfg.N)));
  b.t1 = first * first;
  b.t2 = static_cast<double>(n1) * cfg.sigma_p2 * b.weight_ratio;
  if (cfg.A > 0) {
    const double p_loc = cfg.p_loc.value_or(0.0);
    const double sq2 = cfg.sigma_q2.value_or(0.0);
    const double a = static_cast<double>(cfg.A);
    b.t3 = 2.0 * std::sqrt(sq2) * std::sqrt(cfg.sigma_a2) + (1.0 - p_loc) * a * sq2 * b.weight_ratio;
    double ratio = 1.0;
    for (std::size_t i = 0; i < cfg.A; ++i)
      ratio *= static_cast<double>(n1 - i) / static_cast<double>(cfg.N - i);
    b.t4 = p_loc * ratio * 2.0 * a * cfg.sigma_a2 * b.weight_ratio;
  }
  b.total = b.t1 + b.t2 + b.t3 + b.t4;
  return b;
}

inline BoundTerms theorem2_bound(const ExperimentConfig& cfg, double d1, double d2,
                                 std::span<const double> z_grid) {
  const auto nodes = default_reconstruction_nodes(cfg);
  return theorem2_bound(cfg, d1, d2, z_grid, nodes);
}

inline BoundTerms theorem2_bound(const ExperimentConfig& cfg, double d1, double d2) {
  const auto grid = uniform_grid(2001);
  return theorem2_bound(cfg, d1, d2, grid);
}

}  // namespace sbacc
