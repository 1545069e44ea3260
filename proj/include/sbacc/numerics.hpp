#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sbacc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class NodeKind { ChebyshevFirst, ChebyshevSecond, Subset };

/// Ordered interpolation / evaluation points on [-1, 1].
///
/// A Subset remembers which positions of its generating family it kept, so
/// worker indices survive puncturing.
class NodeSet {
 public:
  NodeKind kind() const noexcept { return kind_; }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t source_count() const noexcept { return source_count_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }

  /// Keep the positions `keep` (strictly increasing, relative to this set).
  NodeSet subset(std::span<const std::size_t> keep) const {
    NodeSet out;
    out.kind_ = NodeKind::Subset;
    out.source_count_ = source_count_;
    out.points_.reserve(keep.size());
    out.indices_.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (keep[k] >= points_.size())
        throw std::invalid_argument("subset index " + std::to_string(keep[k]) +
                                    " out of range for node set of size " +
                                    std::to_string(points_.size()));
      if (k > 0 && keep[k] <= keep[k - 1])
        throw std::invalid_argument("subset indices must be strictly increasing");
      out.points_.push_back(points_[keep[k]]);
      out.indices_.push_back(indices_[keep[k]]);
    }
    return out;
  }

  static NodeSet make(NodeKind kind, std::vector<double> points) {
    NodeSet out;
    out.kind_ = kind;
    out.source_count_ = points.size();
    out.indices_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out.indices_[i] = i;
    out.points_ = std::move(points);
    return out;
  }

 private:
  NodeKind kind_ = NodeKind::Subset;
  std::size_t source_count_ = 0;
  std::vector<double> points_;
  std::vector<std::size_t> indices_;
};

/// cos((2i+1)pi/(2n)), i = 0..n-1, strictly decreasing.
inline NodeSet cheb_first_kind(std::size_t n) {
  if (n == 0) throw std::invalid_argument("cheb_first_kind: n must be >= 1");
  std::vector<double> pts(n);
  const double dn = static_cast<double>(n);
  // sin of the complementary angle keeps full relative accuracy near 0.
  for (std::size_t i = 0; i < n; ++i)
    pts[i] = std::sin((dn - 1.0 - 2.0 * static_cast<double>(i)) * std::numbers::pi / (2.0 * dn));
  // Exact symmetry; cos() of supplementary angles can disagree in the last ulp.
  for (std::size_t i = 0; i < n / 2; ++i) pts[n - 1 - i] = -pts[i];
  if (n % 2 == 1) pts[n / 2] = 0.0;
  return NodeSet::make(NodeKind::ChebyshevFirst, std::move(pts));
}

/// cos(i pi / n), i = 0..n-1 (the BACC evaluation points).
inline NodeSet cheb_second_kind(std::size_t n) {
  if (n == 0) throw std::invalid_argument("cheb_second_kind: n must be >= 1");
  std::vector<double> pts(n);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    pts[i] = std::cos(static_cast<double>(i) * std::numbers::pi / dn);
  if (n % 2 == 0) pts[n / 2] = 0.0;
  return NodeSet::make(NodeKind::ChebyshevSecond, std::move(pts));
}

/// Normalized Berrut weights ((-1)^j/(z-x_j)) / sum_k ((-1)^k/(z-x_k)).
/// At an exact node the result is the corresponding unit vector.
inline std::vector<double> berrut_weights(std::span<const double> nodes, double z) {
  std::vector<double> w(nodes.size(), 0.0);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (z == nodes[j]) {
      w[j] = 1.0;
      return w;
    }
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double t = ((j % 2 == 0) ? 1.0 : -1.0) / (z - nodes[j]);
    w[j] = t;
    denom += t;
  }
  for (double& x : w) x /= denom;
  return w;
}

/// Scalar Berrut interpolation through (nodes[j], values[j]).
inline double berrut_eval(std::span<const double> nodes, std::span<const double> values,
                          double z) {
  if (nodes.size() != values.size() || nodes.empty())
    throw std::invalid_argument("berrut_eval: nodes/values size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (z == nodes[j]) return values[j];
    const double t = ((j % 2 == 0) ? 1.0 : -1.0) / (z - nodes[j]);
    num += t * values[j];
    den += t;
  }
  return num / den;
}

/// Berrut rational interpolant with matrix-valued samples.
class BerrutInterpolant {
 public:
  BerrutInterpolant(NodeSet nodes, std::vector<Matrix> samples)
      : nodes_(std::move(nodes)), samples_(std::move(samples)) {
    if (samples_.size() != nodes_.size())
      throw std::invalid_argument("BerrutInterpolant: " + std::to_string(samples_.size()) +
                                  " samples for " + std::to_string(nodes_.size()) + " nodes");
    if (samples_.empty()) throw std::invalid_argument("BerrutInterpolant: no nodes");
    for (const auto& s : samples_)
      if (s.rows() != samples_[0].rows() || s.cols() != samples_[0].cols())
        throw std::invalid_argument("BerrutInterpolant: samples differ in shape");
  }

  const NodeSet& nodes() const noexcept { return nodes_; }
  const std::vector<Matrix>& samples() const noexcept { return samples_; }
  Eigen::Index rows() const { return samples_[0].rows(); }
  Eigen::Index cols() const { return samples_[0].cols(); }

  Matrix operator()(double z) const {
    const auto pts = nodes_.points();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (z == pts[j]) return samples_[j];
    const auto w = berrut_weights(pts, z);
    Matrix out = Matrix::Zero(rows(), cols());
    for (std::size_t j = 0; j < w.size(); ++j) out.noalias() += w[j] * samples_[j];
    return out;
  }

 private:
  NodeSet nodes_;
  std::vector<Matrix> samples_;
};

inline Matrix berrut_eval(const BerrutInterpolant& itp, double z) { return itp(z); }

/// Uniform grid of `count` points on [lo, hi], endpoints included.
inline std::vector<double> uniform_grid(std::size_t count, double lo = -1.0, double hi = 1.0) {
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  // (k * span) / (count - 1) is correctly rounded, so nested grids share points bit-exactly.
  const double span = hi - lo;
  const double denom = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) g[k] = lo + (static_cast<double>(k) * span) / denom;
  g.back() = hi;
  return g;
}

/// Lebesgue function of the Berrut weights at z (z not a node).
inline double berrut_lebesgue_function(std::span<const double> nodes, double z) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double t = 1.0 / (z - nodes[j]);
    num += std::abs(t);
    den += (j % 2 == 0) ? t : -t;
  }
  return num / std::abs(den);
}

/// Max of the Berrut Lebesgue function over a uniform grid of [-1, 1];
/// grid points that coincide with a node are skipped.
inline double lebesgue_constant(const NodeSet& nodes, std::size_t grid_resolution = 10001) {
  if (nodes.size() < 2) throw std::invalid_argument("lebesgue_constant: need >= 2 nodes");
  if (grid_resolution < 10)
    throw std::invalid_argument("lebesgue_constant: grid_resolution must be >= 10");
  const auto pts = nodes.points();
  double best = 1.0;
  for (const double z : uniform_grid(grid_resolution)) {
    if (std::find(pts.begin(), pts.end(), z) != pts.end()) continue;
    best = std::max(best, berrut_lebesgue_function(pts, z));
  }
  return best;
}

}  // namespace sbacc
