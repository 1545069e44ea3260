#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "numerics.hpp"

namespace sbacc {

namespace detail {

template <typename Real>
Real pi_value() {
  using std::atan;
  return Real(4) * atan(Real(1));
}

/// Row k holds the monomial coefficients of T_k (second_kind = false) or
/// U_k (second_kind = true), k = 0..count-1.
template <typename Real>
Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> chebyshev_coefficient_triangle(
    std::size_t count, bool second_kind) {
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = static_cast<Eigen::Index>(count);
  Mat c = Mat::Zero(n, n);
  if (n == 0) return c;
  c(0, 0) = Real(1);
  if (n == 1) return c;
  c(1, 1) = second_kind ? Real(2) : Real(1);
  for (Eigen::Index k = 2; k < n; ++k) {
    for (Eigen::Index p = 0; p <= k; ++p) {
      Real v = -c(k - 2, p);
      if (p > 0) v += Real(2) * c(k - 1, p - 1);
      c(k, p) = v;
    }
  }
  return c;
}

/// T_0(x) .. T_{count-1}(x) by the three-term recurrence.
inline void chebyshev_values(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t k = 2; k < out.size(); ++k) out[k] = 2.0 * x * out[k - 1] - out[k - 2];
}

}  // namespace detail

/// (N, K1) real DCT code together with the Vandermonde factorizations of its
/// generator and parity-check matrices:
///
///   G = B * Y * Z   (Y ascending-power Vandermonde, B lower triangular)
///   H = A * T * W   (T descending-power Vandermonde, A upper triangular)
///
/// The scalar type is a template parameter so the factorizations can be
/// verified in extended precision; the decoder works on DctCode (double).
template <typename Real = double>
class BasicDctCode {
 public:
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  BasicDctCode(std::size_t n, std::size_t k1) : n_(n), k1_(k1) {
    if (k1 <= 1 || k1 >= n)
      throw std::invalid_argument("DCT code requires 1 < K1 < N (got N=" + std::to_string(n) +
                                  ", K1=" + std::to_string(k1) + ")");
    build();
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k1() const noexcept { return k1_; }
  std::size_t redundancy() const noexcept { return n_ - k1_; }
  /// floor((N - K1) / 2)
  std::size_t capacity() const noexcept { return (n_ - k1_) / 2; }

  const Vec& points() const noexcept { return points_; }
  const Mat& dct() const noexcept { return theta_; }
  Mat generator() const { return theta_.topRows(static_cast<Eigen::Index>(k1_)); }
  Mat parity() const { return theta_.bottomRows(static_cast<Eigen::Index>(n_ - k1_)); }

  const Mat& vandermonde() const noexcept { return y_; }
  const Mat& generator_coef() const noexcept { return b_; }
  const Mat& generator_scale() const noexcept { return z_; }
  const Mat& parity_vandermonde() const noexcept { return t_; }
  const Mat& parity_coef() const noexcept { return a_coef_; }
  const Mat& parity_scale() const noexcept { return w_; }
  /// T * W, the parity operator whose syndromes carry Vandermonde structure.
  Mat modified_parity() const { return t_ * w_; }

 private:
  void build() {
    using std::cos;
    using std::pow;
    using std::sin;
    using std::sqrt;
    const auto n = static_cast<Eigen::Index>(n_);
    const auto k1 = static_cast<Eigen::Index>(k1_);
    const auto r = n - k1;
    const Real pi = detail::pi_value<Real>();
    const Real scale = sqrt(Real(2) / Real(n));
    const Real two_n = Real(2) * Real(n);

    points_.resize(n);
    Vec angle(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      angle(i) = Real(2 * i + 1) * pi / two_n;
      points_(i) = sin(Real(n - 1 - 2 * i) * pi / two_n);
    }
    for (Eigen::Index i = 0; i < n / 2; ++i) points_(n - 1 - i) = -points_(i);
    if (n % 2 == 1) points_(n / 2) = Real(0);

    theta_.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Real beta = (k == 0) ? Real(1) / sqrt(Real(2)) : Real(1);
      for (Eigen::Index i = 0; i < n; ++i)
        theta_(k, i) = scale * beta * cos(Real(2 * i + 1) * Real(k) * pi / two_n);
    }

    y_.resize(k1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Real p = Real(1);
      for (Eigen::Index row = 0; row < k1; ++row) {
        y_(row, i) = p;
        p *= points_(i);
      }
    }
    b_ = detail::chebyshev_coefficient_triangle<Real>(k1_, false);
    b_.row(0) /= sqrt(Real(2));
    z_ = Mat::Identity(n, n) * scale;

    // Rows K1..N-1 of the DCT satisfy T_{N-q}(z_i) = (-1)^i sin(theta_i) U_{q-1}(z_i),
    // so H factors through a Vandermonde of degree N-K1-1.
    t_.resize(r, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Real p = Real(1);
      for (Eigen::Index s = r - 1; s >= 0; --s) {
        t_(s, i) = p;
        p *= points_(i);
      }
    }
    const Mat u = detail::chebyshev_coefficient_triangle<Real>(static_cast<std::size_t>(r), true);
    a_coef_ = Mat::Zero(r, r);
    for (Eigen::Index row = 0; row < r; ++row) {
      const Eigen::Index degree = r - 1 - row;
      for (Eigen::Index power = 0; power <= degree; ++power)
        a_coef_(row, r - 1 - power) = u(degree, power);
    }
    w_ = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      w_(i, i) = scale * ((i % 2 == 0) ? Real(1) : Real(-1)) * sin(angle(i));
  }

  std::size_t n_;
  std::size_t k1_;
  Vec points_;
  Mat theta_;
  Mat y_, b_, z_;
  Mat t_, a_coef_, w_;
};

using DctCode = BasicDctCode<double>;

inline DctCode build_code(std::size_t n, std::size_t k1) { return DctCode(n, k1); }

/// message * G
inline Vector encode(const DctCode& code, std::span<const double> message) {
  if (message.size() != code.k1())
    throw std::invalid_argument("encode: message length " + std::to_string(message.size()) +
                                " != K1 = " + std::to_string(code.k1()));
  const Eigen::Map<const Vector> m(message.data(), static_cast<Eigen::Index>(message.size()));
  return code.generator().transpose() * m;
}

/// Received symbols at the non-straggler positions of a length-N codeword.
struct ReceivedWord {
  std::vector<double> values;
  std::vector<std::size_t> positions;

  std::size_t size() const noexcept { return values.size(); }

  static ReceivedWord full(std::span<const double> values) {
    ReceivedWord w;
    w.values.assign(values.begin(), values.end());
    w.positions.resize(values.size());
    std::iota(w.positions.begin(), w.positions.end(), std::size_t{0});
    return w;
  }
};

inline void validate_word(const DctCode& code, const ReceivedWord& word) {
  if (word.values.size() != word.positions.size())
    throw std::invalid_argument("received word: values/positions length mismatch");
  if (word.values.size() < 2 || word.values.size() > code.n())
    throw std::invalid_argument("received word: length must be in [2, N]");
  for (std::size_t i = 0; i < word.positions.size(); ++i) {
    if (word.positions[i] >= code.n())
      throw std::invalid_argument("received word: position out of range");
    if (i > 0 && word.positions[i] <= word.positions[i - 1])
      throw std::invalid_argument("received word: positions must be strictly increasing");
  }
}

/// Parity operator of the code punctured to `positions`.
///
/// Row j is T_j(x_l) * w_l for j = 0..M-K1-1, where x_l are the evaluation
/// points kept and w_l is proportional to 1/prod_{m != l}(x_l - x_m) (the dual
/// weights of a generalized Reed-Solomon code). w is scaled to unit norm; at
/// full length it coincides with the diagonal of W.
class ParityOperator {
 public:
  ParityOperator(const DctCode& code, std::span<const std::size_t> positions)
      : positions_(positions.begin(), positions.end()) {
    const std::size_t m = positions.size();
    if (m <= code.k1())
      throw not_decodable("punctured length " + std::to_string(m) +
                          " leaves no parity for K1 = " + std::to_string(code.k1()));
    const std::size_t rows = m - code.k1();
    x_.resize(m);
    for (std::size_t l = 0; l < m; ++l) x_[l] = code.points()(static_cast<Eigen::Index>(positions[l]));

    // log-domain products; the raw values overflow near N = 1000.
    std::vector<double> logmag(m, 0.0);
    std::vector<int> sign(m, 1);
    for (std::size_t l = 0; l < m; ++l) {
      for (std::size_t q = 0; q < m; ++q) {
        if (q == l) continue;
        const double d = x_[l] - x_[q];
        logmag[l] -= std::log(std::abs(d));
        if (d < 0) sign[l] = -sign[l];
      }
    }
    const double peak = *std::max_element(logmag.begin(), logmag.end());
    weights_.resize(m);
    double norm2 = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      weights_[l] = sign[l] * std::exp(logmag[l] - peak);
      norm2 += weights_[l] * weights_[l];
    }
    const double flip = (weights_[0] < 0) ? -1.0 : 1.0;
    for (double& w : weights_) w *= flip / std::sqrt(norm2);

    matrix_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
    std::vector<double> tv(rows);
    for (std::size_t l = 0; l < m; ++l) {
      detail::chebyshev_values(x_[l], tv);
      for (std::size_t j = 0; j < rows; ++j)
        matrix_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = tv[j] * weights_[l];
    }
  }

  const Matrix& matrix() const noexcept { return matrix_; }
  std::span<const double> points() const noexcept { return x_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const std::size_t> positions() const noexcept { return positions_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }

 private:
  std::vector<std::size_t> positions_;
  std::vector<double> x_;
  std::vector<double> weights_;
  Matrix matrix_;
};

inline Vector syndrome(const ParityOperator& op, std::span<const double> values) {
  if (values.size() != op.positions().size())
    throw std::invalid_argument("syndrome: word length does not match parity operator");
  const Eigen::Map<const Vector> r(values.data(), static_cast<Eigen::Index>(values.size()));
  return op.matrix() * r;
}

inline Vector syndrome(const DctCode& code, const ReceivedWord& word) {
  validate_word(code, word);
  return syndrome(ParityOperator(code, word.positions), word.values);
}

/// Moment matrix of the syndrome in the Chebyshev basis,
/// M(a, b) = (s_{a+b} + s_{|a-b|}) / 2, of size ceil(p/2) x (floor(p/2) + 1).
/// Its rank equals the number of nonzero error components.
inline Matrix syndrome_hankel(std::span<const double> synd) {
  const std::size_t p = synd.size();
  const std::size_t rows = (p + 1) / 2;
  const std::size_t cols = p / 2 + 1;
  Matrix h(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < cols; ++b) {
      const std::size_t diff = a > b ? a - b : b - a;
      h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          0.5 * (synd[a + b] + synd[diff]);
    }
  return h;
}

inline constexpr double kRankRelTol = 1e-8;
inline constexpr double kEscalationRatio = 1e-2;
/// Relative syndrome residual treated as an exact fit; escalation stops here.
inline constexpr double kExactFitTol = 1e-12;
/// A sparse error fit is applied only if it leaves at most this fraction of
/// the syndrome norm unexplained; otherwise the syndrome is treated as
/// approximation or precision noise and the word is left as received.
inline constexpr double kAcceptRatio = 1e-2;

inline std::size_t estimate_num_errors(std::span<const double> synd, double noise_floor) {
  if (noise_floor < 0) throw std::invalid_argument("estimate_num_errors: negative noise floor");
  const std::size_t capacity = synd.size() / 2;
  if (synd.empty() || capacity == 0) return 0;
  const Matrix h = syndrome_hankel(synd);
  const Eigen::JacobiSVD<Matrix> svd(h);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double threshold = std::max(noise_floor, kRankRelTol * sv(0));
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++count;
  return std::min(count, capacity);
}

/// Common error count of several syndromes over the same positions: rank of
/// their stacked moment matrices.
inline std::size_t estimate_num_errors_joint(std::span<const Vector> synds, double noise_floor) {
  if (noise_floor < 0) throw std::invalid_argument("estimate_num_errors: negative noise floor");
  if (synds.empty()) return 0;
  const std::size_t p = static_cast<std::size_t>(synds.front().size());
  const std::size_t capacity = p / 2;
  if (capacity == 0) return 0;
  const Eigen::Index block = static_cast<Eigen::Index>((p + 1) / 2);
  Matrix stacked(block * static_cast<Eigen::Index>(synds.size()), static_cast<Eigen::Index>(p / 2 + 1));
  for (std::size_t e = 0; e < synds.size(); ++e) {
    if (static_cast<std::size_t>(synds[e].size()) != p)
      throw std::invalid_argument("estimate_num_errors: syndromes differ in length");
    stacked.middleRows(static_cast<Eigen::Index>(e) * block, block) =
        syndrome_hankel(std::span<const double>(synds[e].data(), p));
  }
  const Eigen::JacobiSVD<Matrix> svd(stacked);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  const double threshold = std::max(noise_floor, kRankRelTol * sv(0));
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++count;
  return std::min(count, capacity);
}

inline std::size_t estimate_num_errors(const DctCode&, const Vector& synd, double noise_floor) {
  return estimate_num_errors(std::span<const double>(synd.data(), static_cast<std::size_t>(synd.size())),
                             noise_floor);
}

struct Localization {
  std::vector<std::size_t> locations;  ///< indices into the punctured word, ascending
  std::vector<double> locator;         ///< Chebyshev coefficients, monic in T_nu
  double residual = 0.0;               ///< relative LS residual of the locator system
};

/// Least-squares error locator of degree nu shared by every syndrome in
/// `synds`, evaluated on the punctured evaluation points; the nu points with
/// smallest |Lambda(x)|^2 are returned.
inline Localization locate_joint(const ParityOperator& op, std::span<const Vector> synds,
                                 std::size_t nu) {
  const std::size_t p = op.rows();
  if (nu == 0 || nu > p / 2)
    throw std::invalid_argument("locate_errors: nu = " + std::to_string(nu) +
                                " outside [1, capacity = " + std::to_string(p / 2) + "]");
  if (synds.empty()) throw std::invalid_argument("locate_errors: no syndromes");
  const std::size_t eqs = p - nu;
  Matrix a(static_cast<Eigen::Index>(eqs * synds.size()), static_cast<Eigen::Index>(nu));
  Vector rhs(a.rows());
  for (std::size_t e = 0; e < synds.size(); ++e) {
    const Vector& synd = synds[e];
    if (static_cast<std::size_t>(synd.size()) != p)
      throw std::invalid_argument("locate_errors: syndrome length does not match parity operator");
    for (std::size_t j = 0; j < eqs; ++j) {
      const auto row = static_cast<Eigen::Index>(e * eqs + j);
      for (std::size_t t = 0; t <= nu; ++t) {
        const std::size_t diff = j > t ? j - t : t - j;
        const double v = 0.5 * (synd(static_cast<Eigen::Index>(j + t)) + synd(static_cast<Eigen::Index>(diff)));
        if (t < nu)
          a(row, static_cast<Eigen::Index>(t)) = v;
        else
          rhs(row) = -v;
      }
    }
  }
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  const Vector lambda = cod.solve(rhs);
  const double scale = std::sqrt(a.squaredNorm() + rhs.squaredNorm());
  Localization out;
  out.residual = scale > 0 ? (a * lambda - rhs).norm() / scale : 0.0;
  out.locator.assign(lambda.data(), lambda.data() + lambda.size());
  out.locator.push_back(1.0);

  const auto x = op.points();
  std::vector<double> score(x.size());
  std::vector<double> tv(nu + 1);
  for (std::size_t l = 0; l < x.size(); ++l) {
    detail::chebyshev_values(x[l], tv);
    double v = 0.0;
    for (std::size_t t = 0; t <= nu; ++t) v += out.locator[t] * tv[t];
    score[l] = v * v;
  }
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return score[i] < score[j]; });
  out.locations.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nu));
  std::sort(out.locations.begin(), out.locations.end());
  return out;
}

inline Localization locate_in_word(const ParityOperator& op, std::span<const double> synd,
                                   std::size_t nu) {
  if (synd.size() != op.rows())
    throw std::invalid_argument("locate_errors: syndrome length does not match parity operator");
  const Vector s = Eigen::Map<const Vector>(synd.data(), static_cast<Eigen::Index>(synd.size()));
  return locate_joint(op, std::span<const Vector>(&s, 1), nu);
}

/// Error locations as code positions (elements of `positions`).
inline std::vector<std::size_t> locate_errors(const DctCode& code, const Vector& synd,
                                              std::size_t nu,
                                              std::span<const std::size_t> positions) {
  const ParityOperator op(code, positions);
  if (static_cast<std::size_t>(synd.size()) != op.rows())
    throw std::invalid_argument("locate_errors: syndrome length does not match positions");
  const auto loc = locate_in_word(
      op, std::span<const double>(synd.data(), static_cast<std::size_t>(synd.size())), nu);
  std::vector<std::size_t> out;
  out.reserve(loc.locations.size());
  for (const auto l : loc.locations) out.push_back(positions[l]);
  return out;
}

struct MagnitudeEstimate {
  std::vector<double> magnitudes;
  double residual = 0.0;
};

/// Least-squares error values at `local` (indices into the punctured word).
inline MagnitudeEstimate estimate_in_word(const ParityOperator& op, std::span<const double> synd,
                                          std::span<const std::size_t> local) {
  MagnitudeEstimate out;
  const Eigen::Map<const Vector> s(synd.data(), static_cast<Eigen::Index>(synd.size()));
  if (local.empty()) {
    out.residual = s.norm();
    return out;
  }
  if (local.size() > op.rows())
    throw std::invalid_argument("estimate_magnitudes: more locations than parity rows");
  Matrix cols(static_cast<Eigen::Index>(op.rows()), static_cast<Eigen::Index>(local.size()));
  for (std::size_t c = 0; c < local.size(); ++c)
    cols.col(static_cast<Eigen::Index>(c)) = op.matrix().col(static_cast<Eigen::Index>(local[c]));
  const Eigen::ColPivHouseholderQR<Matrix> qr(cols);
  if (qr.rank() < static_cast<Eigen::Index>(local.size()))
    throw not_decodable("restricted parity matrix is rank deficient");
  const Vector e = qr.solve(s);
  out.magnitudes.assign(e.data(), e.data() + e.size());
  out.residual = (cols * e - s).norm();
  return out;
}

/// Error values at `local` as received value minus the code's least-squares
/// fit through the remaining positions (the located symbols are erased).
/// Same estimate as the syndrome solve for an orthonormal parity, but it
/// stays accurate when the located parity columns are nearly parallel.
inline MagnitudeEstimate erasure_magnitudes(const ParityOperator& op, std::span<const double> values,
                                            std::span<const std::size_t> local) {
  const std::size_t m = op.positions().size();
  const std::size_t k1 = m - op.rows();
  if (values.size() != m) throw std::invalid_argument("erasure_magnitudes: word length does not match");
  if (m - local.size() < k1) throw not_decodable("too many erasures for the code dimension");
  std::vector<char> erased(m, 0);
  for (const auto l : local) erased[l] = 1;
  Matrix basis(static_cast<Eigen::Index>(m - local.size()), static_cast<Eigen::Index>(k1));
  Vector rhs(basis.rows());
  std::vector<double> tv(k1);
  Eigen::Index row = 0;
  for (std::size_t l = 0; l < m; ++l) {
    if (erased[l]) continue;
    detail::chebyshev_values(op.points()[l], tv);
    for (std::size_t k = 0; k < k1; ++k) basis(row, static_cast<Eigen::Index>(k)) = tv[k];
    rhs(row++) = values[l];
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  if (qr.rank() < static_cast<Eigen::Index>(k1)) throw not_decodable("clean positions do not determine the codeword");
  const Vector coef = qr.solve(rhs);
  MagnitudeEstimate out;
  std::vector<double> fixed(values.begin(), values.end());
  for (const auto l : local) {
    detail::chebyshev_values(op.points()[l], tv);
    double fit = 0.0;
    for (std::size_t k = 0; k < k1; ++k) fit += coef(static_cast<Eigen::Index>(k)) * tv[k];
    out.magnitudes.push_back(values[l] - fit);
    fixed[l] = fit;
  }
  out.residual = syndrome(op, fixed).norm();
  return out;
}

/// Error magnitudes at code positions `locations` (subset of word.positions).
inline MagnitudeEstimate estimate_magnitudes(const DctCode& code, const ReceivedWord& word,
                                             std::span<const std::size_t> locations) {
  validate_word(code, word);
  const ParityOperator op(code, word.positions);
  std::vector<std::size_t> local;
  for (const auto loc : locations) {
    const auto it = std::lower_bound(word.positions.begin(), word.positions.end(), loc);
    if (it == word.positions.end() || *it != loc)
      throw std::invalid_argument("estimate_magnitudes: location " + std::to_string(loc) +
                                  " is not a received position");
    local.push_back(static_cast<std::size_t>(it - word.positions.begin()));
  }
  const Vector s = syndrome(op, word.values);
  return estimate_in_word(op, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                          local);
}

namespace detail {

/// Root-sum-square magnitude residual of `local` over all syndromes.
inline double batch_residual(const ParityOperator& op, std::span<const Vector> synds,
                             std::span<const std::size_t> local) {
  double total = 0.0;
  for (const auto& s : synds) {
    const auto m =
        estimate_in_word(op, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), local);
    total += m.residual * m.residual;
  }
  return std::sqrt(total);
}

/// Locator roots that fall between two close evaluation points can pick the
/// wrong neighbour. Move single locations to adjacent points (up to two
/// away) while that lowers the residual.
inline std::vector<std::size_t> refine_locations(const ParityOperator& op, std::span<const Vector> synds,
                                                 std::vector<std::size_t> local, double& residual) {
  const std::size_t m = op.positions().size();
  for (std::size_t round = 0; round < 4 * local.size() + 4; ++round) {
    double best = residual;
    std::vector<std::size_t> best_set;
    for (std::size_t i = 0; i < local.size(); ++i) {
      for (const int step : {-2, -1, 1, 2}) {
        const auto cand = static_cast<long long>(local[i]) + step;
        if (cand < 0 || cand >= static_cast<long long>(m)) continue;
        const auto c = static_cast<std::size_t>(cand);
        if (std::find(local.begin(), local.end(), c) != local.end()) continue;
        auto trial = local;
        trial[i] = c;
        std::sort(trial.begin(), trial.end());
        double r = 0.0;
        try {
          r = batch_residual(op, synds, trial);
        } catch (const not_decodable&) {
          continue;
        }
        if (r < best) {
          best = r;
          best_set = std::move(trial);
        }
      }
    }
    if (best_set.empty()) break;
    local = std::move(best_set);
    residual = best;
  }
  return local;
}

}  // namespace detail

struct DecodeReport {
  std::vector<double> corrected;
  std::size_t est_num_errors = 0;
  std::vector<std::size_t> est_locations;  ///< code positions, ascending
  std::vector<double> est_magnitudes;      ///< aligned with est_locations
  double syndrome_norm = 0.0;
  double locator_residual = 0.0;
  double magnitude_residual = 0.0;
  std::size_t capacity = 0;
};

/// syndrome -> error count -> locations -> magnitudes -> subtraction, with a
/// prebuilt parity operator (reused across the m*n entries of one run).
/// `max_errors` caps the error count below the code capacity.
inline DecodeReport decode_with(const ParityOperator& op, std::span<const double> values,
                                double noise_floor, std::size_t max_errors = SIZE_MAX) {
  DecodeReport rep;
  rep.corrected.assign(values.begin(), values.end());
  rep.capacity = op.rows() / 2;
  const std::size_t budget = std::min(rep.capacity, max_errors);
  const Vector s = syndrome(op, values);
  rep.syndrome_norm = s.norm();
  const std::span<const double> synd(s.data(), static_cast<std::size_t>(s.size()));
  // Non-finite input cannot be localized; report it uncorrected.
  if (!std::isfinite(rep.syndrome_norm)) return rep;
  std::size_t nu = std::min(budget, estimate_num_errors(synd, noise_floor));
  if (nu == 0) {
    rep.magnitude_residual = rep.syndrome_norm;
    return rep;
  }
  const std::span<const Vector> one(&s, 1);
  auto solve = [&](std::size_t count) {
    auto l = locate_in_word(op, synd, count);
    double resid = detail::batch_residual(op, one, l.locations);
    l.locations = detail::refine_locations(op, one, l.locations, resid);
    return l;
  };
  auto loc = solve(nu);
  auto mag = estimate_in_word(op, synd, loc.locations);
  // The rank test misses errors whose Vandermonde columns are nearly parallel
  // (clusters near +-1). Move to the smallest larger count that removes
  // almost all of the remaining syndrome energy; an intermediate count may
  // not help on its own.
  while (nu < budget && mag.residual > kExactFitTol * rep.syndrome_norm) {
    bool moved = false;
    for (std::size_t next = nu + 1; next <= budget && !moved; ++next) {
      try {
        auto loc_next = solve(next);
        auto mag_next = estimate_in_word(op, synd, loc_next.locations);
        if (!(mag_next.residual <= kEscalationRatio * mag.residual)) continue;
        nu = next;
        loc = std::move(loc_next);
        mag = std::move(mag_next);
        moved = true;
      } catch (const not_decodable&) {
        break;
      }
    }
    if (!moved) break;
  }
  if (!(mag.residual <= kAcceptRatio * rep.syndrome_norm)) {
    rep.magnitude_residual = rep.syndrome_norm;
    return rep;
  }
  mag = erasure_magnitudes(op, values, loc.locations);
  rep.est_num_errors = nu;
  rep.locator_residual = loc.residual;
  rep.magnitude_residual = mag.residual;
  for (std::size_t i = 0; i < loc.locations.size(); ++i) {
    rep.corrected[loc.locations[i]] -= mag.magnitudes[i];
    rep.est_locations.push_back(op.positions()[loc.locations[i]]);
    rep.est_magnitudes.push_back(mag.magnitudes[i]);
  }
  return rep;
}

inline DecodeReport decode(const DctCode& code, const ReceivedWord& word, double noise_floor = 0.0) {
  validate_word(code, word);
  const ParityOperator op(code, word.positions);
  return decode_with(op, word.values, noise_floor);
}

/// Monte-Carlo noise floor for the rank test: the largest singular value of
/// the syndrome moment matrix under i.i.d. N(0, sigma^2) symbol noise, taken
/// as `margin` times the maximum over `draws` samples. Deterministic in `seed`.
inline double calibrate_noise_floor(const ParityOperator& op, double sigma, std::size_t draws = 200,
                                    std::uint64_t seed = 0x5bacc, double margin = 1.5) {
  if (sigma <= 0.0 || op.rows() < 2) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  const std::size_t m = op.positions().size();
  Vector noise(static_cast<Eigen::Index>(m));
  double worst = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = gauss(rng);
    const Vector s = op.matrix() * noise;
    const Matrix h = syndrome_hankel(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
    const Eigen::JacobiSVD<Matrix> svd(h);
    worst = std::max(worst, svd.singularValues()(0));
  }
  return margin * worst;
}


/// Decoder outcome for a batch of words received from the same workers.
struct JointDecodeReport {
  std::vector<DecodeReport> words;
  std::size_t est_num_errors = 0;
  std::vector<std::size_t> est_locations;  ///< code positions, ascending
  double locator_residual = 0.0;
  double magnitude_residual = 0.0;  ///< root-sum-square over the batch
};

/// Decodes words that share one error support (every entry of an adversarial
/// worker's result is corrupted): the count and the locator are estimated
/// from all syndromes together, magnitudes per word.
inline JointDecodeReport decode_joint(const ParityOperator& op,
                                      std::span<const std::vector<double>> words,
                                      double noise_floor, std::size_t max_errors = SIZE_MAX) {
  JointDecodeReport out;
  const std::size_t capacity = op.rows() / 2;
  const std::size_t budget = std::min(capacity, max_errors);
  std::vector<Vector> synds;
  synds.reserve(words.size());
  out.words.resize(words.size());
  bool finite = true;
  for (std::size_t e = 0; e < words.size(); ++e) {
    synds.push_back(syndrome(op, words[e]));
    auto& rep = out.words[e];
    rep.corrected = words[e];
    rep.capacity = capacity;
    rep.syndrome_norm = synds.back().norm();
    rep.magnitude_residual = rep.syndrome_norm;
    finite = finite && std::isfinite(rep.syndrome_norm);
  }
  if (words.empty() || !finite) return out;

  std::size_t nu = std::min(budget, estimate_num_errors_joint(synds, noise_floor));
  if (nu == 0) {
    double total = 0.0;
    for (const auto& rep : out.words) total += rep.syndrome_norm * rep.syndrome_norm;
    out.magnitude_residual = std::sqrt(total);
    return out;
  }
  auto solve = [&](std::size_t count) {
    auto loc = locate_joint(op, synds, count);
    double resid = detail::batch_residual(op, synds, loc.locations);
    loc.locations = detail::refine_locations(op, synds, loc.locations, resid);
    return std::pair{std::move(loc), resid};
  };
  auto [loc, resid] = solve(nu);
  double total = 0.0;
  for (const auto& rep : out.words) total += rep.syndrome_norm * rep.syndrome_norm;
  while (nu < budget && resid > kExactFitTol * std::sqrt(total)) {
    bool moved = false;
    for (std::size_t next = nu + 1; next <= budget && !moved; ++next) {
      try {
        auto [loc_next, resid_next] = solve(next);
        if (!(resid_next <= kEscalationRatio * resid)) continue;
        nu = next;
        loc = std::move(loc_next);
        resid = resid_next;
        moved = true;
      } catch (const not_decodable&) {
        break;
      }
    }
    if (!moved) break;
  }
  if (!(resid <= kAcceptRatio * std::sqrt(total))) {
    out.magnitude_residual = std::sqrt(total);
    return out;
  }
  std::vector<MagnitudeEstimate> mags;
  for (const auto& w : words) mags.push_back(erasure_magnitudes(op, w, loc.locations));
  out.est_num_errors = nu;
  out.locator_residual = loc.residual;
  out.magnitude_residual = resid;
  for (const auto l : loc.locations) out.est_locations.push_back(op.positions()[l]);
  for (std::size_t e = 0; e < words.size(); ++e) {
    auto& rep = out.words[e];
    rep.est_num_errors = nu;
    rep.locator_residual = loc.residual;
    rep.magnitude_residual = mags[e].residual;
    rep.est_locations = out.est_locations;
    rep.est_magnitudes = mags[e].magnitudes;
    for (std::size_t i = 0; i < loc.locations.size(); ++i)
      rep.corrected[loc.locations[i]] -= mags[e].magnitudes[i];
  }
  return out;
}

/// Noise floor for decode_joint over `batch` words, calibrated like
/// calibrate_noise_floor on the stacked moment matrices.
inline double calibrate_joint_noise_floor(const ParityOperator& op, double sigma, std::size_t batch,
                                          std::size_t draws = 100, std::uint64_t seed = 0x5bacc,
                                          double margin = 1.5) {
  if (sigma <= 0.0 || op.rows() < 2 || batch == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  const std::size_t m = op.positions().size();
  const std::size_t p = op.rows();
  const Eigen::Index block = static_cast<Eigen::Index>((p + 1) / 2);
  Matrix stacked(block * static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(p / 2 + 1));
  Vector noise(static_cast<Eigen::Index>(m));
  double worst = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t e = 0; e < batch; ++e) {
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = gauss(rng);
      const Vector s = op.matrix() * noise;
      stacked.middleRows(static_cast<Eigen::Index>(e) * block, block) =
          syndrome_hankel(std::span<const double>(s.data(), p));
    }
    const Eigen::JacobiSVD<Matrix> svd(stacked);
    worst = std::max(worst, svd.singularValues()(0));
  }
  return margin * worst;
}

}  // namespace sbacc
