#include <catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "sbacc/dct_code.hpp"
#include "sbacc/numerics.hpp"

using namespace sbacc;
using Catch::Matchers::WithinAbs;
using Quad = boost::multiprecision::cpp_bin_float_quad;

namespace {

std::vector<double> random_codeword(const DctCode& code, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> msg(code.k1());
  for (auto& v : msg) v = g(rng);
  const Vector c = encode(code, msg);
  return {c.data(), c.data() + c.size()};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<std::size_t> all_positions(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

// Calls fn(subset) for every k-subset of {0..n-1}.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (;;) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Vector vec_of(std::span<const double> v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST_CASE("DCT matrix is orthogonal with a constant first row") {
  for (const std::size_t n : {3u, 8u, 53u}) {
    const DctCode code(n, 2);
    const Matrix& t = code.dct();
    CHECK((t * t.transpose() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t i = 0; i < n; ++i) CHECK_THAT(t(0, i), WithinAbs(1.0 / std::sqrt(double(n)), 1e-15));
  }
  const DctCode four(4, 2);
  for (int i = 0; i < 4; ++i) CHECK_THAT(four.dct()(0, i), WithinAbs(0.5, 1e-15));
}

TEST_CASE("DCT entries follow the cosine definition") {
  const std::size_t n = 9;
  const DctCode code(n, 3);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = k == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
      const double v = std::sqrt(2.0 / n) * beta * std::cos((2.0 * i + 1) * k * std::numbers::pi / (2.0 * n));
      CHECK_THAT(code.dct()(k, i), WithinAbs(v, 1e-15));
    }
}

TEST_CASE("code points are the first-kind Chebyshev points") {
  for (const std::size_t n : {3u, 10u, 53u}) {
    const DctCode code(n, 2);
    const auto nodes = cheb_first_kind(n);
    for (std::size_t i = 0; i < n; ++i) CHECK(code.points()(static_cast<Eigen::Index>(i)) == nodes[i]);
  }
}

TEST_CASE("code construction enforces 1 < K1 < N") {
  for (std::size_t k1 = 0; k1 <= 3; ++k1) CHECK_THROWS_AS(DctCode(2, k1), std::invalid_argument);
  CHECK_THROWS_AS(DctCode(8, 1), std::invalid_argument);
  CHECK_THROWS_AS(DctCode(8, 8), std::invalid_argument);
  CHECK_NOTHROW(DctCode(3, 2));
}

TEST_CASE("generator and parity are orthogonal") {
  const DctCode code(8, 4);
  CHECK((code.generator() * code.parity().transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(code.generator().rows() == 4);
  CHECK(code.parity().rows() == 4);
}

TEST_CASE("encode") {
  const DctCode four(4, 2);
  const std::vector<double> zero{0.0, 0.0}, e0{1.0, 0.0};
  CHECK(encode(four, zero).cwiseAbs().maxCoeff() == 0.0);
  const Vector c = encode(four, e0);
  for (int i = 0; i < 4; ++i) CHECK_THAT(c(i), WithinAbs(0.5, 1e-15));
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(encode(four, wrong), std::invalid_argument);

  std::mt19937_64 rng(1);
  const DctCode ten(10, 4);
  for (int t = 0; t < 50; ++t) {
    const auto cw = random_codeword(ten, rng);
    CHECK(syndrome(ten, ReceivedWord::full(cw)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ten.parity() * vec_of(cw)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("syndrome of a unit error is the parity column") {
  const DctCode code(12, 5);
  const auto pos = all_positions(12);
  const ParityOperator op(code, pos);
  for (std::size_t p = 0; p < 12; ++p) {
    std::vector<double> e(12, 0.0);
    e[p] = 1.0;
    const Vector s = syndrome(op, e);
    CHECK((s - op.matrix().col(static_cast<Eigen::Index>(p))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("syndrome is linear and ignores the codeword") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 10.0);
  const DctCode code(16, 6);
  const auto pos = all_positions(16);
  const ParityOperator op(code, pos);
  for (int t = 0; t < 100; ++t) {
    const auto c = random_codeword(code, rng);
    std::vector<double> e(16), ce(16);
    for (std::size_t i = 0; i < 16; ++i) {
      e[i] = g(rng);
      ce[i] = c[i] + e[i];
    }
    CHECK((syndrome(op, ce) - syndrome(op, e)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("punctured parity annihilates punctured codewords") {
  std::mt19937_64 rng(3);
  for (const auto& [n, k1] : std::vector<std::pair<std::size_t, std::size_t>>{{12, 4}, {20, 7}, {53, 43}}) {
    const DctCode code(n, k1);
    for (int t = 0; t < 20; ++t) {
      auto pos = all_positions(n);
      std::shuffle(pos.begin(), pos.end(), rng);
      pos.resize(n - 2);
      std::sort(pos.begin(), pos.end());
      const auto cw = random_codeword(code, rng);
      ReceivedWord w;
      w.positions = pos;
      for (const auto p : pos) w.values.push_back(cw[p]);
      CHECK(syndrome(code, w).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("full-length punctured parity coincides with T*W up to scale") {
  const DctCode code(11, 4);
  const auto pos = all_positions(11);
  const ParityOperator op(code, pos);
  const Vector w = code.parity_scale().diagonal();
  const Vector ours = Eigen::Map<const Vector>(op.weights().data(), 11);
  const double ratio = w(0) / ours(0);
  CHECK((w - ratio * ours).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("no parity without redundancy") {
  const DctCode code(10, 6);
  const std::vector<std::size_t> six{0, 1, 2, 3, 4, 5};
  CHECK_THROWS_AS(ParityOperator(code, six), not_decodable);
  ReceivedWord w;
  w.positions = six;
  w.values.assign(6, 1.0);
  CHECK_THROWS_AS(syndrome(code, w), not_decodable);
}

TEST_CASE("error count from the syndrome") {
  const DctCode code(12, 4);
  const auto pos = all_positions(12);
  const ParityOperator op(code, pos);
  const std::vector<double> zero(8, 0.0);
  CHECK(estimate_num_errors(zero, 0.0) == 0);
  std::vector<double> e(12, 0.0);
  e[5] = 100.0;
  const Vector s1 = syndrome(op, e);
  CHECK(estimate_num_errors(code, s1, 0.0) == 1);
  for (const std::size_t p : {0u, 3u, 7u, 11u}) e[p] = -20.0 - double(p);
  const Vector s4 = syndrome(op, e);
  CHECK(estimate_num_errors(code, s4, 0.0) == code.capacity());
  CHECK_THROWS_AS(estimate_num_errors(zero, -1.0), std::invalid_argument);
}

TEST_CASE("moment matrix has the documented shape") {
  const std::vector<double> s{1, 2, 3, 4, 5};
  const Matrix h = syndrome_hankel(s);
  CHECK(h.rows() == 3);
  CHECK(h.cols() == 3);
  CHECK(h(0, 0) == 1.0);
  CHECK(h(1, 2) == 0.5 * (s[3] + s[1]));
  CHECK(h(2, 1) == 0.5 * (s[3] + s[1]));
}

TEST_CASE("single error is located at its position") {
  const DctCode code(14, 5);
  const auto pos = all_positions(14);
  for (std::size_t p = 0; p < 14; ++p) {
    std::vector<double> e(14, 0.0);
    e[p] = 7.5;
    const Vector s = syndrome(ParityOperator(code, pos), e);
    CHECK(locate_errors(code, s, 1, pos) == std::vector<std::size_t>{p});
  }
  const Vector s = syndrome(ParityOperator(code, pos), std::vector<double>(14, 0.0));
  CHECK_THROWS_AS(locate_errors(code, s, 0, pos), std::invalid_argument);
  CHECK_THROWS_AS(locate_errors(code, s, code.capacity() + 1, pos), std::invalid_argument);
}

TEST_CASE("two errors match a brute-force search over all pairs") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 50.0);
  const DctCode code(16, 6);
  const auto pos = all_positions(16);
  const ParityOperator op(code, pos);
  for (int t = 0; t < 40; ++t) {
    std::vector<std::size_t> perm = pos;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> r = random_codeword(code, rng);
    r[perm[0]] += g(rng);
    r[perm[1]] += g(rng);
    const Vector s = syndrome(op, r);
    const std::span<const double> sv(s.data(), static_cast<std::size_t>(s.size()));
    std::vector<std::size_t> best;
    double best_res = INFINITY;
    for_each_subset(16, 2, [&](const std::vector<std::size_t>& pair) {
      const double res = estimate_in_word(op, sv, pair).residual;
      if (res < best_res) {
        best_res = res;
        best = pair;
      }
    });
    CHECK(locate_errors(code, s, 2, pos) == best);
    std::vector<std::size_t> truth{perm[0], perm[1]};
    std::sort(truth.begin(), truth.end());
    CHECK(best == truth);
  }
}

TEST_CASE("magnitudes by least squares") {
  const DctCode code(12, 4);
  std::mt19937_64 rng(5);
  auto cw = random_codeword(code, rng);
  auto r = cw;
  r[4] += 5.0;
  auto m = estimate_magnitudes(code, ReceivedWord::full(r), std::vector<std::size_t>{4});
  CHECK_THAT(m.magnitudes.at(0), WithinAbs(5.0, 1e-8));
  r = cw;
  r[1] += 3.0;
  r[9] -= 7.0;
  m = estimate_magnitudes(code, ReceivedWord::full(r), std::vector<std::size_t>{1, 9});
  CHECK_THAT(m.magnitudes.at(0), WithinAbs(3.0, 1e-8));
  CHECK_THAT(m.magnitudes.at(1), WithinAbs(-7.0, 1e-8));
  m = estimate_magnitudes(code, ReceivedWord::full(r), std::vector<std::size_t>{});
  CHECK(m.magnitudes.empty());
  CHECK_THROWS_AS(estimate_magnitudes(code, ReceivedWord::full(r), std::vector<std::size_t>{12}),
                  std::invalid_argument);
}

TEST_CASE("clean codeword passes through decode unchanged") {
  std::mt19937_64 rng(6);
  const DctCode code(12, 5);
  const auto cw = random_codeword(code, rng);
  const auto rep = decode(code, ReceivedWord::full(cw));
  CHECK(rep.est_num_errors == 0);
  CHECK(rep.corrected == cw);
  CHECK(rep.est_locations.empty());
}

TEST_CASE("decode round-trips every error pattern within capacity for N <= 12") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 100.0);
  std::size_t patterns = 0;
  for (std::size_t n = 3; n <= 12; ++n)
    for (std::size_t k1 = 2; k1 < n; ++k1) {
      const DctCode code(n, k1);
      for (std::size_t a = 1; a <= code.capacity(); ++a)
        for_each_subset(n, a, [&](const std::vector<std::size_t>& where) {
          const auto cw = random_codeword(code, rng);
          auto r = cw;
          for (const auto p : where) r[p] += g(rng);
          const auto rep = decode(code, ReceivedWord::full(r));
          ++patterns;
          INFO("N=" << n << " K1=" << k1 << " A=" << a);
          CHECK(max_abs_diff(rep.corrected, cw) <= 1e-6);
          CHECK(rep.est_locations == where);
        });
    }
  CHECK(patterns > 5000);
}

TEST_CASE("decode round-trips random patterns at N = 53") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 100.0);
  for (const std::size_t k1 : {33u, 43u}) {
    const DctCode code(53, k1);
    for (int t = 0; t < 100; ++t) {
      auto perm = all_positions(53);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto cw = random_codeword(code, rng);
      auto r = cw;
      for (std::size_t a = 0; a < code.capacity(); ++a) r[perm[a]] += g(rng);
      CHECK(max_abs_diff(decode(code, ReceivedWord::full(r)).corrected, cw) <= 1e-6);
    }
  }
}

TEST_CASE("punctured decode corrects errors and leaves clean words alone") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 100.0);
  const DctCode code(20, 6);
  for (int t = 0; t < 50; ++t) {
    auto perm = all_positions(20);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> pos(perm.begin(), perm.begin() + 16);
    std::sort(pos.begin(), pos.end());
    const auto cw = random_codeword(code, rng);
    ReceivedWord w;
    w.positions = pos;
    for (const auto p : pos) w.values.push_back(cw[p]);
    const auto clean = decode(code, w);
    CHECK(clean.est_num_errors == 0);
    CHECK(clean.corrected == w.values);
    const auto truth = w.values;
    for (std::size_t a = 0; a < 5; ++a) w.values[(7 * a + t) % 16] += g(rng);
    CHECK(max_abs_diff(decode(code, w).corrected, truth) <= 1e-6);
  }
}

TEST_CASE("errors beyond capacity return a report without throwing") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 100.0);
  const DctCode code(12, 4);
  for (int t = 0; t < 50; ++t) {
    auto r = random_codeword(code, rng);
    auto perm = all_positions(12);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t a = 0; a <= code.capacity(); ++a) r[perm[a]] += g(rng);
    DecodeReport rep;
    CHECK_NOTHROW(rep = decode(code, ReceivedWord::full(r)));
    CHECK(rep.corrected.size() == 12);
    CHECK(rep.est_num_errors <= code.capacity());
  }
  std::vector<double> bad(12, 0.0);
  bad[3] = NAN;
  CHECK_NOTHROW(decode(code, ReceivedWord::full(bad)));
}

TEST_CASE("a dense small syndrome is not mistaken for sparse errors") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1e-3);
  const DctCode code(30, 10);
  auto r = random_codeword(code, rng);
  for (auto& v : r) v += g(rng);
  const auto rep = decode(code, ReceivedWord::full(r), 0.0);
  CHECK(rep.est_num_errors == 0);
  CHECK(rep.corrected == r);
}

TEST_CASE("error budget caps the decoded count") {
  std::mt19937_64 rng(12);
  const DctCode code(16, 6);
  const ParityOperator op(code, all_positions(16));
  const auto c = random_codeword(code, rng);
  auto r = c;
  r[2] += 40.0;
  r[9] -= 25.0;
  const auto none = decode_with(op, r, 0.0, 0);
  CHECK(none.est_num_errors == 0);
  CHECK(none.corrected == r);
  const auto both = decode_with(op, r, 0.0, 2);
  CHECK(both.est_locations == std::vector<std::size_t>{2, 9});
  CHECK(max_abs_diff(both.corrected, c) < 1e-8);
  // One location cannot explain two errors, so the fit is rejected.
  const auto one = decode_with(op, r, 0.0, 1);
  CHECK(one.est_num_errors == 0);
  const std::vector<std::vector<double>> batch{r, r};
  CHECK(decode_joint(op, batch, 0.0, 0).est_num_errors == 0);
  CHECK(decode_joint(op, batch, 0.0, 2).est_locations == std::vector<std::size_t>{2, 9});
}

TEST_CASE("joint decoding recovers a shared support") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 100.0), tiny(0.0, 1e-6);
  const DctCode code(53, 43);
  const auto pos = all_positions(53);
  const ParityOperator op(code, pos);
  const double floor = calibrate_joint_noise_floor(op, 1e-6, 25);
  for (int t = 0; t < 20; ++t) {
    auto perm = pos;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> truth(perm.begin(), perm.begin() + 4);
    std::sort(truth.begin(), truth.end());
    std::vector<std::vector<double>> words, clean;
    for (int e = 0; e < 25; ++e) {
      clean.push_back(random_codeword(code, rng));
      auto w = clean.back();
      for (auto& v : w) v += tiny(rng);
      for (const auto p : truth) w[p] += g(rng);
      words.push_back(std::move(w));
    }
    const auto rep = decode_joint(op, words, floor);
    CHECK(rep.est_locations == truth);
    for (int e = 0; e < 25; ++e) CHECK(max_abs_diff(rep.words[e].corrected, clean[e]) < 1e-3);
  }
}

TEST_CASE("noise floor calibration") {
  const DctCode code(20, 8);
  const ParityOperator op(code, all_positions(20));
  CHECK(calibrate_noise_floor(op, 0.0) == 0.0);
  const double a = calibrate_noise_floor(op, 1e-4), b = calibrate_noise_floor(op, 1e-4);
  CHECK(a == b);
  CHECK(a > 0.0);
  CHECK_THAT(calibrate_noise_floor(op, 2e-4) / a, WithinAbs(2.0, 1e-9));
}

TEST_CASE("localization success does not improve with more adversaries") {
  const DctCode code(53, 43);
  const auto pos = all_positions(53);
  const ParityOperator op(code, pos);
  const double sigma = 1e-4;
  const double floor = calibrate_noise_floor(op, sigma);
  std::vector<double> rate;
  for (std::size_t a = 1; a <= 5; ++a) {
    std::mt19937_64 rng(100 + a);
    std::normal_distribution<double> noise(0.0, sigma), attack(0.0, 100.0);
    std::size_t ok = 0;
    for (int t = 0; t < 200; ++t) {
      auto perm = pos;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::size_t> truth(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(a));
      std::sort(truth.begin(), truth.end());
      auto r = random_codeword(code, rng);
      for (auto& v : r) v += noise(rng);
      for (const auto p : truth) r[p] += attack(rng);
      const auto rep = decode_with(op, r, floor);
      ok += std::includes(rep.est_locations.begin(), rep.est_locations.end(), truth.begin(), truth.end());
    }
    rate.push_back(ok / 200.0);
  }
  for (std::size_t i = 1; i < rate.size(); ++i) {
    INFO("A=" << i + 1 << " rate " << rate[i] << " after " << rate[i - 1]);
    CHECK(rate[i] <= rate[i - 1] + 0.05);
  }
}

TEST_CASE("MDS: every K1-column submatrix of G is full rank for N <= 12") {
  for (std::size_t n = 3; n <= 12; ++n)
    for (std::size_t k1 = 2; k1 < n; ++k1) {
      const DctCode code(n, k1);
      const Matrix g = code.generator();
      double worst = INFINITY;
      for_each_subset(n, k1, [&](const std::vector<std::size_t>& cols) {
        Matrix sub(k1, k1);
        for (std::size_t c = 0; c < k1; ++c) sub.col(c) = g.col(cols[c]);
        worst = std::min(worst, Eigen::JacobiSVD<Matrix>(sub).singularValues().minCoeff());
      });
      INFO("N=" << n << " K1=" << k1);
      CHECK(worst > 1e-8);
    }
}

TEST_CASE("witness structure") {
  const DctCode code(12, 5);
  const Matrix& b = code.generator_coef();
  const Matrix& a = code.parity_coef();
  CHECK(b.isLowerTriangular());
  CHECK(a.isUpperTriangular());
  CHECK(code.generator_scale().isDiagonal());
  CHECK(code.parity_scale().isDiagonal());
  CHECK(b.diagonal().cwiseAbs().minCoeff() > 0);
  CHECK(a.diagonal().cwiseAbs().minCoeff() > 0);
  CHECK(code.parity_scale().diagonal().cwiseAbs().minCoeff() > 0);
  // Y ascending, T descending powers of the evaluation points.
  for (int i = 0; i < 12; ++i) {
    CHECK(code.vandermonde()(0, i) == 1.0);
    CHECK(code.parity_vandermonde()(6, i) == 1.0);
    CHECK_THAT(code.vandermonde()(2, i), WithinAbs(std::pow(code.points()(i), 2), 1e-15));
  }
}

TEST_CASE("G = BYZ and H = A T W in double for small N") {
  for (const auto& [n, k1] : std::vector<std::pair<std::size_t, std::size_t>>{{8, 3}, {8, 5}, {16, 6}, {16, 10}}) {
    const DctCode c(n, k1);
    const Matrix g = c.generator(), h = c.parity();
    CHECK((g - c.generator_coef() * c.vandermonde() * c.generator_scale()).norm() / g.norm() <= 1e-9);
    CHECK((h - c.parity_coef() * c.parity_vandermonde() * c.parity_scale()).norm() / h.norm() <= 1e-9);
  }
}

TEST_CASE("G = BYZ and H = A T W in quad precision") {
  for (const auto& [n, k1] : std::vector<std::pair<std::size_t, std::size_t>>{{8, 4}, {16, 6}, {53, 43}, {53, 10}}) {
    const BasicDctCode<Quad> c(n, k1);
    using Q = BasicDctCode<Quad>::Mat;
    const Q g = c.generator(), h = c.parity();
    const Q dg = g - Q(c.generator_coef() * c.vandermonde()) * c.generator_scale();
    const Q dh = h - Q(c.parity_coef() * c.parity_vandermonde()) * c.parity_scale();
    INFO("N=" << n << " K1=" << k1);
    CHECK(static_cast<double>(dg.norm() / g.norm()) <= 1e-9);
    CHECK(static_cast<double>(dh.norm() / h.norm()) <= 1e-9);
  }
}
