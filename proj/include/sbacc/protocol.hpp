#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "config.hpp"
#include "dct_code.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "numerics.hpp"
#include "random.hpp"

namespace sbacc {

enum class Scheme { SBACC, BACC, DISCARD };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::SBACC: return "sbacc";
    case Scheme::BACC: return "bacc";
    case Scheme::DISCARD: return "discard";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "sbacc" || s == "SBACC") return Scheme::SBACC;
  if (s == "bacc" || s == "BACC") return Scheme::BACC;
  if (s == "discard" || s == "DISCARD") return Scheme::DISCARD;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "' (expected sbacc|bacc|discard)");
}

/// K data blocks X_j attached to the first-kind nodes alpha_j.
struct Dataset {
  std::vector<Matrix> blocks;
  NodeSet alpha;

  explicit Dataset(std::vector<Matrix> b) : blocks(std::move(b)), alpha(cheb_first_kind(check(blocks))) {}

  std::size_t K() const noexcept { return blocks.size(); }
  Eigen::Index rows() const { return blocks.front().rows(); }
  Eigen::Index cols() const { return blocks.front().cols(); }

 private:
  static std::size_t check(const std::vector<Matrix>& b) {
    if (b.empty()) throw std::invalid_argument("dataset needs at least one block");
    for (const auto& x : b)
      if (x.rows() != b[0].rows() || x.cols() != b[0].cols())
        throw std::invalid_argument("dataset blocks differ in shape");
    return b.size();
  }
};

/// K blocks of m x n entries i.i.d. Uniform(data_low, data_high).
inline Dataset sample_dataset(const ExperimentConfig& cfg, std::uint64_t trial) {
  Rng rng = make_stream(cfg.seed, trial, Stream::Dataset);
  std::uniform_real_distribution<double> u(cfg.data_low, cfg.data_high);
  std::vector<Matrix> blocks;
  for (std::size_t j = 0; j < cfg.K; ++j) {
    Matrix x(static_cast<Eigen::Index>(cfg.m), static_cast<Eigen::Index>(cfg.n));
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = u(rng);
    blocks.push_back(std::move(x));
  }
  return Dataset(std::move(blocks));
}

/// Worker evaluation points: first kind for SBACC (and the discard baseline,
/// which shares its encoding), second kind for BACC.
inline NodeSet evaluation_points(Scheme scheme, std::size_t n_workers) {
  return scheme == Scheme::BACC ? cheb_second_kind(n_workers) : cheb_first_kind(n_workers);
}

/// U_i = u(z_i) for i = 0..N-1, where u is the Berrut interpolant of the data.
inline std::vector<Matrix> encode_shares(const Dataset& ds, std::size_t n_workers, Scheme scheme) {
  if (n_workers < ds.K())
    throw std::invalid_argument("encode_shares: N=" + std::to_string(n_workers) + " < K=" +
                                std::to_string(ds.K()));
  if (n_workers < 3) throw std::invalid_argument("encode_shares: N must be >= 3");
  const BerrutInterpolant u(ds.alpha, ds.blocks);
  const NodeSet z = evaluation_points(scheme, n_workers);
  std::vector<Matrix> shares;
  shares.reserve(n_workers);
  for (const double zi : z.points()) shares.push_back(u(zi));
  return shares;
}

struct WorkerReturn {
  std::size_t worker_index = 0;
  std::optional<Matrix> payload;  ///< absent for stragglers
  bool is_straggler = false;
  bool is_adversary = false;  ///< ground truth; never read by the decoder
};

/// What a worker sends back: f(U) + P, plus E for adversaries.
///
/// Draws come from the worker's own stream: first the precision noise for
/// every entry (if sigma_p2 > 0), then for adversaries, entry by entry, an
/// optional Bernoulli(fraction) selector (if fraction < 1) and the
/// adversarial sample. Entries are visited in column-major order, so a
/// worker's precision noise does not depend on whether it is adversarial.
/// The network worker calls this same routine.
inline Matrix worker_payload(const Matrix& share, const TargetFunction& f, bool adversary,
                             double sigma_p2, double sigma_a2, double adversary_fraction, Rng& rng) {
  Matrix out = f(share);
  if (sigma_p2 > 0) {
    std::normal_distribution<double> precision(0.0, std::sqrt(sigma_p2));
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, c) += precision(rng);
  }
  if (adversary && sigma_a2 > 0) {
    std::normal_distribution<double> attack(0.0, std::sqrt(sigma_a2));
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        if (adversary_fraction < 1.0 && !(pick(rng) < adversary_fraction)) continue;
        out(r, c) += attack(rng);
      }
  }
  return out;
}

struct NoiseModel {
  double sigma_p2 = 0.0;
  double sigma_a2 = 0.0;
  double adversary_fraction = 1.0;
};

inline std::vector<WorkerReturn> simulate_workers(const std::vector<Matrix>& shares,
                                                  const TargetFunction& f,
                                                  std::span<const std::size_t> stragglers,
                                                  std::span<const std::size_t> adversaries,
                                                  const NoiseModel& noise, std::uint64_t seed,
                                                  std::uint64_t trial = 0) {
  const std::size_t n = shares.size();
  if (noise.sigma_p2 < 0 || noise.sigma_a2 < 0)
    throw std::invalid_argument("simulate_workers: negative variance");
  std::vector<char> strag(n, 0), adv(n, 0);
  for (const auto i : stragglers) {
    if (i >= n) throw std::invalid_argument("simulate_workers: straggler index out of range");
    strag[i] = 1;
  }
  for (const auto i : adversaries) {
    if (i >= n) throw std::invalid_argument("simulate_workers: adversary index out of range");
    if (strag[i])
      throw std::invalid_argument("simulate_workers: worker " + std::to_string(i) +
                                  " is both straggler and adversary");
    adv[i] = 1;
  }
  if (stragglers.size() + 3 > n)
    throw std::invalid_argument("simulate_workers: at most N-3 stragglers");
  std::vector<WorkerReturn> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].worker_index = i;
    out[i].is_straggler = strag[i] != 0;
    out[i].is_adversary = adv[i] != 0;
    if (strag[i]) continue;
    Rng rng = make_stream(seed, trial, Stream::Worker, i);
    out[i].payload = worker_payload(shares[i], f, adv[i] != 0, noise.sigma_p2, noise.sigma_a2,
                                    noise.adversary_fraction, rng);
  }
  return out;
}

/// Straggler and adversary index sets of one trial. Both are prefixes of
/// per-trial random permutations, so they are nested in S and in A.
struct Scenario {
  std::vector<std::size_t> stragglers;
  std::vector<std::size_t> adversaries;
};

inline Scenario draw_scenario(const ExperimentConfig& cfg, std::uint64_t trial) {
  Scenario sc;
  std::vector<std::size_t> perm(cfg.N);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng srng = make_stream(cfg.seed, trial, Stream::Stragglers);
  std::shuffle(perm.begin(), perm.end(), srng);
  sc.stragglers.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.S));
  std::sort(sc.stragglers.begin(), sc.stragglers.end());

  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < cfg.N; ++i)
    if (!std::binary_search(sc.stragglers.begin(), sc.stragglers.end(), i)) alive.push_back(i);
  Rng arng = make_stream(cfg.seed, trial, Stream::Adversaries);
  std::shuffle(alive.begin(), alive.end(), arng);
  const std::size_t a = std::min(cfg.A, alive.size());
  sc.adversaries.assign(alive.begin(), alive.begin() + static_cast<std::ptrdiff_t>(a));
  std::sort(sc.adversaries.begin(), sc.adversaries.end());
  return sc;
}

struct DecodeStats {
  bool decoded = false;  ///< false when M <= K1 (no parity) or the scheme has no decoder
  std::size_t entries = 0;
  std::vector<std::size_t> nu_histogram;  ///< nu_histogram[v] = entries with estimated count v
  std::size_t localization_trials = 0;    ///< entries with >= 1 adversary (ground truth known)
  std::size_t localization_successes = 0;
  std::size_t residual_samples = 0;
  double residual_sq_sum = 0.0;  ///< sum of (C - V)^2 at adversarial positions
  double noise_floor = 0.0;

  /// Empirical rate at which every adversarial position was localized.
  double p_loc_hat() const {
    return localization_trials ? static_cast<double>(localization_successes) /
                                     static_cast<double>(localization_trials)
                               : 1.0;
  }
  /// Empirical variance of the residual adversarial noise after correction.
  double residual_variance() const {
    return residual_samples ? residual_sq_sum / static_cast<double>(residual_samples) : 0.0;
  }

  void merge(const DecodeStats& o) {
    decoded = decoded || o.decoded;
    entries += o.entries;
    if (nu_histogram.size() < o.nu_histogram.size()) nu_histogram.resize(o.nu_histogram.size(), 0);
    for (std::size_t v = 0; v < o.nu_histogram.size(); ++v) nu_histogram[v] += o.nu_histogram[v];
    localization_trials += o.localization_trials;
    localization_successes += o.localization_successes;
    residual_samples += o.residual_samples;
    residual_sq_sum += o.residual_sq_sum;
    noise_floor = std::max(noise_floor, o.noise_floor);
  }
};

struct RunResult {
  std::vector<Matrix> outputs;  ///< Y_j
  std::vector<double> per_block_rel_error;
  double avg_rel_error = 0.0;
  double avg_rel_error_db = 0.0;
  double mean_sq_error = 0.0;  ///< mean over blocks and entries of (Y_j - f(X_j))^2
  std::vector<std::size_t> reconstruction_workers;
  DecodeStats decode_stats;
};

inline double to_db(double x) { return 10.0 * std::log10(x); }

namespace detail {

/// Per-position squared distance of the words from the punctured code,
/// summed over entries: diag-free projection (I - Pi) r = P^T (P P^T)^{-1} P r.
inline std::vector<double> code_distance_scores(const ParityOperator& op,
                                                const std::vector<std::vector<double>>& words) {
  const Matrix& p = op.matrix();
  const Matrix gram = p * p.transpose();
  const Eigen::LDLT<Matrix> ldlt(gram);
  std::vector<double> score(op.positions().size(), 0.0);
  for (const auto& w : words) {
    const Eigen::Map<const Vector> r(w.data(), static_cast<Eigen::Index>(w.size()));
    const Vector resid = p.transpose() * ldlt.solve(p * r);
    for (Eigen::Index l = 0; l < resid.size(); ++l) score[static_cast<std::size_t>(l)] += resid(l) * resid(l);
  }
  return score;
}

/// Indices (into `score`) of the `keep` smallest scores, ties by lower index,
/// returned ascending.
inline std::vector<std::size_t> smallest_scores(std::span<const double> score, std::size_t keep) {
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  order.resize(std::min(keep, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// Greedy thinning of `nodes` (ascending list order kept) down to `keep`
/// points. Each step drops the node whose removal keeps
/// sum_j 1 / D(t_j)^2 smallest, where D(t) = sum_k (-1)^k / (t - x_k) is the
/// Berrut denominator; the interpolation error at t scales with 1/|D(t)|.
/// Ties drop the earlier node. Returns indices into `nodes`, ascending.
inline std::vector<std::size_t> thin_for_targets(std::span<const double> nodes,
                                                 std::span<const double> targets, std::size_t keep) {
  std::vector<std::size_t> idx(nodes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> prefix;
  while (idx.size() > keep) {
    const std::size_t len = idx.size();
    std::vector<double> cost(len, 0.0);
    for (const double t : targets) {
      prefix.assign(len + 1, 0.0);
      bool hit = false;
      for (std::size_t k = 0; k < len; ++k) {
        const double d = t - nodes[idx[k]];
        if (d == 0.0) hit = true;
        prefix[k + 1] = prefix[k] + ((k % 2) ? -1.0 : 1.0) / d;
      }
      if (hit) continue;  // r(t) interpolates exactly while that node stays
      const double total = prefix[len];
      for (std::size_t q = 0; q < len; ++q) {
        const double tq = ((q % 2) ? -1.0 : 1.0) / (t - nodes[idx[q]]);
        const double dq = 2.0 * prefix[q] - total + tq;
        cost[q] += 1.0 / (dq * dq);
      }
    }
    const auto drop = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return idx;
}

inline std::vector<std::vector<double>> entry_words(const std::vector<WorkerReturn>& returns,
                                                    std::span<const std::size_t> positions,
                                                    Eigen::Index rows, Eigen::Index cols) {
  std::vector<std::vector<double>> words(static_cast<std::size_t>(rows * cols),
                                         std::vector<double>(positions.size()));
  for (std::size_t l = 0; l < positions.size(); ++l) {
    const Matrix& pay = *returns[positions[l]].payload;
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        words[static_cast<std::size_t>(c * rows + r)][l] = pay(r, c);
  }
  return words;
}

}  // namespace detail

/// Decoding / selection / reconstruction stage shared by the in-process
/// simulator and the network master.
///
/// `exact_values` (f(U_i)) and `adversaries` are ground truth used only for
/// statistics; pass nullptr when unknown.
inline RunResult reconstruct(Scheme scheme, const Dataset& ds, const TargetFunction& f,
                             const ExperimentConfig& cfg, const std::vector<WorkerReturn>& returns,
                             const std::vector<Matrix>* exact_values = nullptr,
                             const std::vector<std::size_t>* adversaries = nullptr) {
  const std::size_t n_workers = returns.size();
  std::vector<std::size_t> positions;
  for (const auto& w : returns)
    if (!w.is_straggler && w.payload) positions.push_back(w.worker_index);
  std::sort(positions.begin(), positions.end());
  const std::size_t m_alive = positions.size();
  if (m_alive < 2)
    throw not_reconstructable("only " + std::to_string(m_alive) + " worker returns available");
  const Eigen::Index rows = ds.rows(), cols = ds.cols();

  auto words = detail::entry_words(returns, positions, rows, cols);
  std::vector<std::size_t> keep(m_alive);  // indices into positions
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  DecodeStats stats;
  const std::size_t n1 = std::min(cfg.N1 == 0 ? m_alive : cfg.N1, m_alive);

  std::vector<char> is_adv(n_workers, 0);
  if (adversaries)
    for (const auto a : *adversaries) is_adv[a] = 1;
  std::size_t adv_alive = 0;
  for (const auto p : positions) adv_alive += is_adv[p];

  const bool has_parity = m_alive > cfg.K1 && cfg.K1 > 1 && cfg.K1 < n_workers;
  // Without parity SBACC cannot correct anything; that is only acceptable
  // when no adversaries are expected.
  if (scheme == Scheme::SBACC && !has_parity && cfg.A > 0)
    throw not_decodable("M=" + std::to_string(m_alive) + " returns leave no parity for K1=" +
                        std::to_string(cfg.K1));
  if (scheme == Scheme::SBACC && has_parity) {
    const DctCode code(n_workers, cfg.K1);
    const ParityOperator op(code, positions);
    const double sigma = std::sqrt(cfg.sigma_p2);
    const std::uint64_t cal_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    const bool joint = cfg.decoder == Decoder::Joint;
    const double floor = cfg.noise_floor.value_or(
        joint ? calibrate_joint_noise_floor(op, sigma, words.size(), 100, cal_seed)
              : calibrate_noise_floor(op, sigma, 200, cal_seed));
    stats.decoded = true;
    stats.noise_floor = floor;
    stats.nu_histogram.assign(op.rows() / 2 + 1, 0);
    std::vector<DecodeReport> reports;
    if (joint) {
      // cfg.A is the adversary budget the master designs for.
      reports = std::move(decode_joint(op, words, floor, cfg.A).words);
    } else {
      for (const auto& w : words) reports.push_back(decode_with(op, w, floor, cfg.A));
    }
    for (std::size_t e = 0; e < words.size(); ++e) {
      auto& rep = reports[e];
      ++stats.entries;
      ++stats.nu_histogram[rep.est_num_errors];
      if (adversaries && adv_alive > 0) {
        ++stats.localization_trials;
        bool all = true;
        for (const auto p : positions)
          if (is_adv[p] && !std::binary_search(rep.est_locations.begin(), rep.est_locations.end(), p))
            all = false;
        stats.localization_successes += all;
      }
      if (exact_values && adversaries) {
        const auto r = static_cast<Eigen::Index>(e) % rows;
        const auto c = static_cast<Eigen::Index>(e) / rows;
        for (std::size_t l = 0; l < m_alive; ++l) {
          if (!is_adv[positions[l]]) continue;
          const double d = rep.corrected[l] - (*exact_values)[positions[l]](r, c);
          stats.residual_sq_sum += d * d;
          ++stats.residual_samples;
        }
      }
      words[e] = std::move(rep.corrected);
    }
  } else if (scheme == Scheme::DISCARD && has_parity) {
    const DctCode code(n_workers, cfg.K1);
    const ParityOperator op(code, positions);
    const std::size_t nu = std::min(cfg.A, op.rows() / 2);
    if (nu > 0) {
      std::vector<std::size_t> votes(m_alive, 0);
      for (const auto& w : words) {
        const Vector s = syndrome(op, w);
        const auto loc = locate_in_word(op, {s.data(), static_cast<std::size_t>(s.size())}, nu);
        for (const auto l : loc.locations) ++votes[l];
        if (adversaries && adv_alive > 0) {
          ++stats.localization_trials;
          bool all = true;
          for (std::size_t l = 0; l < m_alive; ++l)
            if (is_adv[positions[l]] &&
                !std::binary_search(loc.locations.begin(), loc.locations.end(), l))
              all = false;
          stats.localization_successes += all;
        }
      }
      std::vector<double> neg(m_alive);
      for (std::size_t l = 0; l < m_alive; ++l) neg[l] = -static_cast<double>(votes[l]);
      const auto flagged = detail::smallest_scores(neg, nu);
      keep.clear();
      for (std::size_t l = 0; l < m_alive; ++l)
        if (!std::binary_search(flagged.begin(), flagged.end(), l)) keep.push_back(l);
    }
    stats.entries = words.size();
  }

  const NodeSet all_nodes = evaluation_points(scheme, n_workers);
  if (n1 < keep.size()) {
    std::vector<std::size_t> pick;
    switch (cfg.selection) {
      case Selection::Targets: {
        std::vector<double> xs;
        for (const auto l : keep) xs.push_back(all_nodes[positions[l]]);
        pick = detail::thin_for_targets(xs, ds.alpha.points(), n1);
        break;
      }
      case Selection::Residual: {
        if (keep.size() <= cfg.K1 || cfg.K1 < 2) {
          pick.resize(n1);
          std::iota(pick.begin(), pick.end(), std::size_t{0});
          break;
        }
        std::vector<std::size_t> sub_pos;
        for (const auto l : keep) sub_pos.push_back(positions[l]);
        std::vector<std::vector<double>> sub(words.size());
        for (std::size_t e = 0; e < words.size(); ++e)
          for (const auto l : keep) sub[e].push_back(words[e][l]);
        const ParityOperator sop(DctCode(n_workers, cfg.K1), sub_pos);
        pick = detail::smallest_scores(detail::code_distance_scores(sop, sub), n1);
        break;
      }
    }
    std::vector<std::size_t> chosen;
    for (const auto q : pick) chosen.push_back(keep[q]);
    keep = std::move(chosen);
  }

  // Berrut reconstruction over the kept evaluation points.
  std::vector<double> nodes;
  RunResult res;
  for (const auto l : keep) {
    nodes.push_back(all_nodes[positions[l]]);
    res.reconstruction_workers.push_back(positions[l]);
  }
  if (nodes.size() < 2)
    throw not_reconstructable("fewer than two reconstruction points after selection");

  res.outputs.assign(ds.K(), Matrix(rows, cols));
  for (std::size_t j = 0; j < ds.K(); ++j) {
    const auto w = berrut_weights(nodes, ds.alpha[j]);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& word = words[static_cast<std::size_t>(c * rows + r)];
        double acc = 0.0;
        for (std::size_t q = 0; q < keep.size(); ++q) acc += w[q] * word[keep[q]];
        res.outputs[j](r, c) = acc;
      }
  }

  double sq_sum = 0.0;
  for (std::size_t j = 0; j < ds.K(); ++j) {
    const Matrix ref = f(ds.blocks[j]);
    const double err2 = (res.outputs[j] - ref).squaredNorm();
    res.per_block_rel_error.push_back(err2 / ref.squaredNorm());
    sq_sum += err2;
  }
  res.avg_rel_error = std::accumulate(res.per_block_rel_error.begin(), res.per_block_rel_error.end(), 0.0) /
                      static_cast<double>(ds.K());
  res.avg_rel_error_db = to_db(res.avg_rel_error);
  res.mean_sq_error = sq_sum / static_cast<double>(ds.K() * static_cast<std::size_t>(rows * cols));
  res.decode_stats = std::move(stats);
  return res;
}

/// One trial of `scheme` with an explicit straggler/adversary assignment.
inline RunResult run_scheme(Scheme scheme, const Dataset& ds, const TargetFunction& f,
                            const ExperimentConfig& cfg, const Scenario& sc,
                            std::uint64_t trial = 0) {
  const auto shares = encode_shares(ds, cfg.N, scheme);
  const NoiseModel noise{cfg.sigma_p2, cfg.sigma_a2, cfg.adversary_fraction};
  const auto returns = simulate_workers(shares, f, sc.stragglers, sc.adversaries, noise, cfg.seed, trial);
  std::vector<Matrix> exact;
  exact.reserve(shares.size());
  for (const auto& u : shares) exact.push_back(f(u));
  return reconstruct(scheme, ds, f, cfg, returns, &exact, &sc.adversaries);
}

inline RunResult run_sbacc(const Dataset& ds, const TargetFunction& f, const ExperimentConfig& cfg,
                           std::uint64_t trial = 0) {
  return run_scheme(Scheme::SBACC, ds, f, cfg, draw_scenario(cfg, trial), trial);
}

inline RunResult run_bacc_baseline(const Dataset& ds, const TargetFunction& f,
                                   const ExperimentConfig& cfg, std::uint64_t trial = 0) {
  return run_scheme(Scheme::BACC, ds, f, cfg, draw_scenario(cfg, trial), trial);
}

inline RunResult run_discard_baseline(const Dataset& ds, const TargetFunction& f,
                                      const ExperimentConfig& cfg, std::uint64_t trial = 0) {
  return run_scheme(Scheme::DISCARD, ds, f, cfg, draw_scenario(cfg, trial), trial);
}

}  // namespace sbacc
