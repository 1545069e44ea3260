#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "functions.hpp"

namespace sbacc {

/// How N1 reconstruction points are picked from the usable returns.
enum class Selection {
  Targets,   ///< greedy thinning that keeps the Berrut denominators at alpha_j large
  Residual,  ///< smallest per-worker decode residual, ties by lower index
};

inline Selection parse_selection(std::string_view s) {
  if (s == "targets") return Selection::Targets;
  if (s == "residual") return Selection::Residual;
  throw std::invalid_argument("unknown selection rule '" + std::string(s) + "' (expected targets|residual)");
}

inline std::string_view to_string(Selection s) { return s == Selection::Targets ? "targets" : "residual"; }

/// Whether the m*n entries of a result share one error support when decoding.
enum class Decoder {
  Joint,      ///< count and locate from all entries' syndromes together
  Entrywise,  ///< every entry decoded on its own
};

inline Decoder parse_decoder(std::string_view s) {
  if (s == "joint") return Decoder::Joint;
  if (s == "entrywise") return Decoder::Entrywise;
  throw std::invalid_argument("unknown decoder '" + std::string(s) + "' (expected joint|entrywise)");
}

inline std::string_view to_string(Decoder d) { return d == Decoder::Joint ? "joint" : "entrywise"; }

/// All parameters of one experiment scenario.
///
/// N1 == 0 means "use every non-straggler return for reconstruction".
/// Unset optionals are estimated from the run where they are needed.
struct ExperimentConfig {
  std::size_t N = 53;
  std::size_t K = 4;
  std::size_t S = 0;
  std::size_t A = 0;
  std::size_t K1 = 43;
  std::size_t N1 = 0;
  double sigma_p2 = 0.0;
  double sigma_a2 = 1e4;
  std::optional<double> sigma_q2;
  TargetFunction f = TargetFunction::parse("exp");
  std::size_t m = 5;
  std::size_t n = 5;
  std::uint64_t seed = 7;
  std::size_t trials = 50;
  /// Probability of imperfect localization, as placed in the adversarial bound.
  std::optional<double> p_loc;
  double data_low = 0.0;
  double data_high = 1.0;
  /// Fraction of entries an adversary corrupts (1 = every entry).
  double adversary_fraction = 1.0;
  std::optional<double> noise_floor;
  std::size_t deadline_ms = 5000;
  Selection selection = Selection::Targets;
  Decoder decoder = Decoder::Joint;

  std::size_t M() const noexcept { return N - S; }
  std::size_t effective_N1() const noexcept { return N1 == 0 ? M() : N1; }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("invalid config: " + what);
    };
    if (K < 1) fail("K >= 1 (K=" + std::to_string(K) + ")");
    if (N < 3) fail("N >= 3 (N=" + std::to_string(N) + ")");
    if (N < K) fail("N >= K (N=" + std::to_string(N) + ", K=" + std::to_string(K) + ")");
    if (S + 2 >= N) fail("S < N-2 (S=" + std::to_string(S) + ", N=" + std::to_string(N) + ")");
    if (!(K1 > 1 && K1 < M()))
      fail("1 < K1 < N-S (K1=" + std::to_string(K1) + ", N-S=" + std::to_string(M()) + ")");
    if (N1 != 0 && (N1 < 2 || N1 > M()))
      fail("2 <= N1 <= N-S (N1=" + std::to_string(N1) + ", N-S=" + std::to_string(M()) + ")");
    if (A > M()) fail("A <= N-S (A=" + std::to_string(A) + ", N-S=" + std::to_string(M()) + ")");
    if (sigma_p2 < 0 || sigma_a2 < 0 || (sigma_q2 && *sigma_q2 < 0)) fail("variances >= 0");
    if (p_loc && (*p_loc < 0 || *p_loc > 1)) fail("p_loc in [0,1]");
    if (m < 1 || n < 1) fail("m, n >= 1");
    if (trials < 1) fail("trials >= 1");
    if (!(data_low < data_high)) fail("data_low < data_high");
    if (!(adversary_fraction > 0 && adversary_fraction <= 1)) fail("adversary_fraction in (0,1]");
    if (noise_floor && *noise_floor < 0) fail("noise_floor >= 0");
  }

  /// Set one field from its textual key/value form.
  void set(std::string_view key_in, std::string_view value_in) {
    const std::string key(key_in);
    const std::string value(value_in);
    auto as_size = [&]() -> std::size_t {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size() || v < 0) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected non-negative integer, got '" +
                                    value + "'");
      }
    };
    auto as_real = [&]() -> double {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + value + "'");
      }
    };
    if (key == "N") N = as_size();
    else if (key == "K") K = as_size();
    else if (key == "S") S = as_size();
    else if (key == "A") A = as_size();
    else if (key == "K1") K1 = as_size();
    else if (key == "N1") N1 = as_size();
    else if (key == "sigma_p2") sigma_p2 = as_real();
    else if (key == "sigma_a2") sigma_a2 = as_real();
    else if (key == "sigma_q2") sigma_q2 = as_real();
    else if (key == "function" || key == "f") f = TargetFunction::parse(value);
    else if (key == "m") m = as_size();
    else if (key == "n") n = as_size();
    else if (key == "seed") seed = as_size();
    else if (key == "trials") trials = as_size();
    else if (key == "p_loc") p_loc = as_real();
    else if (key == "data_low") data_low = as_real();
    else if (key == "data_high") data_high = as_real();
    else if (key == "adversary_fraction") adversary_fraction = as_real();
    else if (key == "noise_floor") noise_floor = as_real();
    else if (key == "deadline_ms") deadline_ms = as_size();
    else if (key == "selection") selection = parse_selection(value);
    else if (key == "decoder") decoder = parse_decoder(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }

  /// `key = value` lines; blank lines and '#' comments are ignored.
  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read config file '" + path + "'");
    return parse(in);
  }
};

}  // namespace sbacc
