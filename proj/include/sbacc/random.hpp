#pragma once

#include <cstdint>
#include <random>

namespace sbacc {

using Rng = std::mt19937_64;

/// Named sub-streams of one trial. Every random quantity of a run is drawn
/// from its own stream so schemes compared on the same trial see identical
/// datasets, straggler sets and adversary sets.
enum class Stream : std::uint64_t {
  Dataset = 1,
  Stragglers = 2,
  Adversaries = 3,
  Worker = 4,
  Calibration = 5,
};

/// Independent generator for (seed, trial, stream, index). Serial and
/// parallel execution of trials draw identical values.
inline Rng make_stream(std::uint64_t seed, std::uint64_t trial, Stream stream,
                       std::uint64_t index = 0) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto s = static_cast<std::uint64_t>(stream);
  std::seed_seq seq{lo(seed), hi(seed), lo(trial), hi(trial), lo(s), hi(s), lo(index), hi(index)};
  return Rng(seq);
}

}  // namespace sbacc
