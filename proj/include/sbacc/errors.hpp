#pragma once

#include <stdexcept>
#include <string>

namespace sbacc {

/// The received word carries no parity (M <= K1) or the restricted parity is
/// rank deficient, so correction cannot proceed.
class not_decodable : public std::runtime_error {
 public:
  explicit not_decodable(const std::string& what) : std::runtime_error(what) {}
};

/// Fewer than two evaluations survived; Berrut reconstruction needs two nodes.
class not_reconstructable : public std::runtime_error {
 public:
  explicit not_reconstructable(const std::string& what) : std::runtime_error(what) {}
};

class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sbacc
