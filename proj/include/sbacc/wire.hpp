#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace sbacc {

enum class MessageKind : std::uint32_t { Hello = 1, Share = 2, Result = 3, Shutdown = 4 };

inline std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::Hello: return "Hello";
    case MessageKind::Share: return "Share";
    case MessageKind::Result: return "Result";
    case MessageKind::Shutdown: return "Shutdown";
  }
  return "kind " + std::to_string(static_cast<std::uint32_t>(k));
}

/// Frame layout (all little-endian):
///   u32 length | u32 kind | u32 worker_index | u32 rows | u32 cols | rows*cols f64
/// `length` counts everything after itself. Matrix payloads are row-major.
struct WireMessage {
  MessageKind kind = MessageKind::Hello;
  std::uint32_t worker_index = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> payload;

  static WireMessage with_matrix(MessageKind kind, std::uint32_t index, const Matrix& m) {
    WireMessage w{kind, index, static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()), {}};
    w.payload.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.payload.push_back(m(r, c));
    return w;
  }

  Matrix matrix() const {
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = payload[k++];
    return m;
  }

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

inline constexpr std::size_t kHeaderBytes = 16;
/// Refuse frames above this size instead of allocating for a hostile prefix.
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 28;

namespace wire {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

inline double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace wire

/// Checks kind and size consistency; throws io_error describing the fault.
inline void validate_message(const WireMessage& m) {
  const auto k = static_cast<std::uint32_t>(m.kind);
  if (k < 1 || k > 4) throw io_error("wire: unknown message kind " + std::to_string(k));
  const std::uint64_t count = static_cast<std::uint64_t>(m.rows) * m.cols;
  if (m.kind == MessageKind::Hello || m.kind == MessageKind::Shutdown) {
    if (count != 0 || !m.payload.empty())
      throw io_error("wire: " + to_string(m.kind) + " must carry no payload");
  } else if (count != m.payload.size()) {
    throw io_error("wire: payload holds " + std::to_string(m.payload.size()) + " values, header says " +
                   std::to_string(count));
  }
  if (kHeaderBytes + 8 * count > kMaxFrameBytes) throw io_error("wire: frame too large");
}

/// Full frame including the length prefix.
inline std::vector<std::uint8_t> encode_frame(const WireMessage& m) {
  validate_message(m);
  std::vector<std::uint8_t> out;
  out.reserve(4 + kHeaderBytes + 8 * m.payload.size());
  wire::put_u32(out, static_cast<std::uint32_t>(kHeaderBytes + 8 * m.payload.size()));
  wire::put_u32(out, static_cast<std::uint32_t>(m.kind));
  wire::put_u32(out, m.worker_index);
  wire::put_u32(out, m.rows);
  wire::put_u32(out, m.cols);
  for (const double v : m.payload) wire::put_f64(out, v);
  return out;
}

/// Parses the bytes that follow the length prefix.
inline WireMessage decode_body(std::span<const std::uint8_t> body) {
  if (body.size() < kHeaderBytes)
    throw io_error("wire: frame of " + std::to_string(body.size()) + " bytes is shorter than the header");
  WireMessage m;
  const std::uint32_t kind = wire::get_u32(body.data());
  if (kind < 1 || kind > 4) throw io_error("wire: unknown message kind " + std::to_string(kind));
  m.kind = static_cast<MessageKind>(kind);
  m.worker_index = wire::get_u32(body.data() + 4);
  m.rows = wire::get_u32(body.data() + 8);
  m.cols = wire::get_u32(body.data() + 12);
  const std::uint64_t count = static_cast<std::uint64_t>(m.rows) * m.cols;
  if (body.size() != kHeaderBytes + 8 * count)
    throw io_error("wire: frame length " + std::to_string(body.size()) + " does not match " +
                   std::to_string(m.rows) + "x" + std::to_string(m.cols) + " payload");
  m.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) m.payload[i] = wire::get_f64(body.data() + kHeaderBytes + 8 * i);
  validate_message(m);
  return m;
}

/// Parses one complete frame (length prefix included).
inline WireMessage decode_frame(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4) throw io_error("wire: truncated length prefix");
  const std::uint32_t len = wire::get_u32(frame.data());
  if (frame.size() - 4 != len)
    throw io_error("wire: length prefix " + std::to_string(len) + " but " +
                   std::to_string(frame.size() - 4) + " bytes follow");
  return decode_body(frame.subspan(4));
}

}  // namespace sbacc
