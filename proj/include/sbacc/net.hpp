#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "protocol.hpp"
#include "random.hpp"
#include "wire.hpp"

namespace sbacc {

using Clock = std::chrono::steady_clock;

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port"; an IPv6 host may be bracketed ("[::1]:7070").
inline Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw std::invalid_argument("endpoint '" + text + "': expected host:port");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.size() >= 2 && ep.host.front() == '[' && ep.host.back() == ']')
    ep.host = ep.host.substr(1, ep.host.size() - 2);
  const std::string port = text.substr(colon + 1);
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || v > 65535)
    throw std::invalid_argument("endpoint '" + text + "': bad port '" + port + "'");
  ep.port = static_cast<std::uint16_t>(v);
  return ep;
}

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

namespace net_detail {

/// poll() timeout for a deadline; -1 (forever) without one.
inline int timeout_ms(const std::optional<Clock::time_point>& deadline) {
  if (!deadline) return -1;
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now()).count();
  return static_cast<int>(std::clamp<long long>(left, 0, 1 << 30));
}

/// Waits for `events` on fd; false on timeout.
inline bool wait_for(int fd, short events, const std::optional<Clock::time_point>& deadline) {
  for (;;) {
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, timeout_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw io_error(std::string("poll: ") + std::strerror(errno));
  }
}

/// Reads exactly n bytes. False on timeout; io_error on EOF or socket error.
inline bool recv_exact(int fd, std::uint8_t* buf, std::size_t n,
                       const std::optional<Clock::time_point>& deadline) {
  std::size_t got = 0;
  while (got < n) {
    if (!wait_for(fd, POLLIN, deadline)) return false;
    const ssize_t rc = ::recv(fd, buf + got, n - got, 0);
    if (rc == 0) throw io_error("connection closed by peer");
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw io_error(std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(rc);
  }
  return true;
}

inline addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw io_error("resolve " + ep.host + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace net_detail

inline void send_all(int fd, const std::uint8_t* data, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t rc = ::send(fd, data + sent, n - sent, MSG_NOSIGNAL);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw io_error(std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(rc);
  }
}

inline void send_frame(int fd, const WireMessage& m) {
  const auto bytes = encode_frame(m);
  send_all(fd, bytes.data(), bytes.size());
}

/// Next frame from fd, or nullopt if the deadline passes first. Throws
/// io_error on disconnect or a malformed frame.
inline std::optional<WireMessage> recv_frame(int fd, std::optional<Clock::time_point> deadline = {}) {
  std::uint8_t prefix[4];
  if (!net_detail::recv_exact(fd, prefix, 4, deadline)) return std::nullopt;
  const std::uint32_t len = wire::get_u32(prefix);
  if (len < kHeaderBytes || len > kMaxFrameBytes)
    throw io_error("wire: bad frame length " + std::to_string(len));
  std::vector<std::uint8_t> body(len);
  if (!net_detail::recv_exact(fd, body.data(), len, deadline)) return std::nullopt;
  return decode_body(body);
}

class Listener {
 public:
  explicit Listener(const Endpoint& ep) {
    addrinfo* res = net_detail::resolve(ep, true);
    std::string last = "no address";
    for (addrinfo* a = res; a; a = a->ai_next) {
      Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
      if (!s.valid()) continue;
      const int one = 1;
      ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) == 0 && ::listen(s.fd(), 128) == 0) {
        sock_ = std::move(s);
        break;
      }
      last = std::strerror(errno);
    }
    ::freeaddrinfo(res);
    if (!sock_.valid())
      throw io_error("cannot listen on " + ep.host + ":" + std::to_string(ep.port) + ": " + last);
  }

  /// Bound port; useful after listening on port 0.
  std::uint16_t port() const {
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
      throw io_error(std::string("getsockname: ") + std::strerror(errno));
    if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
    return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  }

  std::optional<Socket> accept(Clock::time_point deadline) {
    if (!net_detail::wait_for(sock_.fd(), POLLIN, deadline)) return std::nullopt;
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd < 0) return std::nullopt;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
  }

 private:
  Socket sock_;
};

/// Connects to ep, retrying until the deadline (the master may start later).
inline Socket connect_to(const Endpoint& ep, Clock::time_point deadline) {
  std::string last = "timed out";
  do {
    addrinfo* res = net_detail::resolve(ep, false);
    for (addrinfo* a = res; a; a = a->ai_next) {
      Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
      if (!s.valid()) continue;
      if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) == 0) {
        ::freeaddrinfo(res);
        const int one = 1;
        ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return s;
      }
      last = std::strerror(errno);
    }
    ::freeaddrinfo(res);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  } while (Clock::now() < deadline);
  throw io_error("cannot connect to " + ep.host + ":" + std::to_string(ep.port) + ": " + last);
}

/// Sent in Hello when the worker has no preferred index.
inline constexpr std::uint32_t kAnyIndex = 0xffffffffu;

struct MasterReport {
  RunResult result;
  std::vector<WorkerReturn> returns;     ///< one per index; stragglers without payload
  std::vector<std::size_t> stragglers;  ///< never connected, timed out, or sent a bad frame
};

/// One SBACC round over TCP.
///
/// Workers are accepted until all N are connected or cfg.deadline_ms
/// passes; a Hello naming a free index in [0, N) gets that index, others get
/// the lowest free one. Each connected worker receives its share, and the
/// results arriving within a second cfg.deadline_ms window are decoded and
/// reconstructed exactly as the simulator does. The dataset is
/// sample_dataset(cfg, 0).
inline MasterReport master_serve(const ExperimentConfig& cfg, Listener& listener) {
  cfg.validate();
  const Dataset ds = sample_dataset(cfg, 0);
  const auto shares = encode_shares(ds, cfg.N, Scheme::SBACC);
  const auto window = std::chrono::milliseconds(cfg.deadline_ms);

  std::vector<Socket> conn(cfg.N);
  std::size_t connected = 0;
  const auto join_deadline = Clock::now() + window;
  while (connected < cfg.N) {
    auto s = listener.accept(join_deadline);
    if (!s) {
      if (Clock::now() >= join_deadline) break;
      continue;
    }
    std::optional<WireMessage> hello;
    try {
      hello = recv_frame(s->fd(), join_deadline);
    } catch (const io_error&) {
      continue;
    }
    if (!hello || hello->kind != MessageKind::Hello) continue;
    std::size_t idx = hello->worker_index;
    if (idx >= cfg.N || conn[idx].valid()) {
      idx = 0;
      while (conn[idx].valid()) ++idx;
    }
    conn[idx] = std::move(*s);
    ++connected;
  }

  std::vector<char> ok(cfg.N, 0);
  for (std::size_t i = 0; i < cfg.N; ++i) {
    if (!conn[i].valid()) continue;
    try {
      send_frame(conn[i].fd(), WireMessage::with_matrix(MessageKind::Share, static_cast<std::uint32_t>(i), shares[i]));
      ok[i] = 1;
    } catch (const io_error&) {
      conn[i].close();
    }
  }

  std::vector<std::optional<Matrix>> payload(cfg.N);
  const auto result_deadline = Clock::now() + window;
  {
    std::vector<std::jthread> readers;
    for (std::size_t i = 0; i < cfg.N; ++i) {
      if (!ok[i]) continue;
      readers.emplace_back([&, i] {
        try {
          const auto msg = recv_frame(conn[i].fd(), result_deadline);
          if (msg && msg->kind == MessageKind::Result && msg->worker_index == i &&
              msg->rows == static_cast<std::uint32_t>(shares[i].rows()) &&
              msg->cols == static_cast<std::uint32_t>(shares[i].cols()))
            payload[i] = msg->matrix();
        } catch (const io_error&) {
        }
      });
    }
  }

  for (std::size_t i = 0; i < cfg.N; ++i) {
    if (!conn[i].valid()) continue;
    try {
      send_frame(conn[i].fd(), WireMessage{MessageKind::Shutdown, static_cast<std::uint32_t>(i), 0, 0, {}});
    } catch (const io_error&) {
    }
    conn[i].close();
  }

  MasterReport rep;
  rep.returns.resize(cfg.N);
  for (std::size_t i = 0; i < cfg.N; ++i) {
    rep.returns[i].worker_index = i;
    rep.returns[i].payload = std::move(payload[i]);
    rep.returns[i].is_straggler = !rep.returns[i].payload;
    if (rep.returns[i].is_straggler) rep.stragglers.push_back(i);
  }
  rep.result = reconstruct(Scheme::SBACC, ds, cfg.f, cfg, rep.returns);
  return rep;
}

inline MasterReport master_serve(const ExperimentConfig& cfg, const Endpoint& listen_at) {
  Listener listener(listen_at);
  return master_serve(cfg, listener);
}

struct Fault {
  enum class Mode { Honest, Straggler, Adversary };
  Mode mode = Mode::Honest;
  double sigma_a2 = 0.0;
};

/// honest | straggler | adversary:<variance>
inline Fault parse_fault(const std::string& text) {
  if (text == "honest") return {};
  if (text == "straggler") return {Fault::Mode::Straggler, 0.0};
  if (text.rfind("adversary:", 0) == 0) {
    const std::string v = text.substr(10);
    std::size_t used = 0;
    double s = -1.0;
    try {
      s = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || !(s >= 0))
      throw std::invalid_argument("fault '" + text + "': adversary variance must be a number >= 0");
    return {Fault::Mode::Adversary, s};
  }
  throw std::invalid_argument("unknown fault '" + text + "' (expected honest|straggler|adversary:<var>)");
}

struct WorkerOptions {
  TargetFunction f = TargetFunction::parse("exp");
  Fault fault;
  std::uint64_t seed = 7;  ///< must match the master's seed for reproducible noise
  double sigma_p2 = 0.0;
  double adversary_fraction = 1.0;
  std::uint32_t requested_index = kAnyIndex;
  std::size_t connect_timeout_ms = 10000;
};

/// Worker request loop. Returns 0 after Shutdown, 1 if the connection is lost
/// or a frame is malformed.
///
/// Noise for worker i comes from make_stream(seed, 0, Stream::Worker, i), the
/// same stream the simulator uses for trial 0.
inline int worker_serve(const Endpoint& master, const WorkerOptions& opt) {
  Socket s;
  try {
    s = connect_to(master, Clock::now() + std::chrono::milliseconds(opt.connect_timeout_ms));
    send_frame(s.fd(), WireMessage{MessageKind::Hello, opt.requested_index, 0, 0, {}});
    for (;;) {
      const auto msg = recv_frame(s.fd());
      if (!msg) return 1;
      if (msg->kind == MessageKind::Shutdown) return 0;
      if (msg->kind != MessageKind::Share) continue;
      if (opt.fault.mode == Fault::Mode::Straggler) continue;
      const bool adversary = opt.fault.mode == Fault::Mode::Adversary;
      Rng rng = make_stream(opt.seed, 0, Stream::Worker, msg->worker_index);
      const Matrix out = worker_payload(msg->matrix(), opt.f, adversary, opt.sigma_p2,
                                        adversary ? opt.fault.sigma_a2 : 0.0, opt.adversary_fraction, rng);
      send_frame(s.fd(), WireMessage::with_matrix(MessageKind::Result, msg->worker_index, out));
    }
  } catch (const io_error&) {
    return 1;
  }
}

}  // namespace sbacc
