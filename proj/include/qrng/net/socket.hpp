#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qrng/net/framing.hpp"

namespace qrng::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port".
  static Endpoint parse(std::string_view text);
  std::string to_string() const;
};

/// Owning TCP socket. Failures throw ErrorCode::transport, expired
/// timeouts ErrorCode::timeout.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect(const Endpoint& ep, double timeout_s);

  void set_timeout(double seconds);
  void send_all(std::span<const std::uint8_t> bytes);
  /// False on clean EOF before the first byte.
  bool recv_exact(std::span<std::uint8_t> out);
  void shutdown() noexcept;
  /// Half-closes, then discards unread input for up to `linger_s` so the
  /// peer sees our last bytes instead of a reset. The fd stays open.
  void finish(double linger_s) noexcept;
  void close() noexcept;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `poll_ms`; returns an invalid socket on timeout.
  Socket accept(int poll_ms);
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

enum class Direction { sent, received };
using FrameTap = std::function<void(Direction, std::span<const std::uint8_t>)>;

/// Frame-level view of a socket.
class FrameChannel {
 public:
  explicit FrameChannel(Socket socket, std::size_t max_payload = kDefaultMaxPayload, FrameTap tap = {})
      : socket_(std::move(socket)), max_payload_(max_payload), tap_(std::move(tap)) {}

  void send(const Frame& frame);
  /// nullopt on clean EOF at a frame boundary.
  std::optional<Frame> receive();

  Socket& socket() noexcept { return socket_; }

 private:
  Socket socket_;
  std::size_t max_payload_;
  FrameTap tap_;
};

}  // namespace qrng::net
