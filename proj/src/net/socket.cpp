#include "qrng/net/socket.hpp"

#include <array>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "qrng/error.hpp"

namespace qrng::net {
namespace {

[[noreturn]] void io_failure(const std::string& what) {
  const int err = errno;
  if (err == EAGAIN || err == EWOULDBLOCK || err == ETIMEDOUT) fail(ErrorCode::timeout, what + ": timed out");
  fail(ErrorCode::transport, what + ": " + std::strerror(err));
}

timeval to_timeval(double seconds) {
  timeval tv{};
  if (seconds > 0.0) {
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
  }
  return tv;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) fail(ErrorCode::config, "endpoint must be host:port");
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
    fail(ErrorCode::config, "invalid port in endpoint '" + std::string(text) + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Socket Socket::connect(const Endpoint& ep, double timeout_s) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    fail(ErrorCode::transport, "cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    s.set_timeout(timeout_s);
    if (::connect(s.fd_, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      const int one = 1;
      ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  fail(ErrorCode::transport, "cannot connect to " + ep.to_string() + ": " + last_error);
}

void Socket::set_timeout(double seconds) {
  const timeval tv = to_timeval(seconds);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_failure("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool Socket::recv_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      fail(ErrorCode::transport, "connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      io_failure("recv");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::finish(double linger_s) noexcept {
  if (fd_ < 0) return;
  ::shutdown(fd_, SHUT_WR);
  try {
    set_timeout(linger_s);
  } catch (const Error&) {
  }
  std::array<std::uint8_t, 4096> sink{};
  for (int i = 0; i < 256; ++i) {
    const ssize_t n = ::recv(fd_, sink.data(), sink.size(), 0);
    if (n > 0) continue;
    if (n < 0 && errno == EINTR) continue;
    break;
  }
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::Listener(const Endpoint& ep) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) io_failure("socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    close();
    fail(ErrorCode::config, "listen address must be an IPv4 literal: " + ep.host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    const std::string msg = std::strerror(errno);
    close();
    fail(ErrorCode::transport, "cannot listen on " + ep.to_string() + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

Socket Listener::accept(int poll_ms) {
  if (fd_ < 0) return Socket{};
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, poll_ms);
  if (rc <= 0 || !(p.revents & POLLIN)) return Socket{};
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd >= 0) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  return Socket(fd);
}

void Listener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void FrameChannel::send(const Frame& frame) {
  const auto bytes = encode_frame(frame);
  if (tap_) tap_(Direction::sent, bytes);
  socket_.send_all(bytes);
}

std::optional<Frame> FrameChannel::receive() {
  std::array<std::uint8_t, kFrameHeader> header{};
  if (!socket_.recv_exact(header)) return std::nullopt;
  const auto [type, len] = decode_header(std::span<const std::uint8_t, kFrameHeader>(header), max_payload_);
  Frame f{type, std::vector<std::uint8_t>(len)};
  if (len > 0 && !socket_.recv_exact(f.payload)) fail(ErrorCode::transport, "connection closed mid-frame");
  if (tap_) {
    std::vector<std::uint8_t> all(header.begin(), header.end());
    all.insert(all.end(), f.payload.begin(), f.payload.end());
    tap_(Direction::received, all);
  }
  return f;
}

}  // namespace qrng::net
