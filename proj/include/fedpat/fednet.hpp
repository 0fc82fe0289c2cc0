#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "fedpat/fedmsg.hpp"

namespace fedpat {

// Frame transport over a connected TCP socket.
class TcpTransport final : public FrameTransport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpTransport() override { close(); }
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send(const Message& m) override {
    const std::string frame = encode_frame(m);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent,
                               MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("send failed: ") +
                            std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  Message recv() override {
    return decode_frame([this](char* dst, std::size_t len) {
      std::size_t got = 0;
      while (got < len) {
        const ssize_t n = ::recv(fd_, dst + got, len - got, 0);
        if (n < 0) {
          if (errno == EINTR) continue;
          throw ProtocolError(std::string("recv failed: ") +
                              std::strerror(errno));
        }
        if (n == 0) {
          if (got == 0) return false;
          throw ProtocolError("connection closed mid-frame");
        }
        got += static_cast<std::size_t>(n);
      }
      return true;
    });
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

// Listening endpoint; bind to port 0 to get an ephemeral port (see port()).
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port, const std::string& host = "0.0.0.0") {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
      throw ProtocolError(std::string("socket failed: ") +
                          std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw InputError("listener: bad IPv4 bind address: " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::listen(fd_, 64) < 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw ProtocolError("bind/listen failed: " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }

  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  std::unique_ptr<FrameTransport> accept_one() {
    for (;;) {
      const int fd = ::accept(fd_, nullptr, nullptr);
      if (fd >= 0) return std::make_unique<TcpTransport>(fd);
      if (errno != EINTR) {
        throw ProtocolError(std::string("accept failed: ") +
                            std::strerror(errno));
      }
    }
  }

  std::vector<std::unique_ptr<FrameTransport>> accept_many(std::size_t n) {
    std::vector<std::unique_ptr<FrameTransport>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(accept_one());
    return out;
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Connects to host:port, retrying briefly so clients may start before the
// server finishes binding.
inline std::unique_ptr<FrameTransport> tcp_connect(
    const std::string& host, std::uint16_t port,
    std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* results = nullptr;
  const std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &results) != 0 ||
      !results) {
    throw InputError("cannot resolve host: " + host);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string last_error = "unknown";
  for (;;) {
    for (addrinfo* ai = results; ai; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        ::freeaddrinfo(results);
        return std::make_unique<TcpTransport>(fd);
      }
      last_error = std::strerror(errno);
      ::close(fd);
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  ::freeaddrinfo(results);
  throw ProtocolError("connect to " + host + ":" + port_str +
                      " failed: " + last_error);
}

}  // namespace fedpat
