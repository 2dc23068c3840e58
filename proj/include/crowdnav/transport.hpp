#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace crowdnav {

// Newline-delimited text channel used by both wire protocols.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(std::string_view line) = 0;
  /// Next line without its terminator; empty optional on EOF. Throws
  /// TransportError on timeout or I/O failure.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  std::optional<std::string> read_line() { return read_line(std::chrono::milliseconds(-1)); }
};

// Owns a pair of file descriptors (identical for sockets).
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool is_socket);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  using LineChannel::read_line;

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  bool is_socket_;
  std::string buffer_;
};

/// "tcp:host:port" (or "host:port") opens a TCP connection; "cmd:<command>"
/// spawns `/bin/sh -c command` and talks over its stdin/stdout.
std::unique_ptr<LineChannel> connect_endpoint(const std::string& endpoint);

std::unique_ptr<LineChannel> stdio_channel();

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks for the next client; empty after shutdown().
  std::unique_ptr<LineChannel> accept();
  void shutdown();

 private:
  int fd_;
  std::uint16_t port_;
};

/// Splits "host:port"; a bare port binds 127.0.0.1.
std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind);

}  // namespace crowdnav
