#include "crowdnav/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "crowdnav/error.hpp"

namespace crowdnav {

namespace {

std::string errno_text(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

std::uint16_t parse_port(const std::string& text) {
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || value > 65535) {
    throw InvalidArgument("invalid port '" + text + "'");
  }
  return static_cast<std::uint16_t>(value);
}

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool is_socket)
    : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {
  ignore_sigpipe();
}

FdChannel::~FdChannel() { close_fds(); }

void FdChannel::close_fds() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdChannel::write_line(std::string_view line) {
  if (write_fd_ < 0) throw TransportError("channel is closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = is_socket_
                          ? ::send(write_fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL)
                          : ::write(write_fd_, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("write failed"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::read_line(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (read_fd_ < 0) return std::nullopt;

    int wait_ms = -1;
    if (timeout.count() >= 0) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) throw TransportError("timed out waiting for a reply");
      wait_ms = static_cast<int>(left);
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("poll failed"));
    }
    if (ready == 0) throw TransportError("timed out waiting for a reply");

    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) return std::nullopt;
      throw TransportError(errno_text("read failed"));
    }
    if (n == 0) {
      // EOF; an unterminated trailing line still counts.
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

// Child process talking over a pair of pipes.
class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd, false), pid_(pid) {}
  ~ProcessChannel() override {
    close_fds();
    int status = 0;
    // Give the child a moment to exit on EOF before killing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

std::unique_ptr<LineChannel> spawn(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError(errno_text("pipe failed"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError(errno_text("pipe failed"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw TransportError(errno_text("fork failed"));
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::signal(SIGPIPE, SIG_DFL);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> tcp_connect(const std::string& host, std::uint16_t port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<FdChannel>(fd, fd, true);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to " + host + ":" + service + ": " + last_error);
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) return {"127.0.0.1", parse_port(bind)};
  std::string host = bind.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  return {host, parse_port(bind.substr(colon + 1))};
}

std::unique_ptr<LineChannel> connect_endpoint(const std::string& endpoint) {
  if (endpoint.rfind("cmd:", 0) == 0) {
    if (endpoint.size() == 4) throw InvalidArgument("empty command endpoint");
    return spawn(endpoint.substr(4));
  }
  std::string rest = endpoint.rfind("tcp:", 0) == 0 ? endpoint.substr(4) : endpoint;
  if (rest.find(':') == std::string::npos) {
    throw InvalidArgument("endpoint '" + endpoint + "' must be tcp:host:port, host:port or cmd:<command>");
  }
  const auto [host, port] = parse_bind(rest);
  return tcp_connect(host, port);
}

std::unique_ptr<LineChannel> stdio_channel() {
  return std::make_unique<FdChannel>(::dup(STDIN_FILENO), ::dup(STDOUT_FILENO), false);
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) : fd_(-1), port_(0) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      fd_ = fd;
    } else {
      last_error = std::strerror(errno);
      ::close(fd);
    }
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw TransportError("cannot listen on " + host + ":" + service + ": " + last_error);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  }
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<LineChannel> TcpListener::accept() {
  while (fd_ >= 0) {
    const int client = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (client >= 0) {
      int one = 1;
      ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<FdChannel>(client, client, true);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return nullptr;
  }
  return nullptr;
}

void TcpListener::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

}  // namespace crowdnav
