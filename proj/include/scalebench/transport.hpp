#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>

namespace scalebench {

/// Newline-delimited text over a pair of POSIX file descriptors (a socket,
/// a pipe pair, or stdin/stdout). Move-only; closes owned descriptors.
class LineChannel {
 public:
  enum class ReadStatus { Line, Timeout, Closed };

  LineChannel() = default;
  LineChannel(int read_fd, int write_fd, bool owns_fds);
  ~LineChannel();

  LineChannel(LineChannel&& other) noexcept;
  LineChannel& operator=(LineChannel&& other) noexcept;
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  bool valid() const { return read_fd_ >= 0; }

  /// Reads one line without its terminator. No timeout blocks indefinitely.
  ReadStatus read_line(std::string& line, std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  /// Appends '\n'. Returns false if the peer has gone away.
  bool write_line(std::string_view line);

  /// Stops further writes (half-close for sockets, close for pipes).
  void close_write();

  /// Throws std::runtime_error when the connection cannot be made.
  static LineChannel connect_tcp(const std::string& host, int port);

 private:
  void reset();

  int read_fd_ = -1;
  int write_fd_ = -1;
  bool owns_ = false;
  bool socket_ = false;
  std::string buffer_;
};

/// A child process running `/bin/sh -c command` with its stdin/stdout
/// attached to `channel`. The destructor closes the pipes, then reaps the
/// child (terminating it if it lingers).
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  LineChannel& channel() { return channel_; }
  pid_t pid() const { return pid_; }

 private:
  LineChannel channel_;
  pid_t pid_ = -1;
};

/// Listening TCP socket on 127.0.0.1 or 0.0.0.0. Port 0 picks a free port.
class TcpListener {
 public:
  explicit TcpListener(int port, bool loopback_only = false);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  /// Blocks for the next connection. Throws std::runtime_error on failure.
  LineChannel accept();

 private:
  int fd_ = -1;
  int port_ = 0;
};

/// Ignores SIGPIPE process-wide so broken peers surface as write errors.
void ignore_sigpipe();

}  // namespace scalebench
