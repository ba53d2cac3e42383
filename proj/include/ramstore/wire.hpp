#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramstore/error.hpp"

// Length-prefixed request/response messages over local stream sockets.
//
// Frame layout (all integers big-endian):
//   u32 header_length | header (UTF-8 JSON object) | u64 payload_length | payload
//
// Every header carries "v": kWireVersion. Requests name their operation in
// "op" and authenticate with "auth": {"role": ..., "key": ...}. Responses carry
// "ok": true, or "ok": false with "error" (an Errc name) and "message".
namespace ramstore::wire {

inline constexpr int kWireVersion = 1;

struct Message {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::byte> payload;
};

class FileDescriptor {
 public:
  FileDescriptor() = default;
  explicit FileDescriptor(int fd) : fd_(fd) {}
  FileDescriptor(FileDescriptor&& other) noexcept : fd_(other.release()) {}
  FileDescriptor& operator=(FileDescriptor&& other) noexcept;
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  ~FileDescriptor();

  int get() const noexcept { return fd_; }
  int release() noexcept { return std::exchange(fd_, -1); }
  explicit operator bool() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

void write_message(int fd, const Message& message);

/// Returns nullopt on orderly EOF before the first byte of a frame.
std::optional<Message> read_message(int fd);

/// Connects to a listening socket path; nullopt if nothing is listening there.
std::optional<FileDescriptor> try_connect(const std::string& path);

/// True when a server currently accepts connections on `path`.
bool is_listening(const std::string& path);

/// One request/response exchange on a fresh connection. Throws Error(unavailable)
/// if nothing listens at `path` or the peer drops the connection.
Message call(const std::string& path, const Message& request, Errc unavailable,
             std::chrono::milliseconds timeout = std::chrono::seconds(60));

/// Rethrows an error response as ramstore::Error; returns the message otherwise.
Message expect_ok(Message response);

Message ok_response();
Message error_response(Errc code, const std::string& message);

class Server {
 public:
  using Handler = std::function<Message(const Message&)>;

  /// Binds immediately. Throws AddressInUse when another server owns `path`;
  /// a stale socket file is replaced.
  Server(std::string path, Handler handler);
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server();

  void start();
  /// Closes the listener and all open connections, then joins worker threads.
  void stop();

  const std::string& path() const noexcept { return path_; }

 private:
  void accept_loop();
  void serve_connection(int fd);

  std::string path_;
  Handler handler_;
  FileDescriptor listener_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::unordered_set<int> open_fds_;
  std::vector<std::thread> workers_;
  std::vector<std::thread::id> finished_;
  void reap_finished();
};

}  // namespace ramstore::wire
