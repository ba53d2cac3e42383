#include "ramstore/wire.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <filesystem>

namespace ramstore::wire {

namespace {

constexpr std::uint32_t kMaxHeaderBytes = 16u << 20;
constexpr std::uint64_t kMaxPayloadBytes = 1ull << 31;

struct PeerClosed {};

void send_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw PeerClosed{};
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns false on EOF before any byte was read.
bool recv_all(int fd, void* data, std::size_t n, bool eof_ok) {
  auto* p = static_cast<char*>(data);
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw PeerClosed{};
    }
    if (r == 0) {
      if (got == 0 && eof_ok) return false;
      throw PeerClosed{};
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

sockaddr_un make_address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) {
    throw Error(Errc::InvalidArgument, "socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

void set_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

}  // namespace

FileDescriptor& FileDescriptor::operator=(FileDescriptor&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.release();
  }
  return *this;
}

FileDescriptor::~FileDescriptor() {
  if (fd_ >= 0) ::close(fd_);
}

void write_message(int fd, const Message& message) {
  const std::string header = message.header.dump();
  std::array<unsigned char, 4> hlen{};
  const auto h = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) hlen[i] = static_cast<unsigned char>(h >> (24 - 8 * i));
  std::array<unsigned char, 8> plen{};
  const auto p = static_cast<std::uint64_t>(message.payload.size());
  for (int i = 0; i < 8; ++i) plen[i] = static_cast<unsigned char>(p >> (56 - 8 * i));
  try {
    send_all(fd, hlen.data(), hlen.size());
    send_all(fd, header.data(), header.size());
    send_all(fd, plen.data(), plen.size());
    if (!message.payload.empty()) send_all(fd, message.payload.data(), message.payload.size());
  } catch (const PeerClosed&) {
    throw Error(Errc::Protocol, "connection closed while sending");
  }
}

std::optional<Message> read_message(int fd) {
  try {
    std::array<unsigned char, 4> hlen{};
    if (!recv_all(fd, hlen.data(), hlen.size(), true)) return std::nullopt;
    std::uint32_t h = 0;
    for (unsigned char c : hlen) h = (h << 8) | c;
    if (h > kMaxHeaderBytes) throw Error(Errc::Protocol, "oversized header");
    std::string header(h, '\0');
    recv_all(fd, header.data(), header.size(), false);
    std::array<unsigned char, 8> plen{};
    recv_all(fd, plen.data(), plen.size(), false);
    std::uint64_t p = 0;
    for (unsigned char c : plen) p = (p << 8) | c;
    if (p > kMaxPayloadBytes) throw Error(Errc::Protocol, "oversized payload");
    Message message;
    message.header = nlohmann::json::parse(header, nullptr, false);
    if (!message.header.is_object()) throw Error(Errc::Protocol, "header is not a JSON object");
    message.payload.resize(static_cast<std::size_t>(p));
    if (p > 0) recv_all(fd, message.payload.data(), message.payload.size(), false);
    return message;
  } catch (const PeerClosed&) {
    throw Error(Errc::Protocol, "connection closed while receiving");
  }
}

std::optional<FileDescriptor> try_connect(const std::string& path) {
  const sockaddr_un addr = make_address(path);
  FileDescriptor fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw Error(Errc::Internal, std::string("socket: ") + std::strerror(errno));
  while (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno == EINTR) continue;
    return std::nullopt;
  }
  return fd;
}

bool is_listening(const std::string& path) { return try_connect(path).has_value(); }

Message call(const std::string& path, const Message& request, Errc unavailable,
             std::chrono::milliseconds timeout) {
  auto fd = try_connect(path);
  if (!fd) throw Error(unavailable, "nothing listening at " + path);
  set_timeout(fd->get(), timeout);
  Message body = request;
  body.header["v"] = kWireVersion;
  try {
    write_message(fd->get(), body);
    auto response = read_message(fd->get());
    if (!response) throw Error(unavailable, "peer at " + path + " closed the connection");
    return std::move(*response);
  } catch (const Error& e) {
    if (e.code() == Errc::Protocol) throw Error(unavailable, e.what());
    throw;
  }
}

Message expect_ok(Message response) {
  const auto& h = response.header;
  if (h.value("ok", false)) return response;
  throw Error(errc_from_name(h.value("error", std::string("Internal"))),
              h.value("message", std::string()));
}

Message ok_response() {
  Message m;
  m.header["v"] = kWireVersion;
  m.header["ok"] = true;
  return m;
}

Message error_response(Errc code, const std::string& message) {
  Message m;
  m.header["v"] = kWireVersion;
  m.header["ok"] = false;
  m.header["error"] = std::string(errc_name(code));
  m.header["message"] = message;
  return m;
}

Server::Server(std::string path, Handler handler)
    : path_(std::move(path)), handler_(std::move(handler)) {
  const sockaddr_un addr = make_address(path_);
  if (std::filesystem::exists(path_)) {
    if (is_listening(path_)) throw Error(Errc::AddressInUse, path_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  listener_ = FileDescriptor(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!listener_) throw Error(Errc::Internal, std::string("socket: ") + std::strerror(errno));
  if (::bind(listener_.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    if (err == EADDRINUSE) throw Error(Errc::AddressInUse, path_);
    throw Error(Errc::Internal, "bind " + path_ + ": " + std::strerror(err));
  }
  if (::listen(listener_.get(), 128) != 0) {
    throw Error(Errc::Internal, std::string("listen: ") + std::strerror(errno));
  }
}

Server::~Server() { stop(); }

void Server::start() {
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) {
    if (acceptor_.joinable()) acceptor_.join();
    return;
  }
  if (listener_) ::shutdown(listener_.get(), SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    // Read side only: a response already being produced still goes out.
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RD);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
  listener_ = FileDescriptor();
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void Server::reap_finished() {
  std::vector<std::thread> done;
  {
    std::lock_guard lock(mu_);
    for (auto id : finished_) {
      auto it = std::find_if(workers_.begin(), workers_.end(),
                             [id](const std::thread& t) { return t.get_id() == id; });
      if (it != workers_.end()) {
        done.push_back(std::move(*it));
        workers_.erase(it);
      }
    }
    finished_.clear();
  }
  for (auto& t : done) t.join();
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    reap_finished();
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    open_fds_.insert(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Server::serve_connection(int fd) {
  for (;;) {
    std::optional<Message> request;
    try {
      request = read_message(fd);
    } catch (const std::exception&) {
      break;
    }
    if (!request) break;
    Message response;
    try {
      if (request->header.value("v", 0) != kWireVersion) {
        throw Error(Errc::Protocol, "unsupported wire version");
      }
      response = handler_(*request);
    } catch (const Error& e) {
      response = error_response(e.code(), e.what());
    } catch (const std::exception& e) {
      response = error_response(Errc::Internal, e.what());
    }
    try {
      write_message(fd, response);
    } catch (const std::exception&) {
      break;
    }
  }
  std::lock_guard lock(mu_);
  open_fds_.erase(fd);
  ::close(fd);
  finished_.push_back(std::this_thread::get_id());
}

}  // namespace ramstore::wire
